#pragma once

// CSV output with shortest round-trip number formatting, and a strict reader.

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "nvsense/error.hpp"

namespace nvsense::cli {

/// Shortest decimal text that parses back to exactly the same double.
inline std::string format_double(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
}

inline bool parse_double(std::string_view s, double& out) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
    return r.ec == std::errc() && r.ptr == s.data() + s.size();
}

inline std::vector<std::string> split_fields(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

/// Rows are written as soon as they are added; '#' lines carry summaries.
class CsvWriter {
  public:
    explicit CsvWriter(std::ostream& os) : os_(os) {}

    void header(const std::vector<std::string>& cols) { row(cols); }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) os_ << ',';
            os_ << cells[i];
        }
        os_ << '\n';
    }

    void comment(const std::string& text) { os_ << "# " << text << '\n'; }

  private:
    std::ostream& os_;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers; ///< 1-based source line of each row
};

/// Parses comma-separated text with a mandatory header; blank and '#' lines are skipped.
inline CsvTable read_csv(std::istream& is, const std::string& source = "csv") {
    CsvTable t;
    std::string line;
    std::size_t n = 0;
    bool have_header = false;
    while (std::getline(is, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        auto fields = split_fields(line);
        if (!have_header) {
            t.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != t.header.size()) {
            std::ostringstream os;
            os << source << ":" << n << ": expected " << t.header.size() << " fields, found " << fields.size();
            throw InvalidArgument(os.str());
        }
        t.rows.push_back(std::move(fields));
        t.line_numbers.push_back(n);
    }
    if (!have_header) throw InvalidArgument(source + ": missing header row");
    return t;
}

inline CsvTable read_csv_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw InvalidArgument("cannot open " + path);
    return read_csv(f, path);
}

} // namespace nvsense::cli
