#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <sys/wait.h>

#include "nvsense/cli/commands.hpp"

using namespace nvsense;
using namespace nvsense::cli;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

std::filesystem::path temp_dir() {
    auto d = std::filesystem::temp_directory_path() / "nvsense_test_cli";
    std::filesystem::create_directories(d);
    return d;
}

std::string write_temp(const std::string& name, const std::string& text) {
    const auto p = temp_dir() / name;
    std::ofstream(p, std::ios::binary) << text;
    return p.string();
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(NVSENSE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string config(const std::string& name) { return std::string(NVSENSE_CONFIG_DIR) + "/" + name; }

std::string expect_invalid(const std::string& text) {
    try {
        parse_config_string(text);
    } catch (const InvalidArgument& e) {
        return e.what();
    }
    ADD_FAILURE() << "config accepted: " << text;
    return {};
}

CsvTable parse_csv_text(const std::string& text) {
    std::istringstream is(text);
    return read_csv(is);
}

std::vector<double> column(const CsvTable& t, std::size_t c) {
    std::vector<double> v;
    for (const auto& r : t.rows) {
        double d = 0.0;
        EXPECT_TRUE(parse_double(r[c], d)) << r[c];
        v.push_back(d);
    }
    return v;
}

} // namespace

TEST(Config, DefaultsResolve) {
    const auto c = parse_config_string("");
    EXPECT_EQ(c.scheme, Scheme::Bare);
    EXPECT_DOUBLE_EQ(c.drive.omega_MW, c.zfs().D_prime);
    EXPECT_EQ(c.mw_grid().points, 2001u);
    EXPECT_FALSE(c.linewidth_custom);
    EXPECT_NEAR(c.linewidth.minimum_location(c.nv.gamma_e), 33.7e-6, 1e-9);
}

TEST(Config, SymbolicFrequencies) {
    const auto c = parse_config_string("drive.b_rfc_tesla = 101e-6\n"
                                       "drive.omega_rfc_hz = resonant\n"
                                       "drive.omega_rft_hz = low # comment\n");
    EXPECT_DOUBLE_EQ(c.drive.omega_RFc, 8.47e6);
    EXPECT_NEAR(c.drive.omega_RFt, 5.642e6, 1e-3);
    const auto h = parse_config_string("drive.b_rfc_tesla = 101e-6\ndrive.omega_rfc_hz = 8.47e6\ndrive.omega_rft_hz = high\n");
    EXPECT_NEAR(h.drive.omega_RFt, 11.298e6, 1e-3);
}

TEST(Config, CustomLinewidth) {
    const auto c = parse_config_string("linewidth.gamma_residual_hz = 1e5\n"
                                       "linewidth.gamma_electric_hz = 3e5\n"
                                       "linewidth.suppression_scale_tesla = 5e-6\n"
                                       "linewidth.fluctuation_coeff = 1e-3\n");
    EXPECT_TRUE(c.linewidth_custom);
    EXPECT_DOUBLE_EQ(c.linewidth.gamma_residual, 1e5);
    EXPECT_NE(expect_invalid("linewidth.profile = demo\nlinewidth.gamma_residual_hz = 1e5\n").find("demo"),
              std::string::npos);
}

TEST(Config, ErrorsCarryLineAndKey) {
    EXPECT_NE(expect_invalid("\n\nfoo.bar = 1\n").find("config:3: unknown key 'foo.bar'"), std::string::npos);
    EXPECT_NE(expect_invalid("nv.d_hz = 1\nnv.d_hz = 2\n").find("config:2: duplicate key"), std::string::npos);
    EXPECT_NE(expect_invalid("nv.d_hz 2.8e9\n").find("config:1: expected `key = value`"), std::string::npos);
    EXPECT_NE(expect_invalid("nv.d_hz = \n").find("empty value"), std::string::npos);
    EXPECT_NE(expect_invalid("nv.d_hz = 2.8GHz\n").find("key 'nv.d_hz'"), std::string::npos);
    EXPECT_NE(expect_invalid("grid.points = -3\n").find("non-negative integer"), std::string::npos);
    EXPECT_NE(expect_invalid("drive.mw_axis = z\n").find("expected x, y or xy"), std::string::npos);
    EXPECT_NE(expect_invalid("validate.time_domain = yes\n").find("true or false"), std::string::npos);
}

TEST(Config, BlockValidation) {
    EXPECT_NE(expect_invalid("grid.points = 0\n").find("config block grid"), std::string::npos);
    EXPECT_NE(expect_invalid("nv.gamma_b_hz = 0\n").find("config block nv"), std::string::npos);
    EXPECT_NE(expect_invalid("drive.b_rfc_tesla = -1e-6\n").find("config block drive"), std::string::npos);
    expect_invalid("sense.response_points = 2\n");
    expect_invalid("oracle.control_fraction = 1.5\n");
}

TEST(Config, ShippedConfigsParse) {
    for (const auto& e : std::filesystem::directory_iterator(NVSENSE_CONFIG_DIR)) {
        if (e.path().extension() != ".cfg") continue;
        EXPECT_NO_THROW(load_config(e.path().string())) << e.path();
    }
}

TEST(Csv, ShortestFormatRoundTrips) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 20000; ++i) {
        const double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
        double back = 0.0;
        ASSERT_TRUE(parse_double(format_double(v), back));
        EXPECT_EQ(back, v);
    }
    EXPECT_EQ(format_double(2.882e9), "2.882e+09");
    EXPECT_EQ(format_double(2877769235.0), "2877769235");
    EXPECT_EQ(format_double(0.1), "0.1");
}

TEST(Csv, ReaderIsStrict) {
    EXPECT_THROW(parse_csv_text(""), InvalidArgument);
    try {
        parse_csv_text("a,b\n1,2\n\n# note\n3\n");
        FAIL();
    } catch (const InvalidArgument& e) {
        EXPECT_NE(std::string(e.what()).find("csv:5"), std::string::npos);
    }
    const auto t = parse_csv_text("a,b\r\n1,2\r\n");
    ASSERT_EQ(t.rows.size(), 1u);
    EXPECT_EQ(t.rows[0][1], "2");
    double d = 0.0;
    EXPECT_FALSE(parse_double("1.5x", d));
    EXPECT_FALSE(parse_double("", d));
}

TEST(Commands, SpectrumBareArgmins) {
    const auto c = load_config(config("bare.cfg"));
    const auto r = cmd_spectrum(c, {});
    const auto t = parse_csv_text(r.csv);
    ASSERT_EQ(t.header, (std::vector<std::string>{"mw_frequency_hz", "contrast"}));
    const auto w = column(t, 0);
    const auto y = column(t, 1);
    const auto minima = local_minima(y);
    ASSERT_EQ(minima.size(), 2u);
    const double step = c.mw_grid().step();
    EXPECT_LE(std::abs(w[minima[0]] - 2.877765e9), step);
    EXPECT_LE(std::abs(w[minima[1]] - 2.886235e9), step);
}

TEST(Commands, SpectrumDoubleDressedEightMinima) {
    const auto r = cmd_spectrum(load_config(config("double_dressed.cfg")), {});
    EXPECT_EQ(local_minima(column(parse_csv_text(r.csv), 1)).size(), 8u);
}

TEST(Commands, SweepSlopes) {
    auto slope_of = [](const std::string& csv) {
        const auto pos = csv.rfind("# slope_hz_per_t=");
        EXPECT_NE(pos, std::string::npos);
        return std::stod(csv.substr(pos + 17));
    };
    const auto a = cmd_sweep(load_config(config("sweep_control.cfg")), {});
    EXPECT_NEAR(slope_of(a.csv), 28e9, 0.005 * 28e9);
    const auto b = cmd_sweep(load_config(config("sweep_target.cfg")), {});
    EXPECT_NEAR(slope_of(b.csv), 14e9, 0.005 * 14e9);
    const auto t = parse_csv_text(a.csv);
    EXPECT_EQ(t.header.size(), 4u);
    EXPECT_EQ(t.rows.size(), 40u);

    auto c = load_config(config("sweep_control.cfg"));
    c.sweep_points = 1;
    EXPECT_THROW(cmd_sweep(c, {}), DegenerateSweep);
    c.scheme = Scheme::Bare;
    EXPECT_THROW(cmd_sweep(c, {}), InvalidArgument);
}

TEST(Commands, SenseRowsAndFooters) {
    const auto c = load_config(config("sense.cfg"));
    const auto r = cmd_sense(c, {});
    const auto t = parse_csv_text(r.csv);
    ASSERT_EQ(t.rows.size(), 85u);
    for (const auto& row : t.rows) {
        double f = 0.0;
        ASSERT_TRUE(parse_double(row[0], f));
        if (std::abs(f - 8.47e6) < 0.7e6) EXPECT_EQ(row[1], "previous") << f;
    }
    for (const char* k : {"# bandwidth double_dressed", "# bandwidth previous", "# bandwidth hybrid"})
        EXPECT_NE(r.csv.find(k), std::string::npos) << k;
}

TEST(Commands, SenseNoiselessLimit) {
    auto c = load_config(config("sense.cfg"));
    c.delta_S = 0.0;
    const auto run = run_sense(c, {});
    for (const auto& e : run.hybrid)
        if (e.report.valid) EXPECT_EQ(e.report.sensitivity, 0.0);
    const auto b = bandwidth(run.double_dressed);
    double lo = INFINITY;
    double hi = -INFINITY;
    for (const auto& r : run.double_dressed)
        if (r.valid) {
            lo = std::min(lo, r.target_frequency);
            hi = std::max(hi, r.target_frequency);
        }
    EXPECT_EQ(b.band_low, lo);
    EXPECT_EQ(b.band_high, hi);
}

TEST(Commands, ValidateClosedFormOnly) {
    auto c = parse_config_string("validate.random_models = 2000\n");
    const auto r = cmd_validate(c, {});
    EXPECT_EQ(r.exit_code, kExitOk);
    const auto t = parse_csv_text(r.csv);
    ASSERT_EQ(t.rows.size(), 1u);
    EXPECT_EQ(t.rows[0][3], "true");
    std::ostringstream log;
    CommandContext ctx;
    ctx.log = &log;
    c.p0_tolerance = 1e-300;
    EXPECT_EQ(cmd_validate(c, ctx).exit_code, kExitValidation);
    EXPECT_NE(log.str().find("worst oscillator model"), std::string::npos);
}

TEST(Commands, CalibrateRoundTrip) {
    const auto c = load_config(config("calibrate.cfg"));
    CommandContext ctx;
    ctx.seed = 11;
    const auto spec = cmd_spectrum(c, ctx);
    ctx.input_path = write_temp("cal.csv", spec.csv);
    const auto r = cmd_calibrate(c, ctx);
    const auto t = parse_csv_text(r.csv);
    std::map<std::string, double> v;
    for (const auto& row : t.rows) {
        double d = 0.0;
        ASSERT_TRUE(parse_double(row[1], d));
        v[row[0]] = d;
    }
    const double fw = 0.5 * (v["fwhm_low_hz"] + v["fwhm_high_hz"]);
    EXPECT_LT(std::abs(v["d_prime_hz"] - 2.882e9), 0.1 * fw);
    EXPECT_LT(std::abs(v["ex_prime_hz"] - 4.235e6), 0.1 * fw);
}

TEST(Commands, CalibrateInputErrors) {
    RunConfig c = parse_config_string("");
    CommandContext ctx;
    EXPECT_THROW(cmd_calibrate(c, ctx), InvalidArgument);
    std::string few = "mw_frequency_hz,contrast\n";
    for (int i = 0; i < 10; ++i) few += std::to_string(2.88e9 + i) + ",0\n";
    ctx.input_path = write_temp("few.csv", few);
    EXPECT_THROW(cmd_calibrate(c, ctx), InvalidArgument);
    ctx.input_path = write_temp("hdr.csv", "f,c\n1,2\n");
    EXPECT_THROW(cmd_calibrate(c, ctx), InvalidArgument);
    std::string dup = "mw_frequency_hz,contrast\n";
    for (int i = 0; i < 60; ++i) dup += std::to_string(2.88e9 + (i % 30)) + ",0\n";
    ctx.input_path = write_temp("dup.csv", dup);
    EXPECT_THROW(cmd_calibrate(c, ctx), InvalidArgument);
}

TEST(Cli, ExitCodes) {
    const auto dir = temp_dir();
    EXPECT_EQ(run_cli("--help"), 0);
    EXPECT_EQ(run_cli("spectrum --config " + config("bare.cfg") + " --out " + (dir / "a.csv").string()), 0);
    EXPECT_EQ(run_cli(""), 2);
    EXPECT_EQ(run_cli("spectrum --no-such-flag"), 2);
    EXPECT_EQ(run_cli("spectrum --config " + write_temp("empty_grid.cfg", "grid.points = 0\n")), 2);
    EXPECT_EQ(run_cli("spectrum --config " + (dir / "missing.cfg").string()), 2);
    EXPECT_EQ(run_cli("sweep --config " + write_temp("one.cfg", "scheme = dressed\ndrive.b_rfc_tesla = 1e-4\n"
                                                                "drive.omega_rfc_hz = resonant\n"
                                                                "drive.b_mw_tesla = 1e-6\nsweep.points = 1\n")),
              3);
    EXPECT_EQ(run_cli("validate --config " + write_temp("strict.cfg", "validate.random_models = 100\n"
                                                                      "validate.p0_tolerance = 1e-300\n")),
              4);
    EXPECT_EQ(run_cli("calibrate"), 2);
}

TEST(Cli, CalibrateOneDipFails) {
    const auto dir = temp_dir();
    const auto full = (dir / "full.csv").string();
    ASSERT_EQ(run_cli("spectrum --config " + config("calibrate.cfg") + " --seed 2 --out " + full), 0);
    const auto t = read_csv_file(full);
    std::string one = "mw_frequency_hz,contrast\n";
    for (const auto& r : t.rows)
        if (std::stod(r[0]) > 2.882e9) one += r[0] + "," + r[1] + "\n";
    EXPECT_EQ(run_cli("calibrate --input " + write_temp("one_dip.csv", one)), 3);
    EXPECT_EQ(run_cli("calibrate --input " + write_temp("bad_row.csv", "mw_frequency_hz,contrast\n1,x\n")), 2);
}

TEST(Cli, SvgWritten) {
    const auto dir = temp_dir();
    const auto svg = (dir / "dd.svg").string();
    ASSERT_EQ(run_cli("spectrum --config " + config("double_dressed.cfg") + " --out " + (dir / "dd.csv").string() +
                      " --svg " + svg),
              0);
    EXPECT_NE(slurp(svg).find("<svg"), std::string::npos);
}

TEST(Cli, DeterministicAcrossRunsAndThreads) {
    const auto dir = temp_dir();
    const std::vector<std::pair<std::string, std::string>> runs = {
        {"spectrum", config("calibrate.cfg") + " --seed 42"},
        {"sense", config("sense.cfg")},
        {"sweep", config("sweep_target.cfg")},
    };
    for (const auto& [cmd, args] : runs) {
        std::string first;
        for (int threads : {1, 1, 3, 0}) {
            const auto out = (dir / (cmd + std::to_string(threads) + ".csv")).string();
            ASSERT_EQ(run_cli(cmd + " --config " + args + " --threads " + std::to_string(threads) + " --out " + out), 0);
            const auto text = slurp(out);
            if (first.empty()) first = text;
            else EXPECT_EQ(text, first) << cmd << " threads=" << threads;
        }
    }
}

TEST(Cli, StrongControlFailsValidation) {
    EXPECT_EQ(run_cli("validate --config " + config("validate_strong.cfg")), 4);
}
