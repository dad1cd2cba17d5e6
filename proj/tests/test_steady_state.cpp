#include <gtest/gtest.h>

#include <random>

#include "nvsense/fit.hpp"
#include "nvsense/steady_state.hpp"
#include "support/paper_point.hpp"

using namespace nvsense;
using namespace nvsense::testing;

TEST(PopulationP0, NoDrive) {
    const auto p = population_p0({1e5, -2e5, 0.0, 5e4, 3e5, 2e5});
    EXPECT_EQ(p.p0, 1.0);
    EXPECT_EQ(p.pb, 0.0);
    EXPECT_EQ(p.pd, 0.0);
}

TEST(PopulationP0, ResonantSingleMode) {
    const auto p = population_p0({0.0, 3e5, 1e4, 0.0, 2e5, 1e5});
    EXPECT_NEAR(p.pb, 1e8 / 4e10, 1e-15);
    EXPECT_EQ(p.pd, 0.0);
}

TEST(PopulationP0, FarDetunedLimit) {
    double prev = 0.0;
    for (double w : {1e5, 1e6, 1e7, 1e8}) {
        const auto p = population_p0({w, -2e5, 1e4, 5e4, 3e5, 2e5});
        EXPECT_GT(p.p0, prev);
        prev = p.p0;
    }
    EXPECT_GT(prev, 1.0 - 1e-7);
}

TEST(PopulationP0, StrongDriveThrows) {
    EXPECT_THROW(population_p0({0.0, 0.0, 1e6, 0.0, 1e5, 1e5}), WeakDriveViolation);
    EXPECT_THROW(population_p0({0.0, 0.0, 1e3, 0.0, 0.0, 1e5}), InvalidArgument);
    OscillatorModel m{0.0, 0.0, 6e4, 0.0, 1e5, 1e5};
    EXPECT_TRUE(m.strong_drive());
}

TEST(BranchModel, PaperPointPlusLow) {
    const auto p = calibrated_nv();
    const auto z = effective_zfs(p);
    const auto d = double_dressed_drive(p);
    const auto m = branch_model(p, z, d, Branch::PlusLow);
    const double c = 0.5 * p.gamma_e * d.B_RFc;
    EXPECT_NEAR(m.omega_b, z.D_prime + z.Ex_prime - d.omega_MW + c, 1e-6);
    EXPECT_NEAR(m.omega_d, z.D_prime + z.Ex_prime - d.omega_MW - c + (2.0 * z.Ex_prime - d.omega_RFt), 1e-6);
    EXPECT_NEAR(m.lambda, 1e4, 1e-9);
    EXPECT_NEAR(m.J, 0.25 * p.gamma_e * 29.5e-6, 1e-9);

    const auto lv = branch_levels(p, z, d, Branch::PlusLow);
    const auto r = lv.resonances();
    const auto set = resonances_double_dressed(p, z, d);
    EXPECT_NEAR(r[0], set.find("res1-").frequency, 1e-3);
    EXPECT_NEAR(r[1], set.find("res1+").frequency, 1e-3);
}

TEST(BranchModel, NoTargetMeansNoCoupling) {
    const auto p = calibrated_nv();
    const auto z = effective_zfs(p);
    const auto d = dressed_drive(p);
    for (auto b : {Branch::PlusLow, Branch::MinusLow, Branch::PlusHigh, Branch::MinusHigh})
        EXPECT_EQ(branch_model(p, z, d, b).J, 0.0);
}

TEST(BranchModel, PlusMinusMirror) {
    const auto p = calibrated_nv();
    const auto z = effective_zfs(p);
    const auto d = double_dressed_drive(p);
    const double center = z.D_prime + z.Ex_prime;
    for (auto [a, b] : {std::pair{Branch::PlusLow, Branch::MinusLow}, std::pair{Branch::PlusHigh, Branch::MinusHigh}}) {
        const auto la = branch_levels(p, z, d, a);
        const auto lb = branch_levels(p, z, d, b);
        EXPECT_NEAR(la.level_b - center, -(lb.level_b - center), 1e-6);
        EXPECT_NEAR(la.level_d - center, -(lb.level_d - center), 1e-6);
    }
}

TEST(BranchModel, OffResonantControlRejected) {
    const auto p = calibrated_nv();
    const auto z = effective_zfs(p);
    auto d = double_dressed_drive(p);
    d.omega_RFc += 2e3;
    EXPECT_THROW(branch_model(p, z, d, Branch::PlusLow), ControlOffResonance);
    EXPECT_NO_THROW(branch_levels(p, z, d, Branch::PlusLow, MwFamily::Bright, 5e3));
}

namespace {

std::size_t count_minima(const Spectrum& s) { return local_minima(s.contrast).size(); }

} // namespace

TEST(SimulateSpectrum, BareHasTwoDips) {
    const auto p = calibrated_nv();
    const auto s = simulate_spectrum(p, bare_drive(p), default_grid(effective_zfs(p)), Scheme::Bare);
    ASSERT_EQ(count_minima(s), 2u);
    const auto mins = local_minima(s.contrast);
    EXPECT_NEAR(s.mw_frequencies[mins[0]], 2.877765e9, s.meta.grid.step());
    EXPECT_NEAR(s.mw_frequencies[mins[1]], 2.886235e9, s.meta.grid.step());
    for (double c : s.contrast) EXPECT_LE(c, 0.0);
}

TEST(SimulateSpectrum, DressedHasFourDips) {
    const auto p = calibrated_nv();
    const auto s = simulate_spectrum(p, dressed_drive(p), default_grid(effective_zfs(p)), Scheme::Dressed,
                                     demo_options(p));
    EXPECT_EQ(count_minima(s), 4u);
}

TEST(SimulateSpectrum, DoubleDressedHasEightDips) {
    const auto p = calibrated_nv();
    const auto s = simulate_spectrum(p, double_dressed_drive(p), default_grid(effective_zfs(p)),
                                     Scheme::DoubleDressed, demo_options(p));
    EXPECT_EQ(count_minima(s), 8u);
}

TEST(SimulateSpectrum, TargetSignInvariance) {
    const auto p = calibrated_nv();
    const auto z = effective_zfs(p);
    auto d = double_dressed_drive(p);
    const GridSpec g{z.D_prime - 1e7, z.D_prime + 1e7, 301};
    const auto a = simulate_spectrum(p, d, g, Scheme::DoubleDressed);
    d.B_RFt = -d.B_RFt;
    // Negative amplitudes are rejected by validation, so compare J -> -J directly.
    for (auto br : {Branch::PlusLow, Branch::MinusLow}) {
        auto lv = branch_levels(p, z, double_dressed_drive(p), br);
        auto lneg = lv;
        lneg.J = -lv.J;
        for (double w : g.values())
            EXPECT_DOUBLE_EQ(population_p0(lv.at(w, 1e5, 1e5)).p0, population_p0(lneg.at(w, 1e5, 1e5)).p0);
    }
    EXPECT_THROW(simulate_spectrum(p, d, g, Scheme::DoubleDressed), InvalidArgument);
    EXPECT_EQ(a.contrast.size(), 301u);
}

TEST(SimulateSpectrum, PreviousSchemeSplittingHasSlopeGamma) {
    const auto p = calibrated_nv();
    const auto z = effective_zfs(p);
    DriveConfig d;
    d.omega_RFc = 2.0 * z.Ex_prime;
    d.B_MW = 1e-6;
    d.omega_MW = z.D_prime;
    d.mw_axis = MwAxis::X;
    for (double B : {20e-6, 50e-6, 100e-6}) {
        d.B_RFc = B;
        const auto r = spectrum_terms(p, d, Scheme::PreviousSingleRF).front().levels.resonances();
        EXPECT_NEAR((r[1] - r[0]) / B, p.gamma_e, 1e-3 * p.gamma_e);
    }
}

TEST(SimulateSpectrum, WeakDriveViolationReportsFrequency) {
    const auto p = calibrated_nv();
    auto d = bare_drive(p);
    d.B_MW = 1e-3;
    try {
        simulate_spectrum(p, d, default_grid(effective_zfs(p)), Scheme::Bare);
        FAIL();
    } catch (const WeakDriveViolation& e) {
        EXPECT_NE(std::string(e.what()).find("omega_MW"), std::string::npos);
    }
}

TEST(SimulateSpectrum, ThreadCountDoesNotChangeResult) {
    const auto p = calibrated_nv();
    auto o = demo_options(p);
    const auto g = default_grid(effective_zfs(p));
    const auto a = simulate_spectrum(p, double_dressed_drive(p), g, Scheme::DoubleDressed, o);
    o.threads = 4;
    const auto b = simulate_spectrum(p, double_dressed_drive(p), g, Scheme::DoubleDressed, o);
    EXPECT_EQ(a.contrast, b.contrast);
}

TEST(GridSpec, Validation) {
    EXPECT_THROW((GridSpec{0.0, 1.0, 0}.values()), InvalidArgument);
    EXPECT_THROW((GridSpec{1.0, 0.0, 5}.values()), InvalidArgument);
    const auto v = GridSpec{1.0, 2.0, 3}.values();
    EXPECT_EQ(v, (std::vector<double>{1.0, 1.5, 2.0}));
}
