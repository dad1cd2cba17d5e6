#include <gtest/gtest.h>

#include "nvsense/resonance.hpp"
#include "support/paper_point.hpp"

using namespace nvsense;
using namespace nvsense::testing;

TEST(DoubleDressed, MergesWithoutTarget) {
    const auto p = calibrated_nv();
    const auto z = effective_zfs(p);
    auto d = double_dressed_drive(p);
    d.B_RFt = 0.0;
    const auto s = resonances_double_dressed(p, z, d);
    const double merged = z.D_prime + z.Ex_prime - 0.5 * p.gamma_e * d.B_RFc;
    EXPECT_NEAR(s.find("res2+").frequency, merged, 1e-3);
    EXPECT_NEAR(s.find("res2-").frequency, merged, 1e-3);
}

TEST(DoubleDressed, OnResonanceSplitting) {
    const auto p = calibrated_nv();
    const auto z = effective_zfs(p);
    const auto d = double_dressed_drive(p);
    const auto s = resonances_double_dressed(p, z, d);
    EXPECT_NEAR(s.find("res2+").frequency - s.find("res2-").frequency, 0.5 * p.gamma_e * d.B_RFt, 1e-6);
}

TEST(DoubleDressed, PaperPointValues) {
    const auto p = calibrated_nv();
    const auto z = effective_zfs(p);
    auto d = double_dressed_drive(p);
    d.omega_RFt = 5.642e6;
    const auto s = resonances_double_dressed(p, z, d);
    EXPECT_NEAR(s.find("res2+").frequency, 2.884821e9 + 2.065e5, 1.0);
    EXPECT_NEAR(s.find("res2-").frequency, 2.884821e9 - 2.065e5, 1.0);
    for (const auto& e : s.entries) {
        const bool noisy = e.tag.starts_with("res1") || e.tag.starts_with("res4");
        EXPECT_EQ(e.electric_noise_sensitive, noisy) << e.tag;
    }
    for (int k = 1; k <= 4; ++k) {
        const std::string t = "res" + std::to_string(k);
        EXPECT_GE(s.find(t + "+").frequency, s.find(t + "-").frequency);
    }
}

TEST(DoubleDressed, MatchesBranchNormalModes) {
    const auto p = calibrated_nv();
    const auto z = effective_zfs(p);
    for (double wt : {5.0e6, 5.642e6, 7.0e6, 10.0e6, 11.298e6, 12.0e6}) {
        auto d = double_dressed_drive(p);
        d.omega_RFt = wt;
        const auto s = resonances_double_dressed(p, z, d);
        const std::pair<Branch, const char*> map[] = {{Branch::PlusLow, "res1"},
                                                      {Branch::MinusLow, "res2"},
                                                      {Branch::PlusHigh, "res3"},
                                                      {Branch::MinusHigh, "res4"}};
        for (auto [br, tag] : map) {
            const auto r = branch_levels(p, z, d, br).resonances();
            EXPECT_NEAR(r[0], s.find(std::string(tag) + "-").frequency, 1e-3) << tag << " " << wt;
            EXPECT_NEAR(r[1], s.find(std::string(tag) + "+").frequency, 1e-3) << tag << " " << wt;
        }
    }
}

TEST(DoubleDressed, Res2IndependentOfStrainAtCondition) {
    NVParameters p = calibrated_nv();
    const double B_RFc = 101e-6;
    const double B_RFt = 29.5e-6;
    for (double Ex : {3.5e6, 4.235e6, 5.0e6}) {
        p.Ex = Ex;
        const auto z = effective_zfs(p);
        const auto d = double_dressed_drive(p, B_RFc, B_RFt);
        const auto s = resonances_double_dressed(p, z, d);
        const double expected = z.D_prime + z.Ex_prime - 0.5 * p.gamma_e * B_RFc;
        EXPECT_NEAR(0.5 * (s.find("res2+").frequency + s.find("res2-").frequency), expected, 1e-3);
        EXPECT_NEAR(s.find("res2+").frequency - expected, 0.25 * p.gamma_e * B_RFt, 1e-3);
    }
}

TEST(Previous, OnResonance) {
    const auto p = calibrated_nv();
    const auto z = effective_zfs(p);
    DriveConfig d;
    d.B_RFc = 101e-6;
    d.omega_RFc = 8.47e6;
    const auto s = resonances_previous(p, z, d);
    EXPECT_NEAR(s.find("res1+").frequency - s.find("res1-").frequency, p.gamma_e * d.B_RFc, 1e-6);
    EXPECT_NEAR(s.find("res1+").frequency, z.D_prime + 4.235e6 + 1.414e6, 1.0);
    EXPECT_NEAR(s.find("res1-").frequency, z.D_prime + 4.235e6 - 1.414e6, 1.0);
    d.B_RFc = 0.0;
    const auto s0 = resonances_previous(p, z, d);
    EXPECT_NEAR(s0.find("res1+").frequency, z.D_prime + z.Ex_prime, 1e-6);
    EXPECT_NEAR(s0.find("res1-").frequency, z.D_prime + z.Ex_prime, 1e-6);
}

TEST(Previous, MatchesSpectrumNormalModes) {
    const auto p = calibrated_nv();
    const auto z = effective_zfs(p);
    DriveConfig d;
    d.B_RFc = 60e-6;
    d.omega_RFc = 7.1e6;
    d.B_MW = 1e-6;
    d.omega_MW = z.D_prime;
    const auto s = resonances_previous(p, z, d);
    const auto f = spectrum_resonances(p, d, Scheme::PreviousSingleRF);
    ASSERT_EQ(f.size(), 4u);
    std::vector<double> expected;
    for (const auto& e : s.entries) expected.push_back(e.frequency);
    std::sort(expected.begin(), expected.end());
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(f[i], expected[i], 1e-3);
}

TEST(Previous, DoubleDressedSplittingIsHalf) {
    const auto p = calibrated_nv();
    const auto z = effective_zfs(p);
    for (double B : {5e-6, 29.5e-6, 80e-6}) {
        DriveConfig prev;
        prev.B_RFc = B;
        prev.omega_RFc = 2.0 * z.Ex_prime;
        const auto sp = resonances_previous(p, z, prev);
        const double split_prev = sp.find("res1+").frequency - sp.find("res1-").frequency;
        const auto dd = resonances_double_dressed(p, z, double_dressed_drive(p, 101e-6, B));
        const double split_dd = dd.find("res2+").frequency - dd.find("res2-").frequency;
        EXPECT_NEAR(split_dd / split_prev, 0.5, 1e-9);
    }
}

TEST(Bare, TwoLevels) {
    const auto s = resonances_bare({2.882e9, 4.235e6});
    EXPECT_DOUBLE_EQ(s.find("B").frequency, 2.886235e9);
    EXPECT_DOUBLE_EQ(s.find("D").frequency, 2.877765e9);
    EXPECT_THROW(s.find("res1+"), InvalidArgument);
}

TEST(TargetCondition, Values) {
    const auto p = calibrated_nv();
    const auto z = effective_zfs(p);
    auto [lo0, hi0] = resonant_target_condition(p, z, 0.0);
    EXPECT_DOUBLE_EQ(lo0, 8.47e6);
    EXPECT_DOUBLE_EQ(hi0, 8.47e6);
    auto [lo, hi] = resonant_target_condition(p, z, 101e-6);
    EXPECT_NEAR(lo, 5.642e6, 1e-3);
    EXPECT_NEAR(hi, 11.298e6, 1e-3);
    EXPECT_THROW(resonant_target_condition(p, z, 2.0 * z.Ex_prime / p.gamma_e), NegativeFrequency);
    EXPECT_THROW(resonant_target_condition(p, z, -1e-6), InvalidArgument);
}

TEST(SplittingSlope, PreviousSweepGivesGamma) {
    const auto p = calibrated_nv();
    const auto z = effective_zfs(p);
    std::vector<std::pair<double, double>> sweep;
    for (int k = 1; k <= 10; ++k) {
        DriveConfig d;
        d.B_RFc = 10e-6 * k;
        d.omega_RFc = 2.0 * z.Ex_prime;
        const auto s = resonances_previous(p, z, d);
        sweep.emplace_back(d.B_RFc, s.find("res1+").frequency - s.find("res1-").frequency);
    }
    const auto f = splitting_slope(sweep);
    EXPECT_NEAR(f.slope, 28e9, 28e9 * 0.005);
}

TEST(SplittingSlope, DoubleDressedSweepGivesHalfGamma) {
    const auto p = calibrated_nv();
    const auto z = effective_zfs(p);
    std::vector<std::pair<double, double>> sweep;
    for (int k = 1; k <= 10; ++k) {
        const auto s = resonances_double_dressed(p, z, double_dressed_drive(p, 101e-6, 5e-6 * k));
        sweep.emplace_back(5e-6 * k, s.find("res2+").frequency - s.find("res2-").frequency);
    }
    EXPECT_NEAR(splitting_slope(sweep).slope, 14e9, 14e9 * 0.005);
}

TEST(SplittingSlope, FlatAndDegenerate) {
    std::vector<std::pair<double, double>> flat{{1.0, 5.0}, {2.0, 5.0}, {3.0, 5.0}};
    EXPECT_NEAR(splitting_slope(flat).slope, 0.0, 1e-12);
    std::vector<std::pair<double, double>> deg{{1.0, 5.0}, {1.0, 6.0}, {2.0, 5.0}};
    EXPECT_THROW(splitting_slope(deg), DegenerateSweep);
}

TEST(SpectrumDips, DoubleDressedFitMatchesClosedForms) {
    const auto p = calibrated_nv();
    const auto z = effective_zfs(p);
    const auto d = double_dressed_drive(p);
    const auto o = demo_options(p);
    const GridSpec g{z.D_prime - 3.0 * z.Ex_prime, z.D_prime + 3.0 * z.Ex_prime, 10001};
    const auto spec = simulate_spectrum(p, d, g, Scheme::DoubleDressed, o);
    const auto closed = spectrum_resonances(p, d, Scheme::DoubleDressed, o);
    ASSERT_EQ(closed.size(), 8u);
    const auto fit = fit_spectrum_dips(spec, 8);
    ASSERT_EQ(fit.dips.size(), 8u);
    for (std::size_t i = 0; i < 8; ++i) EXPECT_LT(std::abs(fit.dips[i].center - closed[i]), fit.dips[i].fwhm / 10.0);

    // Bright family reproduces the tagged x-axis set.
    const auto set = resonances_double_dressed(p, z, d);
    EXPECT_NEAR(closed[4], set.find("res2-").frequency, 1e-3);
    EXPECT_NEAR(closed[7], set.find("res1+").frequency, 1e-3);
}
