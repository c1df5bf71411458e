#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "droope.hpp"

using namespace droope;

TEST(Rocof, ConstantSeriesIsZero) {
    const std::vector<double> f(1000, 60.0);
    EXPECT_EQ(peak_rocof(f, 1e-3, 0.1), 0.0);
}

TEST(Rocof, RampSlopeForAnyWindow) {
    std::vector<double> f;
    for (int k = 0; k <= 2000; ++k) f.push_back(60.0 - 1.0 * k * 1e-3);
    for (double w : {0.01, 0.1, 0.5}) EXPECT_NEAR(peak_rocof(f, 1e-3, w), 1.0, 1e-9) << w;
}

TEST(Rocof, ShiftInvariant) {
    std::mt19937 rng(3);
    std::normal_distribution<double> n(0.0, 0.05);
    std::vector<double> f;
    for (int k = 0; k < 1500; ++k) f.push_back(60.0 + n(rng));
    std::vector<double> g = f;
    for (double& v : g) v += 0.731;
    EXPECT_NEAR(peak_rocof(f, 1e-3, 0.1), peak_rocof(g, 1e-3, 0.1), 1e-9);
}

TEST(Rocof, ShortSeriesIsAnError) {
    const std::vector<double> f(50, 60.0);
    EXPECT_THROW(peak_rocof(f, 1e-3, 0.1), ArgumentError);
    EXPECT_THROW(peak_rocof(f, 1e-3, 0.0), ArgumentError);
}

TEST(WeightedFrequency, Examples) {
    const std::vector<std::vector<double>> f{{60.0, 60.0}, {59.0, 60.0}};
    const std::vector<double> mva{100.0, 50.0};
    const auto w = weighted_frequency(f, mva);
    EXPECT_NEAR(w[0], 59.0 + 2.0 / 3.0, 1e-12);
    EXPECT_NEAR(w[0], 59.667, 1e-3);
    EXPECT_EQ(w[1], 60.0);

    const std::vector<std::vector<double>> three{{59.9}, {59.8}, {59.6}};
    const std::vector<double> equal{200.0, 200.0, 200.0};
    EXPECT_NEAR(weighted_frequency(three, equal)[0], (59.9 + 59.8 + 59.6) / 3.0, 1e-12);
}

TEST(WeightedFrequency, StaysWithinInputs) {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(59.0, 61.0);
    std::uniform_real_distribution<double> s(1.0, 500.0);
    std::vector<std::vector<double>> f(4, std::vector<double>(200));
    for (auto& series : f)
        for (double& v : series) v = u(rng);
    const std::vector<double> mva{s(rng), s(rng), s(rng), s(rng)};
    const auto w = weighted_frequency(f, mva);
    for (std::size_t k = 0; k < w.size(); ++k) {
        double lo = f[0][k], hi = f[0][k];
        for (const auto& series : f) {
            lo = std::min(lo, series[k]);
            hi = std::max(hi, series[k]);
        }
        EXPECT_GE(w[k], lo - 1e-12);
        EXPECT_LE(w[k], hi + 1e-12);
    }
}

TEST(WeightedFrequency, MismatchedLengths) {
    const std::vector<std::vector<double>> f{{60.0, 60.0}, {59.0}};
    const std::vector<double> mva{1.0, 1.0};
    EXPECT_THROW(weighted_frequency(f, mva), ArgumentError);
}

TEST(Inertia, AggregateExamples) {
    const std::vector<double> s{200.0, 200.0, 200.0};
    EXPECT_EQ(fixed(aggregate_inertia(std::vector<double>{3.01, 3.01, 3.01}, s), 1), "3.0");
    EXPECT_EQ(fixed(aggregate_inertia(std::vector<double>{0.0, 3.01, 0.0}, s), 1), "1.0");
    EXPECT_EQ(aggregate_inertia(std::vector<double>{4.2}, std::vector<double>{75.0}), 4.2);
    EXPECT_THROW(aggregate_inertia(std::vector<double>{}, std::vector<double>{}), ArgumentError);
    EXPECT_THROW(aggregate_inertia(std::vector<double>{1.0}, std::vector<double>{0.0}), ArgumentError);
}

TEST(Inertia, BuiltinScenarios) {
    EXPECT_EQ(fixed(scenario_inertia(builtin_scenario("9bus-caseA")), 1), "3.0");
    EXPECT_EQ(fixed(scenario_inertia(builtin_scenario("9bus-caseB")), 1), "1.0");
    EXPECT_EQ(fixed(scenario_inertia(builtin_scenario("9bus-caseC")), 1), "1.0");
}

TEST(FrequencyStats, NadirSearchStartsAtEvent) {
    std::vector<double> t, f;
    for (int k = 0; k <= 3000; ++k) {
        t.push_back(k * 1e-3);
        const double tt = t.back();
        f.push_back(tt < 0.5 ? 59.0 : 60.0 - 0.2 * std::min(tt - 1.0, 0.5) * (tt >= 1.0));
    }
    const FrequencyStats st = frequency_stats(t, f, 1.0, 0.1);
    EXPECT_NEAR(st.nadir, 59.9, 1e-12);
    EXPECT_NEAR(st.nadir_time, 1.5, 1e-9);
    EXPECT_NEAR(st.peak_rocof, 0.2, 1e-9);
    EXPECT_NEAR(st.settling, 59.9, 1e-12);
    EXPECT_TRUE(st.settled);
    EXPECT_LE(st.nadir, st.settling + 1e-9);
}

TEST(FrequencyStats, UnsettledTailIsReported) {
    std::vector<double> t, f;
    for (int k = 0; k <= 2000; ++k) {
        t.push_back(k * 1e-3);
        f.push_back(60.0 - 0.05 * t.back());
    }
    EXPECT_FALSE(frequency_stats(t, f, 0.0, 0.1).settled);
}

TEST(Headroom, PublishedRays) {
    const auto rows = headroom_table(0.2, std::vector<double>{0.5, 0.75}, DroopELaw{}, 0.05);
    EXPECT_EQ(fixed(rows[0].dp_droop_e, 2), "0.40");
    EXPECT_EQ(fixed(rows[0].dp_static, 2), "0.17");
    EXPECT_EQ(fixed(rows[0].dp_diff, 2), "0.23");
    EXPECT_EQ(fixed(rows[1].dp_droop_e, 2), "0.50");
    EXPECT_EQ(fixed(rows[1].dp_static, 2), "0.25");
    EXPECT_EQ(fixed(rows[1].dp_diff, 2), "0.25");
}

TEST(Headroom, ZeroDeviation) {
    const auto rows = headroom_table(0.2, std::vector<double>{0.0}, DroopELaw{}, 0.05);
    EXPECT_NEAR(rows[0].dp_droop_e, 0.0, 1e-14);
    EXPECT_EQ(rows[0].dp_static, 0.0);
    EXPECT_NEAR(rows[0].dp_diff, 0.0, 1e-14);
    EXPECT_FALSE(rows[0].clamped);
}

TEST(Headroom, RootBackSubstitutes) {
    for (double p_set : {0.0, 0.2, 0.5}) {
        for (double df : {0.1, 0.25, 0.5, 0.75}) {
            bool clamped = false;
            const double dp = droop_e_power_for_deviation(p_set, df, DroopELaw{}, kNominalRadPerSec, &clamped);
            if (clamped) continue;
            EXPECT_LT(std::abs(droop_e_offset(p_set, p_set + dp, DroopELaw{}, kNominalRadPerSec) +
                               hz_to_rad_per_sec(df)),
                      1e-10)
                << p_set << ' ' << df;
        }
    }
}

TEST(Headroom, ClampsAtRating) {
    const auto rows = headroom_table(0.9, std::vector<double>{0.75}, DroopELaw{}, 0.05);
    EXPECT_TRUE(rows[0].clamped);
    EXPECT_NEAR(rows[0].dp_droop_e, 0.1, 1e-12);
    std::ostringstream os;
    write_headroom_markdown(os, rows);
    EXPECT_NE(os.str().find("(clamped)"), std::string::npos);
    EXPECT_THROW(headroom_table(0.2, std::vector<double>{-0.1}, DroopELaw{}, 0.05), ArgumentError);
}

TEST(Headroom, MarkdownLayout) {
    std::ostringstream os;
    write_headroom_markdown(os, reference_headroom_table());
    std::istringstream lines(os.str());
    std::string line;
    std::vector<std::string> all;
    while (std::getline(lines, line)) all.push_back(line);
    ASSERT_EQ(all.size(), 5u);
    EXPECT_EQ(all[3], "| b | 0.50 | 0.40 | 0.17 | 0.23 |");
    EXPECT_EQ(all[4], "| c | 0.75 | 0.50 | 0.25 | 0.25 |");
}
