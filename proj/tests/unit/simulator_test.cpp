#include "calibra/errors.hpp"
#include "calibra/simulator.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <span>

using namespace calibra;
using S = StrategyLabel;

namespace {

const std::uint64_t kSeed = 20240101;

Scenario with_reps(const std::string& label, std::size_t reps) {
    Scenario s = find_scenario(label);
    s.n_reps = reps;
    return s;
}

double corr(const Vector& a, const Vector& b) {
    double n = static_cast<double>(a.size()), ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) ma += a[i] / n, mb += b[i] / n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

// residuals of a on (1, v)
Vector resid_on(const Vector& a, const Vector& v) {
    double n = static_cast<double>(a.size()), ma = 0, mv = 0;
    for (std::size_t i = 0; i < a.size(); ++i) ma += a[i] / n, mv += v[i] / n;
    double sav = 0, svv = 0;
    for (std::size_t i = 0; i < a.size(); ++i) sav += (a[i] - ma) * (v[i] - mv), svv += (v[i] - mv) * (v[i] - mv);
    Vector r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - ma - sav / svv * (v[i] - mv);
    return r;
}

Vector vec(std::span<const double> s) { return Vector(s.begin(), s.end()); }

}

TEST(GenerateData, Deterministic) {
    Scenario s = find_scenario("dag3-base-continuous");
    auto a = generate_scenario_data(s, 99);
    auto b = generate_scenario_data(s, 99);
    for (const auto& c : a.first.names()) EXPECT_EQ(vec(a.first.column(c)), vec(b.first.column(c)));
    for (const auto& c : a.second.names()) EXPECT_EQ(vec(a.second.column(c)), vec(b.second.column(c)));
    auto c = generate_scenario_data(s, 100);
    EXPECT_NE(vec(a.first.column("Y")), vec(c.first.column("Y")));
}

TEST(GenerateData, ArmShapes) {
    Scenario s = find_scenario("dag2-base-continuous");
    auto [main, val] = generate_scenario_data(s, 1);
    EXPECT_EQ(main.n(), 4600u);
    EXPECT_EQ(val.n(), 400u);
    EXPECT_TRUE(main.has("Y"));
    EXPECT_FALSE(main.has("X"));
    EXPECT_TRUE(val.has("X"));
    EXPECT_FALSE(val.has("Y"));
}

TEST(GenerateData, SurrogateCorrelationGivenV) {
    // use a validation arm as large as the whole sample to see X and Z together
    for (int d : {1, 4, 8}) {
        Scenario s = find_scenario("dag" + std::to_string(d) + "-base-continuous");
        s.n_vs = 4999;
        auto val = generate_scenario_data(s, 5).second;
        Vector v = vec(val.column("V"));
        double r = corr(resid_on(vec(val.column("X")), v), resid_on(vec(val.column("Z")), v));
        EXPECT_NEAR(r, 0.71, 0.02) << d;
    }
}

TEST(GenerateData, BinaryPrevalenceIsRare) {
    for (int d = 1; d <= 8; ++d) {
        Scenario s = find_scenario("dag" + std::to_string(d) + "-base-binary");
        auto arms = generate_scenario_data(s, 3);
        auto y = arms.first.column("Y");
        double p = 0;
        for (double v : y) p += v;
        EXPECT_LT(p / static_cast<double>(y.size()), 0.05) << d;
    }
}

TEST(PercentBias, Examples) {
    EXPECT_EQ(percent_bias({0.5, 0.5}, 0.5), 0.0);
    EXPECT_NEAR(percent_bias({0.985}, 0.5), 97.0, 1e-12);
    EXPECT_NEAR(percent_bias({0.2, 0.3}, 0.5), -50.0, 1e-12);
    EXPECT_THROW(percent_bias({1.0}, 0.0), DomainError);
}

TEST(Catalog, Invariants) {
    auto cat = scenario_catalog();
    EXPECT_GT(cat.size(), 100u);
    std::set<std::string> labels;
    for (const auto& s : cat) {
        EXPECT_TRUE(s.violations().empty()) << s.label;
        EXPECT_TRUE(labels.insert(s.label).second) << s.label;
    }
    const Scenario& d4 = find_scenario("dag4-large-rho-vz-continuous");
    EXPECT_EQ(d4.coef.theta_v, 2.0);
    // partial correlation of V and Z given X
    double e2 = d4.coef.eta_v * d4.coef.eta_v;
    double vv_x = 1.0 - e2 / (e2 + 1.0);
    double r = d4.coef.theta_v * vv_x / std::sqrt(vv_x * (d4.coef.theta_v * d4.coef.theta_v * vv_x + 0.25));
    EXPECT_NEAR(r, 0.97, 0.01);

    const Scenario& b1 = find_scenario("dag1-base-binary");
    EXPECT_EQ(b1.n_total, 10000u);
    EXPECT_EQ(b1.n_vs, 400u);
    EXPECT_EQ(b1.logit_intercept, -5.0);
    EXPECT_THROW(find_scenario("dag9-base-continuous"), SchemaError);
}

TEST(Scenario, ViolationsCaught) {
    Scenario s = find_scenario("dag5-base-continuous");
    s.coef.beta_v = 0.3;
    EXPECT_FALSE(s.violations().empty());
    s = find_scenario("dag5-base-continuous");
    s.n_vs = s.n_total;
    EXPECT_FALSE(s.violations().empty());
    s = find_scenario("dag5-base-continuous");
    s.coef.sd_ez = 0.0;
    EXPECT_THROW(s.check(), DomainError);
    s = find_scenario("dag5-base-continuous");
    s.n_reps = 0;
    EXPECT_FALSE(s.violations().empty());
}

TEST(RunScenario, Dag1And2PercentBias) {
    auto r1 = run_scenario(find_scenario("dag1-base-continuous"), kSeed);
    for (S l : kAllStrategies) EXPECT_NEAR(r1.at(l).percent_bias, 0.0, 3.0) << to_string(l);
    auto r2 = run_scenario(find_scenario("dag2-base-continuous"), kSeed);
    EXPECT_NEAR(r2.at(S::OM).percent_bias, 0.0, 3.0);
    EXPECT_NEAR(r2.at(S::NN).percent_bias, 32.0, 3.0);
    EXPECT_NEAR(r2.at(S::NM).percent_bias, 0.0, 3.0);
    EXPECT_NEAR(r2.at(S::ON).percent_bias, 2.0, 3.0);
    EXPECT_LE(r1.at(S::NM).coverage95, 0.80);
    EXPECT_EQ(r1.at(S::OM).ere, 1.0);
    EXPECT_EQ(r1.n_failed, 0u);
}

TEST(RunScenario, Dag7Efficiency) {
    auto r = run_scenario(find_scenario("dag7-base-continuous"), kSeed);
    EXPECT_EQ(r.at(S::OM).ere, 1.0);
    EXPECT_NEAR(r.at(S::NM).ere, 1.31, 0.10);
    EXPECT_NEAR(r.at(S::NN).ere, 1.19, 0.10);
    for (S l : {S::OM, S::NN, S::NM}) {
        EXPECT_GE(r.at(l).coverage95, 0.93);
        EXPECT_LE(r.at(l).coverage95, 0.97);
    }
}

TEST(RunScenario, BitIdenticalAcrossThreadCounts) {
    Scenario s = with_reps("dag3-base-continuous", 40);
    RunOptions one;
    one.threads = 1;
    RunOptions many;
    many.threads = 5;
    auto a = run_scenario(s, 7, one);
    auto b = run_scenario(s, 7, many);
    for (std::size_t k = 0; k < 4; ++k) {
        EXPECT_EQ(a.estimates[k], b.estimates[k]);
        EXPECT_EQ(a.metrics[k].mean_sandwich_variance, b.metrics[k].mean_sandwich_variance);
        EXPECT_EQ(a.metrics[k].coverage95, b.metrics[k].coverage95);
    }
    EXPECT_FALSE(a.rng_version.empty());
}

TEST(RunScenario, DoublingRepsMovesValidBiasLittle) {
    auto half = run_scenario(with_reps("dag3-base-continuous", 500), kSeed);
    auto full = run_scenario(with_reps("dag3-base-continuous", 1000), kSeed);
    EXPECT_LT(std::abs(half.at(S::OM).percent_bias - full.at(S::OM).percent_bias), 2.0);
}

TEST(RunScenario, BinaryRiskFactorBiasSmallUnderRareOutcome) {
    auto r = run_scenario(with_reps("dag1-base-binary", 100), kSeed);
    EXPECT_LT(std::abs(r.at(S::OM).percent_bias), 6.0);
    EXPECT_LT(std::abs(r.at(S::NM).percent_bias), 6.0);
}

TEST(RunScenario, RejectsZeroReps) {
    Scenario s = with_reps("dag3-base-continuous", 0);
    EXPECT_THROW(run_scenario(s, kSeed), DomainError);
}
