#include "calibra/advisor.hpp"
#include "calibra/errors.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace calibra;
using S = StrategyLabel;

namespace {

// plim of the exposure slope, worked from path covariances in (V, X, Z, Y)
double oracle_plim(const DgpCoefficients& g, S l) {
    double s2 = g.var_v();
    double vx = g.eta_v * s2, xx = g.eta_v * g.eta_v * s2 + g.sd_ex * g.sd_ex;
    double vz = g.theta_x * vx + g.theta_v * s2;
    double xz = g.theta_x * xx + g.theta_v * vx;
    double zz = g.theta_x * g.theta_x * xx + 2 * g.theta_x * g.theta_v * vx + g.theta_v * g.theta_v * s2 + g.sd_ez * g.sd_ez;
    double vy = g.beta_x * vx + g.beta_v * s2;
    double zy = g.beta_x * xz + g.beta_v * vz;
    // MEM slopes
    double az, av = 0.0;
    if (label_in_mem(l)) {
        double det = zz * s2 - vz * vz;
        az = (xz * s2 - vx * vz) / det;
        av = (vx * zz - xz * vz) / det;
    } else {
        az = xz / zz;
    }
    double ee = az * az * zz + 2 * az * av * vz + av * av * s2;
    double ev = az * vz + av * s2;
    double ey = az * zy + av * vy;
    if (!label_in_outcome(l)) return ey / ee;
    return (ey * s2 - vy * ev) / (ee * s2 - ev * ev);
}

}

TEST(ValidityMatrix, TableRows) {
    auto d3 = validity_matrix(role_from_index(3));
    EXPECT_TRUE(d3[S::OM].valid);
    EXPECT_FALSE(d3[S::NN].valid);
    EXPECT_FALSE(d3[S::NM].valid);
    EXPECT_FALSE(d3[S::ON].valid);

    auto d7 = validity_matrix(role_from_index(7));
    EXPECT_TRUE(d7[S::OM].valid);
    EXPECT_TRUE(d7[S::NN].valid);
    EXPECT_TRUE(d7[S::NM].valid);
    EXPECT_TRUE(d7[S::NM].efficient);
    EXPECT_TRUE(d7[S::NM].caveat.has_value());
    EXPECT_FALSE(d7[S::ON].valid);

    auto d5 = validity_matrix(role_from_index(5));
    for (S l : kAllStrategies) {
        EXPECT_TRUE(d5[l].valid);
        EXPECT_FALSE(d5[l].efficient);
    }
}

TEST(ValidityMatrix, EfficientImpliesValidAndIsConstant) {
    for (int d = 1; d <= 8; ++d) {
        auto t = validity_matrix(role_from_index(d));
        auto again = validity_matrix(role_from_index(d));
        for (S l : kAllStrategies) {
            if (t[l].efficient) EXPECT_TRUE(t[l].valid);
            EXPECT_EQ(t[l].valid, again[l].valid);
            EXPECT_EQ(t[l].efficient, again[l].efficient);
            EXPECT_EQ(t[l].caveat, again[l].caveat);
        }
        EXPECT_TRUE(t[S::OM].valid) << d;
    }
}

TEST(Recommend, ConfoundersGoInBoth) {
    auto r = recommend({{"age", role_from_index(4)}, {"smoking", role_from_index(3)}});
    for (const auto& c : {"age", "smoking"}) {
        EXPECT_TRUE(r.strategy.in_mem(c));
        EXPECT_TRUE(r.strategy.in_outcome(c));
    }
    EXPECT_EQ(r.strategy.label(), S::OM);
}

TEST(Recommend, MeasurementOnlyGoesInMem) {
    auto r = recommend({{"sunscreen", role_from_index(7)}});
    EXPECT_TRUE(r.strategy.in_mem("sunscreen"));
    EXPECT_FALSE(r.strategy.in_outcome("sunscreen"));
    EXPECT_EQ(r.advice[0].placement, Placement::mem_only);
    EXPECT_TRUE(r.advice[0].collect_in_both_studies);
}

TEST(Recommend, RiskFactorGoesInOutcome) {
    auto r = recommend({{"family_history", role_from_index(1)}});
    EXPECT_TRUE(r.strategy.in_outcome("family_history"));
    EXPECT_FALSE(r.strategy.in_mem("family_history"));
    ASSERT_TRUE(r.advice[0].alternative.has_value());
    EXPECT_EQ(*r.advice[0].alternative, Placement::both);
}

TEST(Recommend, SurrogateRiskFactorDefaultsToBoth) {
    auto r = recommend({{"v2", role_from_index(2)}, {"v5", role_from_index(5)}});
    EXPECT_TRUE(r.strategy.in_mem("v2"));
    EXPECT_TRUE(r.strategy.in_outcome("v2"));
    EXPECT_FALSE(r.strategy.in_mem("v5"));
    EXPECT_FALSE(r.strategy.in_outcome("v5"));
    for (const auto& a : r.advice)
        if (a.covariate == "v2") EXPECT_EQ(a.alternative, Placement::mem_only);
}

TEST(Recommend, ConfoundersNeverLeftOut) {
    // every subset of roles mixed with a DAG 3 and DAG 4 covariate
    for (int mask = 0; mask < 256; ++mask) {
        std::map<std::string, DagRole> roles{{"c3", role_from_index(3)}, {"c4", role_from_index(4)}};
        for (int d = 1; d <= 8; ++d)
            if (mask & (1 << (d - 1))) roles["v" + std::to_string(d)] = role_from_index(d);
        auto r = recommend(roles);
        for (const auto& c : {"c3", "c4"}) {
            EXPECT_TRUE(r.strategy.in_mem(c));
            EXPECT_TRUE(r.strategy.in_outcome(c));
        }
    }
}

TEST(Counterexample, NeitherModelFiveThirds) {
    auto r = verify_counterexample(4, {1.0, 1.0, 1.0}, CounterexampleTarget::neither_model);
    EXPECT_LT(std::abs(r.lhs - 5.0 / 3.0), 1e-12);
    EXPECT_LT(std::abs(r.rhs - 1.0), 1e-12);
    EXPECT_FALSE(r.equal);
}

TEST(Counterexample, NeitherModelDegenerateEqual) {
    auto r = verify_counterexample(std::nullopt, {0.0, 0.0, 1.0}, CounterexampleTarget::neither_model);
    EXPECT_TRUE(r.equal);
}

TEST(Counterexample, Dag2UnequalForNonzeroA) {
    for (double a : {0.1, -0.1, 0.5, -0.5, 1.0, -1.0, 2.0, -2.0}) {
        auto r = verify_counterexample(2, {a, 0.0, 1.0}, CounterexampleTarget::neither_model);
        EXPECT_FALSE(r.equal) << a;
    }
}

TEST(Counterexample, OutcomeOnlyDag8) {
    // worked by hand: lhs = 11/14, rhs = 1
    auto r = verify_counterexample(8, {1.0, 2.0, 0.0}, CounterexampleTarget::outcome_only);
    EXPECT_NEAR(r.lhs, 11.0 / 14.0, 1e-12);
    EXPECT_NEAR(r.rhs, 1.0, 1e-12);
    EXPECT_FALSE(r.equal);
}

TEST(Counterexample, ParameterChecks) {
    EXPECT_THROW(verify_counterexample(2, {1.0, 1.0, 1.0}, CounterexampleTarget::neither_model), DomainError);
    EXPECT_THROW(verify_counterexample(5, {0.0, 0.0, 1.0}, CounterexampleTarget::neither_model), DomainError);
    EXPECT_THROW(verify_counterexample(4, {1.0, 1.0, 2.0}, CounterexampleTarget::neither_model), DomainError);
}

TEST(ClosedFormPlim, MatchesOracleEverywhere) {
    for (int d = 1; d <= 8; ++d)
        for (S l : kAllStrategies) {
            DgpCoefficients g = base_case(d);
            EXPECT_NEAR(closed_form_plim(l, g), oracle_plim(g, l), 1e-12) << d << " " << to_string(l);
            g.eta_v = d % 2 ? -0.7 : 0.3;
            g.theta_v = 1.3;
            g.beta_v = -0.4;
            EXPECT_NEAR(closed_form_plim(l, g), oracle_plim(g, l), 1e-12) << d << " " << to_string(l);
        }
}

TEST(ClosedFormPlim, PercentBiasAnchors) {
    for (S l : kAllStrategies) EXPECT_NEAR(closed_form_plim(l, base_case(5)), 0.5, 1e-12);
    EXPECT_NEAR(100.0 * (closed_form_plim(S::NM, base_case(3)) - 0.5) / 0.5, 97.0, 1.0);
    EXPECT_NEAR(100.0 * (closed_form_plim(S::NN, base_case(2)) - 0.5) / 0.5, 32.0, 1.0);
}

TEST(ClosedFormPlim, DegenerateThrows) {
    DgpCoefficients g = base_case(5);
    g.theta_x = 0.0;
    EXPECT_THROW(closed_form_plim(S::NN, g), SingularityError);
}

TEST(VerifyTable, AllCellsPass) {
    auto cells = verify_validity_table();
    ASSERT_EQ(cells.size(), 32u);
    for (const auto& c : cells) EXPECT_TRUE(c.pass) << c.dag_index << " " << to_string(c.strategy) << " " << c.rel_dev;
}

TEST(VerifyTable, InjectedConfoundingFailsValidCells) {
    // DAG 5 claims all valid; wire V into X and Y and the claim breaks
    DgpCoefficients g = base_case(5);
    g.eta_v = 0.4;
    g.beta_v = 0.8;
    auto cells = verify_validity_table({{5, g}});
    int failed = 0;
    for (const auto& c : cells)
        if (!c.pass) {
            EXPECT_EQ(c.dag_index, 5);
            ++failed;
        }
    EXPECT_EQ(failed, 3);
}
