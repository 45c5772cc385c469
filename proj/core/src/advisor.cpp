#include "calibra/advisor.hpp"

#include "calibra/errors.hpp"

#include <cmath>

namespace calibra {

namespace {

using S = StrategyLabel;

ValidityCell cell(bool valid, bool efficient = false, bool caveat = false) {
    ValidityCell c{valid, efficient, std::nullopt};
    if (caveat) c.caveat = kResidualCaveat;
    return c;
}

struct Moments {
    double vv, vz, czv, cxz, cxv, cyz, cyv;
};

Moments moments(const DgpCoefficients& dgp) {
    ImpliedCovariance s = implied_covariance(dgp);
    using I = ImpliedCovariance;
    return {s(I::V, I::V), s(I::Z, I::Z), s(I::Z, I::V), s(I::X, I::Z),
            s(I::X, I::V), s(I::Y, I::Z), s(I::Y, I::V)};
}

double safe_div(double num, double den, const char* what) {
    if (!(std::abs(den) > 1e-14)) throw SingularityError(std::string("degenerate covariance: ") + what + " is zero");
    return num / den;
}

}

std::map<StrategyLabel, ValidityCell> validity_matrix(const DagRole& role) {
    switch (role.dag_index) {
    case 1: return {{S::OM, cell(true, true)}, {S::NN, cell(true)}, {S::NM, cell(true)}, {S::ON, cell(true, true)}};
    case 2:
        return {{S::OM, cell(true, true)}, {S::NN, cell(false)}, {S::NM, cell(true, false, true)},
                {S::ON, cell(false)}};
    case 3:
    case 4: return {{S::OM, cell(true)}, {S::NN, cell(false)}, {S::NM, cell(false)}, {S::ON, cell(false)}};
    case 5: return {{S::OM, cell(true)}, {S::NN, cell(true)}, {S::NM, cell(true)}, {S::ON, cell(true)}};
    case 6:
        return {{S::OM, cell(true, true)}, {S::NN, cell(true)}, {S::NM, cell(true, true, true)},
                {S::ON, cell(false)}};
    case 7:
    case 8:
        return {{S::OM, cell(true)}, {S::NN, cell(true)}, {S::NM, cell(true, true, true)}, {S::ON, cell(false)}};
    }
    throw DomainError("DAG index must be 1..8");
}

const char* to_string(Placement p) {
    switch (p) {
    case Placement::both: return "both";
    case Placement::mem_only: return "MEM only";
    case Placement::outcome_only: return "outcome only";
    case Placement::neither: return "neither";
    }
    return "?";
}

Recommendation recommend(const std::map<std::string, DagRole>& roles) {
    Recommendation rec;
    for (const auto& [name, role] : roles) {
        CovariateAdvice a;
        a.covariate = name;
        a.role = role;
        switch (role.dag_index) {
        case 1:
            a.placement = Placement::outcome_only;
            a.alternative = Placement::both;
            a.rationale = "affects Y only: adjust in the outcome model; adding it to the MEM is optional";
            break;
        case 2:
            a.placement = Placement::both;
            a.alternative = Placement::mem_only;
            a.rationale = "affects Z and Y: include in both models; MEM-only is also valid but its sandwich "
                          "variance can under-cover in finite samples";
            break;
        case 3:
        case 4:
            a.placement = Placement::both;
            a.rationale = "confounds X and Y: must be in both the MEM and the outcome model";
            break;
        case 5:
            a.placement = Placement::neither;
            a.rationale = "unrelated to X, Z and Y: no adjustment needed";
            break;
        default:
            a.placement = Placement::mem_only;
            a.rationale = "affects the measurement process but not Y: MEM only, for efficiency";
            break;
        }
        a.collect_in_both_studies = a.placement == Placement::both || a.placement == Placement::mem_only;
        if (a.placement == Placement::both || a.placement == Placement::mem_only) rec.strategy.mem_covariates.push_back(name);
        if (a.placement == Placement::both || a.placement == Placement::outcome_only)
            rec.strategy.outcome_covariates.push_back(name);
        rec.advice.push_back(std::move(a));
    }
    return rec;
}

CounterexampleResult verify_counterexample(std::optional<int> dag_index, const CounterexampleParams& p,
                                           CounterexampleTarget target) {
    double a = p.a, b = p.b, c = target == CounterexampleTarget::neither_model ? 1.0 : p.c;
    if (!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(c)) throw DomainError("parameters must be finite");
    if (target == CounterexampleTarget::neither_model && p.c != 1.0)
        throw DomainError("the neither-model counterexample fixes c = 1");
    if (dag_index) {
        int d = *dag_index;
        if (d == 1 || d == 5 || d < 1 || d > 8) throw DomainError("counterexamples exist for DAGs 2,3,4,6,7,8 only");
        DagRole r = role_from_index(d);
        if (target == CounterexampleTarget::neither_model && !r.affects_y)
            throw DomainError("the neither-model counterexample needs V -> Y (DAG 2, 3 or 4)");
        if ((a != 0.0) != r.affects_z) throw DomainError("parameter a must be nonzero exactly when V -> Z");
        if ((b != 0.0) != r.affects_x) throw DomainError("parameter b must be nonzero exactly when V -> X");
        if (target == CounterexampleTarget::outcome_only && (c != 0.0) != r.affects_y)
            throw DomainError("parameter c must be nonzero exactly when V -> Y");
    }

    double cov_yz = b * b + a * b + a * c + b * c + 1.0;
    double den_rhs = 0.25 * (a * a + b * b + 2 * a * b + 2) + 0.25 * (b - a) * (b - a) + 2 * 0.5 * 0.5 * (b - a) * (a + b);
    double num_rhs = 0.5 * cov_yz + 0.5 * (b - a) * (b + c) - c * b;
    CounterexampleResult r;
    if (target == CounterexampleTarget::neither_model) {
        r.lhs = safe_div(cov_yz, b * b + a * b + 1.0, "Cov(X,Z)");
    } else {
        double shrink = 1.0 - (a + b) * (a + b) / (a * a + 2 * a * b + b * b + 2);
        r.lhs = safe_div(cov_yz - (b + c) * (a + b), (b * b + a * b + 1.0) * shrink, "outcome-only denominator");
    }
    r.rhs = safe_div(num_rhs, den_rhs, "Var(E[X|Z,V])");
    r.equal = std::abs(r.lhs - r.rhs) < 1e-12;
    return r;
}

double closed_form_plim(StrategyLabel strategy, const DgpCoefficients& dgp) {
    Moments m = moments(dgp);
    double det = m.vz * m.vv - m.czv * m.czv;
    switch (strategy) {
    case S::NN: return safe_div(m.cyz, m.cxz, "Cov(X,Z)");
    case S::ON: {
        double a1 = safe_div(m.cxz, m.vz, "Var(Z)");
        return safe_div(m.cyz * m.vv - m.cyv * m.czv, a1 * det, "alpha1*(Var(Z)Var(V)-Cov(Z,V)^2)");
    }
    case S::OM:
    case S::NM: {
        double a1 = safe_div(m.cxz * m.vv - m.cxv * m.czv, det, "Var(Z)Var(V)-Cov(Z,V)^2");
        double a2 = safe_div(m.cxv * m.vz - m.cxz * m.czv, det, "Var(Z)Var(V)-Cov(Z,V)^2");
        double cov_y_eta = a1 * m.cyz + a2 * m.cyv;
        double var_eta = a1 * a1 * m.vz + a2 * a2 * m.vv + 2 * a1 * a2 * m.czv;
        if (strategy == S::NM) return safe_div(cov_y_eta, var_eta, "Var(eta)");
        double cov_eta_v = a1 * m.czv + a2 * m.vv;
        return safe_div(cov_y_eta * m.vv - m.cyv * cov_eta_v, var_eta * m.vv - cov_eta_v * cov_eta_v,
                        "Var(eta)Var(V)-Cov(eta,V)^2");
    }
    }
    throw DomainError("unknown strategy");
}

double closed_form_plim(const AdjustmentStrategy& strategy, const DgpCoefficients& dgp) {
    auto l = strategy.label();
    if (!l) throw DomainError("closed_form_plim needs a uniform strategy, got " + strategy.describe());
    return closed_form_plim(*l, dgp);
}

DgpCoefficients base_case(int d) {
    DagRole r = role_from_index(d);
    DgpCoefficients g;
    g.eta_v = r.affects_x ? 0.4 : 0.0;
    g.theta_x = 0.5;
    g.theta_v = r.affects_z ? 0.1 : 0.0;
    g.beta_x = 0.5;
    g.beta_v = r.affects_y ? 0.8 : 0.0;
    return g;
}

std::vector<VerifyCell> verify_validity_table(const std::map<int, DgpCoefficients>& overrides) {
    std::vector<VerifyCell> out;
    for (int d = 1; d <= 8; ++d) {
        auto it = overrides.find(d);
        DgpCoefficients g = it != overrides.end() ? it->second : base_case(d);
        auto table = validity_matrix(role_from_index(d));
        for (S s : kAllStrategies) {
            VerifyCell c;
            c.dag_index = d;
            c.strategy = s;
            c.claimed_valid = table.at(s).valid;
            c.truth = g.beta_x;
            c.plim = closed_form_plim(s, g);
            c.rel_dev = std::abs(c.plim - g.beta_x) / std::abs(g.beta_x);
            c.pass = c.claimed_valid ? c.rel_dev < 1e-9 : c.rel_dev > 0.01;
            out.push_back(c);
        }
    }
    return out;
}

}
