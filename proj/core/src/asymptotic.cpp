#include "calibra/errors.hpp"
#include "calibra/estimators.hpp"
#include "calibra/population.hpp"

#include <cmath>

namespace calibra {

namespace {

void corr_ok(double c, double v1, double v2, const char* what) {
    if (v1 < 0 || v2 < 0) throw DomainError(std::string("negative variance in moment set (") + what + ")");
    if (v1 == 0 || v2 == 0) return;
    if (std::abs(c) / std::sqrt(v1 * v2) > 1.0 + 1e-9)
        throw DomainError(std::string("implied correlation exceeds 1 in moment set (") + what + ")");
}

double nonzero(double d, const char* what) {
    if (!(std::abs(d) > 1e-14)) throw SingularityError(std::string("degenerate moments: ") + what + " is zero");
    return d;
}

}

void MomentSet::check() const {
    corr_ok(cov_zv_n, var_z_n, var_v_n, "Z,V validation");
    corr_ok(cov_zv_m, var_z_m, var_v_m, "Z,V main");
    corr_ok(cov_eta_m_z, var_eta_m, var_z_m, "eta_M,Z");
    corr_ok(cov_eta_m_v, var_eta_m, var_v_m, "eta_M,V");
    corr_ok(cov_eta_o_z, var_eta_o, var_z_m, "eta_-,Z");
    corr_ok(cov_eta_o_v, var_eta_o, var_v_m, "eta_-,V");
    if (!(rho > 0)) throw DomainError("rho must be positive");
}

MomentSet moments_from_dgp(const DgpCoefficients& dgp, double rho) {
    ImpliedCovariance s = implied_covariance(dgp);
    const Combo v{1, 0, 0, 0}, z{0, 0, 1, 0};
    Combo em = population_fit(dgp, StrategyLabel::OM).eta;
    Combo eo = population_fit(dgp, StrategyLabel::NN).eta;
    MomentSet ms;
    ms.var_z_n = ms.var_z_m = pop_cov(s, z, z);
    ms.var_v_n = ms.var_v_m = pop_cov(s, v, v);
    ms.cov_zv_n = ms.cov_zv_m = pop_cov(s, z, v);
    ms.var_eta_m = pop_cov(s, em, em);
    ms.cov_eta_m_z = pop_cov(s, em, z);
    ms.cov_eta_m_v = pop_cov(s, em, v);
    ms.var_eta_o = pop_cov(s, eo, eo);
    ms.cov_eta_o_z = pop_cov(s, eo, z);
    ms.cov_eta_o_v = pop_cov(s, eo, v);
    ms.rho = rho;
    return ms;
}

double asymptotic_variance(StrategyLabel strategy, const MomentSet& ms, double beta, double sigma2_x,
                           double sigma2_y) {
    ms.check();
    double inv_rho = 1.0 / ms.rho;
    double b2 = beta * beta;
    switch (strategy) {
    case StrategyLabel::OM: {
        double c11 = 1.0 / nonzero(ms.var_z_n * ms.var_v_n - ms.cov_zv_n * ms.cov_zv_n, "Var(Z)Var(V)-Cov(Z,V)^2");
        double c22 = 1.0 / nonzero(ms.var_eta_m * ms.var_v_m - ms.cov_eta_m_v * ms.cov_eta_m_v,
                                   "Var(eta)Var(V)-Cov(eta,V)^2");
        double k = ms.cov_eta_m_z * ms.var_v_m - ms.cov_zv_m * ms.cov_eta_m_v;
        return sigma2_y * c22 * ms.var_v_m + inv_rho * sigma2_x * b2 * c11 * c22 * c22 * k * k * ms.var_v_n;
    }
    case StrategyLabel::NN: {
        double ve = nonzero(ms.var_eta_o, "Var(eta)");
        double vz = nonzero(ms.var_z_n, "Var(Z)");
        return sigma2_y / ve + inv_rho * sigma2_x * b2 * ms.cov_eta_o_z * ms.cov_eta_o_z / (ve * ve * vz);
    }
    case StrategyLabel::NM: {
        double ve = nonzero(ms.var_eta_m, "Var(eta)");
        double c11 = 1.0 / nonzero(ms.var_z_n * ms.var_v_n - ms.cov_zv_n * ms.cov_zv_n, "Var(Z)Var(V)-Cov(Z,V)^2");
        double k = ms.cov_eta_m_z * ms.cov_eta_m_z * ms.var_v_n -
                   2.0 * ms.cov_eta_m_z * ms.cov_eta_m_v * ms.cov_zv_n +
                   ms.cov_eta_m_v * ms.cov_eta_m_v * ms.var_z_n;
        return sigma2_y / ve + inv_rho * sigma2_x * b2 * c11 * k / (ve * ve);
    }
    case StrategyLabel::ON: {
        double vz = nonzero(ms.var_z_n, "Var(Z)");
        double c22 = 1.0 / nonzero(ms.var_eta_o * ms.var_v_m - ms.cov_eta_o_v * ms.cov_eta_o_v,
                                   "Var(eta)Var(V)-Cov(eta,V)^2");
        double k = ms.cov_eta_o_z * ms.var_v_m - ms.cov_zv_m * ms.cov_eta_o_v;
        return sigma2_y * c22 * ms.var_v_m + inv_rho * sigma2_x * b2 * c22 * c22 * k * k / vz;
    }
    }
    throw DomainError("unknown strategy");
}

double asymptotic_variance(const AdjustmentStrategy& strategy, const MomentSet& ms, double beta, double sigma2_x,
                           double sigma2_y) {
    auto l = strategy.label();
    if (!l) throw DomainError("asymptotic_variance needs a uniform strategy, got " + strategy.describe());
    return asymptotic_variance(*l, ms, beta, sigma2_x, sigma2_y);
}

}
