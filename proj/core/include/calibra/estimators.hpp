#pragma once

#include "calibra/linalg.hpp"
#include "calibra/logistic.hpp"
#include "calibra/mem.hpp"
#include "calibra/model.hpp"

#include <string>
#include <utility>
#include <vector>

namespace calibra {

inline constexpr double kWaldZ = 1.959964;

struct StageDiagnostics {
    double stage1_score_max = 0.0;  // max_j |sum_i s_ij| / (n * column scale)
    double stage2_score_max = 0.0;
    int irls_iterations = 0;
};

// Var(beta) = A22^-1 [B22 + A21 A11^-1 B11 A11^-T A21^T] A22^-T
// A blocks are mean derivatives of the stage scores; B blocks are the variances of the mean scores.
struct SandwichBlocks {
    Matrix a11, b11;
    Matrix a21;
    Matrix a22, b22;
};

struct EstimateResult {
    AdjustmentStrategy strategy;
    Link link = Link::identity;
    std::vector<std::string> coef_names;  // "(Intercept)", "eta", covariates..., "eta:V"...
    Vector beta;
    MemFit mem;
    Matrix sandwich_cov;
    double se_beta1 = 0.0;
    std::pair<double, double> ci95{0.0, 0.0};
    double sigma2_y = 0.0;  // identity link only
    std::size_t n_main = 0;
    std::size_t n_validation = 0;
    std::vector<std::string> interaction_covariates;
    StageDiagnostics diagnostics;
    SandwichBlocks blocks;

    double beta1() const { return beta.at(1); }
    // beta(v) = gamma1 + gamma2' v over the interaction covariates
    double effect_at(const Vector& v) const;
    double se_effect_at(const Vector& v) const;
};

Matrix sandwich_variance(const SandwichBlocks& blocks);
// (1/n^2) sum_i s_i s_i'
Matrix meat_from_scores(const Matrix& score_contribs);

EstimateResult estimate_crs(const Dataset& main, const Dataset& validation, const AdjustmentStrategy& strategy,
                            const OutcomeModelSpec& spec);
EstimateResult estimate_with_interaction(const Dataset& main, const Dataset& validation,
                                         const AdjustmentStrategy& strategy, const OutcomeModelSpec& spec);

// exposure coefficient of Y on (1, Z, covariates) in the main arm, no correction
double naive_beta1(const Dataset& main, const std::vector<std::string>& covariates, Link link);

struct ConditionReport {
    double residual_var = 0.0;
    double beta1 = 0.0;
    double quantity_i = 0.0;  // residual_var * beta1^2
    bool condition_i = false;
    double prevalence = 0.0;
    double homoskedasticity_p = 1.0;
    bool homoskedastic = true;
    bool condition_ii = false;
    bool overall = false;
    std::string warning;
};

ConditionReport check_logistic_approx(const MemFit& mem, double beta1, double prevalence, double homoskedasticity_p);
ConditionReport assess_logistic_conditions(const Dataset& main, const Dataset& validation, const EstimateResult& r);

// _n: validation population, _m: main population. eta_m from the MEM with V, eta_o without.
struct MomentSet {
    double var_z_n = 0, var_v_n = 0, cov_zv_n = 0;
    double var_z_m = 0, var_v_m = 0, cov_zv_m = 0;
    double var_eta_m = 0, cov_eta_m_z = 0, cov_eta_m_v = 0;
    double var_eta_o = 0, cov_eta_o_z = 0, cov_eta_o_v = 0;
    double rho = 1.0;  // n / m

    void check() const;
};

// population moments for the DGP, same population for both arms
MomentSet moments_from_dgp(const DgpCoefficients& dgp, double rho);

double asymptotic_variance(StrategyLabel strategy, const MomentSet& moments, double beta, double sigma2_x,
                           double sigma2_y);
double asymptotic_variance(const AdjustmentStrategy& strategy, const MomentSet& moments, double beta,
                           double sigma2_x, double sigma2_y);

}
