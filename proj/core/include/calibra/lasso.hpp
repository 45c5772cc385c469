#pragma once

#include "calibra/estimators.hpp"
#include "calibra/linalg.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace calibra {

struct LassoPath {
    Vector lambda_grid;
    Matrix coefs;  // grid x predictors, original scale
    Vector intercepts;
    std::vector<std::pair<double, double>> standardization;  // (mean, sd) per predictor
    std::vector<int> sweeps;

    Vector predict(std::size_t grid_index, const Matrix& design) const;
};

// objective (1/(2n))||y - X b||^2 + lambda ||b||_1 on standardized predictors
double lasso_objective(const Matrix& std_design, const Vector& centered_y, const Vector& std_coef, double lambda);

// optional per-update objective trace, for checking monotone descent
struct LassoTrace {
    std::vector<std::vector<double>> objective_per_sweep;
};

Vector default_lambda_grid();  // 10^3 down to 10^-3 in steps of 0.25 in log10

LassoPath fit_lasso_path(const Matrix& design, const Vector& response, const Vector& lambda_grid,
                         LassoTrace* trace = nullptr);

struct CvResult {
    double best_lambda = 0.0;
    std::size_t best_index = 0;
    Vector cv_mean;
    Vector cv_se;
};

CvResult cross_validate_lasso(const Matrix& design, const Vector& response, const Vector& lambda_grid,
                              std::size_t k, std::uint64_t seed);

struct DataDrivenOptions {
    Vector lambda_grid = default_lambda_grid();
    std::size_t folds = 10;
    std::uint64_t seed = 1;
    std::size_t bootstrap = 1000;
    Link link = Link::identity;
};

struct SelectionReport {
    std::vector<std::string> candidates;
    std::vector<std::string> retained;
    std::vector<std::string> zeroed;
    double best_lambda = 0.0;
    Vector lambda_grid;
    Matrix path;  // grid x (Z, candidates...), original scale
    Vector cv_mean;
};

struct DataDrivenResult {
    double beta1 = 0.0;
    Vector beta;
    std::vector<std::string> coef_names;
    Vector mem_coef;  // intercept, Z, candidates...
    SelectionReport selection;
    std::size_t bootstrap = 0;
    double boot_se = 0.0;
    std::pair<double, double> ci_percentile{0.0, 0.0};
    std::pair<double, double> ci_normal{0.0, 0.0};
    Vector boot_estimates;
};

DataDrivenResult data_driven_mem_estimate(const Dataset& main, const Dataset& validation,
                                          const std::vector<std::string>& candidate_covariates,
                                          const std::vector<std::string>& outcome_confounders,
                                          const DataDrivenOptions& opt = {});

}
