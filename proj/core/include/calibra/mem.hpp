#pragma once

#include "calibra/linalg.hpp"
#include "calibra/model.hpp"

#include <string>
#include <vector>

namespace calibra {

struct MemFit {
    Vector alpha;  // (intercept, Z, covariates...)
    double residual_var = 0.0;
    std::vector<std::string> included_covariates;
    Matrix xtx_inv;
    Vector residuals;
    std::size_t n = 0;
};

// rows (1, Z, covariates...)
Matrix mem_design(const Dataset& d, const std::vector<std::string>& covariates);

MemFit fit_mem(const Dataset& validation, const std::vector<std::string>& covariates);
Vector impute_x(const Dataset& main, const MemFit& fit);

// Koenker's studentised Breusch-Pagan test of the MEM residuals against the MEM regressors
double homoskedasticity_p(const Dataset& validation, const MemFit& fit);

}
