#pragma once

#include "calibra/model.hpp"

#include <array>
#include <vector>

namespace calibra {

// linear combination of (V, X, Z, Y)
using Combo = std::array<double, 4>;

double pop_cov(const ImpliedCovariance& s, const Combo& a, const Combo& b);

struct Projection {
    std::vector<double> coef;
    double residual_var = 0.0;
};

// population least-squares projection of target on regressors (intercept implicit)
Projection project(const ImpliedCovariance& s, const Combo& target, const std::vector<Combo>& regressors);

struct PopulationFit {
    std::vector<double> alpha;  // slopes of X on (Z[, V])
    double sigma2_x = 0.0;
    Combo eta{};
    double beta1 = 0.0;
    double sigma2_y = 0.0;
};

PopulationFit population_fit(const DgpCoefficients& dgp, StrategyLabel strategy);

}
