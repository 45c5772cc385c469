#include "calibra/population.hpp"

#include "calibra/errors.hpp"
#include "calibra/linalg.hpp"

namespace calibra {

double pop_cov(const ImpliedCovariance& s, const Combo& a, const Combo& b) {
    double c = 0.0;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) c += a[i] * s(i, j) * b[j];
    return c;
}

Projection project(const ImpliedCovariance& s, const Combo& target, const std::vector<Combo>& regressors) {
    std::size_t k = regressors.size();
    Matrix g(k, k);
    Vector h(k);
    for (std::size_t i = 0; i < k; ++i) {
        h[i] = pop_cov(s, regressors[i], target);
        for (std::size_t j = 0; j < k; ++j) g(i, j) = pop_cov(s, regressors[i], regressors[j]);
    }
    Projection p;
    p.coef = solve_sym(g, h);
    double explained = 0.0;
    for (std::size_t i = 0; i < k; ++i) explained += h[i] * p.coef[i];
    p.residual_var = pop_cov(s, target, target) - explained;
    return p;
}

PopulationFit population_fit(const DgpCoefficients& dgp, StrategyLabel strategy) {
    ImpliedCovariance s = implied_covariance(dgp);
    const Combo v{1, 0, 0, 0}, x{0, 1, 0, 0}, z{0, 0, 1, 0}, y{0, 0, 0, 1};
    PopulationFit f;
    std::vector<Combo> mem_reg{z};
    if (label_in_mem(strategy)) mem_reg.push_back(v);
    Projection m = project(s, x, mem_reg);
    f.alpha = m.coef;
    f.sigma2_x = m.residual_var;
    f.eta = Combo{0, 0, 0, 0};
    for (std::size_t k = 0; k < mem_reg.size(); ++k)
        for (int i = 0; i < 4; ++i) f.eta[i] += m.coef[k] * mem_reg[k][i];
    std::vector<Combo> out_reg{f.eta};
    if (label_in_outcome(strategy)) out_reg.push_back(v);
    Projection o = project(s, y, out_reg);
    f.beta1 = o.coef[0];
    f.sigma2_y = o.residual_var;
    return f;
}

}
