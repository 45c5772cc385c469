#include "calibra/mem.hpp"

#include "calibra/errors.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>

namespace calibra {

Matrix mem_design(const Dataset& d, const std::vector<std::string>& covariates) {
    std::size_t p = 2 + covariates.size();
    Matrix x(d.n(), p);
    auto z = d.column(kSurrogate);
    std::vector<std::span<const double>> cs;
    for (const auto& c : covariates) cs.push_back(d.column(c));
    for (std::size_t i = 0; i < d.n(); ++i) {
        double* r = x.row(i);
        r[0] = 1.0;
        r[1] = z[i];
        for (std::size_t k = 0; k < cs.size(); ++k) r[2 + k] = cs[k][i];
    }
    return x;
}

MemFit fit_mem(const Dataset& validation, const std::vector<std::string>& covariates) {
    Matrix x = mem_design(validation, covariates);
    auto xs = validation.column(kExposure);
    OlsFit ols = ols_solve(x, Vector(xs.begin(), xs.end()));
    MemFit fit;
    fit.alpha = std::move(ols.coef);
    fit.residual_var = ols.residual_var;
    fit.included_covariates = covariates;
    fit.xtx_inv = std::move(ols.xtx_inv);
    fit.residuals = std::move(ols.residuals);
    fit.n = validation.n();
    return fit;
}

Vector impute_x(const Dataset& main, const MemFit& fit) {
    if (fit.alpha.size() != 2 + fit.included_covariates.size())
        throw ShapeError("MEM coefficient vector does not match its covariate list");
    auto z = main.column(kSurrogate);
    std::vector<std::span<const double>> cs;
    for (const auto& c : fit.included_covariates) cs.push_back(main.column(c));
    Vector eta(main.n());
    for (std::size_t i = 0; i < main.n(); ++i) {
        double v = fit.alpha[0] + fit.alpha[1] * z[i];
        for (std::size_t k = 0; k < cs.size(); ++k) v += fit.alpha[2 + k] * cs[k][i];
        eta[i] = v;
    }
    return eta;
}

double homoskedasticity_p(const Dataset& validation, const MemFit& fit) {
    Matrix x = mem_design(validation, fit.included_covariates);
    std::size_t n = x.rows();
    if (fit.residuals.size() != n) throw ShapeError("MEM residuals do not match the validation arm");
    Vector e2(n);
    for (std::size_t i = 0; i < n; ++i) e2[i] = fit.residuals[i] * fit.residuals[i];
    double mean = 0.0;
    for (double v : e2) mean += v;
    mean /= static_cast<double>(n);
    double tss = 0.0;
    for (double v : e2) tss += (v - mean) * (v - mean);
    if (tss == 0.0) return 1.0;
    OlsFit aux = ols_solve(x, e2);
    double rss = 0.0;
    for (double r : aux.residuals) rss += r * r;
    double r2 = std::clamp(1.0 - rss / tss, 0.0, 1.0);
    double lm = static_cast<double>(n) * r2;
    boost::math::chi_squared dist(static_cast<double>(x.cols() - 1));
    return boost::math::cdf(boost::math::complement(dist, lm));
}

}
