#include "calibra/lasso.hpp"

#include "calibra/errors.hpp"
#include "calibra/logistic.hpp"
#include "calibra/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace calibra {

namespace {

constexpr int kMaxSweeps = 100000;
constexpr double kChangeTol = 1e-9;

double soft_threshold(double z, double g) {
    if (z > g) return z - g;
    if (z < -g) return z + g;
    return 0.0;
}

void check_grid(const Vector& grid) {
    if (grid.empty()) throw DomainError("lambda grid is empty");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] >= 0.0) || !std::isfinite(grid[i])) throw DomainError("lambda values must be finite and >= 0");
        if (i > 0 && !(grid[i] < grid[i - 1])) throw DomainError("lambda grid must be strictly decreasing");
    }
}

Matrix columns(const Dataset& d, const std::vector<std::string>& names) {
    Matrix x(d.n(), names.size());
    for (std::size_t j = 0; j < names.size(); ++j) {
        auto c = d.column(names[j]);
        for (std::size_t i = 0; i < d.n(); ++i) x(i, j) = c[i];
    }
    return x;
}

Vector column_vec(const Dataset& d, const std::string& name) {
    auto c = d.column(name);
    return Vector(c.begin(), c.end());
}

struct Fit {
    Vector beta;  // (Intercept, eta, confounders...)
    Vector mem_coef;
    CvResult cv;
    LassoPath path;
};

Fit pipeline(const Dataset& main, const Dataset& val, const std::vector<std::string>& mem_cols,
             const std::vector<std::string>& confounders, const DataDrivenOptions& opt, std::uint64_t cv_seed) {
    Matrix xv = columns(val, mem_cols);
    Vector x = column_vec(val, kExposure);
    Fit f;
    f.cv = cross_validate_lasso(xv, x, opt.lambda_grid, opt.folds, cv_seed);
    f.path = fit_lasso_path(xv, x, opt.lambda_grid);
    std::size_t b = f.cv.best_index;
    f.mem_coef.push_back(f.path.intercepts[b]);
    for (std::size_t j = 0; j < mem_cols.size(); ++j) f.mem_coef.push_back(f.path.coefs(b, j));

    Matrix xm = columns(main, mem_cols);
    Vector eta = f.path.predict(b, xm);
    Matrix x2(main.n(), 2 + confounders.size());
    std::vector<std::span<const double>> cs;
    for (const auto& c : confounders) cs.push_back(main.column(c));
    for (std::size_t i = 0; i < main.n(); ++i) {
        x2(i, 0) = 1.0;
        x2(i, 1) = eta[i];
        for (std::size_t k = 0; k < cs.size(); ++k) x2(i, 2 + k) = cs[k][i];
    }
    Vector y = column_vec(main, kOutcome);
    f.beta = opt.link == Link::identity ? ols_solve(x2, y).coef : fit_logistic_irls(x2, y).coef;
    return f;
}

double quantile(Vector v, double q) {
    std::sort(v.begin(), v.end());
    double h = (static_cast<double>(v.size()) - 1.0) * q;
    std::size_t lo = static_cast<std::size_t>(std::floor(h));
    std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}

Vector LassoPath::predict(std::size_t k, const Matrix& design) const {
    if (design.cols() != coefs.cols()) throw ShapeError("lasso predict: design has wrong number of columns");
    Vector out(design.rows(), intercepts.at(k));
    for (std::size_t i = 0; i < design.rows(); ++i)
        for (std::size_t j = 0; j < design.cols(); ++j) out[i] += coefs(k, j) * design(i, j);
    return out;
}

double lasso_objective(const Matrix& xs, const Vector& yc, const Vector& b, double lambda) {
    Vector fit = matvec(xs, b);
    double rss = 0.0;
    for (std::size_t i = 0; i < yc.size(); ++i) rss += (yc[i] - fit[i]) * (yc[i] - fit[i]);
    double l1 = 0.0;
    for (double v : b) l1 += std::abs(v);
    return rss / (2.0 * static_cast<double>(yc.size())) + lambda * l1;
}

Vector default_lambda_grid() {
    Vector g;
    for (int k = 12; k >= -12; --k) g.push_back(std::pow(10.0, 0.25 * k));
    return g;
}

LassoPath fit_lasso_path(const Matrix& design, const Vector& response, const Vector& grid, LassoTrace* trace) {
    check_grid(grid);
    std::size_t n = design.rows(), p = design.cols();
    if (response.size() != n) throw ShapeError("fit_lasso_path: response length mismatch");
    if (n < 2 || p == 0) throw InsufficientDataError("fit_lasso_path: need at least 2 rows and 1 predictor");
    double dn = static_cast<double>(n);

    LassoPath path;
    path.lambda_grid = grid;
    path.standardization.resize(p);
    Matrix xs(n, p);
    for (std::size_t j = 0; j < p; ++j) {
        double m = 0.0;
        for (std::size_t i = 0; i < n; ++i) m += design(i, j);
        m /= dn;
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) ss += (design(i, j) - m) * (design(i, j) - m);
        double sd = std::sqrt(ss / dn);
        if (!(sd > 0.0)) throw DomainError("fit_lasso_path: predictor " + std::to_string(j) + " is constant");
        path.standardization[j] = {m, sd};
        for (std::size_t i = 0; i < n; ++i) xs(i, j) = (design(i, j) - m) / sd;
    }
    double ybar = std::accumulate(response.begin(), response.end(), 0.0) / dn;
    Vector r(n);
    for (std::size_t i = 0; i < n; ++i) r[i] = response[i] - ybar;
    Vector yc = r;

    // column-major copy for the inner loop
    std::vector<Vector> xc(p, Vector(n));
    for (std::size_t j = 0; j < p; ++j)
        for (std::size_t i = 0; i < n; ++i) xc[j][i] = xs(i, j);

    Vector b(p, 0.0);
    path.coefs = Matrix(grid.size(), p);
    path.intercepts.resize(grid.size());
    path.sweeps.resize(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        double lam = grid[k];
        int sweep = 0;
        for (;; ++sweep) {
            if (sweep >= kMaxSweeps)
                throw ConvergenceError("fit_lasso_path: no convergence at lambda " + std::to_string(lam));
            std::vector<double> objs;
            double maxd = 0.0;
            for (std::size_t j = 0; j < p; ++j) {
                const Vector& xj = xc[j];
                double z = 0.0;
                for (std::size_t i = 0; i < n; ++i) z += xj[i] * r[i];
                z = z / dn + b[j];
                double nb = soft_threshold(z, lam);
                double d = nb - b[j];
                if (d != 0.0) {
                    for (std::size_t i = 0; i < n; ++i) r[i] -= d * xj[i];
                    b[j] = nb;
                }
                maxd = std::max(maxd, std::abs(d));
                if (trace) objs.push_back(lasso_objective(xs, yc, b, lam));
            }
            if (trace) trace->objective_per_sweep.push_back(std::move(objs));
            if (maxd < kChangeTol) break;
        }
        path.sweeps[k] = sweep + 1;
        double icpt = ybar;
        for (std::size_t j = 0; j < p; ++j) {
            double c = b[j] / path.standardization[j].second;
            path.coefs(k, j) = c;
            icpt -= c * path.standardization[j].first;
        }
        path.intercepts[k] = icpt;
    }
    return path;
}

CvResult cross_validate_lasso(const Matrix& design, const Vector& response, const Vector& grid, std::size_t k,
                              std::uint64_t seed) {
    std::size_t n = design.rows();
    if (k < 2) throw DomainError("cross_validate_lasso: need at least 2 folds");
    if (n < k) throw InsufficientDataError("cross_validate_lasso: fewer rows than folds");
    check_grid(grid);
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(idx);

    std::size_t g = grid.size();
    std::vector<Vector> fold_mse(k, Vector(g, 0.0));
    for (std::size_t f = 0; f < k; ++f) {
        std::size_t lo = f * n / k, hi = (f + 1) * n / k;
        std::vector<std::size_t> train, test(idx.begin() + lo, idx.begin() + hi);
        train.insert(train.end(), idx.begin(), idx.begin() + lo);
        train.insert(train.end(), idx.begin() + hi, idx.end());
        Matrix xt(train.size(), design.cols()), xh(test.size(), design.cols());
        Vector yt(train.size()), yh(test.size());
        for (std::size_t i = 0; i < train.size(); ++i) {
            for (std::size_t j = 0; j < design.cols(); ++j) xt(i, j) = design(train[i], j);
            yt[i] = response[train[i]];
        }
        for (std::size_t i = 0; i < test.size(); ++i) {
            for (std::size_t j = 0; j < design.cols(); ++j) xh(i, j) = design(test[i], j);
            yh[i] = response[test[i]];
        }
        LassoPath path = fit_lasso_path(xt, yt, grid);
        for (std::size_t l = 0; l < g; ++l) {
            Vector pred = path.predict(l, xh);
            double s = 0.0;
            for (std::size_t i = 0; i < yh.size(); ++i) s += (yh[i] - pred[i]) * (yh[i] - pred[i]);
            fold_mse[f][l] = s / static_cast<double>(yh.size());
        }
    }
    CvResult res;
    res.cv_mean.assign(g, 0.0);
    res.cv_se.assign(g, 0.0);
    double dk = static_cast<double>(k);
    for (std::size_t l = 0; l < g; ++l) {
        double m = 0.0;
        for (std::size_t f = 0; f < k; ++f) m += fold_mse[f][l];
        m /= dk;
        double ss = 0.0;
        for (std::size_t f = 0; f < k; ++f) ss += (fold_mse[f][l] - m) * (fold_mse[f][l] - m);
        res.cv_mean[l] = m;
        res.cv_se[l] = std::sqrt(ss / (dk - 1.0) / dk);
    }
    res.best_index = 0;
    for (std::size_t l = 1; l < g; ++l)
        if (res.cv_mean[l] < res.cv_mean[res.best_index]) res.best_index = l;
    res.best_lambda = grid[res.best_index];
    return res;
}

DataDrivenResult data_driven_mem_estimate(const Dataset& main, const Dataset& validation,
                                          const std::vector<std::string>& candidates,
                                          const std::vector<std::string>& confounders,
                                          const DataDrivenOptions& opt) {
    auto bad = validate_dataset(validation, candidates, Link::identity);
    auto bad_m = validate_dataset(main, candidates, opt.link);
    auto bad_c = validate_dataset(main, confounders, opt.link);
    bad.insert(bad.end(), bad_m.begin(), bad_m.end());
    bad.insert(bad.end(), bad_c.begin(), bad_c.end());
    if (!bad.empty()) throw SchemaError(bad.front());

    std::vector<std::string> mem_cols{kSurrogate};
    mem_cols.insert(mem_cols.end(), candidates.begin(), candidates.end());

    Fit f = pipeline(main, validation, mem_cols, confounders, opt, derive_seed(opt.seed, 0, 0));
    DataDrivenResult out;
    out.beta = f.beta;
    out.beta1 = f.beta[1];
    out.coef_names = {"(Intercept)", "eta"};
    out.coef_names.insert(out.coef_names.end(), confounders.begin(), confounders.end());
    out.mem_coef = f.mem_coef;
    auto& sel = out.selection;
    sel.candidates = candidates;
    sel.best_lambda = f.cv.best_lambda;
    sel.lambda_grid = opt.lambda_grid;
    sel.path = f.path.coefs;
    sel.cv_mean = f.cv.cv_mean;
    for (std::size_t j = 0; j < candidates.size(); ++j)
        (f.mem_coef[2 + j] != 0.0 ? sel.retained : sel.zeroed).push_back(candidates[j]);

    out.bootstrap = opt.bootstrap;
    if (opt.bootstrap > 0) {
        for (std::size_t b = 0; b < opt.bootstrap; ++b) {
            Rng rng(derive_seed(opt.seed, b + 1, 1));
            std::vector<std::size_t> iv(validation.n()), im(main.n());
            for (auto& i : iv) i = static_cast<std::size_t>(rng.below(validation.n()));
            for (auto& i : im) i = static_cast<std::size_t>(rng.below(main.n()));
            Fit fb = pipeline(main.subset(im), validation.subset(iv), mem_cols, confounders, opt,
                              derive_seed(opt.seed, b + 1, 2));
            out.boot_estimates.push_back(fb.beta[1]);
        }
        double m = std::accumulate(out.boot_estimates.begin(), out.boot_estimates.end(), 0.0) /
                   static_cast<double>(opt.bootstrap);
        double ss = 0.0;
        for (double v : out.boot_estimates) ss += (v - m) * (v - m);
        out.boot_se = opt.bootstrap > 1 ? std::sqrt(ss / static_cast<double>(opt.bootstrap - 1)) : 0.0;
        out.ci_percentile = {quantile(out.boot_estimates, 0.025), quantile(out.boot_estimates, 0.975)};
        out.ci_normal = {out.beta1 - kWaldZ * out.boot_se, out.beta1 + kWaldZ * out.boot_se};
    }
    return out;
}

}
