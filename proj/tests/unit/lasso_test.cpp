#include "calibra/errors.hpp"
#include "calibra/estimators.hpp"
#include "calibra/lasso.hpp"
#include "calibra/rng.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace calibra;
using calibra::testing::make;

namespace {

struct Xy {
    Matrix x;
    Vector y;
};

Xy random_problem(std::size_t n, std::size_t p, std::uint64_t seed, double signal = 1.0) {
    Rng rng(seed);
    Xy d{Matrix(n, p), Vector(n)};
    for (std::size_t i = 0; i < n; ++i) {
        double mu = 0.3;
        for (std::size_t j = 0; j < p; ++j) {
            d.x(i, j) = 2.0 * rng.normal() + static_cast<double>(j);
            if (j < 3) mu += signal * (j + 1) * 0.2 * d.x(i, j);
        }
        if (p > 1) d.x(i, 1) += 0.5 * d.x(i, 0);
        d.y[i] = mu + rng.normal();
    }
    return d;
}

double soft(double z, double l) { return z > l ? z - l : (z < -l ? z + l : 0.0); }

}

TEST(LassoPath, UnivariateClosedForm) {
    Xy d = random_problem(120, 1, 1);
    std::size_t n = d.y.size();
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) mx += d.x(i, 0) / n, my += d.y[i] / n;
    double vx = 0, cxy = 0;
    for (std::size_t i = 0; i < n; ++i) vx += (d.x(i, 0) - mx) * (d.x(i, 0) - mx) / n, cxy += (d.x(i, 0) - mx) * (d.y[i] - my) / n;
    double sd = std::sqrt(vx);
    Vector grid{1.0, 0.5, 0.2, 0.05, 0.01};
    LassoPath p = fit_lasso_path(d.x, d.y, grid);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        // standardized slope = soft(cov(xs, y), lambda) with var(xs) = 1
        double expect = soft(cxy / sd, grid[k]) / sd;
        EXPECT_NEAR(p.coefs(k, 0), expect, 1e-9) << grid[k];
        EXPECT_NEAR(p.intercepts[k], my - expect * mx, 1e-9);
    }
}

TEST(LassoPath, NullThreshold) {
    Xy d = random_problem(150, 4, 2);
    std::size_t n = d.y.size();
    double my = 0;
    for (double v : d.y) my += v / n;
    double lmax = 0;
    LassoPath probe = fit_lasso_path(d.x, d.y, {1e-3});
    for (std::size_t j = 0; j < 4; ++j) {
        auto [m, sd] = probe.standardization[j];
        double c = 0;
        for (std::size_t i = 0; i < n; ++i) c += (d.x(i, j) - m) / sd * (d.y[i] - my) / n;
        lmax = std::max(lmax, std::abs(c));
    }
    LassoPath p = fit_lasso_path(d.x, d.y, {lmax * 1.0000001, lmax * 0.9});
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(p.coefs(0, j), 0.0);
    EXPECT_NEAR(p.intercepts[0], my, 1e-12);
    double nz = 0;
    for (std::size_t j = 0; j < 4; ++j) nz += std::abs(p.coefs(1, j));
    EXPECT_GT(nz, 0.0);
}

TEST(LassoPath, UnpenalizedEndMatchesOls) {
    Xy d = random_problem(200, 5, 3);
    Vector grid = default_lambda_grid();
    grid.push_back(0.0);
    LassoPath p = fit_lasso_path(d.x, d.y, grid);
    Matrix design(200, 6);
    for (std::size_t i = 0; i < 200; ++i) {
        design(i, 0) = 1.0;
        for (std::size_t j = 0; j < 5; ++j) design(i, j + 1) = d.x(i, j);
    }
    Vector ols = ols_solve(design, d.y).coef;
    std::size_t last = grid.size() - 1;
    EXPECT_NEAR(p.intercepts[last], ols[0], 1e-6);
    for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(p.coefs(last, j), ols[j + 1], 1e-6);
}

TEST(LassoPath, KktAtEveryGridPoint) {
    Xy d = random_problem(180, 6, 4);
    Vector grid = default_lambda_grid();
    LassoPath p = fit_lasso_path(d.x, d.y, grid);
    std::size_t n = d.y.size();
    for (std::size_t k = 0; k < grid.size(); ++k) {
        Vector pred = p.predict(k, d.x);
        for (std::size_t j = 0; j < 6; ++j) {
            auto [m, sd] = p.standardization[j];
            double g = 0;
            for (std::size_t i = 0; i < n; ++i) g += (d.x(i, j) - m) / sd * (d.y[i] - pred[i]) / n;
            double b = p.coefs(k, j);
            if (b == 0.0)
                EXPECT_LE(std::abs(g), grid[k] + 1e-6);
            else
                EXPECT_NEAR(g, grid[k] * (b > 0 ? 1.0 : -1.0), 1e-6);
        }
    }
}

TEST(LassoPath, ObjectiveNeverIncreasesWithinSweep) {
    Xy d = random_problem(100, 6, 5);
    LassoTrace t;
    fit_lasso_path(d.x, d.y, default_lambda_grid(), &t);
    ASSERT_FALSE(t.objective_per_sweep.empty());
    for (const auto& sweep : t.objective_per_sweep)
        for (std::size_t j = 1; j < sweep.size(); ++j) EXPECT_LE(sweep[j], sweep[j - 1] + 1e-14 * std::abs(sweep[j - 1]));
}

TEST(LassoPath, PredictionScaleRoundTrip) {
    Xy d = random_problem(90, 4, 6);
    Vector grid{0.3, 0.05};
    LassoPath p = fit_lasso_path(d.x, d.y, grid);
    // refit on the standardized design; predictions must agree
    Matrix xs(90, 4);
    for (std::size_t i = 0; i < 90; ++i)
        for (std::size_t j = 0; j < 4; ++j) xs(i, j) = (d.x(i, j) - p.standardization[j].first) / p.standardization[j].second;
    LassoPath q = fit_lasso_path(xs, d.y, grid);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        Vector a = p.predict(k, d.x), b = q.predict(k, xs);
        for (std::size_t i = 0; i < 90; ++i) EXPECT_NEAR(a[i], b[i], 1e-10);
    }
}

TEST(LassoPath, BadInput) {
    Xy d = random_problem(30, 2, 7);
    EXPECT_THROW(fit_lasso_path(d.x, d.y, {0.1, 0.2}), DomainError);
    EXPECT_THROW(fit_lasso_path(d.x, d.y, {}), DomainError);
    Matrix c(30, 1, 1.0);
    EXPECT_THROW(fit_lasso_path(c, d.y, {0.1}), DomainError);
    EXPECT_THROW(fit_lasso_path(d.x, Vector(5), {0.1}), ShapeError);
}

TEST(CrossValidate, NullSignalSelectsAlmostNothing) {
    // five noise predictors, n = 200
    int good = 0;
    const int runs = 300;
    for (int r = 0; r < runs; ++r) {
        Rng rng(100 + r);
        Matrix x(200, 5);
        Vector y(200);
        for (std::size_t i = 0; i < 200; ++i) {
            for (std::size_t j = 0; j < 5; ++j) x(i, j) = rng.normal();
            y[i] = rng.normal();
        }
        Vector grid = default_lambda_grid();
        CvResult cv = cross_validate_lasso(x, y, grid, 10, r + 1);
        LassoPath p = fit_lasso_path(x, y, grid);
        int active = 0;
        for (std::size_t j = 0; j < 5; ++j) active += p.coefs(cv.best_index, j) != 0.0;
        if (active <= 1) ++good;
    }
    EXPECT_GE(good, runs * 9 / 10) << "share with <= 1 spurious predictor: " << double(good) / runs;
}

TEST(CrossValidate, StrongSignalKept) {
    Rng rng(8);
    Matrix x(200, 5);
    Vector y(200);
    for (std::size_t i = 0; i < 200; ++i) {
        for (std::size_t j = 0; j < 5; ++j) x(i, j) = rng.normal();
        y[i] = 3.0 * x(i, 2) + rng.normal();
    }
    Vector grid = default_lambda_grid();
    CvResult cv = cross_validate_lasso(x, y, grid, 10, 3);
    LassoPath p = fit_lasso_path(x, y, grid);
    EXPECT_NE(p.coefs(cv.best_index, 2), 0.0);
    EXPECT_EQ(cv.cv_mean.size(), grid.size());
    EXPECT_THROW(cross_validate_lasso(x, y, grid, 1, 3), DomainError);
}

namespace {

std::pair<Dataset, Dataset> dag3_arms(std::uint64_t seed, std::size_t m, std::size_t nv) {
    Rng rng(seed);
    auto gen = [&](std::size_t k, bool val) {
        Vector v(k), w(k), x(k), z(k), y(k);
        for (std::size_t i = 0; i < k; ++i) {
            v[i] = rng.normal();
            w[i] = rng.normal();
            x[i] = 0.8 * v[i] + rng.normal();
            z[i] = 0.9 * x[i] + 0.4 * rng.normal();
            y[i] = 0.5 * x[i] + 0.8 * v[i] + rng.normal();
        }
        if (val) return make(Arm::validation, {{"X", x}, {"Z", z}, {"V", v}, {"W", w}});
        return make(Arm::main, {{"Z", z}, {"V", v}, {"W", w}, {"Y", y}});
    };
    Dataset a = gen(m, false);
    Dataset b = gen(nv, true);
    return {a, b};
}

}

TEST(DataDriven, CoincidesWithOmWhenConfounderRetained) {
    auto [main, val] = dag3_arms(9, 3000, 500);
    DataDrivenOptions opt;
    opt.bootstrap = 200;
    auto dd = data_driven_mem_estimate(main, val, {"V"}, {"V"}, opt);
    ASSERT_EQ(dd.selection.retained, std::vector<std::string>{"V"});
    auto om = estimate_crs(main, val, AdjustmentStrategy::uniform(StrategyLabel::OM, {"V"}), OutcomeModelSpec{});
    EXPECT_LT(std::abs(dd.beta1 - om.beta1()), 2 * dd.boot_se);
    EXPECT_GT(dd.boot_se, 0.0);
    EXPECT_LE(dd.ci_percentile.first, dd.ci_percentile.second);
}

TEST(DataDriven, SelectionReportBookkeeping) {
    auto [main, val] = dag3_arms(10, 2000, 400);
    DataDrivenOptions opt;
    opt.bootstrap = 0;
    auto dd = data_driven_mem_estimate(main, val, {"V", "W"}, {"V"}, opt);
    EXPECT_EQ(dd.selection.retained.size() + dd.selection.zeroed.size(), 2u);
    EXPECT_EQ(dd.selection.path.rows(), opt.lambda_grid.size());
    EXPECT_EQ(dd.selection.path.cols(), 3u);
    EXPECT_EQ(dd.mem_coef.size(), 4u);
    EXPECT_EQ(dd.coef_names, (std::vector<std::string>{"(Intercept)", "eta", "V"}));
    EXPECT_THROW(data_driven_mem_estimate(main, val, {"Q"}, {}, opt), SchemaError);
}

TEST(DataDriven, BootstrapReproducible) {
    auto [main, val] = dag3_arms(11, 800, 200);
    DataDrivenOptions opt;
    opt.bootstrap = 1000;
    opt.lambda_grid = {1.0, 0.3, 0.1, 0.03, 0.01, 0.003};
    opt.folds = 5;
    auto a = data_driven_mem_estimate(main, val, {"V", "W"}, {"V"}, opt);
    auto b = data_driven_mem_estimate(main, val, {"V", "W"}, {"V"}, opt);
    EXPECT_EQ(a.boot_estimates, b.boot_estimates);
    EXPECT_EQ(a.boot_se, b.boot_se);
    opt.seed = 2;
    auto c = data_driven_mem_estimate(main, val, {"V", "W"}, {"V"}, opt);
    EXPECT_NE(a.boot_estimates, c.boot_estimates);
}
