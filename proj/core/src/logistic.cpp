#include "calibra/logistic.hpp"

#include "calibra/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace calibra {

namespace {

constexpr int kMaxIter = 100;
constexpr int kMaxHalvings = 10;
constexpr double kScoreTol = 1e-8;
constexpr double kCoefTol = 1e-10;
constexpr double kSeparationEta = 30.0;

double log1pexp(double t) { return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

double sigmoid(double t) {
    if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
    double e = std::exp(t);
    return e / (1.0 + e);
}

}

double logistic_loglik(const Matrix& design, const Vector& y, const Vector& coef) {
    Vector eta = matvec(design, coef);
    double ll = 0.0;
    for (std::size_t i = 0; i < eta.size(); ++i) ll += y[i] * eta[i] - log1pexp(eta[i]);
    return ll;
}

LogisticFit fit_logistic_irls(const Matrix& design, const Vector& y) {
    std::size_t n = design.rows(), p = design.cols();
    if (y.size() != n) throw ShapeError("fit_logistic_irls: response length mismatch");
    if (n <= p) throw InsufficientDataError("fit_logistic_irls: " + std::to_string(n) + " rows for " +
                                            std::to_string(p) + " coefficients");
    std::size_t ones = 0;
    for (double v : y) {
        if (v != 0.0 && v != 1.0) throw DomainError("fit_logistic_irls: response must be 0/1");
        ones += v == 1.0;
    }
    if (ones == 0 || ones == n) throw SeparationError("fit_logistic_irls: outcome is constant");

    Vector colscale(p, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j) colscale[j] += design(i, j) * design(i, j);
    for (auto& c : colscale) c = std::max(std::sqrt(c / static_cast<double>(n)), 1e-300);

    Vector beta(p, 0.0), prob(n), w(n);
    std::vector<double> trace;
    double ll = logistic_loglik(design, y, beta);
    double last_change = INFINITY;

    for (int iter = 0; iter <= kMaxIter; ++iter) {
        Vector eta = matvec(design, beta);
        bool sep1 = true, sep0 = true;
        for (std::size_t i = 0; i < n; ++i) {
            prob[i] = sigmoid(eta[i]);
            w[i] = prob[i] * (1.0 - prob[i]);
            if (y[i] == 1.0 && !(eta[i] > kSeparationEta)) sep1 = false;
            if (y[i] == 0.0 && !(eta[i] < -kSeparationEta)) sep0 = false;
        }
        if (sep1 || sep0)
            throw SeparationError(std::string("fit_logistic_irls: separation detected (all ") +
                                  (sep1 ? "y=1" : "y=0") + " rows have |linear predictor| > 30)");
        Vector resid(n);
        for (std::size_t i = 0; i < n; ++i) resid[i] = y[i] - prob[i];
        Vector score = crossprod(design, resid);
        double smax = 0.0;
        for (std::size_t j = 0; j < p; ++j)
            smax = std::max(smax, std::abs(score[j]) / (static_cast<double>(n) * colscale[j]));
        trace.push_back(-2.0 * ll);

        Matrix info = weighted_crossprod(design, w);
        if (smax < kScoreTol && last_change < kCoefTol) {
            LogisticFit fit;
            fit.coef = beta;
            fit.info_inv = inverse_sym(info);
            fit.score_contribs = Matrix(n, p);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < p; ++j) fit.score_contribs(i, j) = design(i, j) * resid[i];
            fit.fitted = prob;
            fit.loglik = ll;
            fit.iterations = iter;
            return fit;
        }
        if (iter == kMaxIter) break;

        Vector step = solve_sym(info, score);
        double t = 1.0;
        Vector cand(p);
        double cand_ll = -INFINITY;
        for (int h = 0; h <= kMaxHalvings; ++h) {
            for (std::size_t j = 0; j < p; ++j) cand[j] = beta[j] + t * step[j];
            cand_ll = logistic_loglik(design, y, cand);
            if (cand_ll >= ll - 1e-12 * std::abs(ll)) break;
            t *= 0.5;
        }
        double dmax = 0.0, bmax = 1.0;
        for (std::size_t j = 0; j < p; ++j) {
            dmax = std::max(dmax, std::abs(cand[j] - beta[j]));
            bmax = std::max(bmax, std::abs(cand[j]));
        }
        last_change = dmax / bmax;
        beta = cand;
        ll = cand_ll;
    }
    throw ConvergenceError("fit_logistic_irls: no convergence after " + std::to_string(kMaxIter) + " iterations",
                           trace);
}

}
