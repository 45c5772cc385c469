#include "calibra/estimators.hpp"

#include "calibra/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace calibra {

namespace {

double scaled_score_max(const Matrix& x, const Vector& resid) {
    std::size_t n = x.rows();
    Vector s = crossprod(x, resid);
    double out = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) {
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) ss += x(i, j) * x(i, j);
        double scale = std::sqrt(ss / static_cast<double>(n));
        if (scale > 0) out = std::max(out, std::abs(s[j]) / (static_cast<double>(n) * scale));
    }
    return out;
}

void require_valid(const Dataset& d, const std::vector<std::string>& covs, Link link) {
    auto v = validate_dataset(d, covs, link);
    if (v.empty()) return;
    std::ostringstream os;
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "; " : "") << v[i];
    throw SchemaError(os.str());
}

void symmetrize(Matrix& m) {
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < i; ++j) {
            double v = 0.5 * (m(i, j) + m(j, i));
            m(i, j) = m(j, i) = v;
        }
}

}

double EstimateResult::effect_at(const Vector& v) const {
    if (v.size() != interaction_covariates.size()) throw ShapeError("effect_at: wrong number of covariate values");
    std::size_t off = beta.size() - v.size();
    double e = beta1();
    for (std::size_t k = 0; k < v.size(); ++k) e += beta[off + k] * v[k];
    return e;
}

double EstimateResult::se_effect_at(const Vector& v) const {
    if (v.size() != interaction_covariates.size()) throw ShapeError("se_effect_at: wrong number of covariate values");
    Vector g(beta.size(), 0.0);
    g[1] = 1.0;
    std::size_t off = beta.size() - v.size();
    for (std::size_t k = 0; k < v.size(); ++k) g[off + k] = v[k];
    Vector cg = matvec(sandwich_cov, g);
    double s = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) s += g[i] * cg[i];
    return std::sqrt(std::max(s, 0.0));
}

Matrix sandwich_variance(const SandwichBlocks& b) {
    std::size_t p1 = b.a11.rows(), p2 = b.a22.rows();
    if (b.a11.cols() != p1 || b.b11.rows() != p1 || b.b11.cols() != p1 || b.a22.cols() != p2 ||
        b.b22.rows() != p2 || b.b22.cols() != p2 || b.a21.rows() != p2 || b.a21.cols() != p1)
        throw ShapeError("sandwich_variance: block dimensions inconsistent");
    // A11^-1 B11 A11^-T, A11 symmetric
    Matrix a11_inv_b11 = solve_sym(b.a11, b.b11);
    Matrix v1 = transpose(solve_sym(b.a11, transpose(a11_inv_b11)));
    Matrix middle = add(b.b22, matmul(matmul(b.a21, v1), transpose(b.a21)));
    Matrix left = solve_sym(b.a22, middle);
    Matrix out = transpose(solve_sym(b.a22, transpose(left)));
    symmetrize(out);
    return out;
}

Matrix meat_from_scores(const Matrix& s) {
    double n = static_cast<double>(s.rows());
    return scale(crossprod(s), 1.0 / (n * n));
}

EstimateResult estimate_crs(const Dataset& main, const Dataset& validation, const AdjustmentStrategy& strategy,
                            const OutcomeModelSpec& spec) {
    if (main.arm() != Arm::main) throw SchemaError("first dataset must be the main arm");
    if (validation.arm() != Arm::validation) throw SchemaError("second dataset must be the validation arm");
    for (const auto& c : spec.interaction_covariates)
        if (!strategy.in_outcome(c))
            throw SchemaError("interaction covariate '" + c + "' is not in the outcome model");
    require_valid(validation, strategy.mem_covariates, Link::identity);
    require_valid(main, strategy.covariates(), spec.link);

    const auto& mcov = strategy.mem_covariates;
    const auto& ocov = strategy.outcome_covariates;
    const auto& icov = spec.interaction_covariates;

    EstimateResult r;
    r.strategy = strategy;
    r.link = spec.link;
    r.interaction_covariates = icov;
    r.n_main = main.n();
    r.n_validation = validation.n();
    r.mem = fit_mem(validation, mcov);
    Vector eta = impute_x(main, r.mem);

    std::size_t m = main.n(), n = validation.n();
    std::size_t p2 = 2 + ocov.size() + icov.size();
    std::vector<std::span<const double>> oc, ic;
    for (const auto& c : ocov) oc.push_back(main.column(c));
    for (const auto& c : icov) ic.push_back(main.column(c));
    Matrix x2(m, p2);
    for (std::size_t i = 0; i < m; ++i) {
        double* row = x2.row(i);
        row[0] = 1.0;
        row[1] = eta[i];
        for (std::size_t k = 0; k < oc.size(); ++k) row[2 + k] = oc[k][i];
        for (std::size_t k = 0; k < ic.size(); ++k) row[2 + oc.size() + k] = eta[i] * ic[k][i];
    }
    r.coef_names = {"(Intercept)", "eta"};
    for (const auto& c : ocov) r.coef_names.push_back(c);
    for (const auto& c : icov) r.coef_names.push_back("eta:" + c);

    auto yspan = main.column(kOutcome);
    Vector y(yspan.begin(), yspan.end());
    Vector w(m, 1.0), resid(m);
    if (spec.link == Link::identity) {
        OlsFit f = ols_solve(x2, y);
        r.beta = f.coef;
        r.sigma2_y = f.residual_var;
        resid = f.residuals;
    } else {
        LogisticFit f = fit_logistic_irls(x2, y);
        r.beta = f.coef;
        r.diagnostics.irls_iterations = f.iterations;
        for (std::size_t i = 0; i < m; ++i) {
            w[i] = f.fitted[i] * (1.0 - f.fitted[i]);
            resid[i] = y[i] - f.fitted[i];
        }
    }

    Matrix x1 = mem_design(validation, mcov);
    Matrix x1m = mem_design(main, mcov);
    std::size_t p1 = x1.cols();
    double dn = static_cast<double>(n), dm = static_cast<double>(m);

    SandwichBlocks b;
    Matrix g1 = scale(crossprod(x1), 1.0 / dn);
    b.a11 = scale(g1, -1.0);
    if (spec.sandwich == SandwichMode::model) {
        b.b11 = scale(g1, r.mem.residual_var / dn);
    } else {
        Vector e2(n);
        for (std::size_t i = 0; i < n; ++i) e2[i] = r.mem.residuals[i] * r.mem.residuals[i];
        b.b11 = scale(weighted_crossprod(x1, e2), 1.0 / (dn * dn));
    }

    // d S2 / d alpha: eta enters through the exposure slope and the interaction slopes
    b.a21 = Matrix(p2, p1);
    for (std::size_t i = 0; i < m; ++i) {
        double slope = r.beta[1];
        for (std::size_t k = 0; k < ic.size(); ++k) slope += r.beta[2 + oc.size() + k] * ic[k][i];
        double f = w[i] * slope / dm;
        const double* r2 = x2.row(i);
        const double* r1 = x1m.row(i);
        for (std::size_t a = 0; a < p2; ++a)
            for (std::size_t c = 0; c < p1; ++c) b.a21(a, c) -= f * r2[a] * r1[c];
    }

    Matrix g2 = scale(weighted_crossprod(x2, w), 1.0 / dm);
    b.a22 = scale(g2, -1.0);
    if (spec.sandwich == SandwichMode::model) {
        b.b22 = spec.link == Link::identity ? scale(g2, r.sigma2_y / dm) : scale(g2, 1.0 / dm);
    } else {
        Vector r2(m);
        for (std::size_t i = 0; i < m; ++i) r2[i] = resid[i] * resid[i];
        b.b22 = scale(weighted_crossprod(x2, r2), 1.0 / (dm * dm));
    }

    r.sandwich_cov = sandwich_variance(b);
    r.blocks = std::move(b);
    r.se_beta1 = std::sqrt(std::max(r.sandwich_cov(1, 1), 0.0));
    r.ci95 = {r.beta1() - kWaldZ * r.se_beta1, r.beta1() + kWaldZ * r.se_beta1};
    r.diagnostics.stage1_score_max = scaled_score_max(x1, r.mem.residuals);
    r.diagnostics.stage2_score_max = scaled_score_max(x2, resid);
    return r;
}

EstimateResult estimate_with_interaction(const Dataset& main, const Dataset& validation,
                                         const AdjustmentStrategy& strategy, const OutcomeModelSpec& spec) {
    if (!spec.include_interaction()) throw DomainError("estimate_with_interaction: no interaction covariates given");
    for (const auto& c : spec.interaction_covariates)
        if (!strategy.in_mem(c) || !strategy.in_outcome(c))
            throw DomainError("interaction covariate '" + c + "' must be in both the MEM and the outcome model");
    return estimate_crs(main, validation, strategy, spec);
}

double naive_beta1(const Dataset& main, const std::vector<std::string>& covariates, Link link) {
    require_valid(main, covariates, link);
    Matrix x = mem_design(main, covariates);
    auto ys = main.column(kOutcome);
    Vector y(ys.begin(), ys.end());
    if (link == Link::identity) return ols_solve(x, y).coef[1];
    return fit_logistic_irls(x, y).coef[1];
}

ConditionReport check_logistic_approx(const MemFit& mem, double beta1, double prevalence, double hp) {
    if (!(prevalence >= 0.0 && prevalence <= 1.0)) throw DomainError("prevalence must lie in [0,1]");
    ConditionReport c;
    c.residual_var = mem.residual_var;
    c.beta1 = beta1;
    c.quantity_i = mem.residual_var * beta1 * beta1;
    c.condition_i = c.quantity_i < 0.5;
    c.prevalence = prevalence;
    c.homoskedasticity_p = hp;
    c.homoskedastic = hp > 0.05;
    c.condition_ii = prevalence < 0.05 && c.homoskedastic;
    c.overall = c.condition_i || c.condition_ii;
    if (!c.overall) {
        std::ostringstream os;
        os << "logistic approximation may be poor: residual_var*beta1^2 = " << c.quantity_i << " (>= 0.5)";
        if (prevalence >= 0.05) os << ", prevalence " << prevalence << " (>= 0.05)";
        if (!c.homoskedastic) os << ", MEM residuals heteroskedastic (p = " << hp << ")";
        c.warning = os.str();
    }
    return c;
}

ConditionReport assess_logistic_conditions(const Dataset& main, const Dataset& validation, const EstimateResult& r) {
    auto y = main.column(kOutcome);
    double prev = 0.0;
    for (double v : y) prev += v;
    prev /= static_cast<double>(y.size());
    return check_logistic_approx(r.mem, r.beta1(), prev, homoskedasticity_p(validation, r.mem));
}

}
