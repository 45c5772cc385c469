#include "calibra/simulator.hpp"

#include "calibra/errors.hpp"
#include "calibra/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <optional>
#include <thread>

namespace calibra {

namespace {

constexpr std::uint64_t kStreamData = 1;

std::size_t index_of(StrategyLabel s) { return static_cast<std::size_t>(s); }

struct ReplicateOutcome {
    bool ok = false;
    std::string error;
    std::array<double, 4> beta{};
    std::array<double, 4> var{};
    std::array<bool, 4> covered{};
    std::array<bool, 4> condition_ok{};
};

ReplicateOutcome run_replicate(const Scenario& s, std::uint64_t seed, const RunOptions& opt) {
    ReplicateOutcome out;
    try {
        auto [main, val] = generate_scenario_data(s, seed);
        OutcomeModelSpec spec;
        spec.link = s.outcome_type == OutcomeType::binary ? Link::logit : Link::identity;
        spec.sandwich = opt.sandwich;
        for (StrategyLabel st : kAllStrategies) {
            auto strat = AdjustmentStrategy::uniform(st, {kScenarioCovariate});
            EstimateResult r = estimate_crs(main, val, strat, spec);
            std::size_t k = index_of(st);
            out.beta[k] = r.beta1();
            out.var[k] = r.se_beta1 * r.se_beta1;
            out.covered[k] = r.ci95.first <= s.coef.beta_x && s.coef.beta_x <= r.ci95.second;
            out.condition_ok[k] = true;
            if (spec.link == Link::logit) out.condition_ok[k] = assess_logistic_conditions(main, val, r).overall;
        }
        out.ok = true;
    } catch (const NumericError& e) {
        out.error = e.what();
    }
    return out;
}

double sample_variance(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return ss / static_cast<double>(v.size() - 1);
}

}

std::vector<std::string> Scenario::violations() const {
    std::vector<std::string> v;
    if (dag_index < 1 || dag_index > 8) v.push_back("dag_index must be 1..8");
    if (n_vs == 0 || n_vs >= n_total) v.push_back("need 0 < n_vs < n_total");
    if (n_reps == 0) v.push_back("n_reps must be positive");
    if (!(coef.sd_ex > 0 && coef.sd_ez > 0 && coef.sd_ey > 0)) v.push_back("noise sds must be positive");
    if (dag_index >= 1 && dag_index <= 8 && coef.role().dag_index != dag_index)
        v.push_back("coefficients imply DAG " + std::to_string(coef.role().dag_index) + ", label says " +
                    std::to_string(dag_index));
    if (coef.beta_x == 0.0) v.push_back("beta_x must be nonzero (it is the bias denominator)");
    return v;
}

void Scenario::check() const {
    auto v = violations();
    if (!v.empty()) throw DomainError("scenario '" + label + "': " + v.front());
}

std::pair<Dataset, Dataset> generate_scenario_data(const Scenario& s, std::uint64_t rep_seed) {
    s.check();
    const auto& g = s.coef;
    Rng rng(derive_seed(rep_seed, 0, kStreamData));
    std::size_t n = s.n_total;
    Vector v(n), x(n), z(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = g.v_dist == VDist::standard_normal ? rng.normal() : (rng.bernoulli(0.4) ? 1.0 : 0.0);
        x[i] = g.eta_v * v[i] + g.sd_ex * rng.normal();
        z[i] = g.theta_x * x[i] + g.theta_v * v[i] + g.sd_ez * rng.normal();
        double lin = g.beta_x * x[i] + g.beta_v * v[i];
        if (s.outcome_type == OutcomeType::continuous) {
            y[i] = lin + g.sd_ey * rng.normal();
        } else {
            double eta = s.logit_intercept + lin;
            double p = 1.0 / (1.0 + std::exp(-eta));
            y[i] = rng.uniform() < p ? 1.0 : 0.0;
        }
    }
    std::vector<std::size_t> vs = rng.sample_without_replacement(n, s.n_vs);
    std::vector<char> in_vs(n, 0);
    for (auto i : vs) in_vs[i] = 1;
    std::sort(vs.begin(), vs.end());

    Vector vv, vx, vz, mv, mz, my;
    vv.reserve(s.n_vs);
    mv.reserve(n - s.n_vs);
    for (std::size_t i = 0; i < n; ++i) {
        if (in_vs[i]) {
            vv.push_back(v[i]);
            vx.push_back(x[i]);
            vz.push_back(z[i]);
        } else {
            mv.push_back(v[i]);
            mz.push_back(z[i]);
            my.push_back(y[i]);
        }
    }
    Dataset main(Arm::main, s.outcome_type, {{kSurrogate, std::move(mz)}, {kScenarioCovariate, std::move(mv)}, {kOutcome, std::move(my)}});
    Dataset val(Arm::validation, s.outcome_type,
                {{kExposure, std::move(vx)}, {kSurrogate, std::move(vz)}, {kScenarioCovariate, std::move(vv)}});
    return {std::move(main), std::move(val)};
}

const StrategyMetrics& SimulationReport::at(StrategyLabel s) const { return metrics[index_of(s)]; }

std::uint64_t replicate_seed(std::uint64_t master_seed, std::size_t replicate) {
    return derive_seed(master_seed, replicate, 0);
}

SimulationReport run_scenario(const Scenario& s, std::uint64_t master_seed, const RunOptions& opt) {
    s.check();
    if (s.n_reps == 0) throw DomainError("n_reps must be positive");
    std::vector<ReplicateOutcome> outs(s.n_reps);
    unsigned threads = opt.threads ? opt.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, s.n_reps));
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t r; (r = next.fetch_add(1)) < s.n_reps;) outs[r] = run_replicate(s, replicate_seed(master_seed, r), opt);
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    SimulationReport rep;
    rep.scenario = s;
    rep.master_seed = master_seed;
    rep.n_reps = s.n_reps;
    rep.rng_version = kRngVersion;
    std::array<double, 4> var_sum{}, cover{};
    std::array<std::size_t, 4> cond_fail{};
    for (std::size_t r = 0; r < outs.size(); ++r) {
        const auto& o = outs[r];
        if (!o.ok) {
            ++rep.n_failed;
            rep.failure_messages.push_back("replicate " + std::to_string(r) + ": " + o.error);
            continue;
        }
        for (std::size_t k = 0; k < 4; ++k) {
            rep.estimates[k].push_back(o.beta[k]);
            var_sum[k] += o.var[k];
            cover[k] += o.covered[k] ? 1.0 : 0.0;
            cond_fail[k] += o.condition_ok[k] ? 0 : 1;
        }
    }
    if (static_cast<double>(rep.n_failed) > 0.01 * static_cast<double>(s.n_reps))
        throw ScenarioError("scenario '" + s.label + "': " + std::to_string(rep.n_failed) + " of " +
                            std::to_string(s.n_reps) + " replicates failed" +
                            (rep.failure_messages.empty() ? "" : " (first: " + rep.failure_messages.front() + ")"));

    double ok = static_cast<double>(s.n_reps - rep.n_failed);
    for (std::size_t k = 0; k < 4; ++k) {
        auto& m = rep.metrics[k];
        m.strategy = kAllStrategies[k];
        const auto& est = rep.estimates[k];
        m.percent_bias = percent_bias(est, s.coef.beta_x);
        double mean = 0.0;
        for (double b : est) mean += b;
        m.mean_estimate = mean / ok;
        m.empirical_variance = sample_variance(est);
        m.mean_sandwich_variance = var_sum[k] / ok;
        m.coverage95 = cover[k] / ok;
        m.condition_failures = cond_fail[k];
    }
    double v_om = rep.metrics[0].empirical_variance;
    for (auto& m : rep.metrics) m.ere = m.strategy == StrategyLabel::OM ? 1.0 : v_om / m.empirical_variance;
    return rep;
}

double percent_bias(const Vector& estimates, double truth) {
    if (truth == 0.0) throw DomainError("percent_bias: truth is zero");
    if (estimates.empty()) throw DomainError("percent_bias: no estimates");
    double m = 0.0;
    for (double e : estimates) m += e;
    m /= static_cast<double>(estimates.size());
    return 100.0 * (m - truth) / truth;
}

}
