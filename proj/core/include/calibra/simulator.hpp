#pragma once

#include "calibra/estimators.hpp"
#include "calibra/model.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace calibra {

struct Scenario {
    std::string label;
    int dag_index = 1;
    DgpCoefficients coef;
    OutcomeType outcome_type = OutcomeType::continuous;
    double logit_intercept = -5.0;
    std::size_t n_total = 5000;
    std::size_t n_vs = 400;
    std::size_t n_reps = 1000;

    // empty when the scenario is well formed
    std::vector<std::string> violations() const;
    void check() const;
};

// covariate column name used for the scenario's V
inline constexpr const char* kScenarioCovariate = "V";

std::pair<Dataset, Dataset> generate_scenario_data(const Scenario& s, std::uint64_t rep_seed);

struct StrategyMetrics {
    StrategyLabel strategy = StrategyLabel::OM;
    double percent_bias = 0.0;
    double mean_estimate = 0.0;
    double empirical_variance = 0.0;
    double mean_sandwich_variance = 0.0;
    double ere = 0.0;
    double coverage95 = 0.0;
    std::size_t condition_failures = 0;  // binary: replicates where neither logistic condition held
};

struct SimulationReport {
    Scenario scenario;
    std::uint64_t master_seed = 0;
    std::size_t n_reps = 0;
    std::size_t n_failed = 0;
    std::vector<std::string> failure_messages;
    std::string rng_version;
    std::array<StrategyMetrics, 4> metrics;
    // replicate-ordered beta1 per strategy (successful replicates only)
    std::array<std::vector<double>, 4> estimates;

    const StrategyMetrics& at(StrategyLabel s) const;
};

struct RunOptions {
    unsigned threads = 0;  // 0: hardware concurrency
    SandwichMode sandwich = SandwichMode::model;
};

std::uint64_t replicate_seed(std::uint64_t master_seed, std::size_t replicate);
SimulationReport run_scenario(const Scenario& s, std::uint64_t master_seed, const RunOptions& opt = {});

double percent_bias(const Vector& estimates, double truth);

std::vector<Scenario> scenario_catalog();
const Scenario& find_scenario(const std::string& label);

}
