#pragma once

#include "calibra/model.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace calibra {

struct ValidityCell {
    bool valid = false;
    bool efficient = false;
    std::optional<std::string> caveat;
};

inline constexpr const char* kResidualCaveat = "relies on X = E[X|Z,V] + e with Cov(e, V) = 0";

std::map<StrategyLabel, ValidityCell> validity_matrix(const DagRole& role);

enum class Placement { both, mem_only, outcome_only, neither };
const char* to_string(Placement p);

struct CovariateAdvice {
    std::string covariate;
    DagRole role;
    Placement placement;
    std::optional<Placement> alternative;
    bool collect_in_both_studies = false;
    std::string rationale;
};

struct Recommendation {
    AdjustmentStrategy strategy;
    std::vector<CovariateAdvice> advice;
};

Recommendation recommend(const std::map<std::string, DagRole>& roles);

struct CounterexampleParams {
    double a = 0.0;  // V -> Z
    double b = 0.0;  // V -> X
    double c = 1.0;  // V -> Y
};

// neither_model: leaving V out of both models (c fixed at 1)
// outcome_only: V in the outcome model only
enum class CounterexampleTarget { neither_model, outcome_only };

struct CounterexampleResult {
    double lhs = 0.0;
    double rhs = 0.0;
    bool equal = false;
};

CounterexampleResult verify_counterexample(std::optional<int> dag_index, const CounterexampleParams& params,
                                           CounterexampleTarget target);

double closed_form_plim(StrategyLabel strategy, const DgpCoefficients& dgp);
double closed_form_plim(const AdjustmentStrategy& strategy, const DgpCoefficients& dgp);

// base-case coefficients for each DAG (continuous outcome)
DgpCoefficients base_case(int dag_index);

struct VerifyCell {
    int dag_index = 0;
    StrategyLabel strategy = StrategyLabel::OM;
    bool claimed_valid = false;
    double plim = 0.0;
    double truth = 0.0;
    double rel_dev = 0.0;
    bool pass = false;
};

// checks every Table-1 cell against closed_form_plim at the given coefficients (default: base cases)
std::vector<VerifyCell> verify_validity_table(const std::map<int, DgpCoefficients>& overrides = {});

}
