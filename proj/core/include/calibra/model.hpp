#pragma once

#include "calibra/linalg.hpp"

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace calibra {

inline constexpr const char* kExposure = "X";
inline constexpr const char* kSurrogate = "Z";
inline constexpr const char* kOutcome = "Y";

enum class Arm { main, validation };
enum class OutcomeType { continuous, binary };
enum class Link { identity, logit };
enum class SandwichMode { model, empirical };

const char* to_string(Arm a);
const char* to_string(OutcomeType t);
const char* to_string(Link l);
const char* to_string(SandwichMode m);

class Dataset {
public:
    Dataset(Arm arm, OutcomeType outcome_type, std::vector<std::pair<std::string, Vector>> columns);

    Arm arm() const { return arm_; }
    OutcomeType outcome_type() const { return outcome_type_; }
    std::size_t n() const { return n_; }

    bool has(const std::string& name) const;
    std::span<const double> column(const std::string& name) const;
    std::vector<std::string> names() const;

    Dataset with_column(const std::string& name, Vector values) const;
    Dataset subset(const std::vector<std::size_t>& rows) const;

private:
    Arm arm_;
    OutcomeType outcome_type_;
    std::size_t n_ = 0;
    std::vector<std::string> order_;
    std::map<std::string, Vector> cols_;
};

std::vector<std::string> validate_dataset(const Dataset& d, const std::vector<std::string>& covariates = {},
                                          Link link = Link::identity);

struct DagRole {
    bool affects_x = false;
    bool affects_z = false;
    bool affects_y = false;
    int dag_index = 5;
};

DagRole classify_role(bool affects_x, bool affects_z, bool affects_y);
DagRole role_from_index(int dag_index);
std::string role_name(const DagRole& r);

enum class StrategyLabel { OM, NN, NM, ON };

const char* to_string(StrategyLabel s);
std::optional<StrategyLabel> parse_strategy_label(const std::string& s);
inline constexpr std::array<StrategyLabel, 4> kAllStrategies{StrategyLabel::OM, StrategyLabel::NN,
                                                             StrategyLabel::NM, StrategyLabel::ON};
bool label_in_mem(StrategyLabel s);
bool label_in_outcome(StrategyLabel s);

struct AdjustmentStrategy {
    std::vector<std::string> mem_covariates;
    std::vector<std::string> outcome_covariates;

    static AdjustmentStrategy uniform(StrategyLabel label, const std::vector<std::string>& covariates);

    std::vector<std::string> covariates() const;
    bool in_mem(const std::string& name) const;
    bool in_outcome(const std::string& name) const;
    std::optional<StrategyLabel> label() const;
    std::string describe() const;
};

struct OutcomeModelSpec {
    Link link = Link::identity;
    SandwichMode sandwich = SandwichMode::model;
    std::vector<std::string> interaction_covariates;

    bool include_interaction() const { return !interaction_covariates.empty(); }
};

enum class VDist { standard_normal, bernoulli04 };

// Linear-Gaussian DGP: X = eta_v V + e_x, Z = theta_x X + theta_v V + e_z, Y = beta_x X + beta_v V + e_y
struct DgpCoefficients {
    double eta_v = 0.0;
    double theta_x = 0.5;
    double theta_v = 0.0;
    double beta_x = 0.5;
    double beta_v = 0.0;
    double sd_ex = 1.0;
    double sd_ez = 0.5;
    double sd_ey = 1.0;
    VDist v_dist = VDist::standard_normal;

    double var_v() const { return v_dist == VDist::standard_normal ? 1.0 : 0.24; }
    DagRole role() const { return classify_role(eta_v != 0.0, theta_v != 0.0, beta_v != 0.0); }
};

// covariance of (V, X, Z, Y)
struct ImpliedCovariance {
    enum Index { V = 0, X = 1, Z = 2, Y = 3 };
    std::array<std::array<double, 4>, 4> s{};
    double operator()(int i, int j) const { return s[i][j]; }
};

ImpliedCovariance implied_covariance(const DgpCoefficients& dgp);

}
