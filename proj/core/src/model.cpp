#include "calibra/model.hpp"

#include "calibra/errors.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace calibra {

const char* to_string(Arm a) { return a == Arm::main ? "main" : "validation"; }
const char* to_string(OutcomeType t) { return t == OutcomeType::continuous ? "continuous" : "binary"; }
const char* to_string(Link l) { return l == Link::identity ? "identity" : "logit"; }
const char* to_string(SandwichMode m) { return m == SandwichMode::model ? "model" : "empirical"; }

Dataset::Dataset(Arm arm, OutcomeType outcome_type, std::vector<std::pair<std::string, Vector>> columns)
    : arm_(arm), outcome_type_(outcome_type) {
    if (columns.empty()) throw SchemaError("dataset has no columns");
    n_ = columns.front().second.size();
    if (n_ == 0) throw SchemaError("dataset has no rows");
    for (auto& [name, values] : columns) {
        if (name.empty()) throw SchemaError("empty column name");
        if (cols_.count(name)) throw SchemaError("duplicate column '" + name + "'");
        if (values.size() != n_)
            throw SchemaError("column '" + name + "' has " + std::to_string(values.size()) + " rows, expected " +
                              std::to_string(n_));
        for (std::size_t i = 0; i < values.size(); ++i)
            if (!std::isfinite(values[i]))
                throw SchemaError("column '" + name + "' row " + std::to_string(i) + " is missing or non-finite");
        order_.push_back(name);
        cols_.emplace(name, std::move(values));
    }
}

bool Dataset::has(const std::string& name) const { return cols_.count(name) > 0; }

std::span<const double> Dataset::column(const std::string& name) const {
    auto it = cols_.find(name);
    if (it == cols_.end())
        throw SchemaError(std::string(to_string(arm_)) + " dataset has no column '" + name + "'");
    return it->second;
}

std::vector<std::string> Dataset::names() const { return order_; }

Dataset Dataset::with_column(const std::string& name, Vector values) const {
    std::vector<std::pair<std::string, Vector>> cols;
    for (const auto& nm : order_)
        if (nm != name) cols.emplace_back(nm, cols_.at(nm));
    cols.emplace_back(name, std::move(values));
    return Dataset(arm_, outcome_type_, std::move(cols));
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
    std::vector<std::pair<std::string, Vector>> cols;
    for (const auto& nm : order_) {
        const Vector& src = cols_.at(nm);
        Vector v(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) v[i] = src.at(rows[i]);
        cols.emplace_back(nm, std::move(v));
    }
    return Dataset(arm_, outcome_type_, std::move(cols));
}

std::vector<std::string> validate_dataset(const Dataset& d, const std::vector<std::string>& covariates, Link link) {
    std::vector<std::string> out;
    std::vector<std::string> required;
    if (d.arm() == Arm::validation)
        required = {kExposure, kSurrogate};
    else
        required = {kSurrogate, kOutcome};
    for (const auto& c : required)
        if (!d.has(c)) out.push_back(std::string(to_string(d.arm())) + " arm is missing required column '" + c + "'");
    for (const auto& c : covariates)
        if (!d.has(c)) out.push_back(std::string(to_string(d.arm())) + " arm is missing covariate '" + c + "'");

    bool binary = d.outcome_type() == OutcomeType::binary || link == Link::logit;
    if (d.arm() == Arm::main && d.has(kOutcome) && binary) {
        auto y = d.column(kOutcome);
        std::size_t bad = 0;
        for (double v : y)
            if (v != 0.0 && v != 1.0) ++bad;
        if (bad)
            out.push_back("outcome 'Y' must be 0/1 for a binary outcome; " + std::to_string(bad) +
                          " value(s) outside {0,1}");
    }
    for (const auto& c : covariates) {
        if (!d.has(c)) continue;
        auto v = d.column(c);
        if (std::all_of(v.begin(), v.end(), [&](double x) { return x == v[0]; }))
            out.push_back(std::string(to_string(d.arm())) + " arm covariate '" + c + "' has zero variance");
    }
    return out;
}

DagRole classify_role(bool affects_x, bool affects_z, bool affects_y) {
    static constexpr int table[2][2][2] = {{{5, 1}, {6, 2}}, {{7, 3}, {8, 4}}};
    return DagRole{affects_x, affects_z, affects_y, table[affects_x][affects_z][affects_y]};
}

DagRole role_from_index(int dag_index) {
    for (int x = 0; x < 2; ++x)
        for (int z = 0; z < 2; ++z)
            for (int y = 0; y < 2; ++y) {
                DagRole r = classify_role(x, z, y);
                if (r.dag_index == dag_index) return r;
            }
    throw DomainError("DAG index must be 1..8, got " + std::to_string(dag_index));
}

std::string role_name(const DagRole& r) {
    std::string s = "V" + std::to_string(r.dag_index) + "(";
    s += r.affects_x ? 'X' : '-';
    s += r.affects_z ? 'Z' : '-';
    s += r.affects_y ? 'Y' : '-';
    return s + ")";
}

const char* to_string(StrategyLabel s) {
    switch (s) {
    case StrategyLabel::OM: return "OM";
    case StrategyLabel::NN: return "--";
    case StrategyLabel::NM: return "-M";
    case StrategyLabel::ON: return "O-";
    }
    return "?";
}

std::optional<StrategyLabel> parse_strategy_label(const std::string& s) {
    if (s == "OM") return StrategyLabel::OM;
    if (s == "--" || s == "NN") return StrategyLabel::NN;
    if (s == "-M" || s == "NM") return StrategyLabel::NM;
    if (s == "O-" || s == "ON") return StrategyLabel::ON;
    return std::nullopt;
}

bool label_in_mem(StrategyLabel s) { return s == StrategyLabel::OM || s == StrategyLabel::NM; }
bool label_in_outcome(StrategyLabel s) { return s == StrategyLabel::OM || s == StrategyLabel::ON; }

AdjustmentStrategy AdjustmentStrategy::uniform(StrategyLabel label, const std::vector<std::string>& covariates) {
    AdjustmentStrategy s;
    if (label_in_mem(label)) s.mem_covariates = covariates;
    if (label_in_outcome(label)) s.outcome_covariates = covariates;
    return s;
}

std::vector<std::string> AdjustmentStrategy::covariates() const {
    std::vector<std::string> out = mem_covariates;
    for (const auto& c : outcome_covariates)
        if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
    return out;
}

bool AdjustmentStrategy::in_mem(const std::string& name) const {
    return std::find(mem_covariates.begin(), mem_covariates.end(), name) != mem_covariates.end();
}

bool AdjustmentStrategy::in_outcome(const std::string& name) const {
    return std::find(outcome_covariates.begin(), outcome_covariates.end(), name) != outcome_covariates.end();
}

std::optional<StrategyLabel> AdjustmentStrategy::label() const {
    auto all = covariates();
    if (all.empty()) return StrategyLabel::NN;
    std::set<std::pair<bool, bool>> kinds;
    for (const auto& c : all) kinds.insert({in_mem(c), in_outcome(c)});
    if (kinds.size() != 1) return std::nullopt;
    auto [m, o] = *kinds.begin();
    if (m && o) return StrategyLabel::OM;
    if (m) return StrategyLabel::NM;
    return StrategyLabel::ON;
}

std::string AdjustmentStrategy::describe() const {
    if (auto l = label()) return to_string(*l);
    std::string s = "mixed(";
    bool first = true;
    for (const auto& c : covariates()) {
        if (!first) s += ",";
        first = false;
        s += c + ":";
        s += in_outcome(c) ? 'O' : '-';
        s += in_mem(c) ? 'M' : '-';
    }
    return s + ")";
}

ImpliedCovariance implied_covariance(const DgpCoefficients& g) {
    // loadings of each variable on the independent sources (V, e_x, e_z, e_y)
    double vv = g.var_v();
    std::array<std::array<double, 4>, 4> load{};
    load[0] = {1.0, 0.0, 0.0, 0.0};
    load[1] = {g.eta_v, 1.0, 0.0, 0.0};
    for (int k = 0; k < 4; ++k) load[2][k] = g.theta_x * load[1][k];
    load[2][0] += g.theta_v;
    load[2][2] += 1.0;
    for (int k = 0; k < 4; ++k) load[3][k] = g.beta_x * load[1][k];
    load[3][0] += g.beta_v;
    load[3][3] += 1.0;
    std::array<double, 4> src_var{vv, g.sd_ex * g.sd_ex, g.sd_ez * g.sd_ez, g.sd_ey * g.sd_ey};

    ImpliedCovariance c;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            double s = 0.0;
            for (int k = 0; k < 4; ++k) s += load[i][k] * load[j][k] * src_var[k];
            c.s[i][j] = s;
        }
    return c;
}

}
