#include "calibra_cli/cli.hpp"

#include "calibra/advisor.hpp"
#include "calibra/errors.hpp"
#include "calibra/estimators.hpp"
#include "calibra/lasso.hpp"
#include "calibra/rng.hpp"
#include "calibra/simulator.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <optional>
#include <set>
#include <sstream>

namespace calibra::cli {

using nlohmann::json;

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string sig4(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

namespace {

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, ',')) {
        auto b = cur.find_first_not_of(" \t");
        auto e = cur.find_last_not_of(" \t");
        if (b != std::string::npos) out.push_back(cur.substr(b, e - b + 1));
    }
    return out;
}

std::string join(const std::vector<std::string>& v, const std::string& sep = ",") {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + v[i];
    return s;
}

std::string csv_cell(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
}

std::string full(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

StrategyLabel strategy_or_throw(const std::string& s) {
    auto l = parse_strategy_label(s);
    if (!l) throw SchemaError("unknown strategy '" + s + "' (use OM, --, -M, O- or NN, NM, ON)");
    return *l;
}

Link link_or_throw(const std::string& s) {
    if (s == "identity") return Link::identity;
    if (s == "logit") return Link::logit;
    throw SchemaError("unknown link '" + s + "'");
}

SandwichMode sandwich_or_throw(const std::string& s) {
    if (s == "model") return SandwichMode::model;
    if (s == "empirical") return SandwichMode::empirical;
    throw SchemaError("unknown sandwich mode '" + s + "'");
}

// everything a command hands back before rendering
struct Report {
    json data;
    std::string md;
    std::string csv;
    int code = ok;
};

struct Common {
    std::string format = "md";
    std::string out;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--format", c.format, "json, csv or md")->check(CLI::IsMember({"json", "csv", "md"}));
    sub->add_option("--out", c.out, "write the report here instead of stdout");
}

// canonical text of the options that affect results
std::string canonical_config(const CLI::App* sub) {
    static const std::set<std::string> skip{"--help", "--format", "--out", "--threads", "--config"};
    std::vector<std::string> parts;
    for (const CLI::Option* o : sub->get_options()) {
        std::string name = o->get_name();
        if (skip.count(name) || name.empty()) continue;
        parts.push_back(name + "=" + join(o->results(), ";"));
    }
    std::sort(parts.begin(), parts.end());
    return std::string(sub->get_name()) + "\n" + join(parts, "\n");
}

json repro_block(const CLI::App* sub, std::optional<std::uint64_t> seed) {
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical_config(sub))));
    json r{{"command", sub->get_name()}, {"version", CALIBRA_VERSION}, {"rng_version", kRngVersion}, {"config_hash", hex}};
    r["seed"] = seed ? json(*seed) : json(nullptr);
    return r;
}

std::string repro_md(const json& r) {
    std::ostringstream os;
    os << "calibra " << r["version"].get<std::string>() << " | " << r["command"].get<std::string>()
       << " | seed " << (r["seed"].is_null() ? std::string("-") : std::to_string(r["seed"].get<std::uint64_t>()))
       << " | config " << r["config_hash"].get<std::string>() << " | " << r["rng_version"].get<std::string>() << "\n";
    return os.str();
}

std::string repro_csv(const json& r) {
    return "# calibra " + r["version"].get<std::string>() + ", seed " +
           (r["seed"].is_null() ? std::string("-") : std::to_string(r["seed"].get<std::uint64_t>())) + ", config " +
           r["config_hash"].get<std::string>() + ", " + r["rng_version"].get<std::string>() + "\n";
}

// ---------------------------------------------------------------- estimate

struct EstimateArgs {
    std::string main, validation;
    std::string strategies = "OM";
    std::string covariates, mem_covariates, outcome_covariates, roles, interaction;
    std::string link = "identity", sandwich = "model";
};

std::string placement_label(const AdjustmentStrategy& s, const std::string& c) {
    bool m = s.in_mem(c), o = s.in_outcome(c);
    return m && o ? "OM" : m ? "-M" : o ? "O-" : "--";
}

Report cmd_estimate(const EstimateArgs& a, const CLI::App* sub) {
    Link link = link_or_throw(a.link);
    SandwichMode sw = sandwich_or_throw(a.sandwich);
    OutcomeType t = link == Link::logit ? OutcomeType::binary : OutcomeType::continuous;
    Dataset main = read_csv(a.main, Arm::main, t);
    Dataset val = read_csv(a.validation, Arm::validation, t);

    std::map<std::string, DagRole> roles;
    if (!a.roles.empty()) {
        roles = parse_roles(split_list(a.roles));
        for (const auto& [name, r] : roles)
            if (!main.has(name)) throw SchemaError("role tag references unknown column '" + name + "'");
    }

    std::vector<AdjustmentStrategy> strategies;
    if (!a.mem_covariates.empty() || !a.outcome_covariates.empty()) {
        AdjustmentStrategy s;
        s.mem_covariates = split_list(a.mem_covariates);
        s.outcome_covariates = split_list(a.outcome_covariates);
        strategies.push_back(s);
    } else {
        for (const auto& l : split_list(a.strategies))
            strategies.push_back(AdjustmentStrategy::uniform(strategy_or_throw(l), split_list(a.covariates)));
    }
    if (strategies.empty()) throw SchemaError("no strategy given");

    OutcomeModelSpec spec;
    spec.link = link;
    spec.sandwich = sw;
    spec.interaction_covariates = split_list(a.interaction);

    Report rep;
    rep.data["reproducibility"] = repro_block(sub, std::nullopt);
    rep.data["inputs"] = {{"main", a.main}, {"validation", a.validation}, {"n_main", main.n()}, {"n_validation", val.n()},
                          {"link", to_string(link)}, {"sandwich", to_string(sw)}};
    json rows = json::array();
    std::ostringstream md, csv;
    bool logit = link == Link::logit;
    md << repro_md(rep.data["reproducibility"]);
    md << "main n = " << main.n() << ", validation n = " << val.n() << ", link " << to_string(link) << "\n\n";
    md << (logit ? "| strategy | beta1 | SE | OR | OR 95% CI | naive OR | delta beta1 | advisor |\n"
                    "|---|---|---|---|---|---|---|---|\n"
                 : "| strategy | beta1 | SE | 95% CI | naive beta1 | delta | advisor |\n|---|---|---|---|---|---|---|\n");
    csv << repro_csv(rep.data["reproducibility"]);
    csv << "strategy,beta1,se,ci_low,ci_high,naive_beta1,delta,advisor_valid\n";
    std::vector<std::string> notes;

    for (const auto& s : strategies) {
        EstimateResult r = spec.include_interaction() ? estimate_with_interaction(main, val, s, spec)
                                                      : estimate_crs(main, val, s, spec);
        double naive = naive_beta1(main, s.outcome_covariates, link);
        json row{{"strategy", s.describe()},
                 {"mem_covariates", s.mem_covariates},
                 {"outcome_covariates", s.outcome_covariates},
                 {"coef_names", r.coef_names},
                 {"beta", r.beta},
                 {"beta1", r.beta1()},
                 {"se_beta1", r.se_beta1},
                 {"ci95", {r.ci95.first, r.ci95.second}},
                 {"naive_beta1", naive},
                 {"delta_vs_naive", r.beta1() - naive},
                 {"mem", {{"alpha", r.mem.alpha}, {"residual_var", r.mem.residual_var}, {"covariates", r.mem.included_covariates}}},
                 {"diagnostics",
                  {{"stage1_score_max", r.diagnostics.stage1_score_max},
                   {"stage2_score_max", r.diagnostics.stage2_score_max},
                   {"irls_iterations", r.diagnostics.irls_iterations}}}};
        json cov = json::array();
        for (std::size_t i = 0; i < r.sandwich_cov.rows(); ++i) {
            json line = json::array();
            for (std::size_t j = 0; j < r.sandwich_cov.cols(); ++j) line.push_back(r.sandwich_cov(i, j));
            cov.push_back(line);
        }
        row["sandwich_cov"] = cov;
        if (logit) {
            row["odds_ratio"] = std::exp(r.beta1());
            row["odds_ratio_ci95"] = {std::exp(r.ci95.first), std::exp(r.ci95.second)};
            ConditionReport c = assess_logistic_conditions(main, val, r);
            row["conditions"] = {{"residual_var", c.residual_var},
                                 {"quantity_i", c.quantity_i},
                                 {"condition_i", c.condition_i},
                                 {"prevalence", c.prevalence},
                                 {"homoskedasticity_p", c.homoskedasticity_p},
                                 {"condition_ii", c.condition_ii},
                                 {"overall", c.overall},
                                 {"warning", c.warning}};
            notes.push_back(s.describe() + ": condition I " + (c.condition_i ? "holds" : "fails") + " (" +
                            sig4(c.quantity_i) + " vs 0.5), condition II " + (c.condition_ii ? "holds" : "fails") +
                            " (prevalence " + sig4(c.prevalence) + ", homoskedasticity p " +
                            sig4(c.homoskedasticity_p) + ")" + (c.warning.empty() ? "" : "; " + c.warning));
        }
        std::string verdict = "-";
        if (!roles.empty()) {
            std::vector<std::string> bad;
            for (const auto& [name, role] : roles) {
                std::string pl = placement_label(s, name);
                if (!validity_matrix(role).at(*parse_strategy_label(pl)).valid)
                    bad.push_back(name + " (" + role_name(role) + ") placed " + pl);
            }
            row["advisor_valid"] = bad.empty();
            row["advisor_issues"] = bad;
            verdict = bad.empty() ? "valid under declared roles" : "biased under declared roles";
            if (!bad.empty()) notes.push_back(s.describe() + ": biased under declared roles: " + join(bad, "; "));
        }
        row["advisor"] = verdict;
        if (!r.interaction_covariates.empty()) row["interaction_covariates"] = r.interaction_covariates;

        if (logit)
            md << "| " << s.describe() << " | " << sig4(r.beta1()) << " | " << sig4(r.se_beta1) << " | "
               << sig4(std::exp(r.beta1())) << " | (" << sig4(std::exp(r.ci95.first)) << ", "
               << sig4(std::exp(r.ci95.second)) << ") | " << sig4(std::exp(naive)) << " | "
               << sig4(r.beta1() - naive) << " | " << verdict << " |\n";
        else
            md << "| " << s.describe() << " | " << sig4(r.beta1()) << " | " << sig4(r.se_beta1) << " | ("
               << sig4(r.ci95.first) << ", " << sig4(r.ci95.second) << ") | " << sig4(naive) << " | "
               << sig4(r.beta1() - naive) << " | " << verdict << " |\n";
        csv << csv_cell(s.describe()) << "," << full(r.beta1()) << "," << full(r.se_beta1) << "," << full(r.ci95.first)
            << "," << full(r.ci95.second) << "," << full(naive) << "," << full(r.beta1() - naive) << ","
            << (roles.empty() ? "" : (row["advisor_valid"].get<bool>() ? "true" : "false")) << "\n";
        rows.push_back(row);
    }
    rep.data["results"] = rows;
    if (!notes.empty()) {
        md << "\n";
        for (const auto& n : notes) md << "- " << n << "\n";
    }
    rep.md = md.str();
    rep.csv = csv.str();
    return rep;
}

// ---------------------------------------------------------------- advise

struct AdviseArgs {
    std::string roles, covariates, main;
};

Report cmd_advise(const AdviseArgs& a, const CLI::App* sub) {
    auto roles = parse_roles(split_list(a.roles));
    std::vector<std::string> declared = split_list(a.covariates);
    if (!a.main.empty()) {
        Dataset d = read_csv(a.main, Arm::main, OutcomeType::continuous);
        for (const auto& n : d.names())
            if (n != kSurrogate && n != kOutcome && n != kExposure) declared.push_back(n);
    }
    std::vector<std::string> untagged;
    for (const auto& c : declared)
        if (!roles.count(c)) untagged.push_back(c);
    if (!untagged.empty()) throw SchemaError("untagged covariate(s): " + join(untagged, ", "));
    if (roles.empty()) throw SchemaError("no covariates tagged");

    Recommendation rec = recommend(roles);
    Report rep;
    rep.data["reproducibility"] = repro_block(sub, std::nullopt);
    json adv = json::array();
    std::ostringstream md, csv;
    md << repro_md(rep.data["reproducibility"]) << "\n";
    md << "| covariate | role | place in | alternative | collect in both studies |\n|---|---|---|---|---|\n";
    csv << repro_csv(rep.data["reproducibility"]) << "covariate,role,placement,alternative,collect_in_both,rationale\n";
    std::vector<std::string> collect;
    for (const auto& c : rec.advice) {
        std::string alt = c.alternative ? to_string(*c.alternative) : "";
        adv.push_back({{"covariate", c.covariate},
                       {"role", role_name(c.role)},
                       {"dag", c.role.dag_index},
                       {"placement", to_string(c.placement)},
                       {"alternative", c.alternative ? json(alt) : json(nullptr)},
                       {"collect_in_both_studies", c.collect_in_both_studies},
                       {"rationale", c.rationale}});
        md << "| " << c.covariate << " | " << role_name(c.role) << " | " << to_string(c.placement) << " | "
           << (alt.empty() ? "-" : alt) << " | " << (c.collect_in_both_studies ? "yes" : "no") << " |\n";
        csv << csv_cell(c.covariate) << "," << csv_cell(role_name(c.role)) << "," << to_string(c.placement) << ","
            << alt << "," << (c.collect_in_both_studies ? "true" : "false") << "," << csv_cell(c.rationale) << "\n";
        if (c.collect_in_both_studies) collect.push_back(c.covariate);
    }
    rep.data["advice"] = adv;
    rep.data["strategy"] = {{"mem_covariates", rec.strategy.mem_covariates},
                            {"outcome_covariates", rec.strategy.outcome_covariates},
                            {"description", rec.strategy.describe()}};
    md << "\nMEM: " << (rec.strategy.mem_covariates.empty() ? "-" : join(rec.strategy.mem_covariates, ", "))
       << "\noutcome model: "
       << (rec.strategy.outcome_covariates.empty() ? "-" : join(rec.strategy.outcome_covariates, ", ")) << "\n";
    if (!collect.empty())
        md << "collect in both the main and validation studies: " << join(collect, ", ") << "\n";
    md << "\n";
    for (const auto& c : rec.advice) md << "- " << c.covariate << ": " << c.rationale << "\n";
    rep.data["collect_in_both_studies"] = collect;
    rep.md = md.str();
    rep.csv = csv.str();
    return rep;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
    std::string scenarios;
    std::optional<std::size_t> reps;
    std::uint64_t seed = 20240101;
    unsigned threads = 0;
    std::string sandwich = "model";
    std::optional<int> dag;
    std::optional<double> eta_v, theta_x, theta_v, beta_x, beta_v;
    std::optional<std::size_t> n_total, n_vs;
    bool binary = false, binary_v = false;
};

std::vector<Scenario> select_scenarios(const SimulateArgs& a) {
    std::vector<Scenario> out;
    if (a.dag) {
        int d = *a.dag;
        if (d < 1 || d > 8) throw SchemaError("--dag must be 1..8");
        Scenario s = find_scenario("dag" + std::to_string(d) + "-base-" + (a.binary ? "binary" : "continuous"));
        s.label = "custom-dag" + std::to_string(d) + (a.binary ? "-binary" : "-continuous");
        if (a.eta_v) s.coef.eta_v = *a.eta_v;
        if (a.theta_x) s.coef.theta_x = *a.theta_x;
        if (a.theta_v) s.coef.theta_v = *a.theta_v;
        if (a.beta_x) s.coef.beta_x = *a.beta_x;
        if (a.beta_v) s.coef.beta_v = *a.beta_v;
        if (a.n_total) s.n_total = *a.n_total;
        if (a.n_vs) s.n_vs = *a.n_vs;
        if (a.binary_v) s.coef.v_dist = VDist::bernoulli04;
        auto v = s.violations();
        if (!v.empty()) throw SchemaError("custom scenario: " + join(v, "; "));
        out.push_back(s);
    }
    for (const auto& l : split_list(a.scenarios)) {
        if (l == "all") {
            auto cat = scenario_catalog();
            out.insert(out.end(), cat.begin(), cat.end());
        } else if (l.find('*') != std::string::npos) {
            // single-star wildcard
            auto star = l.find('*');
            std::string pre = l.substr(0, star), post = l.substr(star + 1);
            bool any = false;
            for (const auto& s : scenario_catalog()) {
                const std::string& n = s.label;
                if (n.size() >= pre.size() + post.size() && n.compare(0, pre.size(), pre) == 0 &&
                    n.compare(n.size() - post.size(), post.size(), post) == 0) {
                    out.push_back(s);
                    any = true;
                }
            }
            if (!any) throw SchemaError("no scenario matches '" + l + "'");
        } else {
            out.push_back(find_scenario(l));
        }
    }
    if (out.empty()) throw SchemaError("no scenario selected (use --scenario or --dag)");
    return out;
}

Report cmd_simulate(const SimulateArgs& a, const CLI::App* sub) {
    if (a.reps && *a.reps == 0) throw DomainError("--reps must be at least 1");
    std::vector<Scenario> scen = select_scenarios(a);
    RunOptions opt;
    opt.threads = a.threads;
    opt.sandwich = sandwich_or_throw(a.sandwich);

    Report rep;
    rep.data["reproducibility"] = repro_block(sub, a.seed);
    json rows = json::array();
    std::ostringstream md, csv, md_eff;
    md << repro_md(rep.data["reproducibility"]) << "\n";
    md << "Percent bias\n\n| scenario | OM | -- | -M | O- | failed |\n|---|---|---|---|---|---|\n";
    md_eff << "\nERE (coverage)\n\n| scenario | OM | -- | -M | O- |\n|---|---|---|---|---|\n";
    csv << repro_csv(rep.data["reproducibility"]);
    csv << "scenario,dag,outcome,strategy,n_reps,n_failed,percent_bias,mean_estimate,empirical_variance,"
           "mean_sandwich_variance,ere,coverage95,condition_failures\n";
    for (Scenario s : scen) {
        if (a.reps) s.n_reps = *a.reps;
        SimulationReport r = run_scenario(s, a.seed, opt);
        json row{{"scenario", s.label},
                 {"dag", s.dag_index},
                 {"outcome", to_string(s.outcome_type)},
                 {"coefficients",
                  {{"eta_v", s.coef.eta_v}, {"theta_x", s.coef.theta_x}, {"theta_v", s.coef.theta_v},
                   {"beta_x", s.coef.beta_x}, {"beta_v", s.coef.beta_v}, {"sd_ex", s.coef.sd_ex},
                   {"sd_ez", s.coef.sd_ez}, {"sd_ey", s.coef.sd_ey},
                   {"v_dist", s.coef.v_dist == VDist::standard_normal ? "normal" : "bernoulli(0.4)"}}},
                 {"n_total", s.n_total},
                 {"n_vs", s.n_vs},
                 {"n_reps", r.n_reps},
                 {"n_failed", r.n_failed},
                 {"failure_messages", r.failure_messages},
                 {"master_seed", r.master_seed},
                 {"rng_version", r.rng_version}};
        if (s.outcome_type == OutcomeType::binary) row["logit_intercept"] = s.logit_intercept;
        json metrics = json::object();
        md << "| " << s.label;
        md_eff << "| " << s.label;
        for (const auto& m : r.metrics) {
            std::string lab = to_string(m.strategy);
            metrics[lab] = {{"percent_bias", m.percent_bias},
                            {"mean_estimate", m.mean_estimate},
                            {"empirical_variance", m.empirical_variance},
                            {"mean_sandwich_variance", m.mean_sandwich_variance},
                            {"ere", m.ere},
                            {"coverage95", m.coverage95},
                            {"condition_failures", m.condition_failures}};
            md << " | " << sig4(m.percent_bias);
            md_eff << " | " << sig4(m.ere) << " (" << sig4(m.coverage95) << ")";
            csv << s.label << "," << s.dag_index << "," << to_string(s.outcome_type) << "," << csv_cell(lab) << ","
                << r.n_reps << "," << r.n_failed << "," << full(m.percent_bias) << "," << full(m.mean_estimate) << ","
                << full(m.empirical_variance) << "," << full(m.mean_sandwich_variance) << "," << full(m.ere) << ","
                << full(m.coverage95) << "," << m.condition_failures << "\n";
        }
        md << " | " << r.n_failed << " |\n";
        md_eff << " |\n";
        row["metrics"] = metrics;
        rows.push_back(row);
    }
    rep.data["scenarios"] = rows;
    rep.md = md.str() + md_eff.str();
    rep.csv = csv.str();
    return rep;
}

// ---------------------------------------------------------------- verify

struct VerifyArgs {
    std::vector<std::string> inject;
};

std::map<int, DgpCoefficients> parse_injections(const std::vector<std::string>& items) {
    std::map<int, DgpCoefficients> out;
    for (const auto& raw : items)
        for (const auto& it : split_list(raw)) {
            // DAG:param=value
            auto colon = it.find(':'), eq = it.find('=');
            if (colon == std::string::npos || eq == std::string::npos || eq < colon)
                throw SchemaError("--inject expects DAG:param=value, got '" + it + "'");
            int d = 0;
            double v = 0;
            try {
                d = std::stoi(it.substr(0, colon));
                v = std::stod(it.substr(eq + 1));
            } catch (const std::exception&) {
                throw SchemaError("--inject: cannot parse '" + it + "'");
            }
            if (d < 1 || d > 8) throw SchemaError("--inject: DAG must be 1..8");
            if (!out.count(d)) out[d] = base_case(d);
            DgpCoefficients& g = out[d];
            std::string p = it.substr(colon + 1, eq - colon - 1);
            if (p == "eta_v") g.eta_v = v;
            else if (p == "theta_x") g.theta_x = v;
            else if (p == "theta_v") g.theta_v = v;
            else if (p == "beta_x") g.beta_x = v;
            else if (p == "beta_v") g.beta_v = v;
            else throw SchemaError("--inject: unknown parameter '" + p + "'");
        }
    return out;
}

Report cmd_verify(const VerifyArgs& a, const CLI::App* sub) {
    auto overrides = parse_injections(a.inject);
    auto cells = verify_validity_table(overrides);
    Report rep;
    rep.data["reproducibility"] = repro_block(sub, std::nullopt);
    std::ostringstream md, csv;
    md << repro_md(rep.data["reproducibility"]) << "\n";
    md << "| DAG | role | OM | -- | -M | O- |\n|---|---|---|---|---|---|\n";
    csv << repro_csv(rep.data["reproducibility"]) << "dag,strategy,claimed,plim,truth,rel_dev,result\n";
    json jc = json::array();
    int fails = 0;
    std::vector<std::string> failed;
    for (int d = 1; d <= 8; ++d) {
        md << "| " << d << " | " << role_name(role_from_index(d));
        for (StrategyLabel l : kAllStrategies)
            for (const auto& c : cells)
                if (c.dag_index == d && c.strategy == l) {
                    std::string res = c.pass ? "PASS" : "FAIL";
                    md << " | " << (c.claimed_valid ? "valid" : "biased") << " " << sig4(c.plim) << " " << res;
                    csv << d << "," << csv_cell(to_string(l)) << "," << (c.claimed_valid ? "valid" : "biased") << ","
                        << full(c.plim) << "," << full(c.truth) << "," << full(c.rel_dev) << "," << res << "\n";
                    jc.push_back({{"dag", d},
                                  {"strategy", to_string(l)},
                                  {"claimed", c.claimed_valid ? "valid" : "biased"},
                                  {"plim", c.plim},
                                  {"truth", c.truth},
                                  {"rel_dev", c.rel_dev},
                                  {"pass", c.pass}});
                    if (!c.pass) {
                        ++fails;
                        failed.push_back("DAG " + std::to_string(d) + " / " + to_string(l));
                    }
                }
        md << " |\n";
    }
    auto ne = verify_counterexample(std::nullopt, {1.0, 1.0, 1.0}, CounterexampleTarget::neither_model);
    auto oo = verify_counterexample(8, {1.0, 2.0, 0.0}, CounterexampleTarget::outcome_only);
    rep.data["cells"] = jc;
    rep.data["counterexamples"] = {
        {{"target", "neither_model"}, {"a", 1.0}, {"b", 1.0}, {"c", 1.0}, {"lhs", ne.lhs}, {"rhs", ne.rhs}, {"equal", ne.equal}},
        {{"target", "outcome_only"}, {"a", 1.0}, {"b", 2.0}, {"c", 0.0}, {"lhs", oo.lhs}, {"rhs", oo.rhs}, {"equal", oo.equal}}};
    rep.data["failures"] = failed;
    md << "\n" << cells.size() << " cells, " << cells.size() - fails << " PASS, " << fails << " FAIL\n";
    for (const auto& f : failed) md << "FAIL: " << f << "\n";
    md << "counterexample, V in neither model (a=1, b=1, c=1): lhs " << sig4(ne.lhs)
       << (std::abs(ne.lhs - 5.0 / 3.0) < 1e-12 ? " (= 5/3)" : "") << " vs rhs " << sig4(ne.rhs) << ", "
       << (ne.equal ? "equal" : "unequal") << "\n";
    md << "counterexample, V in outcome model only (a=1, b=2, c=0): lhs " << sig4(oo.lhs)
       << (std::abs(oo.lhs - 11.0 / 14.0) < 1e-12 ? " (= 11/14)" : "") << " vs rhs " << sig4(oo.rhs) << ", "
       << (oo.equal ? "equal" : "unequal") << "\n";
    csv << "# counterexample neither_model lhs " << full(ne.lhs) << " rhs " << full(ne.rhs) << "\n";
    csv << "# counterexample outcome_only lhs " << full(oo.lhs) << " rhs " << full(oo.rhs) << "\n";
    rep.md = md.str();
    rep.csv = csv.str();
    rep.code = fails ? verify_failed : ok;
    return rep;
}

// ---------------------------------------------------------------- lasso-mem

struct LassoArgs {
    std::string main, validation, candidates, confounders, lambdas;
    std::size_t folds = 10, bootstrap = 1000;
    std::uint64_t seed = 1;
    std::string link = "identity";
};

Report cmd_lasso(const LassoArgs& a, const CLI::App* sub) {
    Link link = link_or_throw(a.link);
    OutcomeType t = link == Link::logit ? OutcomeType::binary : OutcomeType::continuous;
    Dataset main = read_csv(a.main, Arm::main, t);
    Dataset val = read_csv(a.validation, Arm::validation, t);
    DataDrivenOptions opt;
    opt.folds = a.folds;
    opt.bootstrap = a.bootstrap;
    opt.seed = a.seed;
    opt.link = link;
    if (!a.lambdas.empty()) {
        opt.lambda_grid.clear();
        for (const auto& s : split_list(a.lambdas)) {
            try {
                opt.lambda_grid.push_back(std::stod(s));
            } catch (const std::exception&) {
                throw SchemaError("--lambdas: cannot parse '" + s + "'");
            }
        }
    }
    auto cands = split_list(a.candidates);
    if (cands.empty()) throw SchemaError("--candidates is empty");
    DataDrivenResult r = data_driven_mem_estimate(main, val, cands, split_list(a.confounders), opt);

    Report rep;
    rep.data["reproducibility"] = repro_block(sub, a.seed);
    rep.data["selection"] = {{"candidates", r.selection.candidates},
                             {"retained", r.selection.retained},
                             {"zeroed", r.selection.zeroed},
                             {"best_lambda", r.selection.best_lambda},
                             {"lambda_grid", r.selection.lambda_grid},
                             {"cv_mean", r.selection.cv_mean}};
    json path = json::array();
    for (std::size_t k = 0; k < r.selection.path.rows(); ++k) {
        json line = json::array();
        for (std::size_t j = 0; j < r.selection.path.cols(); ++j) line.push_back(r.selection.path(k, j));
        path.push_back(line);
    }
    rep.data["selection"]["path"] = path;
    rep.data["selection"]["path_columns"] = [&] {
        std::vector<std::string> c{kSurrogate};
        c.insert(c.end(), cands.begin(), cands.end());
        return c;
    }();
    rep.data["estimate"] = {{"coef_names", r.coef_names},
                            {"beta", r.beta},
                            {"beta1", r.beta1},
                            {"mem_coef", r.mem_coef},
                            {"bootstrap", r.bootstrap},
                            {"boot_se", r.boot_se},
                            {"ci_percentile", {r.ci_percentile.first, r.ci_percentile.second}},
                            {"ci_normal", {r.ci_normal.first, r.ci_normal.second}}};
    if (link == Link::logit) rep.data["estimate"]["odds_ratio"] = std::exp(r.beta1);

    std::ostringstream md, csv;
    md << repro_md(rep.data["reproducibility"]) << "\n";
    md << "best lambda " << sig4(r.selection.best_lambda) << "\nretained: "
       << (r.selection.retained.empty() ? "-" : join(r.selection.retained, ", "))
       << "\nzeroed: " << (r.selection.zeroed.empty() ? "-" : join(r.selection.zeroed, ", ")) << "\n\n";
    md << "| | beta1 | bootstrap SE | percentile 95% CI | normal 95% CI |\n|---|---|---|---|---|\n";
    md << "| data-driven MEM | " << sig4(r.beta1) << " | " << (r.bootstrap ? sig4(r.boot_se) : "-") << " | ";
    if (r.bootstrap)
        md << "(" << sig4(r.ci_percentile.first) << ", " << sig4(r.ci_percentile.second) << ") | (" << sig4(r.ci_normal.first)
           << ", " << sig4(r.ci_normal.second) << ") |\n";
    else
        md << "- | - |\n";
    if (link == Link::logit) md << "\nodds ratio " << sig4(std::exp(r.beta1)) << "\n";
    csv << repro_csv(rep.data["reproducibility"]) << "term,value\n";
    csv << "beta1," << full(r.beta1) << "\nboot_se," << full(r.boot_se) << "\nbest_lambda," << full(r.selection.best_lambda)
        << "\n";
    for (std::size_t j = 0; j < cands.size(); ++j)
        csv << "mem_coef:" << csv_cell(cands[j]) << "," << full(r.mem_coef[2 + j]) << "\n";
    rep.md = md.str();
    rep.csv = csv.str();
    return rep;
}

// ---------------------------------------------------------------- catalog

struct CatalogArgs {
    std::string filter;
};

Report cmd_catalog(const CatalogArgs& a, const CLI::App* sub) {
    Report rep;
    rep.data["reproducibility"] = repro_block(sub, std::nullopt);
    std::ostringstream md, csv;
    md << repro_md(rep.data["reproducibility"]) << "\n";
    md << "| label | DAG | role | eta_v | theta_x | theta_v | beta_x | beta_v | V | n_total | n_vs |\n"
          "|---|---|---|---|---|---|---|---|---|---|---|\n";
    csv << "label,dag,outcome,eta_v,theta_x,theta_v,beta_x,beta_v,v_dist,n_total,n_vs,n_reps\n";
    json rows = json::array();
    for (const auto& s : scenario_catalog()) {
        if (!a.filter.empty() && s.label.find(a.filter) == std::string::npos) continue;
        const auto& c = s.coef;
        std::string vd = c.v_dist == VDist::standard_normal ? "normal" : "bernoulli(0.4)";
        md << "| " << s.label << " | " << s.dag_index << " | " << role_name(c.role()) << " | " << sig4(c.eta_v) << " | "
           << sig4(c.theta_x) << " | " << sig4(c.theta_v) << " | " << sig4(c.beta_x) << " | " << sig4(c.beta_v) << " | "
           << vd << " | " << s.n_total << " | " << s.n_vs << " |\n";
        csv << s.label << "," << s.dag_index << "," << to_string(s.outcome_type) << "," << full(c.eta_v) << ","
            << full(c.theta_x) << "," << full(c.theta_v) << "," << full(c.beta_x) << "," << full(c.beta_v) << "," << vd
            << "," << s.n_total << "," << s.n_vs << "," << s.n_reps << "\n";
        rows.push_back({{"label", s.label},   {"dag", s.dag_index},       {"outcome", to_string(s.outcome_type)},
                        {"eta_v", c.eta_v},   {"theta_x", c.theta_x},     {"theta_v", c.theta_v},
                        {"beta_x", c.beta_x}, {"beta_v", c.beta_v},       {"v_dist", vd},
                        {"n_total", s.n_total}, {"n_vs", s.n_vs},         {"n_reps", s.n_reps}});
    }
    rep.data["scenarios"] = rows;
    rep.md = md.str();
    rep.csv = csv.str();
    return rep;
}

// ---------------------------------------------------------------- plumbing

// --config FILE after the subcommand: its keys become flags placed before the user's own, so flags win
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
    std::vector<std::string> out;
    std::optional<std::string> cfg;
    std::size_t insert_at = std::string::npos;
    for (std::size_t i = 0; i < args.size(); ++i) {
        const std::string& a = args[i];
        if (a == "--config" && i + 1 < args.size()) {
            cfg = args[++i];
            continue;
        }
        if (a.rfind("--config=", 0) == 0) {
            cfg = a.substr(9);
            continue;
        }
        if (insert_at == std::string::npos && !a.empty() && a[0] != '-') insert_at = out.size() + 1;
        out.push_back(a);
    }
    if (!cfg) return out;
    std::ifstream f(*cfg);
    if (!f) throw SchemaError("cannot open config file '" + *cfg + "'");
    std::vector<std::string> extra;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos || line[b] == '#' || line[b] == ';') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw SchemaError(*cfg + ":" + std::to_string(lineno) + ": expected key = value");
        auto strip = [](std::string s) {
            auto p = s.find_first_not_of(" \t\r");
            auto q = s.find_last_not_of(" \t\r");
            s = p == std::string::npos ? "" : s.substr(p, q - p + 1);
            if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
            return s;
        };
        std::string key = strip(line.substr(0, eq)), val = strip(line.substr(eq + 1));
        std::replace(key.begin(), key.end(), '_', '-');
        if (key.empty()) throw SchemaError(*cfg + ":" + std::to_string(lineno) + ": empty key");
        if (val == "true") extra.push_back("--" + key);
        else if (val != "false") extra.push_back("--" + key + "=" + val);
    }
    if (insert_at == std::string::npos) insert_at = out.size();
    out.insert(out.begin() + static_cast<long>(std::min(insert_at, out.size())), extra.begin(), extra.end());
    return out;
}

void emit(const Report& r, const Common& c, std::ostream& out) {
    std::string text = c.format == "json" ? r.data.dump(2) + "\n" : c.format == "csv" ? r.csv : r.md;
    if (c.out.empty()) {
        out << text;
        return;
    }
    std::ofstream f(c.out, std::ios::binary);
    if (!f) throw SchemaError("cannot write '" + c.out + "'");
    f << text;
}

}

std::map<std::string, DagRole> parse_roles(const std::vector<std::string>& items) {
    std::map<std::string, DagRole> out;
    for (const auto& it : items) {
        auto eq = it.find('=');
        if (eq == std::string::npos || eq == 0) throw SchemaError("role tag '" + it + "' should look like name=DAG");
        std::string name = it.substr(0, eq), tag = it.substr(eq + 1);
        std::string digits = tag;
        for (const char* pre : {"dag", "DAG", "V", "v"})
            if (digits.rfind(pre, 0) == 0) {
                digits = digits.substr(std::string(pre).size());
                break;
            }
        if (digits.size() != 1 || digits[0] < '1' || digits[0] > '8')
            throw SchemaError("role tag '" + it + "': DAG must be 1..8");
        if (out.count(name)) throw SchemaError("covariate '" + name + "' tagged twice");
        out[name] = role_from_index(digits[0] - '0');
    }
    return out;
}

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
    CLI::App app{"calibra: regression calibration with covariate adjustment"};
    app.name("calibra");
    app.require_subcommand(1);
    app.set_version_flag("--version", CALIBRA_VERSION);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    Common common;
    auto config_note = "--config FILE: key = value lines, keys are option names";

    EstimateArgs ea;
    auto* est = app.add_subcommand("estimate", "corrected exposure effect from main and validation CSVs");
    est->add_option("--main", ea.main, "main-study CSV (Z, covariates, Y)")->required();
    est->add_option("--validation", ea.validation, "validation-study CSV (X, Z, covariates)")->required();
    est->add_option("--strategy", ea.strategies, "comma list of OM, --, -M, O- (aliases NN, NM, ON)");
    est->add_option("--covariates", ea.covariates, "covariates the strategy labels apply to");
    est->add_option("--mem-covariates", ea.mem_covariates, "explicit MEM covariates (overrides --strategy)");
    est->add_option("--outcome-covariates", ea.outcome_covariates, "explicit outcome-model covariates");
    est->add_option("--roles", ea.roles, "name=DAG tags for the advisor cross-check, e.g. age=4,smoking=3");
    est->add_option("--interaction", ea.interaction, "covariates interacting with the exposure");
    est->add_option("--link", ea.link)->check(CLI::IsMember({"identity", "logit"}));
    est->add_option("--sandwich", ea.sandwich)->check(CLI::IsMember({"model", "empirical"}));
    add_common(est, common);
    est->footer(config_note);

    AdviseArgs aa;
    auto* adv = app.add_subcommand("advise", "where each covariate belongs, given its DAG role");
    adv->add_option("--roles", aa.roles, "name=DAG tags, e.g. age=4,smoking=3")->required();
    adv->add_option("--covariates", aa.covariates, "declared covariates; each must be tagged");
    adv->add_option("--main", aa.main, "optional main CSV; its covariate columns must all be tagged");
    add_common(adv, common);
    adv->footer(config_note);

    SimulateArgs sa;
    auto* sim = app.add_subcommand("simulate", "Monte Carlo bias, variance, ERE and coverage");
    sim->add_option("--scenario", sa.scenarios, "catalog labels, comma list; 'all' or one '*' wildcard allowed");
    sim->add_option("--reps", sa.reps, "replicates per scenario (default from the catalog)");
    sim->add_option("--seed", sa.seed, "master seed");
    sim->add_option("--threads", sa.threads, "worker threads, 0 = all cores");
    sim->add_option("--sandwich", sa.sandwich)->check(CLI::IsMember({"model", "empirical"}));
    sim->add_option("--dag", sa.dag, "custom scenario: start from this DAG's base case");
    sim->add_option("--eta-v", sa.eta_v);
    sim->add_option("--theta-x", sa.theta_x);
    sim->add_option("--theta-v", sa.theta_v);
    sim->add_option("--beta-x", sa.beta_x);
    sim->add_option("--beta-v", sa.beta_v);
    sim->add_option("--n-total", sa.n_total);
    sim->add_option("--n-vs", sa.n_vs);
    sim->add_flag("--binary", sa.binary, "custom scenario with a binary outcome");
    sim->add_flag("--binary-v", sa.binary_v, "custom scenario with V ~ Bernoulli(0.4)");
    add_common(sim, common);
    sim->footer(config_note);

    VerifyArgs va;
    auto* ver = app.add_subcommand("verify", "machine-check the validity table and the counterexamples");
    ver->add_option("--inject", va.inject, "test mode: DAG:param=value overrides, e.g. 5:beta_v=0.8")
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    add_common(ver, common);
    ver->footer(config_note);

    LassoArgs la;
    auto* las = app.add_subcommand("lasso-mem", "LASSO-selected MEM with cross-validation and bootstrap");
    las->add_option("--main", la.main)->required();
    las->add_option("--validation", la.validation)->required();
    las->add_option("--candidates", la.candidates, "MEM candidate covariates")->required();
    las->add_option("--confounders", la.confounders, "outcome-model covariates");
    las->add_option("--folds", la.folds)->check(CLI::Range(2, 1000));
    las->add_option("--bootstrap", la.bootstrap);
    las->add_option("--seed", la.seed);
    las->add_option("--lambdas", la.lambdas, "decreasing lambda grid, comma list");
    las->add_option("--link", la.link)->check(CLI::IsMember({"identity", "logit"}));
    add_common(las, common);
    las->footer(config_note);

    CatalogArgs ca;
    auto* cat = app.add_subcommand("catalog", "list the simulation scenarios");
    cat->add_option("--filter", ca.filter, "substring of the label");
    add_common(cat, common);

    try {
        std::vector<std::string> args = expand_config(raw_args);
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? ok : usage;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return usage;
    }

    try {
        Report r;
        if (*est) r = cmd_estimate(ea, est);
        else if (*adv) r = cmd_advise(aa, adv);
        else if (*sim) r = cmd_simulate(sa, sim);
        else if (*ver) r = cmd_verify(va, ver);
        else if (*las) r = cmd_lasso(la, las);
        else r = cmd_catalog(ca, cat);
        emit(r, common, out);
        return r.code;
    } catch (const NumericError& e) {
        err << "numeric error: " << e.what() << "\n";
        return numeric;
    } catch (const Error& e) {
        std::string msg = e.what();
        // one line per violation
        std::size_t p = 0;
        while ((p = msg.find("; ", p)) != std::string::npos) msg.replace(p, 2, "\nerror: ");
        err << "error: " << msg << "\n";
        return usage;
    }
}

}
