#include "calibra/advisor.hpp"
#include "calibra/errors.hpp"
#include "calibra/simulator.hpp"

#include <algorithm>

namespace calibra {

namespace {

struct Variant {
    const char* name;
    std::vector<int> dags;
    void (*apply)(Scenario&);
};

const std::vector<Variant>& variants() {
    static const std::vector<Variant> v = {
        {"base", {1, 2, 3, 4, 5, 6, 7, 8}, [](Scenario&) {}},
        {"small-rho-xz", {1, 2, 3, 4, 5, 6, 7, 8}, [](Scenario& s) { s.coef.theta_x = 0.2; }},
        {"small-beta-x", {1, 2, 3, 4, 5, 6, 7, 8}, [](Scenario& s) { s.coef.beta_x = 0.1; }},
        {"large-rho-vz", {2, 4, 6, 8}, [](Scenario& s) { s.coef.theta_v = 2.0; }},
        {"weak-risk-factor", {1, 2, 3, 4}, [](Scenario& s) { s.coef.beta_v = 0.2; }},
        {"negative-rho-vx", {3, 4, 7, 8}, [](Scenario& s) { s.coef.eta_v = -0.4; }},
        {"small-rho-vx", {3, 4, 7, 8}, [](Scenario& s) { s.coef.eta_v = 0.2; }},
        {"binary-v", {1, 2, 3, 4, 5, 6, 7, 8}, [](Scenario& s) { s.coef.v_dist = VDist::bernoulli04; }},
        {"reduced-nms", {1, 2, 3, 4, 5, 6, 7, 8},
         [](Scenario& s) { s.n_total = s.outcome_type == OutcomeType::continuous ? 2000 : 5000; }},
        {"reduced-nvs", {1, 2, 3, 4, 5, 6, 7, 8}, [](Scenario& s) { s.n_vs = 150; }},
        // main-text parameterisation, not the one behind the published tables
        {"narrative-base", {1, 2, 3, 4, 5, 6, 7, 8},
         [](Scenario& s) {
             auto r = s.coef.role();
             s.coef.eta_v = r.affects_x ? 0.5 : 0.0;
             s.coef.theta_x = 0.8;
             s.coef.theta_v = r.affects_z ? 0.5 : 0.0;
             s.coef.beta_v = r.affects_y ? 0.5 : 0.0;
         }},
    };
    return v;
}

}

std::vector<Scenario> scenario_catalog() {
    std::vector<Scenario> out;
    for (OutcomeType y : {OutcomeType::continuous, OutcomeType::binary}) {
        for (int d = 1; d <= 8; ++d) {
            for (const auto& v : variants()) {
                if (std::find(v.dags.begin(), v.dags.end(), d) == v.dags.end()) continue;
                Scenario s;
                s.dag_index = d;
                s.coef = base_case(d);
                s.outcome_type = y;
                s.logit_intercept = -5.0;
                s.n_total = y == OutcomeType::continuous ? 5000 : 10000;
                s.n_vs = 400;
                s.n_reps = 1000;
                v.apply(s);
                s.label = "dag" + std::to_string(d) + "-" + v.name + "-" + to_string(y);
                out.push_back(s);
            }
        }
    }
    return out;
}

const Scenario& find_scenario(const std::string& label) {
    static const std::vector<Scenario> cat = scenario_catalog();
    for (const auto& s : cat)
        if (s.label == label) return s;
    throw SchemaError("unknown scenario '" + label + "'");
}

}
