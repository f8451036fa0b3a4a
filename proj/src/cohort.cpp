#include "cbn/cohort.hpp"

#include <cmath>
#include <map>

namespace cbn {

namespace {

struct NodeSpec {
    const char* name;
    std::vector<std::string> states;
    std::size_t tier;
    std::vector<std::pair<const char*, double>> parents;  // (parent, weight)
    double offset;                                        // larger = higher states rarer
};

const std::vector<std::string> kBinary = {"no", "yes"};
const std::vector<std::string> kGrade = {"G1", "G2", "G3"};

std::vector<NodeSpec> node_specs(bool hospital) {
    const double h = hospital ? 0.8 : 0.0;
    std::vector<NodeSpec> specs = {
        {"ER", {"negative", "positive"}, 1, {}, -1.0},
        {"PR", {"negative", "positive"}, 1, {{"ER", 3.0}}, 0.0},
        {"L1CAM", {"negative", "positive"}, 1, {{"p53", 2.5}}, 1.0},
        {"p53", {"wildtype", "abnormal"}, 1, {}, 1.5},
        {"CervicalCytology", {"normal", "abnormal"}, 1, {}, 1.5},
        {"Thrombocytosis", kBinary, 1, {{"CA125", 2.0}}, 1.5},
        {"Lymphadenopathy", kBinary, 1, {{"LVSI", 2.5}}, 1.5},
        {"LVSI", kBinary, 1, {{"L1CAM", 2.0}, {"PreoperativeGrade", 2.0}}, 1.0},
        {"CA125", {"normal", "elevated"}, 1, {}, 1.0},
        {"PreoperativeGrade", kGrade, 1, {{"p53", 1.5}, {"ER", -1.5}}, 0.0},
        {"Chemotherapy", kBinary, 2, {{"PostoperativeGrade", 2.0}, {"LVSI", 1.5}}, 1.0},
        {"Radiotherapy", kBinary, 2, {{"PostoperativeGrade", 1.5}, {"LVSI", 1.5}}, 0.5},
        {"PostoperativeGrade", kGrade, 2, {{"PreoperativeGrade", 3.0}}, 0.0},
        {"LNM", kBinary, 3, {{"LVSI", 1.2}, {"Lymphadenopathy", 1.0}, {"CA125", 0.8}}, 1.5},
        {"MyometrialInvasion", {"none", "<50%", ">=50%"}, 3,
         {{"PostoperativeGrade", 2.0}, {"CervicalCytology", 1.0}}, 0.0},
        {"Survival1yr", {"alive", "dead"}, 3, {{"LNM", 1.0}}, 2.5},
        {"Survival3yr", {"alive", "dead"}, 3, {{"Survival1yr", 3.0}, {"LNM", 1.0}, {"Chemotherapy", -1.0}}, 1.5},
        {"Survival5yr", {"alive", "dead"}, 3, {{"Survival3yr", 3.0}, {"p53", 1.5}}, 1.5},
    };
    if (hospital) {
        std::vector<std::string> sites;
        for (int i = 1; i <= 10; ++i) sites.push_back("H" + std::to_string(i));
        specs.push_back({"Hospital", sites, 0, {}, 0.0});
        for (auto& s : specs) {
            if (std::string(s.name) == "Chemotherapy" || std::string(s.name) == "Radiotherapy") {
                s.parents.push_back({"Hospital", h});
            }
        }
    }
    return specs;
}

}  // namespace

Schema cohort_schema(bool hospital) {
    Schema schema;
    for (const auto& s : node_specs(hospital)) {
        SchemaEntry e{Variable{s.name, s.states}, std::nullopt};
        if (s.tier > 0) e.tier = s.tier;
        schema.entries.push_back(std::move(e));
    }
    if (hospital) schema.context.push_back("Hospital");
    return schema;
}

CausalBayesianNetwork cohort_network(bool hospital) {
    const auto specs = node_specs(hospital);
    const auto variables = cohort_schema(hospital).variables();
    std::vector<std::string> names;
    for (const auto& v : variables) names.push_back(v.name);
    EdgeSet edges;
    for (const auto& s : specs)
        for (const auto& [p, w] : s.parents) edges.insert(Edge{p, s.name});
    Dag dag(names, edges);

    std::vector<Cpt> cpts;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const auto& spec = specs[i];
        std::map<std::size_t, double> weight;
        for (const auto& [p, w] : spec.parents) weight[dag.index_of(p)] = w;
        const auto pa = dag.parent_indices(i);
        Cpt cpt{spec.name, {}, variables[i].cardinality(), {}};
        std::size_t rows = 1;
        for (auto p : pa) {
            cpt.parents.push_back(names[p]);
            rows *= variables[p].cardinality();
        }
        const std::size_t k = cpt.cardinality;
        for (std::size_t r = 0; r < rows; ++r) {
            // Decode r with the last parent fastest.
            double z = 0.0;
            std::size_t rest = r;
            for (std::size_t j = pa.size(); j-- > 0;) {
                const auto card = variables[pa[j]].cardinality();
                const auto state = rest % card;
                rest /= card;
                const double x = 2.0 * static_cast<double>(state) / static_cast<double>(card - 1) - 1.0;
                z += weight[pa[j]] * x;
            }
            std::vector<double> row(k);
            double sum = 0.0;
            for (std::size_t s = 0; s < k; ++s) {
                row[s] = std::exp(static_cast<double>(s) * (z - spec.offset));
                sum += row[s];
            }
            for (auto& v : row) cpt.table.push_back(v / sum);
        }
        cpts.push_back(std::move(cpt));
    }
    return CausalBayesianNetwork(std::move(dag), variables, std::move(cpts));
}

}  // namespace cbn
