#include "cbn/service.hpp"

#include "cbn/error.hpp"
#include "httplib.h"
#include "json.hpp"

namespace cbn {

using nlohmann::ordered_json;

namespace {

constexpr const char* kSemantics = "conditional";
constexpr const char* kNote =
    "Alternatives are evaluated by conditioning on substituted evidence; they are associations, not "
    "interventional effects.";

struct BadRequest : ValidationError {
    using ValidationError::ValidationError;
};

Response error_response(int status, const std::string& kind, const std::string& message,
                        const ordered_json& extra = ordered_json::object()) {
    ordered_json j = {{"error", message}, {"kind", kind}};
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
    return {status, j.dump()};
}

StateMap parse_assignment(const nlohmann::json& j, const char* field) {
    if (!j.is_object()) throw BadRequest(std::string("'") + field + "' must be an object of node -> state");
    StateMap out;
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (it.value().is_null()) continue;
        if (!it.value().is_string()) {
            throw BadRequest(std::string("state for '") + it.key() + "' in '" + field + "' must be a string or null");
        }
        out[it.key()] = it.value().get<std::string>();
    }
    return out;
}

ordered_json to_json(const StateMap& m) {
    ordered_json j = ordered_json::object();
    for (const auto& [k, v] : m) j[k] = v;
    return j;
}

nlohmann::json parse_body(const std::string& body) {
    try {
        auto j = nlohmann::json::parse(body);
        if (!j.is_object()) throw BadRequest("request body must be a JSON object");
        return j;
    } catch (const nlohmann::json::parse_error&) {
        throw BadRequest("request body is not valid JSON");
    }
}

}  // namespace

Service::Service(CausalBayesianNetwork network, std::optional<ConfidenceMatrix> confidence,
                 std::optional<std::string> default_target)
    : network_(std::move(network)), confidence_(std::move(confidence)), default_target_(std::move(default_target)) {
    if (confidence_ && confidence_->nodes() != network_.dag().nodes()) {
        throw SchemaError("confidence matrix nodes do not match the model");
    }
    if (default_target_) network_.index_of(*default_target_);
}

Response Service::model() const {
    const auto& dag = network_.dag();
    ordered_json nodes = ordered_json::array();
    for (const auto& v : network_.variables()) nodes.push_back({{"name", v.name}, {"states", v.states}});
    ordered_json edges = ordered_json::array();
    for (auto [s, t] : dag.edge_indices()) {
        ordered_json e = {{"source", dag.nodes()[s]}, {"target", dag.nodes()[t]}};
        e["strength"] = confidence_ ? ordered_json((*confidence_)(s, t)) : ordered_json(nullptr);
        edges.push_back(std::move(e));
    }
    ordered_json j = {{"nodes", nodes}, {"edges", edges}};
    j["target"] = default_target_ ? ordered_json(*default_target_) : ordered_json(nullptr);
    if (confidence_) j["bootstraps"] = confidence_->bootstraps();
    j["semantics"] = kSemantics;
    return {200, j.dump()};
}

Response Service::predict(const std::string& body) const {
    try {
        const auto req = parse_body(body);
        std::string target;
        if (req.contains("target") && !req["target"].is_null()) {
            if (!req["target"].is_string()) throw BadRequest("'target' must be a string");
            target = req["target"].get<std::string>();
        } else if (default_target_) {
            target = *default_target_;
        } else {
            throw BadRequest("no target given and the service has no default target");
        }
        const auto evidence = req.contains("evidence") ? parse_assignment(req["evidence"], "evidence") : StateMap{};
        const auto t = network_.index_of(target);
        const auto probs = posterior(network_, evidence, target);
        ordered_json post = ordered_json::object();
        for (std::size_t s = 0; s < probs.size(); ++s) post[network_.variables()[t].states[s]] = probs[s];
        ordered_json j = {{"target", target},
                          {"states", network_.variables()[t].states},
                          {"probabilities", probs},
                          {"posterior", post},
                          {"evidence", to_json(evidence)},
                          {"semantics", kSemantics}};
        return {200, j.dump()};
    } catch (const ZeroProbabilityEvidence& e) {
        return error_response(422, "zero_probability", std::string("the evidence has probability zero: ") + e.what());
    } catch (const ValidationError& e) {
        return error_response(400, "invalid_request", e.what());
    }
}

Response Service::whatif(const std::string& body) const {
    std::optional<std::size_t> alternative;
    try {
        const auto req = parse_body(body);
        std::string target;
        if (req.contains("target") && !req["target"].is_null()) {
            if (!req["target"].is_string()) throw BadRequest("'target' must be a string");
            target = req["target"].get<std::string>();
        } else if (default_target_) {
            target = *default_target_;
        } else {
            throw BadRequest("no target given and the service has no default target");
        }
        const auto t = network_.index_of(target);
        const auto evidence = req.contains("evidence") ? parse_assignment(req["evidence"], "evidence") : StateMap{};
        if (!req.contains("interventions") || !req["interventions"].is_array() || req["interventions"].empty()) {
            throw BadRequest("'interventions' must be a nonempty array of assignments");
        }
        const auto base = posterior(network_, evidence, target);
        ordered_json alternatives = ordered_json::array();
        const auto& list = req["interventions"];
        for (std::size_t i = 0; i < list.size(); ++i) {
            alternative = i;
            const auto assignment = parse_assignment(list[i], "interventions");
            if (assignment.contains(target)) throw BadRequest("an alternative assigns the target '" + target + "'");
            StateMap alt = evidence;
            for (const auto& [k, v] : assignment) alt[k] = v;
            const auto probs = posterior(network_, alt, target);
            std::vector<double> delta(probs.size());
            for (std::size_t s = 0; s < probs.size(); ++s) delta[s] = probs[s] - base[s];
            alternatives.push_back({{"assignment", to_json(assignment)},
                                    {"evidence", to_json(alt)},
                                    {"probabilities", probs},
                                    {"delta", delta}});
        }
        ordered_json j = {{"target", target},
                          {"states", network_.variables()[t].states},
                          {"base", {{"evidence", to_json(evidence)}, {"probabilities", base}}},
                          {"alternatives", alternatives},
                          {"semantics", kSemantics},
                          {"note", kNote}};
        return {200, j.dump()};
    } catch (const ZeroProbabilityEvidence& e) {
        ordered_json extra = ordered_json::object();
        extra["alternative"] = alternative ? ordered_json(*alternative) : ordered_json(nullptr);
        const std::string where = alternative ? "alternative " + std::to_string(*alternative) : "the base evidence";
        return error_response(422, "zero_probability", where + " has probability zero: " + e.what(), extra);
    } catch (const ValidationError& e) {
        return error_response(400, "invalid_request", e.what());
    }
}

Response Service::handle(const std::string& method, const std::string& path, const std::string& body) const {
    if (path == "/model") {
        if (method != "GET") return error_response(405, "method_not_allowed", "use GET /model");
        return model();
    }
    if (path == "/predict" || path == "/whatif") {
        if (method != "POST") return error_response(405, "method_not_allowed", "use POST " + path);
        return path == "/predict" ? predict(body) : whatif(body);
    }
    return error_response(404, "not_found", "no endpoint " + path);
}

void serve_http(const Service& service, const std::string& host, int port) {
    httplib::Server server;
    auto reply = [&service](const httplib::Request& req, httplib::Response& res) {
        const auto r = service.handle(req.method, req.path, req.body);
        res.status = r.status;
        res.set_content(r.body, "application/json");
        res.set_header("Access-Control-Allow-Origin", "*");
    };
    server.Get(R"(/.*)", reply);
    server.Post(R"(/.*)", reply);
    server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Origin", "*");
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.status = 204;
    });
    if (!server.listen(host, port)) {
        throw IoError("cannot listen on " + host + ":" + std::to_string(port));
    }
}

}  // namespace cbn
