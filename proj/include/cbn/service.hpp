#ifndef CBN_SERVICE_HPP
#define CBN_SERVICE_HPP

#include <optional>
#include <string>

#include "cbn/bn.hpp"
#include "cbn/bootstrap.hpp"

namespace cbn {

struct Response {
    int status = 200;
    std::string body;  // JSON
};

/// Stateless JSON API over one immutable network. Handlers are plain member
/// functions so they can be exercised without a socket.
///   GET  /model    nodes, states, edges with strengths
///   POST /predict  {"evidence": {...}, "target": "..."}
///   POST /whatif   {"evidence": {...}, "target": "...", "interventions": [{...}, ...]}
/// 400 on malformed bodies, unknown nodes/states or evidence on the target;
/// 422 when the evidence has probability zero.
class Service {
public:
    Service(CausalBayesianNetwork network, std::optional<ConfidenceMatrix> confidence = std::nullopt,
            std::optional<std::string> default_target = std::nullopt);

    Response model() const;
    Response predict(const std::string& body) const;
    Response whatif(const std::string& body) const;
    /// Dispatches by method and path; 404 / 405 otherwise.
    Response handle(const std::string& method, const std::string& path, const std::string& body) const;

    const CausalBayesianNetwork& network() const noexcept { return network_; }

private:
    CausalBayesianNetwork network_;
    std::optional<ConfidenceMatrix> confidence_;
    std::optional<std::string> default_target_;
};

/// Blocks serving `service` over HTTP until the process is stopped. Throws
/// IoError when the address cannot be bound.
void serve_http(const Service& service, const std::string& host, int port);

}  // namespace cbn

#endif  // CBN_SERVICE_HPP
