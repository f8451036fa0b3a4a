#ifndef CBN_GRAPH_HPP
#define CBN_GRAPH_HPP

#include <compare>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cbn {

struct Edge {
    std::string source;
    std::string target;

    friend auto operator<=>(const Edge&, const Edge&) = default;
    friend bool operator==(const Edge&, const Edge&) = default;
};

using EdgeSet = std::set<Edge>;
using Tiers = std::vector<std::vector<std::string>>;

std::string to_string(const Edge& edge);

/// Directed acyclic graph over named nodes. Nodes keep their insertion order;
/// every matrix in the library indexes nodes by that position.
class Dag {
public:
    Dag() = default;
    explicit Dag(std::vector<std::string> nodes);
    /// Throws UnknownNode, ValidationError (self-loop, duplicate node) or
    /// CycleCreated.
    Dag(std::vector<std::string> nodes, const EdgeSet& edges);

    const std::vector<std::string>& nodes() const noexcept { return nodes_; }
    std::size_t size() const noexcept { return nodes_.size(); }

    std::size_t index_of(std::string_view name) const;
    std::optional<std::size_t> find(std::string_view name) const;

    bool has_edge(std::size_t source, std::size_t target) const {
        return adjacency_[source * nodes_.size() + target] != 0;
    }
    bool has_edge(const Edge& edge) const;

    /// Parent positions in ascending node order.
    std::vector<std::size_t> parent_indices(std::size_t node) const;
    std::vector<std::size_t> child_indices(std::size_t node) const;

    EdgeSet edges() const;
    /// Edges as (source, target) positions, sorted lexicographically.
    std::vector<std::pair<std::size_t, std::size_t>> edge_indices() const;
    std::size_t edge_count() const noexcept { return edge_count_; }

    /// True when a directed path from `from` to `to` exists (length >= 0).
    bool reaches(std::size_t from, std::size_t to) const;

    /// Copy with (source, target) inserted. Throws CycleCreated.
    Dag with_edge(std::size_t source, std::size_t target) const;
    Dag without_edge(std::size_t source, std::size_t target) const;

    friend bool operator==(const Dag& a, const Dag& b) {
        return a.nodes_ == b.nodes_ && a.adjacency_ == b.adjacency_;
    }

private:
    void index_nodes();

    std::vector<std::string> nodes_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<unsigned char> adjacency_;
    std::size_t edge_count_ = 0;
};

/// Parents of `node` in stored node order. Throws UnknownNode.
std::vector<std::string> parents(const Dag& dag, std::string_view node);
std::vector<std::string> children(const Dag& dag, std::string_view node);

/// Topological order; ties broken by stored node position.
std::vector<std::string> topological_order(const Dag& dag);
std::vector<std::size_t> topological_indices(const Dag& dag);

/// Every edge (X, Y) with tier(X) strictly later than tier(Y). Nodes outside
/// the tiers are unconstrained. Throws on a node listed twice or unknown.
EdgeSet tiers_to_forbidden(const Tiers& tiers, const std::vector<std::string>& nodes);

/// Required/forbidden edge lists plus an ordered partition into temporal tiers
/// (earlier tier = temporally earlier).
class PriorKnowledge {
public:
    PriorKnowledge() = default;
    /// Throws InfeasibleKnowledge when required and forbidden intersect, the
    /// required edges contain a cycle, a required edge points backwards in the
    /// tier order, or a node appears in two tiers.
    PriorKnowledge(EdgeSet required, EdgeSet forbidden, Tiers tiers = {});

    const EdgeSet& required() const noexcept { return required_; }
    const EdgeSet& forbidden() const noexcept { return forbidden_; }
    const Tiers& tiers() const noexcept { return tiers_; }

    std::optional<std::size_t> tier_of(std::string_view node) const;

    bool is_required(const Edge& edge) const { return required_.contains(edge); }
    /// Explicitly forbidden or backwards in the tier order.
    bool is_forbidden(const Edge& edge) const;

    /// Throws UnknownNode if any referenced name is not in `nodes`.
    void check_nodes(const std::vector<std::string>& nodes) const;

    bool empty() const noexcept { return required_.empty() && forbidden_.empty() && tiers_.empty(); }

private:
    EdgeSet required_;
    EdgeSet forbidden_;
    Tiers tiers_;
    std::unordered_map<std::string, std::size_t> tier_index_;
};

/// Prior knowledge compiled against a node order for O(1) lookups.
class KnowledgeMask {
public:
    KnowledgeMask(const PriorKnowledge& knowledge, const std::vector<std::string>& nodes);

    bool forbidden(std::size_t source, std::size_t target) const { return forbidden_[source * n_ + target] != 0; }
    bool required(std::size_t source, std::size_t target) const { return required_[source * n_ + target] != 0; }
    std::size_t size() const noexcept { return n_; }

private:
    std::size_t n_;
    std::vector<unsigned char> forbidden_;
    std::vector<unsigned char> required_;
};

enum class MoveKind { Add, Delete, Reverse };

struct EditMove {
    MoveKind kind;
    Edge edge;

    friend bool operator==(const EditMove&, const EditMove&) = default;
};

/// The move that undoes `move`.
EditMove inverse(const EditMove& move);

/// Applies one edit move. Throws EdgeStateMismatch, CycleCreated or
/// ConstraintViolated; the result always satisfies `knowledge`.
Dag apply_move(const Dag& dag, const EditMove& move, const PriorKnowledge& knowledge);

/// Empty graph over `nodes` plus the required edges of `knowledge`.
Dag required_graph(const std::vector<std::string>& nodes, const PriorKnowledge& knowledge);

/// True when the graph holds every required edge and no forbidden one.
bool satisfies(const Dag& dag, const PriorKnowledge& knowledge);

}  // namespace cbn

#endif  // CBN_GRAPH_HPP
