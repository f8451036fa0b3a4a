#include "cbn/graph.hpp"

#include <algorithm>
#include <queue>

#include "cbn/error.hpp"

namespace cbn {

std::string to_string(const Edge& edge) { return edge.source + " -> " + edge.target; }

Dag::Dag(std::vector<std::string> nodes) : nodes_(std::move(nodes)) {
    index_nodes();
    adjacency_.assign(nodes_.size() * nodes_.size(), 0);
}

Dag::Dag(std::vector<std::string> nodes, const EdgeSet& edges) : Dag(std::move(nodes)) {
    for (const auto& e : edges) {
        const auto s = index_of(e.source);
        const auto t = index_of(e.target);
        if (s == t) throw ValidationError("self-loop on '" + e.source + "'");
        if (!has_edge(s, t)) {
            adjacency_[s * size() + t] = 1;
            ++edge_count_;
        }
    }
    // Kahn's algorithm; leftover nodes lie on a cycle.
    if (topological_indices(*this).size() != size()) {
        throw CycleCreated("edge set contains a directed cycle");
    }
}

void Dag::index_nodes() {
    index_.clear();
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (!index_.emplace(nodes_[i], i).second) {
            throw ValidationError("duplicate node '" + nodes_[i] + "'");
        }
    }
}

std::size_t Dag::index_of(std::string_view name) const {
    auto idx = find(name);
    if (!idx) throw UnknownNode(std::string(name));
    return *idx;
}

std::optional<std::size_t> Dag::find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

bool Dag::has_edge(const Edge& edge) const {
    auto s = find(edge.source);
    auto t = find(edge.target);
    return s && t && has_edge(*s, *t);
}

std::vector<std::size_t> Dag::parent_indices(std::size_t node) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < size(); ++i)
        if (has_edge(i, node)) out.push_back(i);
    return out;
}

std::vector<std::size_t> Dag::child_indices(std::size_t node) const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < size(); ++j)
        if (has_edge(node, j)) out.push_back(j);
    return out;
}

EdgeSet Dag::edges() const {
    EdgeSet out;
    for (auto [s, t] : edge_indices()) out.insert(Edge{nodes_[s], nodes_[t]});
    return out;
}

std::vector<std::pair<std::size_t, std::size_t>> Dag::edge_indices() const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    out.reserve(edge_count_);
    for (std::size_t s = 0; s < size(); ++s)
        for (std::size_t t = 0; t < size(); ++t)
            if (has_edge(s, t)) out.emplace_back(s, t);
    return out;
}

bool Dag::reaches(std::size_t from, std::size_t to) const {
    if (from == to) return true;
    std::vector<unsigned char> seen(size(), 0);
    std::vector<std::size_t> stack{from};
    seen[from] = 1;
    while (!stack.empty()) {
        const auto v = stack.back();
        stack.pop_back();
        for (std::size_t w = 0; w < size(); ++w) {
            if (!has_edge(v, w) || seen[w]) continue;
            if (w == to) return true;
            seen[w] = 1;
            stack.push_back(w);
        }
    }
    return false;
}

Dag Dag::with_edge(std::size_t source, std::size_t target) const {
    if (source == target) throw CycleCreated("self-loop on '" + nodes_[source] + "'");
    if (reaches(target, source)) {
        throw CycleCreated("adding " + nodes_[source] + " -> " + nodes_[target] + " creates a cycle");
    }
    Dag out = *this;
    if (!out.has_edge(source, target)) {
        out.adjacency_[source * size() + target] = 1;
        ++out.edge_count_;
    }
    return out;
}

Dag Dag::without_edge(std::size_t source, std::size_t target) const {
    Dag out = *this;
    if (out.has_edge(source, target)) {
        out.adjacency_[source * size() + target] = 0;
        --out.edge_count_;
    }
    return out;
}

std::vector<std::string> parents(const Dag& dag, std::string_view node) {
    std::vector<std::string> out;
    for (auto p : dag.parent_indices(dag.index_of(node))) out.push_back(dag.nodes()[p]);
    return out;
}

std::vector<std::string> children(const Dag& dag, std::string_view node) {
    std::vector<std::string> out;
    for (auto c : dag.child_indices(dag.index_of(node))) out.push_back(dag.nodes()[c]);
    return out;
}

std::vector<std::size_t> topological_indices(const Dag& dag) {
    const auto n = dag.size();
    std::vector<std::size_t> indegree(n, 0);
    for (auto [s, t] : dag.edge_indices()) ++indegree[t];
    // Min-heap on position gives the node-order tie break.
    std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
    for (std::size_t i = 0; i < n; ++i)
        if (indegree[i] == 0) ready.push(i);
    std::vector<std::size_t> order;
    order.reserve(n);
    while (!ready.empty()) {
        const auto v = ready.top();
        ready.pop();
        order.push_back(v);
        for (std::size_t w = 0; w < n; ++w) {
            if (dag.has_edge(v, w) && --indegree[w] == 0) ready.push(w);
        }
    }
    return order;
}

std::vector<std::string> topological_order(const Dag& dag) {
    std::vector<std::string> out;
    for (auto i : topological_indices(dag)) out.push_back(dag.nodes()[i]);
    return out;
}

namespace {

std::unordered_map<std::string, std::size_t> index_tiers(const Tiers& tiers) {
    std::unordered_map<std::string, std::size_t> out;
    for (std::size_t t = 0; t < tiers.size(); ++t) {
        for (const auto& name : tiers[t]) {
            if (!out.emplace(name, t).second) {
                throw InfeasibleKnowledge("node '" + name + "' appears in more than one tier");
            }
        }
    }
    return out;
}

}  // namespace

EdgeSet tiers_to_forbidden(const Tiers& tiers, const std::vector<std::string>& nodes) {
    const auto tier_index = index_tiers(tiers);
    for (const auto& [name, t] : tier_index) {
        if (std::find(nodes.begin(), nodes.end(), name) == nodes.end()) throw UnknownNode(name);
    }
    EdgeSet out;
    for (std::size_t later = 0; later < tiers.size(); ++later)
        for (std::size_t earlier = 0; earlier < later; ++earlier)
            for (const auto& x : tiers[later])
                for (const auto& y : tiers[earlier]) out.insert(Edge{x, y});
    return out;
}

PriorKnowledge::PriorKnowledge(EdgeSet required, EdgeSet forbidden, Tiers tiers)
    : required_(std::move(required)), forbidden_(std::move(forbidden)), tiers_(std::move(tiers)) {
    tier_index_ = index_tiers(tiers_);
    for (const auto& e : required_) {
        if (e.source == e.target) throw InfeasibleKnowledge("required self-loop " + to_string(e));
        if (forbidden_.contains(e)) {
            throw InfeasibleKnowledge("edge " + to_string(e) + " is both required and forbidden");
        }
        auto ts = tier_of(e.source);
        auto tt = tier_of(e.target);
        if (ts && tt && *ts > *tt) {
            throw InfeasibleKnowledge("required edge " + to_string(e) + " points backwards in the tier order");
        }
    }
    std::vector<std::string> names;
    for (const auto& e : required_) {
        for (const auto* n : {&e.source, &e.target})
            if (std::find(names.begin(), names.end(), *n) == names.end()) names.push_back(*n);
    }
    try {
        Dag check(names, required_);
    } catch (const CycleCreated&) {
        throw InfeasibleKnowledge("required edges contain a directed cycle");
    }
}

std::optional<std::size_t> PriorKnowledge::tier_of(std::string_view node) const {
    auto it = tier_index_.find(std::string(node));
    if (it == tier_index_.end()) return std::nullopt;
    return it->second;
}

bool PriorKnowledge::is_forbidden(const Edge& edge) const {
    if (forbidden_.contains(edge)) return true;
    auto ts = tier_of(edge.source);
    auto tt = tier_of(edge.target);
    return ts && tt && *ts > *tt;
}

void PriorKnowledge::check_nodes(const std::vector<std::string>& nodes) const {
    auto known = [&](const std::string& n) { return std::find(nodes.begin(), nodes.end(), n) != nodes.end(); };
    for (const auto* set : {&required_, &forbidden_})
        for (const auto& e : *set) {
            if (!known(e.source)) throw UnknownNode(e.source);
            if (!known(e.target)) throw UnknownNode(e.target);
        }
    for (const auto& [name, t] : tier_index_)
        if (!known(name)) throw UnknownNode(name);
}

KnowledgeMask::KnowledgeMask(const PriorKnowledge& knowledge, const std::vector<std::string>& nodes)
    : n_(nodes.size()), forbidden_(n_ * n_, 0), required_(n_ * n_, 0) {
    knowledge.check_nodes(nodes);
    for (std::size_t s = 0; s < n_; ++s) {
        for (std::size_t t = 0; t < n_; ++t) {
            if (s == t) {
                forbidden_[s * n_ + t] = 1;
                continue;
            }
            const Edge e{nodes[s], nodes[t]};
            forbidden_[s * n_ + t] = knowledge.is_forbidden(e) ? 1 : 0;
            required_[s * n_ + t] = knowledge.is_required(e) ? 1 : 0;
        }
    }
}

EditMove inverse(const EditMove& move) {
    switch (move.kind) {
        case MoveKind::Add: return {MoveKind::Delete, move.edge};
        case MoveKind::Delete: return {MoveKind::Add, move.edge};
        case MoveKind::Reverse: return {MoveKind::Reverse, Edge{move.edge.target, move.edge.source}};
    }
    return move;
}

Dag apply_move(const Dag& dag, const EditMove& move, const PriorKnowledge& knowledge) {
    const auto s = dag.index_of(move.edge.source);
    const auto t = dag.index_of(move.edge.target);
    const Edge reversed{move.edge.target, move.edge.source};
    switch (move.kind) {
        case MoveKind::Add:
            if (dag.has_edge(s, t)) throw EdgeStateMismatch("edge " + to_string(move.edge) + " already present");
            if (knowledge.is_forbidden(move.edge)) {
                throw ConstraintViolated("edge " + to_string(move.edge) + " is forbidden");
            }
            return dag.with_edge(s, t);
        case MoveKind::Delete:
            if (!dag.has_edge(s, t)) throw EdgeStateMismatch("edge " + to_string(move.edge) + " not present");
            if (knowledge.is_required(move.edge)) {
                throw ConstraintViolated("edge " + to_string(move.edge) + " is required");
            }
            return dag.without_edge(s, t);
        case MoveKind::Reverse:
            if (!dag.has_edge(s, t)) throw EdgeStateMismatch("edge " + to_string(move.edge) + " not present");
            if (knowledge.is_required(move.edge)) {
                throw ConstraintViolated("edge " + to_string(move.edge) + " is required");
            }
            if (knowledge.is_forbidden(reversed)) {
                throw ConstraintViolated("edge " + to_string(reversed) + " is forbidden");
            }
            return dag.without_edge(s, t).with_edge(t, s);
    }
    return dag;
}

Dag required_graph(const std::vector<std::string>& nodes, const PriorKnowledge& knowledge) {
    knowledge.check_nodes(nodes);
    for (const auto& e : knowledge.required()) {
        if (knowledge.is_forbidden(e)) throw InfeasibleKnowledge("required edge " + to_string(e) + " is forbidden");
    }
    return Dag(nodes, knowledge.required());
}

bool satisfies(const Dag& dag, const PriorKnowledge& knowledge) {
    for (const auto& e : knowledge.required())
        if (!dag.has_edge(e)) return false;
    for (auto [s, t] : dag.edge_indices())
        if (knowledge.is_forbidden(Edge{dag.nodes()[s], dag.nodes()[t]})) return false;
    return true;
}

}  // namespace cbn
