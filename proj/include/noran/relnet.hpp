#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "noran/kg.hpp"

namespace noran {

enum class LinkPattern : std::uint8_t { HeadHead = 0, TailTail = 1, HeadTail = 2 };

// Bit i set when pattern i links the two triples.
using PatternBits = std::uint8_t;

constexpr PatternBits pattern_bit(LinkPattern p) { return static_cast<PatternBits>(1u << static_cast<unsigned>(p)); }

std::string_view pattern_code(LinkPattern p);  // "HH", "TT", "HT"

// Patterns under which two triples share an entity (ignores any mask).
PatternBits shared_patterns(const Triple& a, const Triple& b);

struct PatternMask {
    bool include_head_head = true;
    bool include_tail_tail = true;
    bool include_head_tail = true;

    static PatternMask all() { return {}; }
    static PatternMask none() { return {false, false, false}; }
    // Comma-separated subset of HH,TT,HT; the empty string enables nothing.
    static PatternMask parse(std::string_view codes);
    std::string to_string() const;
    PatternBits bits() const;
    bool operator==(const PatternMask&) const = default;
};

using NodeId = std::uint32_t;

struct LocalEdge {
    std::uint32_t a = 0;  // a < b
    std::uint32_t b = 0;
    LinkPattern pattern = LinkPattern::HeadHead;
    bool operator==(const LocalEdge&) const = default;
};

// Node list plus the induced edges, in local indices.
struct Subgraph {
    std::vector<NodeId> nodes;
    std::vector<LocalEdge> edges;
};

struct EgoGraph : Subgraph {
    NodeId center = 0;
    std::size_t depth = 0;
};

struct NetworkStats {
    std::size_t nodes = 0;
    std::size_t edges = 0;
    std::size_t head_head = 0;
    std::size_t tail_tail = 0;
    std::size_t head_tail = 0;
    double mean_degree = 0.0;
    std::size_t max_degree = 0;
};

// Triple-level graph: one node per triple, undirected edges between triples
// sharing an entity under an enabled pattern. CSR with ascending neighbors.
class RelationNetwork {
   public:
    RelationNetwork() = default;

    std::size_t num_nodes() const { return node_triples_.size(); }
    std::size_t num_edges() const { return neighbors_.size() / 2; }
    std::span<const NodeId> neighbors(NodeId v) const;
    std::span<const LinkPattern> labels(NodeId v) const;
    std::span<const PatternBits> pattern_bits(NodeId v) const;
    std::size_t degree(NodeId v) const { return offsets_.at(v + 1) - offsets_[v]; }

    const std::vector<TripleId>& node_to_triple() const { return node_to_triple_; }
    const Triple& node_triple(NodeId v) const { return node_triples_.at(v); }
    const PatternMask& mask() const { return mask_; }
    std::optional<std::size_t> degree_cap() const { return degree_cap_; }
    std::uint64_t build_seed() const { return build_seed_; }
    // Nodes built from the knowledge graph (inserted nodes come after).
    std::size_t base_nodes() const { return base_nodes_; }

    // Existing nodes that a new triple would link to, with their pattern
    // bits, sorted by node id. Degree cap applied. Entities absent from kg
    // contribute nothing; nodes for which `excluded` returns true are skipped.
    std::vector<std::pair<NodeId, PatternBits>> links_for(const Triple& t, const KnowledgeGraph& kg,
                                                           const std::function<bool(NodeId)>& excluded = {}) const;

    // Appends a node for `t` and returns its id.
    NodeId insert_node(const Triple& t, const KnowledgeGraph& kg);

    // Edge list `u v pattern` with u < v, one per line.
    std::string export_edges() const;

    bool operator==(const RelationNetwork&) const = default;

    friend RelationNetwork build_relation_network(const KnowledgeGraph&, const PatternMask&, std::optional<std::size_t>,
                                                  std::uint64_t);

   private:
    std::vector<TripleId> node_to_triple_;
    std::vector<Triple> node_triples_;
    std::vector<std::uint32_t> offsets_{0};
    std::vector<NodeId> neighbors_;
    std::vector<LinkPattern> labels_;
    std::vector<PatternBits> bits_;
    PatternMask mask_;
    std::optional<std::size_t> degree_cap_;
    std::uint64_t build_seed_ = 0;
    std::size_t base_nodes_ = 0;
};

// First-pattern-wins label (HH before TT before HT) for a bit set.
LinkPattern primary_pattern(PatternBits bits);

RelationNetwork build_relation_network(const KnowledgeGraph& kg, const PatternMask& mask,
                                       std::optional<std::size_t> degree_cap = std::nullopt, std::uint64_t seed = 0);

// BFS to depth k (ascending-neighbor tie-break) plus the induced edges.
EgoGraph ego_graph(const RelationNetwork& net, NodeId center, std::size_t k);

// Ego graph around a node that is not in the network, described by its
// links. The virtual center is reported with id net.num_nodes().
EgoGraph virtual_ego_graph(const RelationNetwork& net, std::span<const std::pair<NodeId, PatternBits>> links,
                           std::size_t k, const std::function<bool(NodeId)>& excluded = {});

// Union of the k-hop balls of `seeds` (seeds first, in the given order, then
// discovery order) with induced edges.
Subgraph k_hop_union(const RelationNetwork& net, std::span<const NodeId> seeds, std::size_t k);

NetworkStats network_stats(const RelationNetwork& net);

}  // namespace noran
