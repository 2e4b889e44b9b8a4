#include "noran/relnet.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_map>

#include "noran/error.hpp"
#include "noran/rng.hpp"

namespace noran {

std::string_view pattern_code(LinkPattern p) {
    switch (p) {
        case LinkPattern::HeadHead: return "HH";
        case LinkPattern::TailTail: return "TT";
        case LinkPattern::HeadTail: return "HT";
    }
    return "??";
}

PatternBits shared_patterns(const Triple& a, const Triple& b) {
    PatternBits bits = 0;
    if (a.head == b.head) bits |= pattern_bit(LinkPattern::HeadHead);
    if (a.tail == b.tail) bits |= pattern_bit(LinkPattern::TailTail);
    if (a.tail == b.head || b.tail == a.head) bits |= pattern_bit(LinkPattern::HeadTail);
    return bits;
}

LinkPattern primary_pattern(PatternBits bits) {
    if (bits & pattern_bit(LinkPattern::HeadHead)) return LinkPattern::HeadHead;
    if (bits & pattern_bit(LinkPattern::TailTail)) return LinkPattern::TailTail;
    return LinkPattern::HeadTail;
}

PatternMask PatternMask::parse(std::string_view codes) {
    PatternMask m = none();
    std::size_t start = 0;
    while (start <= codes.size() && !codes.empty()) {
        std::size_t comma = codes.find(',', start);
        if (comma == std::string_view::npos) comma = codes.size();
        std::string_view code = codes.substr(start, comma - start);
        if (code == "HH")
            m.include_head_head = true;
        else if (code == "TT")
            m.include_tail_tail = true;
        else if (code == "HT")
            m.include_head_tail = true;
        else
            throw InvalidArgument("unknown link pattern '" + std::string(code) + "' (expected HH, TT or HT)");
        start = comma + 1;
    }
    return m;
}

std::string PatternMask::to_string() const {
    std::string s;
    auto append = [&](bool on, const char* code) {
        if (!on) return;
        if (!s.empty()) s += ',';
        s += code;
    };
    append(include_head_head, "HH");
    append(include_tail_tail, "TT");
    append(include_head_tail, "HT");
    return s;
}

PatternBits PatternMask::bits() const {
    PatternBits b = 0;
    if (include_head_head) b |= pattern_bit(LinkPattern::HeadHead);
    if (include_tail_tail) b |= pattern_bit(LinkPattern::TailTail);
    if (include_head_tail) b |= pattern_bit(LinkPattern::HeadTail);
    return b;
}

std::span<const NodeId> RelationNetwork::neighbors(NodeId v) const {
    if (v >= num_nodes()) throw InvalidNode(v);
    return std::span<const NodeId>(neighbors_).subspan(offsets_[v], offsets_[v + 1] - offsets_[v]);
}

std::span<const LinkPattern> RelationNetwork::labels(NodeId v) const {
    if (v >= num_nodes()) throw InvalidNode(v);
    return std::span<const LinkPattern>(labels_).subspan(offsets_[v], offsets_[v + 1] - offsets_[v]);
}

std::span<const PatternBits> RelationNetwork::pattern_bits(NodeId v) const {
    if (v >= num_nodes()) throw InvalidNode(v);
    return std::span<const PatternBits>(bits_).subspan(offsets_[v], offsets_[v + 1] - offsets_[v]);
}

namespace {

struct Edge {
    NodeId u;
    NodeId v;
    PatternBits bits;
};

// Partial Fisher-Yates; returns `keep` positions out of [0, n).
std::vector<std::size_t> sample_positions(std::size_t n, std::size_t keep, std::uint64_t seed) {
    std::vector<std::size_t> pos(n);
    for (std::size_t i = 0; i < n; ++i) pos[i] = i;
    Rng rng(seed);
    for (std::size_t i = 0; i < keep; ++i) std::swap(pos[i], pos[i + uniform_index(rng, n - i)]);
    pos.resize(keep);
    return pos;
}

}  // namespace

RelationNetwork build_relation_network(const KnowledgeGraph& kg, const PatternMask& mask,
                                       std::optional<std::size_t> degree_cap, std::uint64_t seed) {
    if (degree_cap && *degree_cap == 0) throw InvalidArgument("degree cap must be positive");
    const std::size_t n = kg.num_triples();
    const PatternBits enabled = mask.bits();

    // Candidate pairs: any two triples incident on a common entity.
    std::vector<std::pair<NodeId, NodeId>> pairs;
    std::vector<TripleId> incident;
    for (EntityId e = 0; e < kg.num_entities(); ++e) {
        const Incidence& inc = kg.incidence(e);
        incident.clear();
        std::set_union(inc.as_head.begin(), inc.as_head.end(), inc.as_tail.begin(), inc.as_tail.end(),
                       std::back_inserter(incident));
        for (std::size_t i = 0; i < incident.size(); ++i)
            for (std::size_t j = i + 1; j < incident.size(); ++j) pairs.emplace_back(incident[i], incident[j]);
    }
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());

    std::vector<Edge> edges;
    for (auto [u, v] : pairs) {
        const PatternBits bits = shared_patterns(kg.triple(u), kg.triple(v)) & enabled;
        if (bits) edges.push_back({u, v, bits});
    }

    if (degree_cap) {
        std::vector<std::vector<std::size_t>> incident_edges(n);
        for (std::size_t i = 0; i < edges.size(); ++i) {
            incident_edges[edges[i].u].push_back(i);
            incident_edges[edges[i].v].push_back(i);
        }
        std::vector<bool> keep(edges.size(), false);
        for (NodeId v = 0; v < n; ++v) {
            const auto& inc = incident_edges[v];
            if (inc.size() <= *degree_cap) {
                for (auto e : inc) keep[e] = true;
                continue;
            }
            for (auto p : sample_positions(inc.size(), *degree_cap, derive_seed(seed, v))) keep[inc[p]] = true;
        }
        std::vector<Edge> kept;
        for (std::size_t i = 0; i < edges.size(); ++i)
            if (keep[i]) kept.push_back(edges[i]);
        edges = std::move(kept);
    }

    std::vector<std::vector<std::pair<NodeId, PatternBits>>> adj(n);
    for (const Edge& e : edges) {
        adj[e.u].emplace_back(e.v, e.bits);
        adj[e.v].emplace_back(e.u, e.bits);
    }

    RelationNetwork net;
    net.mask_ = mask;
    net.degree_cap_ = degree_cap;
    net.build_seed_ = seed;
    net.base_nodes_ = n;
    net.node_triples_ = kg.triples();
    net.node_to_triple_.resize(n);
    for (TripleId i = 0; i < n; ++i) net.node_to_triple_[i] = i;
    net.offsets_.assign(1, 0);
    for (NodeId v = 0; v < n; ++v) {
        for (auto [w, bits] : adj[v]) {
            net.neighbors_.push_back(w);
            net.bits_.push_back(bits);
            net.labels_.push_back(primary_pattern(bits));
        }
        net.offsets_.push_back(static_cast<std::uint32_t>(net.neighbors_.size()));
    }
    return net;
}

std::vector<std::pair<NodeId, PatternBits>> RelationNetwork::links_for(
    const Triple& t, const KnowledgeGraph& kg, const std::function<bool(NodeId)>& excluded) const {
    std::vector<NodeId> candidates;
    auto take = [&](const std::vector<TripleId>& ids) {
        for (TripleId id : ids)
            if (id < base_nodes_) candidates.push_back(id);
    };
    if (t.head < kg.num_entities()) {
        take(kg.incidence(t.head).as_head);
        take(kg.incidence(t.head).as_tail);
    }
    if (t.tail < kg.num_entities()) {
        take(kg.incidence(t.tail).as_head);
        take(kg.incidence(t.tail).as_tail);
    }
    for (NodeId v = static_cast<NodeId>(base_nodes_); v < num_nodes(); ++v) candidates.push_back(v);
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    const PatternBits enabled = mask_.bits();
    std::vector<std::pair<NodeId, PatternBits>> links;
    for (NodeId c : candidates) {
        if (excluded && excluded(c)) continue;
        const PatternBits bits = shared_patterns(t, node_triples_[c]) & enabled;
        if (bits) links.emplace_back(c, bits);
    }
    if (degree_cap_ && links.size() > *degree_cap_) {
        auto pos = sample_positions(links.size(), *degree_cap_, derive_seed(build_seed_, num_nodes()));
        std::sort(pos.begin(), pos.end());
        std::vector<std::pair<NodeId, PatternBits>> kept;
        for (auto p : pos) kept.push_back(links[p]);
        links = std::move(kept);
    }
    return links;
}

NodeId RelationNetwork::insert_node(const Triple& t, const KnowledgeGraph& kg) {
    const auto links = links_for(t, kg);
    const auto id = static_cast<NodeId>(num_nodes());

    std::vector<std::uint32_t> offsets{0};
    std::vector<NodeId> neighbors;
    std::vector<LinkPattern> labels;
    std::vector<PatternBits> bits;
    neighbors.reserve(neighbors_.size() + 2 * links.size());
    std::size_t li = 0;
    for (NodeId v = 0; v < id; ++v) {
        for (std::size_t e = offsets_[v]; e < offsets_[v + 1]; ++e) {
            neighbors.push_back(neighbors_[e]);
            labels.push_back(labels_[e]);
            bits.push_back(bits_[e]);
        }
        // The new id is the largest, so it goes last in each list.
        if (li < links.size() && links[li].first == v) {
            neighbors.push_back(id);
            labels.push_back(primary_pattern(links[li].second));
            bits.push_back(links[li].second);
            ++li;
        }
        offsets.push_back(static_cast<std::uint32_t>(neighbors.size()));
    }
    for (auto [w, b] : links) {
        neighbors.push_back(w);
        labels.push_back(primary_pattern(b));
        bits.push_back(b);
    }
    offsets.push_back(static_cast<std::uint32_t>(neighbors.size()));

    offsets_ = std::move(offsets);
    neighbors_ = std::move(neighbors);
    labels_ = std::move(labels);
    bits_ = std::move(bits);
    node_triples_.push_back(t);
    node_to_triple_.push_back(static_cast<TripleId>(kg.num_triples() + (id - base_nodes_)));
    return id;
}

std::string RelationNetwork::export_edges() const {
    std::ostringstream os;
    for (NodeId u = 0; u < num_nodes(); ++u) {
        auto nb = neighbors(u);
        auto lb = labels(u);
        for (std::size_t i = 0; i < nb.size(); ++i)
            if (u < nb[i]) os << u << ' ' << nb[i] << ' ' << pattern_code(lb[i]) << '\n';
    }
    return os.str();
}

namespace {

// Neighbor provider for BFS: global ids plus stored pattern bits.
using NeighborFn = std::function<void(NodeId, std::vector<std::pair<NodeId, PatternBits>>&)>;

template <typename Out>
void bfs_and_induce(std::span<const NodeId> seeds, std::size_t k, const NeighborFn& neighbors,
                    const std::function<bool(NodeId)>& excluded, Out& out) {
    std::unordered_map<NodeId, std::uint32_t> local;
    std::vector<std::size_t> dist;
    for (NodeId s : seeds) {
        if (local.count(s)) continue;
        local.emplace(s, static_cast<std::uint32_t>(out.nodes.size()));
        out.nodes.push_back(s);
        dist.push_back(0);
    }
    std::vector<std::pair<NodeId, PatternBits>> buf;
    for (std::size_t head = 0; head < out.nodes.size(); ++head) {
        if (dist[head] >= k) continue;
        neighbors(out.nodes[head], buf);
        for (auto [w, bits] : buf) {
            if (local.count(w) || (excluded && excluded(w))) continue;
            local.emplace(w, static_cast<std::uint32_t>(out.nodes.size()));
            out.nodes.push_back(w);
            dist.push_back(dist[head] + 1);
        }
    }
    for (std::uint32_t i = 0; i < out.nodes.size(); ++i) {
        neighbors(out.nodes[i], buf);
        for (auto [w, bits] : buf) {
            auto it = local.find(w);
            if (it == local.end() || it->second <= i) continue;
            out.edges.push_back({i, it->second, primary_pattern(bits)});
        }
    }
}

NeighborFn network_neighbors(const RelationNetwork& net, const std::function<bool(NodeId)>& excluded) {
    return [&net, excluded](NodeId v, std::vector<std::pair<NodeId, PatternBits>>& out) {
        out.clear();
        auto nb = net.neighbors(v);
        auto bits = net.pattern_bits(v);
        for (std::size_t i = 0; i < nb.size(); ++i)
            if (!excluded || !excluded(nb[i])) out.emplace_back(nb[i], bits[i]);
    };
}

}  // namespace

EgoGraph ego_graph(const RelationNetwork& net, NodeId center, std::size_t k) {
    if (center >= net.num_nodes()) throw InvalidNode(center);
    EgoGraph ego;
    ego.center = center;
    ego.depth = k;
    const NodeId seeds[] = {center};
    bfs_and_induce(seeds, k, network_neighbors(net, {}), {}, ego);
    return ego;
}

EgoGraph virtual_ego_graph(const RelationNetwork& net, std::span<const std::pair<NodeId, PatternBits>> links,
                           std::size_t k, const std::function<bool(NodeId)>& excluded) {
    const auto center = static_cast<NodeId>(net.num_nodes());
    auto base = network_neighbors(net, excluded);
    NeighborFn fn = [&](NodeId v, std::vector<std::pair<NodeId, PatternBits>>& out) {
        if (v == center) {
            out.clear();
            for (auto link : links)
                if (!excluded || !excluded(link.first)) out.push_back(link);
            return;
        }
        base(v, out);
    };
    EgoGraph ego;
    ego.center = center;
    ego.depth = k;
    const NodeId seeds[] = {center};
    bfs_and_induce(seeds, k, fn, excluded, ego);
    return ego;
}

Subgraph k_hop_union(const RelationNetwork& net, std::span<const NodeId> seeds, std::size_t k) {
    for (NodeId s : seeds)
        if (s >= net.num_nodes()) throw InvalidNode(s);
    Subgraph sub;
    bfs_and_induce(seeds, k, network_neighbors(net, {}), {}, sub);
    return sub;
}

NetworkStats network_stats(const RelationNetwork& net) {
    NetworkStats s;
    s.nodes = net.num_nodes();
    s.edges = net.num_edges();
    for (NodeId u = 0; u < net.num_nodes(); ++u) {
        s.max_degree = std::max(s.max_degree, net.degree(u));
        auto nb = net.neighbors(u);
        auto lb = net.labels(u);
        for (std::size_t i = 0; i < nb.size(); ++i) {
            if (nb[i] < u) continue;
            switch (lb[i]) {
                case LinkPattern::HeadHead: ++s.head_head; break;
                case LinkPattern::TailTail: ++s.tail_tail; break;
                case LinkPattern::HeadTail: ++s.head_tail; break;
            }
        }
    }
    s.mean_degree = s.nodes ? 2.0 * static_cast<double>(s.edges) / static_cast<double>(s.nodes) : 0.0;
    return s;
}

}  // namespace noran
