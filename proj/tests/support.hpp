#pragma once

#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "noran/kg.hpp"
#include "noran/relnet.hpp"

namespace support {

// t1=(a,r1,b), t2=(b,r2,c), t3=(a,r3,c)
inline noran::KnowledgeGraph toy_kg() { return noran::parse_triples("a\tr1\tb\nb\tr2\tc\na\tr3\tc\n"); }

using EdgeSet = std::set<std::tuple<noran::NodeId, noran::NodeId, noran::PatternBits>>;

// All-pairs shared-entity check, independent of the CSR builder.
inline EdgeSet pairwise_edges(const std::vector<noran::Triple>& ts, const noran::PatternMask& mask) {
    EdgeSet out;
    for (std::size_t i = 0; i < ts.size(); ++i)
        for (std::size_t j = i + 1; j < ts.size(); ++j) {
            const auto& a = ts[i];
            const auto& b = ts[j];
            noran::PatternBits bits = 0;
            if (mask.include_head_head && a.head == b.head) bits |= noran::pattern_bit(noran::LinkPattern::HeadHead);
            if (mask.include_tail_tail && a.tail == b.tail) bits |= noran::pattern_bit(noran::LinkPattern::TailTail);
            if (mask.include_head_tail && (a.tail == b.head || b.tail == a.head))
                bits |= noran::pattern_bit(noran::LinkPattern::HeadTail);
            if (bits) out.emplace(static_cast<noran::NodeId>(i), static_cast<noran::NodeId>(j), bits);
        }
    return out;
}

inline EdgeSet built_edges(const noran::RelationNetwork& net) {
    EdgeSet out;
    for (noran::NodeId u = 0; u < net.num_nodes(); ++u) {
        auto nb = net.neighbors(u);
        auto bits = net.pattern_bits(u);
        for (std::size_t i = 0; i < nb.size(); ++i)
            if (nb[i] > u) out.emplace(u, nb[i], bits[i]);
    }
    return out;
}

inline std::vector<noran::PatternMask> all_masks() {
    std::vector<noran::PatternMask> out;
    for (int m = 0; m < 8; ++m) out.push_back({(m & 1) != 0, (m & 2) != 0, (m & 4) != 0});
    return out;
}

}  // namespace support
