#pragma once

#include <algorithm>
#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include "noran/relnet.hpp"

namespace noran::detail {

// Open degrees of base nodes once some nodes are removed and a new node is
// linked in.
class DegreeAdjust {
   public:
    DegreeAdjust(const RelationNetwork& net, std::span<const NodeId> excluded) : net_(net) {
        for (NodeId x : excluded)
            for (NodeId w : net.neighbors(x)) ++removed_[w];
    }

    double open_degree(NodeId v, bool linked_to_new) const {
        auto it = removed_.find(v);
        const std::size_t gone = it == removed_.end() ? 0 : it->second;
        return static_cast<double>(net_.degree(v) - gone + (linked_to_new ? 1 : 0));
    }

   private:
    const RelationNetwork& net_;
    std::unordered_map<NodeId, std::size_t> removed_;
};

inline std::vector<NodeId> sorted_copy(std::span<const NodeId> nodes) {
    std::vector<NodeId> out(nodes.begin(), nodes.end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

inline std::function<bool(NodeId)> membership(const std::vector<NodeId>& sorted) {
    if (sorted.empty()) return {};
    return [&sorted](NodeId v) { return std::binary_search(sorted.begin(), sorted.end(), v); };
}

}  // namespace noran::detail
