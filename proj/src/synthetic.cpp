#include "noran/synthetic.hpp"

#include <algorithm>
#include <set>

#include "noran/error.hpp"
#include "noran/rng.hpp"

namespace noran {

KnowledgeGraph random_kg(std::size_t entities, std::size_t relations, std::size_t triples, std::uint64_t seed) {
    if (entities == 0 || relations == 0) throw InvalidArgument("random_kg needs entities and relations");
    std::vector<std::string> ents, rels;
    for (std::size_t i = 0; i < entities; ++i) ents.push_back("e" + std::to_string(i));
    for (std::size_t i = 0; i < relations; ++i) rels.push_back("r" + std::to_string(i));
    Rng rng = make_rng(seed, "random-kg");
    std::set<Triple> seen;
    std::vector<Triple> out;
    for (std::size_t i = 0; i < triples; ++i) {
        Triple t;
        t.head = static_cast<EntityId>(uniform_index(rng, entities));
        t.rel = static_cast<RelationId>(uniform_index(rng, relations));
        t.tail = static_cast<EntityId>(uniform_index(rng, entities));
        if (seen.insert(t).second) out.push_back(t);
    }
    return KnowledgeGraph(Vocabulary(ents), Vocabulary(rels), std::move(out));
}

KnowledgeGraph planted_rule_kg(std::size_t per_type, std::uint64_t seed) {
    if (per_type == 0) throw InvalidArgument("planted_rule_kg needs entities");
    std::vector<std::string> ents;
    for (const char* prefix : {"a", "b", "c"})
        for (std::size_t i = 0; i < per_type; ++i) ents.push_back(prefix + std::to_string(i));
    const auto a = [](std::size_t i) { return static_cast<EntityId>(i); };
    const auto b = [per_type](std::size_t i) { return static_cast<EntityId>(per_type + i); };
    const auto c = [per_type](std::size_t i) { return static_cast<EntityId>(2 * per_type + i); };
    Rng rng = make_rng(seed, "planted");

    // 1 or 2 distinct targets per source.
    auto targets = [&](std::size_t n) {
        std::vector<std::size_t> out{uniform_index(rng, n)};
        if (n > 1 && uniform_index(rng, 2) == 1) {
            std::size_t second;
            do second = uniform_index(rng, n);
            while (second == out[0]);
            out.push_back(second);
        }
        std::sort(out.begin(), out.end());
        return out;
    };
    std::vector<std::vector<std::size_t>> r1(per_type), r2(per_type);
    for (auto& l : r1) l = targets(per_type);
    for (auto& l : r2) l = targets(per_type);

    std::vector<Triple> triples;
    for (std::size_t i = 0; i < per_type; ++i)
        for (std::size_t j : r1[i]) triples.push_back({a(i), 0, b(j)});
    for (std::size_t j = 0; j < per_type; ++j)
        for (std::size_t k : r2[j]) triples.push_back({b(j), 1, c(k)});
    for (std::size_t i = 0; i < per_type; ++i) {
        std::set<std::size_t> reach;
        for (std::size_t j : r1[i]) reach.insert(r2[j].begin(), r2[j].end());
        for (std::size_t k : reach) triples.push_back({a(i), 2, c(k)});
    }
    return KnowledgeGraph(Vocabulary(ents), Vocabulary({"r1", "r2", "r3"}), std::move(triples));
}

}  // namespace noran
