#pragma once

#include <cstdint>

#include "noran/kg.hpp"

namespace noran {

// Uniform random triples over e0..e{n-1} and r0..r{m-1}, duplicates dropped.
// Entities that never occur are still in the vocabulary.
KnowledgeGraph random_kg(std::size_t entities, std::size_t relations, std::size_t triples, std::uint64_t seed);

// Typed chain: entities a*, b*, c* (per_type each). Every a links by r1 to
// 1-2 random b, every b by r2 to 1-2 random c, and r3(a, c) holds exactly when
// some b has r1(a, b) and r2(b, c).
KnowledgeGraph planted_rule_kg(std::size_t per_type, std::uint64_t seed);

}  // namespace noran
