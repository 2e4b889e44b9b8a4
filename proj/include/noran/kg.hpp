#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "noran/tensor.hpp"

namespace noran {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;
using TripleId = std::uint32_t;

struct Triple {
    EntityId head = 0;
    RelationId rel = 0;
    EntityId tail = 0;

    auto operator<=>(const Triple&) const = default;
};

// Interned name table; ids are assigned in first-appearance order.
class Vocabulary {
   public:
    Vocabulary() = default;
    explicit Vocabulary(std::vector<std::string> names);

    std::uint32_t intern(std::string_view name);
    std::optional<std::uint32_t> find(std::string_view name) const;
    const std::string& name(std::uint32_t id) const { return names_.at(id); }
    const std::vector<std::string>& names() const { return names_; }
    std::size_t size() const { return names_.size(); }

   private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, std::uint32_t> index_;
};

struct Incidence {
    std::vector<TripleId> as_head;
    std::vector<TripleId> as_tail;
};

class KnowledgeGraph {
   public:
    KnowledgeGraph() = default;
    KnowledgeGraph(Vocabulary entities, Vocabulary relations, std::vector<Triple> triples);

    const Vocabulary& entities() const { return entities_; }
    const Vocabulary& relations() const { return relations_; }
    const std::vector<Triple>& triples() const { return triples_; }
    const Triple& triple(TripleId id) const { return triples_.at(id); }
    const Incidence& incidence(EntityId e) const { return incidence_.at(e); }

    std::size_t num_entities() const { return entities_.size(); }
    std::size_t num_relations() const { return relations_.size(); }
    std::size_t num_triples() const { return triples_.size(); }

    // Same vocabularies, triples of this graph followed by `extra`.
    KnowledgeGraph with_triples(std::span<const Triple> extra) const;
    // Same vocabularies, only the given triples.
    KnowledgeGraph with_only(std::vector<Triple> triples) const;

    // Tab-separated `head\trel\ttail` lines in triple order.
    std::string to_tsv() const;
    std::string format(const Triple& t) const;

    bool operator==(const KnowledgeGraph& other) const;

   private:
    Vocabulary entities_;
    Vocabulary relations_;
    std::vector<Triple> triples_;
    std::vector<Incidence> incidence_;
};

// Parses TSV triples. Blank lines and lines starting with '#' are skipped.
// Throws MalformedLine (1-based line number) or EmptyInput.
KnowledgeGraph parse_triples(std::string_view text);

// Parses triples interning names into existing vocabularies, so a second file
// can be read against the ids of the first. Zero triples is allowed here.
std::vector<Triple> parse_triples_into(std::string_view text, Vocabulary& entities, Vocabulary& relations);

std::string read_file(const std::filesystem::path& path);
KnowledgeGraph load_triples(const std::filesystem::path& path);

struct HeldOutTriple {
    Triple triple;
    bool touches_unseen = false;
};

struct InductiveSplit {
    KnowledgeGraph train_graph;  // keeps the full vocabularies
    std::vector<HeldOutTriple> eval_triples;
    std::vector<EntityId> unseen_entities;  // ascending
    std::uint64_t seed = 0;
};

// Samples floor(unseen_fraction * |E|) entities without replacement and moves
// every triple touching them into eval_triples, preserving file order.
InductiveSplit make_inductive_split(const KnowledgeGraph& kg, double unseen_fraction, std::uint64_t seed);

struct EmbeddingTables {
    Parameter entity_emb;    // frozen
    Parameter relation_emb;  // trainable
    std::size_t dim = 0;
};

// Xavier-normal row with fan_in = fan_out = dim, seeded by (seed, table, name).
// Keying by name gives an entity the same row whatever vocabulary it is
// loaded into, which is what inductive inference relies on.
std::vector<double> xavier_row(std::uint64_t seed, std::string_view table, std::string_view name, std::size_t dim);

EmbeddingTables init_embeddings(const KnowledgeGraph& kg, std::size_t dim, std::uint64_t seed);

}  // namespace noran
