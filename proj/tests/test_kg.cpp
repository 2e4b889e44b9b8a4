#include <doctest.h>

#include <algorithm>
#include <set>

#include "noran/error.hpp"
#include "noran/kg.hpp"
#include "noran/synthetic.hpp"

using namespace noran;

TEST_CASE("single line interns two entities and one relation") {
    const KnowledgeGraph kg = parse_triples("a\tr\tb\n");
    CHECK(kg.num_entities() == 2);
    CHECK(kg.num_relations() == 1);
    REQUIRE(kg.num_triples() == 1);
    CHECK(kg.triple(0) == Triple{0, 0, 1});
}

TEST_CASE("interning follows first appearance and incidence is per role") {
    const KnowledgeGraph kg = parse_triples("a\tr\tb\nb\ts\tc\n");
    CHECK(kg.entities().find("a") == 0u);
    CHECK(kg.entities().find("b") == 1u);
    CHECK(kg.entities().find("c") == 2u);
    CHECK(kg.triples() == std::vector<Triple>{{0, 0, 1}, {1, 1, 2}});
    CHECK(kg.incidence(1).as_head == std::vector<TripleId>{1});
    CHECK(kg.incidence(1).as_tail == std::vector<TripleId>{0});
}

TEST_CASE("wrong arity reports the line number") {
    try {
        parse_triples("a\tr\n");
        FAIL("expected MalformedLine");
    } catch (const MalformedLine& e) {
        CHECK(e.line() == 1);
    }
    try {
        parse_triples("# header\n\na\tr\tb\nx\ty\tz\tw\n");
        FAIL("expected MalformedLine");
    } catch (const MalformedLine& e) {
        CHECK(e.line() == 4);
    }
    CHECK_THROWS_AS(parse_triples("# nothing\n\n"), EmptyInput);
}

TEST_CASE("self loops appear once in each incidence list") {
    const KnowledgeGraph kg = parse_triples("a\tr\ta\n");
    CHECK(kg.incidence(0).as_head == std::vector<TripleId>{0});
    CHECK(kg.incidence(0).as_tail == std::vector<TripleId>{0});
}

TEST_CASE("incidence equals a brute-force scan on random graphs") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const KnowledgeGraph kg = random_kg(40, 5, 300 + seed * 10, seed);
        for (EntityId e = 0; e < kg.num_entities(); ++e) {
            std::vector<TripleId> heads, tails;
            for (TripleId t = 0; t < kg.num_triples(); ++t) {
                if (kg.triple(t).head == e) heads.push_back(t);
                if (kg.triple(t).tail == e) tails.push_back(t);
            }
            CHECK(kg.incidence(e).as_head == heads);
            CHECK(kg.incidence(e).as_tail == tails);
        }
    }
}

TEST_CASE("tsv round trip reproduces the graph") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        // Dropping unused vocabulary keeps the comparison about triples.
        const KnowledgeGraph kg = parse_triples(random_kg(30, 4, 120, seed).to_tsv());
        CHECK(parse_triples(kg.to_tsv()) == kg);
    }
}

TEST_CASE("split with fraction zero keeps everything") {
    const KnowledgeGraph kg = planted_rule_kg(10, 3);
    const InductiveSplit s = make_inductive_split(kg, 0.0, 1);
    CHECK(s.train_graph == kg);
    CHECK(s.eval_triples.empty());
    CHECK(s.unseen_entities.empty());
}

TEST_CASE("split is deterministic and sound") {
    const KnowledgeGraph kg = planted_rule_kg(30, 2);
    const InductiveSplit a = make_inductive_split(kg, 0.15, 9);
    const InductiveSplit b = make_inductive_split(kg, 0.15, 9);
    CHECK(a.train_graph == b.train_graph);
    CHECK(a.unseen_entities == b.unseen_entities);
    REQUIRE(a.eval_triples.size() == b.eval_triples.size());
    for (std::size_t i = 0; i < a.eval_triples.size(); ++i) CHECK(a.eval_triples[i].triple == b.eval_triples[i].triple);

    CHECK(a.unseen_entities.size() == static_cast<std::size_t>(0.15 * kg.num_entities()));
    const std::set<EntityId> unseen(a.unseen_entities.begin(), a.unseen_entities.end());
    for (const Triple& t : a.train_graph.triples()) {
        CHECK_FALSE(unseen.count(t.head));
        CHECK_FALSE(unseen.count(t.tail));
    }
    for (const HeldOutTriple& h : a.eval_triples)
        CHECK(h.touches_unseen == (unseen.count(h.triple.head) || unseen.count(h.triple.tail)));
    CHECK(a.train_graph.num_triples() + a.eval_triples.size() == kg.num_triples());
}

TEST_CASE("held-out count matches an independent incidence filter") {
    const KnowledgeGraph kg =
        parse_triples("a\tr\tb\nb\tr\tc\nc\tr\td\nd\tr\te\ne\tr\ta\na\ts\tc\nb\ts\td\nc\ts\te\nd\ts\ta\ne\ts\tb\n");
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const InductiveSplit s = make_inductive_split(kg, 0.2, seed);
        REQUIRE(s.unseen_entities.size() == 1);
        const EntityId u = s.unseen_entities[0];
        const auto expected = std::count_if(kg.triples().begin(), kg.triples().end(),
                                            [u](const Triple& t) { return t.head == u || t.tail == u; });
        CHECK(s.eval_triples.size() == static_cast<std::size_t>(expected));
    }
}

TEST_CASE("removing every entity empties the training graph") {
    CHECK_THROWS_AS(make_inductive_split(parse_triples("a\tr\tb\n"), 1.0, 0), EmptyTrainGraph);
}

TEST_CASE("embedding tables have the configured shape and variance") {
    const KnowledgeGraph kg = parse_triples("a\tr\tb\nc\tr\td\ne\ts\ta\n");
    const EmbeddingTables t = init_embeddings(kg, 100, 4);
    CHECK(t.entity_emb.value.shape() == Shape{5, 100});
    CHECK(t.relation_emb.value.shape() == Shape{2, 100});
    CHECK(t.entity_emb.frozen);
    CHECK_FALSE(t.relation_emb.frozen);

    const EmbeddingTables again = init_embeddings(kg, 100, 4);
    CHECK(again.entity_emb.value.values() == t.entity_emb.value.values());

    // 200 rows of width 100 give 2e4 draws.
    std::vector<std::string> names;
    for (int i = 0; i < 200; ++i) names.push_back("e" + std::to_string(i));
    double sum = 0.0, sq = 0.0;
    std::size_t n = 0;
    for (const auto& name : names)
        for (double v : xavier_row(4, "entity", name, 100)) {
            sum += v;
            sq += v * v;
            ++n;
        }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(var == doctest::Approx(0.01).epsilon(0.2));
}

TEST_CASE("entity rows are keyed by name, not by id") {
    const KnowledgeGraph one = parse_triples("a\tr\tb\n");
    const KnowledgeGraph two = parse_triples("b\tr\ta\n");
    const EmbeddingTables x = init_embeddings(one, 8, 1), y = init_embeddings(two, 8, 1);
    for (std::size_t j = 0; j < 8; ++j) CHECK(x.entity_emb.value.at(0, j) == y.entity_emb.value.at(1, j));
}
