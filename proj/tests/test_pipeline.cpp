#include <doctest.h>

#include <cmath>
#include <algorithm>
#include <numeric>
#include <random>

#include "noran/error.hpp"
#include "noran/pipeline.hpp"
#include "noran/synthetic.hpp"

using namespace noran;

namespace {

TrainConfig small_config(MpLayerKind gnn = MpLayerKind::GAT) {
    TrainConfig cfg;
    cfg.dim = 6;
    cfg.gnn = gnn;
    cfg.epochs = 2;
    cfg.batch_size = 16;
    cfg.classifier_epochs = 40;
    cfg.seed = 3;
    return cfg;
}

std::vector<double> values_of(Model& m) {
    std::vector<double> out;
    for (Parameter* p : m.parameters()) out.insert(out.end(), p->value.values().begin(), p->value.values().end());
    return out;
}

// Psi at the last node of a whole-network pass over `triples` (the inserted
// triple goes last), built from scratch with no caching or virtual graphs.
std::vector<double> full_pass(Model& model, const KnowledgeGraph& vocab, std::vector<Triple> triples) {
    const KnowledgeGraph g = vocab.with_only(std::move(triples));
    const RelationNetwork net = build_relation_network(g, model.config().mask);
    const FeatureSource src(model, g);
    Tape tape;
    const Var x = gamma_features(tape, model, src, g.triples());
    const Tensor h = model.psi().forward(tape, make_structure(net), x).value();
    const auto row = h.row(h.rows() - 1);
    return {row.begin(), row.end()};
}

void check_close(const std::vector<double>& a, const std::vector<double>& b, double tol) {
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(tol).scale(1.0));
}

}  // namespace

TEST_CASE("config text parsing") {
    const TrainConfig c = parse_config("# comment\ndim = 8\ngnn = gcn\nmask = HH,TT\ndegree_cap = 20\n\nlr=0.01\n");
    CHECK(c.dim == 8);
    CHECK(c.gnn == MpLayerKind::GCN);
    CHECK(c.mask == PatternMask::parse("HH,TT"));
    CHECK(c.degree_cap == std::optional<std::size_t>(20));
    CHECK(c.lr == 0.01);
    CHECK(c.epochs == TrainConfig{}.epochs);
    CHECK_THROWS_AS(parse_config("width = 3\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("dim = many\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("dim 3\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("dim = 0\n"), ConfigError);
}

TEST_CASE("config map round trip") {
    TrainConfig c = small_config(MpLayerKind::GIN);
    c.lr = 0.1 / 3.0;
    c.degree_cap = 7;
    c.estimator = MiEstimatorKind::InfoNCE;
    c.tie_omega_psi = true;
    CHECK(config_from_map(config_to_map(c)) == c);
    CHECK(config_from_map(config_to_map(TrainConfig{})) == TrainConfig{});
}

TEST_CASE("checkpoint bytes survive a load and save") {
    const KnowledgeGraph kg = planted_rule_kg(6, 1);
    Model m = train(kg, small_config());
    const std::string bytes = encode_checkpoint(m);
    Model back = decode_checkpoint(bytes);
    CHECK(encode_checkpoint(back) == bytes);
    CHECK(back.config() == m.config());
    CHECK(values_of(back) == values_of(m));
}

TEST_CASE("damaged checkpoints are rejected") {
    Model m = train(planted_rule_kg(4, 2), small_config(MpLayerKind::SGC));
    const std::string bytes = encode_checkpoint(m);
    std::string magic = bytes;
    magic[0] = 'X';
    CHECK_THROWS_AS(decode_checkpoint(magic), BadMagic);
    std::string version = bytes;
    version[4] = 2;
    CHECK_THROWS_AS(decode_checkpoint(version), UnsupportedVersion);
    for (std::size_t cut : {std::size_t{6}, bytes.size() / 2, bytes.size() - 1})
        CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, cut)), TruncatedFile);
}

TEST_CASE("zero epochs leave the encoder at its initialization") {
    const KnowledgeGraph kg = planted_rule_kg(6, 4);
    TrainConfig cfg = small_config();
    cfg.epochs = 0;
    Model trained = train(kg, cfg);
    Model fresh(cfg, kg.entities(), kg.relations());
    const auto a = trained.objective_parameters(), b = fresh.objective_parameters();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i]->value.values() == b[i]->value.values());
}

TEST_CASE("training is deterministic and keeps entity rows frozen") {
    const KnowledgeGraph kg = planted_rule_kg(6, 5);
    for (MiEstimatorKind est : {MiEstimatorKind::JSD, MiEstimatorKind::InfoNCE, MiEstimatorKind::NaiveNS}) {
        TrainConfig cfg = small_config();
        cfg.estimator = est;
        Model a = train(kg, cfg);
        Model b = train(kg, cfg);
        CHECK(encode_checkpoint(a) == encode_checkpoint(b));
        Model init(cfg, kg.entities(), kg.relations());
        CHECK(a.embeddings().entity_emb.value.values() == init.embeddings().entity_emb.value.values());
        CHECK(a.embeddings().relation_emb.value.values() != init.embeddings().relation_emb.value.values());
    }
}

TEST_CASE("the training loss trends down") {
    const KnowledgeGraph kg = planted_rule_kg(10, 6);
    TrainConfig cfg = small_config();
    cfg.dim = 8;
    cfg.epochs = 50;
    cfg.batch_size = 32;
    std::vector<double> losses;
    train(kg, cfg, [&](const EpochStats& s) { losses.push_back(s.loss); });
    REQUIRE(losses.size() == 50);
    auto window = [&](std::size_t from) { return std::accumulate(losses.begin() + from, losses.begin() + from + 10, 0.0); };
    CHECK(window(40) < window(0));
    for (double l : losses) CHECK(std::isfinite(l));
}

TEST_CASE("training ignores entities that only appear in held-out triples") {
    const KnowledgeGraph kg = planted_rule_kg(8, 7);
    const InductiveSplit split = make_inductive_split(kg, 0.2, 7);
    // Same triples, but a vocabulary without the unseen names. Seen entities
    // keep their relative order so corruption draws line up.
    Vocabulary ents;
    std::vector<EntityId> remap(kg.num_entities());
    for (EntityId e = 0; e < kg.num_entities(); ++e)
        if (!std::binary_search(split.unseen_entities.begin(), split.unseen_entities.end(), e))
            remap[e] = ents.intern(kg.entities().name(e));
    std::vector<Triple> triples = split.train_graph.triples();
    for (Triple& t : triples) t = Triple{remap[t.head], t.rel, remap[t.tail]};
    const KnowledgeGraph stripped(ents, kg.relations(), triples);
    REQUIRE(stripped.num_entities() < split.train_graph.num_entities());
    TrainConfig cfg = small_config();
    Model a = train(split.train_graph, cfg);
    Model b = train(stripped, cfg);
    const auto pa = a.parameters(), pb = b.parameters();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 1; i < pa.size(); ++i) CHECK(pa[i]->value.values() == pb[i]->value.values());
    for (EntityId e : split.unseen_entities) {
        const std::string& name = kg.entities().name(e);
        CHECK(a.entity_row(name) == b.entity_row(name));
    }
}

TEST_CASE("logistic regression") {
    Parameter w("w", Tensor({2, 1})), b("b", Tensor({1, 1}));
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.5, 2.0), v(-1.0, 1.0);
    Tensor pos({100, 2}), negs({100, 2});
    for (std::size_t i = 0; i < 100; ++i) {
        pos.at(i, 0) = u(rng);
        pos.at(i, 1) = v(rng);
        negs.at(i, 0) = -u(rng);
        negs.at(i, 1) = v(rng);
    }
    fit_logistic(w, b, pos, negs, 500, 0.05);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < 100; ++i) {
        correct += w.value[0] * pos.at(i, 0) + w.value[1] * pos.at(i, 1) + b.value[0] > 0.0;
        correct += w.value[0] * negs.at(i, 0) + w.value[1] * negs.at(i, 1) + b.value[0] < 0.0;
    }
    CHECK(correct >= 198);
}

TEST_CASE("classifier output limits") {
    const KnowledgeGraph kg = planted_rule_kg(6, 9);
    Model m = train(kg, small_config());
    const RelationNetwork net = build_relation_network(kg, PatternMask::all());
    const Triple t = kg.triple(0);
    m.classifier_weight().value.fill(0.0);
    m.classifier_bias().value.fill(0.0);
    CHECK(score_triple(m, net, kg, t) == 0.5);
    m.classifier_bias().value.fill(-800.0);
    CHECK(score_triple(m, net, kg, t) < 1e-300);
}

TEST_CASE("inference routes agree with a whole-network pass") {
    const KnowledgeGraph kg = planted_rule_kg(6, 10);
    for (MpLayerKind kind : {MpLayerKind::GAT, MpLayerKind::GCN, MpLayerKind::GraphSAGE, MpLayerKind::GIN, MpLayerKind::SGC}) {
        TrainConfig cfg = small_config(kind);
        cfg.epochs = 1;
        Model m = train(kg, cfg);
        const RelationNetwork net = build_relation_network(kg, cfg.mask);
        Scorer scorer(m, kg, net);
        const FeatureSource src(m, kg);
        // A new fact between known entities, then one reusing a known pair.
        const Triple fresh{kg.triple(0).head, kg.triple(3).rel, kg.triple(5).tail};
        const Triple known = kg.triple(2);
        for (const Triple& t : {fresh, known}) {
            const std::vector<NodeId> excluded = t == known ? same_pair_nodes(kg, t) : std::vector<NodeId>{};
            std::vector<Triple> kept;
            for (TripleId id = 0; id < kg.num_triples(); ++id)
                if (!std::count(excluded.begin(), excluded.end(), id)) kept.push_back(kg.triple(id));
            kept.push_back(t);
            const std::vector<double> oracle = full_pass(m, kg, kept);

            check_close(scorer.embed(t, excluded), oracle, 1e-10);
            Tape tape;
            const std::vector<std::vector<NodeId>> excl = {excluded};
            const Tensor route = embed_inserted(tape, m, src, kg, net, std::span(&t, 1), excl).value();
            check_close({route.values().begin(), route.values().end()}, oracle, 1e-10);
        }
    }
}

TEST_CASE("a triple with two unseen entities depends on its own features only") {
    Vocabulary ents, rels;
    const std::vector<Triple> base = parse_triples_into("a\tr\tb\nb\ts\tc\nc\tr\ta\n", ents, rels);
    const EntityId x = ents.intern("x"), y = ents.intern("y");
    const KnowledgeGraph kg(ents, rels, base);
    TrainConfig cfg = small_config(MpLayerKind::GCN);
    cfg.epochs = 0;
    Model m = train(kg, cfg);
    const RelationNetwork net = build_relation_network(kg, cfg.mask);
    Scorer scorer(m, kg, net);
    const Triple t{x, 0, y};
    Tape tape;
    const Tensor gamma = gamma_features(tape, m, scorer.features(), std::span(&t, 1)).value();
    const Tensor alone = m.psi().forward(tape, make_structure(1, {}), tape.constant(gamma)).value();
    check_close(scorer.embed(t), {alone.values().begin(), alone.values().end()}, 1e-12);
}

TEST_CASE("scoring is pure and yields probabilities") {
    const KnowledgeGraph kg = planted_rule_kg(6, 11);
    Model m = train(kg, small_config());
    const RelationNetwork net = build_relation_network(kg, PatternMask::all());
    const RelationNetwork before = net;
    const Triple t{kg.triple(1).head, kg.triple(4).rel, kg.triple(7).tail};
    const double p = score_triple(m, net, kg, t);
    CHECK(p > 0.0);
    CHECK(p < 1.0);
    CHECK(score_triple(m, net, kg, t) == p);
    CHECK(net == before);
}

TEST_CASE("rank metrics") {
    const EvalReport r = report_from_ranks({1, 2, 4});
    CHECK(r.mrr == doctest::Approx((1.0 + 0.5 + 0.25) / 3.0).epsilon(1e-12));
    CHECK(r.hit1 == doctest::Approx(1.0 / 3.0));
    CHECK(r.hit3 == doctest::Approx(2.0 / 3.0));
    CHECK(r.n == 3);
    const EvalReport perfect = report_from_ranks(std::vector<double>(5, 1.0));
    CHECK(perfect.mrr == 1.0);
    CHECK(perfect.hit1 == 1.0);
    CHECK(perfect.hit3 == 1.0);
    CHECK(average_rank(0.5, std::vector<double>{0.5, 0.5, 0.1}) == 2.0);
    CHECK(average_rank(0.9, std::vector<double>{0.5, 0.95}) == 2.0);
    CHECK_THROWS_AS(report_from_ranks({}), EmptyEval);
}

TEST_CASE("a uniform random scorer over ten relations has the expected MRR") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> ranks;
    for (int q = 0; q < 2000; ++q) {
        std::vector<double> others(9);
        for (double& o : others) o = u(rng);
        ranks.push_back(average_rank(u(rng), others));
    }
    const EvalReport r = report_from_ranks(ranks);
    double harmonic = 0.0;
    for (int k = 1; k <= 10; ++k) harmonic += 1.0 / k;
    CHECK(harmonic / 10.0 == doctest::Approx(0.2929).epsilon(1e-3));
    CHECK(std::abs(r.mrr - harmonic / 10.0) < 0.05);
    CHECK(r.hit1 <= r.hit3);
    CHECK(r.hit3 <= 1.0);
    CHECK(r.hit1 <= r.mrr);
}

TEST_CASE("inference cost formula") {
    CHECK(estimate_inference_cost(1, 4, 2.0, 2) == 96.0);
    CHECK(estimate_inference_cost(8, 4, 2.0, 2) == 8 * 96.0);
}

TEST_CASE("evaluation over a split") {
    const KnowledgeGraph kg = planted_rule_kg(8, 13);
    const InductiveSplit split = make_inductive_split(kg, 0.2, 13);
    TrainConfig cfg = small_config();
    Model m = train(split.train_graph, cfg);
    std::vector<Triple> queries;
    for (const HeldOutTriple& h : split.eval_triples) queries.push_back(h.triple);
    REQUIRE_FALSE(queries.empty());
    const EvalContext ctx = make_eval_context(split.train_graph, queries, cfg);
    CHECK(ctx.kg.num_triples() == kg.num_triples());
    const EvalReport r = evaluate(m, ctx, queries);
    CHECK(r.n == queries.size());
    CHECK(r.hit1 <= r.hit3);
    CHECK(r.hit1 <= r.mrr);
    CHECK(evaluate(m, ctx, queries).key_values() == r.key_values());
    const EvalReport tails = evaluate(m, ctx, queries, EvalOptions{RankMode::Tails, 1, 10});
    CHECK(tails.n == queries.size());
    CHECK_THROWS_AS(evaluate(m, ctx, {}), EmptyEval);
}

TEST_CASE("queries with a relation the model never saw are rejected") {
    const KnowledgeGraph kg = planted_rule_kg(6, 14);
    Model m = train(kg, small_config());
    CHECK_THROWS_AS(m.relation_id("r99"), UnknownRelation);
    Vocabulary ents = kg.entities(), rels = kg.relations();
    const std::vector<Triple> extra = parse_triples_into("a0\tr99\tc0\n", ents, rels);
    const KnowledgeGraph other(ents, rels, kg.triples());
    const EvalContext ctx = make_eval_context(other, extra, m.config());
    CHECK_THROWS_AS(evaluate(m, ctx, extra), UnknownRelation);
}
