#include "noran/pipeline.hpp"

#include <algorithm>
#include <unordered_map>

#include "detail.hpp"
#include "noran/error.hpp"
#include "noran/leim.hpp"

namespace noran {

FeatureSource::FeatureSource(const Model& model, const KnowledgeGraph& kg) {
    const std::size_t f = model.dim();
    entity_rows = Tensor({kg.num_entities(), f});
    for (EntityId e = 0; e < kg.num_entities(); ++e) {
        auto row = model.entity_row(kg.entities().name(e));
        std::copy(row.begin(), row.end(), entity_rows.row(e).begin());
    }
    relation_map.resize(kg.num_relations(), kNoRelation);
    for (RelationId r = 0; r < kg.num_relations(); ++r)
        if (auto id = model.relations().find(kg.relations().name(r))) relation_map[r] = *id;
}

RelationId FeatureSource::model_relation(RelationId kg_rel) const {
    if (kg_rel >= relation_map.size() || relation_map[kg_rel] == kNoRelation)
        throw UnknownRelation("#" + std::to_string(kg_rel));
    return relation_map[kg_rel];
}

Var gamma_features(Tape& tape, Model& model, const FeatureSource& src, std::span<const Triple> triples) {
    const std::size_t f = model.dim(), n = triples.size();
    Tensor eh({n, f}), et({n, f});
    std::vector<std::uint32_t> rel(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Triple& t = triples[i];
        if (t.head >= src.entity_rows.rows() || t.tail >= src.entity_rows.rows())
            throw InvalidArgument("triple entity outside the feature source");
        std::copy_n(src.entity_rows.row(t.head).begin(), f, eh.row(i).begin());
        std::copy_n(src.entity_rows.row(t.tail).begin(), f, et.row(i).begin());
        rel[i] = src.model_relation(t.rel);
    }
    Var er = gather_rows(tape.param(model.embeddings().relation_emb), std::move(rel));
    return model.gamma().encode(tape, tape.constant(std::move(eh)), er, tape.constant(std::move(et)));
}

GraphStructure network_structure(const Subgraph& sub, const std::function<double(std::uint32_t)>& degree_of) {
    GraphStructure g = make_structure(sub);
    for (std::uint32_t i = 0; i < g.n; ++i) g.degree[i] = degree_of(i) + 1.0;
    return g;
}

std::vector<NodeId> same_pair_nodes(const KnowledgeGraph& kg, const Triple& t) {
    std::vector<NodeId> out;
    if (t.head >= kg.num_entities()) return out;
    const Incidence& inc = kg.incidence(t.head);
    for (const auto* list : {&inc.as_head, &inc.as_tail})
        for (TripleId id : *list) {
            const Triple& o = kg.triple(id);
            if ((o.head == t.head && o.tail == t.tail) || (o.head == t.tail && o.tail == t.head)) out.push_back(id);
        }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

Var embed_inserted(Tape& tape, Model& model, const FeatureSource& src, const KnowledgeGraph& kg,
                   const RelationNetwork& net, std::span<const Triple> triples,
                   std::span<const std::vector<NodeId>> excluded) {
    if (!excluded.empty() && excluded.size() != triples.size())
        throw InvalidArgument("one exclusion list per inserted triple");
    const std::size_t depth = model.config().depth;
    Subgraph block;
    std::vector<Triple> node_triples;
    std::vector<double> degree;
    std::vector<std::uint32_t> centers;
    for (std::size_t i = 0; i < triples.size(); ++i) {
        const auto excl = excluded.empty() ? std::vector<NodeId>{} : detail::sorted_copy(excluded[i]);
        const auto is_excluded = detail::membership(excl);
        const auto links = net.links_for(triples[i], kg, is_excluded);
        const EgoGraph ego = virtual_ego_graph(net, links, depth, is_excluded);
        const detail::DegreeAdjust adjust(net, excl);
        std::vector<bool> linked(ego.nodes.size(), false);
        for (const LocalEdge& e : ego.edges)
            if (e.a == 0) linked[e.b] = true;

        const auto offset = static_cast<std::uint32_t>(block.nodes.size());
        centers.push_back(offset);
        for (std::size_t j = 0; j < ego.nodes.size(); ++j) {
            block.nodes.push_back(ego.nodes[j]);
            node_triples.push_back(j == 0 ? triples[i] : net.node_triple(ego.nodes[j]));
            degree.push_back(j == 0 ? static_cast<double>(links.size()) : adjust.open_degree(ego.nodes[j], linked[j]));
        }
        for (const LocalEdge& e : ego.edges) block.edges.push_back({e.a + offset, e.b + offset, e.pattern});
    }
    Var x = gamma_features(tape, model, src, node_triples);
    const GraphStructure g = network_structure(block, [&](std::uint32_t i) { return degree[i]; });
    return gather_rows(model.psi().forward(tape, g, x), std::move(centers));
}

Triple corrupt_triple(const Triple& t, std::span<const EntityId> pool, const std::set<Triple>& truth, Rng& rng) {
    if (pool.empty()) throw InvalidArgument("empty corruption pool");
    Triple c = t;
    for (int attempt = 0; attempt < 100; ++attempt) {
        c = t;
        const EntityId e = pool[uniform_index(rng, pool.size())];
        if (uniform_index(rng, 2) == 0)
            c.head = e;
        else
            c.tail = e;
        if (!truth.count(c)) break;
    }
    return c;
}

std::vector<EntityId> active_entities(const KnowledgeGraph& kg) {
    std::vector<EntityId> out;
    for (EntityId e = 0; e < kg.num_entities(); ++e)
        if (!kg.incidence(e).as_head.empty() || !kg.incidence(e).as_tail.empty()) out.push_back(e);
    return out;
}

// ---- training ----------------------------------------------------------

TrainingGraph::TrainingGraph(const Model& model, const KnowledgeGraph& g, const RelationNetwork& n)
    : kg(g), net(n), src(model, g), truth(g.triples().begin(), g.triples().end()), pool(active_entities(g)) {}

namespace {

// Gamma and Psi over the union of the batch nodes' k-hop balls, with
// whole-network degrees. The batch nodes are the first rows.
struct BatchEncoding {
    Subgraph sub;
    Var features;  // Gamma rows of sub.nodes
    Var anchors;   // Psi rows of the batch nodes
};

BatchEncoding encode_batch(Tape& tape, Model& model, const TrainingGraph& data, std::span<const NodeId> batch) {
    BatchEncoding enc;
    enc.sub = k_hop_union(data.net, batch, model.config().depth);
    std::vector<Triple> triples;
    for (NodeId v : enc.sub.nodes) triples.push_back(data.net.node_triple(v));
    enc.features = gamma_features(tape, model, data.src, triples);
    const GraphStructure g = network_structure(
        enc.sub, [&](std::uint32_t i) { return static_cast<double>(data.net.degree(enc.sub.nodes[i])); });
    enc.anchors = slice_rows(model.psi().forward(tape, g, enc.features), 0, batch.size());
    return enc;
}

Var mi_loss(Tape& tape, Model& model, const TrainingGraph& data, std::span<const NodeId> batch, std::uint64_t seed) {
    const TrainConfig& cfg = model.config();
    const BatchEncoding enc = encode_batch(tape, model, data, batch);
    std::unordered_map<NodeId, std::uint32_t> row_of;
    for (std::uint32_t i = 0; i < enc.sub.nodes.size(); ++i) row_of.emplace(enc.sub.nodes[i], i);

    // Omega over all ego graphs at once, as one block-diagonal graph.
    Subgraph block;
    std::vector<std::uint32_t> rows;
    std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> ego_edges;
    for (NodeId v : batch) {
        const EgoGraph ego = ego_graph(data.net, v, cfg.depth);
        const auto offset = static_cast<std::uint32_t>(block.nodes.size());
        for (NodeId u : ego.nodes) {
            block.nodes.push_back(u);
            rows.push_back(row_of.at(u));
        }
        auto& edges = ego_edges.emplace_back();
        for (const LocalEdge& e : ego.edges) {
            block.edges.push_back({e.a + offset, e.b + offset, e.pattern});
            edges.emplace_back(e.a + offset, e.b + offset);
        }
    }
    const Var h = model.omega().forward(tape, make_structure(block), gather_rows(enc.features, std::move(rows)));
    const Var anchors = enc.anchors;

    std::vector<std::pair<std::uint32_t, std::uint32_t>> positive;
    for (std::uint32_t a = 0; a < batch.size(); ++a) positive.emplace_back(a, a);
    const bool nce = cfg.estimator == MiEstimatorKind::InfoNCE;
    const auto negative = pair_negatives(batch.size(), nce ? PairingMode::AllOthers : PairingMode::OneToOne, seed);

    Discriminator& disc = model.discriminator();
    const Var pos = disc.score_pairs(tape, h, ego_edges, anchors, positive);
    const Var neg = disc.score_pairs(tape, h, ego_edges, anchors, negative);
    if (nce) {
        std::vector<std::uint32_t> owner;
        for (auto [a, g] : negative) owner.push_back(a);
        return noran::neg(infonce_mi(pos, neg, owner));
    }
    return noran::neg(jsd_mi(pos, neg, cfg.jsd_as_printed));
}

Var classify(Tape& tape, Model& model, Var embeddings) {
    return sigmoid(add(matmul(embeddings, tape.param(model.classifier_weight())), tape.param(model.classifier_bias())));
}

// Margin ranking on classifier probabilities: batch nodes against one
// filtered head-or-tail corruption each.
Var ns_loss(Tape& tape, Model& model, const TrainingGraph& data, std::span<const NodeId> batch, std::uint64_t seed) {
    const Var anchors = encode_batch(tape, model, data, batch).anchors;
    Rng rng(derive_seed(seed, "corrupt"));
    std::vector<Triple> corrupted;
    std::vector<std::vector<NodeId>> excluded;
    for (NodeId v : batch) {
        corrupted.push_back(corrupt_triple(data.net.node_triple(v), data.pool, data.truth, rng));
        excluded.push_back(same_pair_nodes(data.kg, corrupted.back()));
    }
    const Var negatives = embed_inserted(tape, model, data.src, data.kg, data.net, corrupted, excluded);
    return naive_ns_loss(classify(tape, model, anchors), classify(tape, model, negatives), model.config().margin);
}

}  // namespace

Var batch_loss(Tape& tape, Model& model, const TrainingGraph& data, std::span<const NodeId> batch,
               std::uint64_t batch_seed) {
    if (batch.empty()) throw EmptyBatch();
    if (model.config().estimator == MiEstimatorKind::NaiveNS) return ns_loss(tape, model, data, batch, batch_seed);
    return mi_loss(tape, model, data, batch, batch_seed);
}

Model train(const KnowledgeGraph& kg, const TrainConfig& cfg, const EpochCallback& on_epoch) {
    if (kg.num_triples() == 0) throw EmptyInput();
    const RelationNetwork net = build_relation_network(kg, cfg.mask, cfg.degree_cap, derive_seed(cfg.seed, "relnet"));
    Model model(cfg, kg.entities(), kg.relations());
    const TrainingGraph data(model, kg, net);
    const std::size_t n = net.num_nodes();
    if (cfg.epochs > 0 && n < 2 && cfg.estimator != MiEstimatorKind::NaiveNS) throw BatchTooSmall();

    Adam adam(model.objective_parameters(), AdamOptions{.lr = cfg.lr});
    std::uint64_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<NodeId> order(n);
        for (NodeId v = 0; v < n; ++v) order[v] = v;
        Rng rng(derive_seed(derive_seed(cfg.seed, "batches"), epoch));
        shuffle(order, rng);

        double total = 0.0;
        std::size_t begin = 0;
        while (begin < n) {
            std::size_t end = std::min(n, begin + cfg.batch_size);
            // A lone trailing node cannot be paired with a negative; fold it in.
            if (n - end == 1) end = n;
            const std::span<const NodeId> batch(order.data() + begin, end - begin);
            Tape tape;
            const Var loss = batch_loss(tape, model, data, batch, derive_seed(derive_seed(cfg.seed, "pairs"), step++));
            tape.backward(loss);
            adam.step();
            adam.zero_grad();
            total += loss.value().item() * static_cast<double>(batch.size());
            begin = end;
        }
        if (on_epoch) on_epoch({epoch + 1, total / static_cast<double>(n)});
    }
    train_classifier(model, kg, net);
    return model;
}

void fit_logistic(Parameter& w, Parameter& b, const Tensor& positives, const Tensor& negatives, std::size_t epochs,
                  double lr) {
    const std::size_t np = positives.rows(), nn = negatives.rows();
    if (np + nn == 0) return;
    const std::size_t f = w.value.rows();
    Tensor x({np + nn, f});
    Tensor y({np + nn, 1});
    for (std::size_t i = 0; i < np; ++i) {
        std::copy_n(positives.row(i).begin(), f, x.row(i).begin());
        y[i] = 1.0;
    }
    for (std::size_t i = 0; i < nn; ++i) std::copy_n(negatives.row(i).begin(), f, x.row(np + i).begin());
    Adam adam({&w, &b}, AdamOptions{.lr = lr});
    for (std::size_t e = 0; e < epochs; ++e) {
        Tape tape;
        const Var z = add(matmul(tape.constant(x), tape.param(w)), tape.param(b));
        // Binary cross-entropy with logits: softplus(z) - y z.
        const Var loss = mean(sub(softplus(z), mul(tape.constant(y), z)));
        tape.backward(loss);
        adam.step();
        adam.zero_grad();
    }
}

void train_classifier(Model& model, const KnowledgeGraph& kg, const RelationNetwork& net) {
    const std::size_t f = model.dim(), n = net.base_nodes();
    Scorer scorer(model, kg, net);
    const std::set<Triple> truth(kg.triples().begin(), kg.triples().end());
    const auto pool = active_entities(kg);
    Rng rng = make_rng(model.config().seed, "classifier-negatives");
    Tensor pos({n, f}), negs({n, f});
    for (NodeId v = 0; v < n; ++v) {
        const Triple& t = net.node_triple(v);
        auto row = scorer.embed(t, same_pair_nodes(kg, t));
        std::copy(row.begin(), row.end(), pos.row(v).begin());
        const Triple c = corrupt_triple(t, pool, truth, rng);
        row = scorer.embed(c, same_pair_nodes(kg, c));
        std::copy(row.begin(), row.end(), negs.row(v).begin());
    }
    Parameter& w = model.classifier_weight();
    Parameter& b = model.classifier_bias();
    w.value.fill(0.0);
    b.value.fill(0.0);
    fit_logistic(w, b, pos, negs, model.config().classifier_epochs, model.config().classifier_lr);
}

}  // namespace noran
