#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "noran/config.hpp"
#include "noran/kg.hpp"
#include "noran/layers.hpp"
#include "noran/model.hpp"
#include "noran/relnet.hpp"
#include "noran/rng.hpp"

namespace noran {

// Inputs of Gamma for the triples of one knowledge graph, translated into the
// model's vocabularies by name. Entities the model never saw get their frozen
// initialization rows; relations the model never saw map to kNoRelation.
struct FeatureSource {
    static constexpr RelationId kNoRelation = UINT32_MAX;

    Tensor entity_rows;                 // [|kg entities| x f]
    std::vector<RelationId> relation_map;  // kg relation id -> model relation id

    FeatureSource() = default;
    FeatureSource(const Model& model, const KnowledgeGraph& kg);
    RelationId model_relation(RelationId kg_rel) const;  // throws UnknownRelation
};

// Gamma(e_h, e_r, e_t) for each triple, as rows of a [n x f] variable.
Var gamma_features(Tape& tape, Model& model, const FeatureSource& src, std::span<const Triple> triples);

// Closed structure of a subgraph whose degrees are taken from the parent
// network (so normalization matches a whole-network pass). `degree_of`
// returns the open degree of a subgraph node.
GraphStructure network_structure(const Subgraph& sub, const std::function<double(std::uint32_t local)>& degree_of);

// Nodes whose triples connect the same two entities as t, in either
// orientation. Base node ids equal triple ids of kg.
std::vector<NodeId> same_pair_nodes(const KnowledgeGraph& kg, const Triple& t);

// Psi output at a node inserted for each triple, with the listed nodes
// removed, computed on the tape over virtual ego graphs. This is the
// differentiable route; Scorer is the cached inference route.
Var embed_inserted(Tape& tape, Model& model, const FeatureSource& src, const KnowledgeGraph& kg,
                   const RelationNetwork& net, std::span<const Triple> triples,
                   std::span<const std::vector<NodeId>> excluded);

// Uniformly replaces head or tail with an entity from `pool`, retrying until
// the result is not in `truth` (at most 100 draws).
Triple corrupt_triple(const Triple& t, std::span<const EntityId> pool, const std::set<Triple>& truth, Rng& rng);

// Entities incident to at least one triple, ascending.
std::vector<EntityId> active_entities(const KnowledgeGraph& kg);

// ---- training ----------------------------------------------------------

struct EpochStats {
    std::size_t epoch = 0;
    double loss = 0.0;
};

using EpochCallback = std::function<void(const EpochStats&)>;

// A training graph with what the objectives sample from.
struct TrainingGraph {
    const KnowledgeGraph& kg;
    const RelationNetwork& net;
    FeatureSource src;
    std::set<Triple> truth;
    std::vector<EntityId> pool;

    TrainingGraph(const Model& model, const KnowledgeGraph& g, const RelationNetwork& n);
};

// Objective loss of one batch of relation-network nodes (not yet stepped).
Var batch_loss(Tape& tape, Model& model, const TrainingGraph& data, std::span<const NodeId> batch,
               std::uint64_t batch_seed);

// The training loop: builds the relation network once, optimizes the
// configured objective over seeded batches, then fits the classifier.
Model train(const KnowledgeGraph& kg, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

// Fits sigmoid(w.x + b) by full-batch Adam on binary cross-entropy.
void fit_logistic(Parameter& w, Parameter& b, const Tensor& positives, const Tensor& negatives, std::size_t epochs,
                  double lr);

// Frozen-encoder classifier phase: positives are the training triples,
// negatives one filtered head-or-tail corruption each; both are embedded by
// inserting the triple with its own entity pair masked.
void train_classifier(Model& model, const KnowledgeGraph& kg, const RelationNetwork& net);

// ---- inference ---------------------------------------------------------

// Inductive inference with Gamma and the first Psi transform cached for the
// base network. A query builds the inserted node's virtual ego graph and
// computes layer l only for nodes within (L - l) hops, so the network itself
// is never modified.
class Scorer {
   public:
    Scorer(Model& model, const KnowledgeGraph& kg, const RelationNetwork& net);

    std::vector<double> embed(const Triple& t, std::span<const NodeId> excluded = {});
    double probability(const Triple& t, std::span<const NodeId> excluded = {});
    const FeatureSource& features() const { return src_; }

   private:
    Model& model_;
    const KnowledgeGraph& kg_;
    const RelationNetwork& net_;
    FeatureSource src_;
    Tensor x_;   // Gamma rows of base nodes
    Tensor z1_;  // first-layer transform of x_ (x_ itself for SGC)
    std::vector<double> s1_self_, s1_nb_;          // GAT first-layer logit parts
    std::vector<Tensor> u_self_, u_nb_;            // GAT Theta_l a halves, [f x 1]
};

// Probability that t holds: insert, encode, classify. The network is not
// modified.
double score_triple(Model& model, const RelationNetwork& net, const KnowledgeGraph& kg, const Triple& t);

// ---- evaluation --------------------------------------------------------

enum class RankMode { Relations, Tails };

struct EvalOptions {
    RankMode mode = RankMode::Relations;
    std::uint64_t seed = 0;
    std::size_t tail_candidates = 100;
};

struct EvalReport {
    double mrr = 0.0;
    double hit1 = 0.0;
    double hit3 = 0.0;
    std::size_t n = 0;
    std::vector<double> ranks;

    std::string table() const;
    std::string key_values() const;  // mrr=, hit1=, hit3=, n= lines
};

// Rank of `truth` among truth and `others`; ties share the average rank.
double average_rank(double truth, std::span<const double> others);
EvalReport report_from_ranks(std::vector<double> ranks);

// The graph queries are answered against: training triples plus the held-out
// triples (added back), with each query's own entity pair masked at scoring.
struct EvalContext {
    KnowledgeGraph kg;
    RelationNetwork net;
};

EvalContext make_eval_context(const KnowledgeGraph& train, std::span<const Triple> eval, const TrainConfig& cfg,
                              bool add_back = true);

// Queries are triples in ctx.kg's id space. Throws EmptyEval.
EvalReport evaluate(Model& model, const EvalContext& ctx, std::span<const Triple> queries,
                    const EvalOptions& options = {});

// 3bf^2 + b d^L f + b L f^2 multiply-accumulates.
double estimate_inference_cost(std::size_t b, std::size_t f, double mean_degree, std::size_t layers);

}  // namespace noran
