#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "noran/relnet.hpp"
#include "noran/tensor.hpp"

namespace noran {

enum class MiEstimatorKind { JSD, InfoNCE, NaiveNS };

std::string_view estimator_name(MiEstimatorKind kind);  // jsd, infonce, naive-ns
MiEstimatorKind parse_estimator(std::string_view name);

// f_omega: [h_p || h_q || x_v] (width 3f) -> ReLU hidden layer of width f ->
// sigmoid. Scores are edge sums of log f_omega, so they are never positive.
class Discriminator {
   public:
    Discriminator() = default;
    Discriminator(std::size_t width, std::uint64_t seed);

    std::size_t width() const { return width_; }
    Parameter& hidden_weight() { return w1_; }  // [3f x f]
    Parameter& hidden_bias() { return b1_; }    // [1 x f]
    Parameter& out_weight() { return w2_; }     // [f x 1]
    Parameter& out_bias() { return b2_; }       // [1 x 1]
    std::vector<Parameter*> parameters();

    // log f_omega for each row of a [m x 3f] input.
    Var log_prob(Tape& tape, Var inputs);

    // T for one ego graph: ego_embeddings holds Omega outputs in ego-local
    // order, x_v is [1 x f]. Each undirected edge contributes once.
    Var score(Tape& tape, const Subgraph& ego, Var ego_embeddings, Var x_v);

    // T for many (ego, anchor) pairs at once. `stacked` holds Omega outputs
    // of every ego graph, `ego_edges[g]` lists ego g's edges as rows of
    // `stacked`, `anchors` holds Psi embeddings. Returns [pairs x 1]. Uses the
    // split form of the first layer so node terms are computed once per node.
    Var score_pairs(Tape& tape, Var stacked, const std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>>& ego_edges,
                    Var anchors, std::span<const std::pair<std::uint32_t, std::uint32_t>> pairs);

   private:
    std::size_t width_ = 0;
    Parameter w1_, b1_, w2_, b2_;
};

// Jensen-Shannon estimate mean(-sp(-pos)) - mean(sp(neg)). With as_printed the
// second term's sign follows the formula exactly as typeset, i.e.
// mean(-sp(-pos)) + mean(sp(neg)).
Var jsd_mi(Var pos_scores, Var neg_scores, bool as_printed = false);

// InfoNCE estimate: mean over anchors of pos[a] - logsumexp(neg of a).
// neg_scores is a column; neg_anchor[i] is the anchor of row i (non-decreasing).
Var infonce_mi(Var pos_scores, Var neg_scores, std::span<const std::uint32_t> neg_anchor);

// Margin ranking loss mean(max(0, margin - pos + neg)).
Var naive_ns_loss(Var pos_scores, Var neg_scores, double margin);

enum class PairingMode { OneToOne, AllOthers };

// (anchor index, ego index) pairs with ego != anchor. OneToOne draws a seeded
// derangement; AllOthers pairs every anchor with the other |B|-1 egos.
std::vector<std::pair<std::uint32_t, std::uint32_t>> pair_negatives(std::size_t batch_size, PairingMode mode,
                                                                    std::uint64_t seed);

}  // namespace noran
