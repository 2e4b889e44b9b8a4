#include "noran/leim.hpp"

#include <algorithm>
#include <cmath>

#include "noran/error.hpp"
#include "noran/layers.hpp"
#include "noran/rng.hpp"

namespace noran {

std::string_view estimator_name(MiEstimatorKind kind) {
    switch (kind) {
        case MiEstimatorKind::JSD: return "jsd";
        case MiEstimatorKind::InfoNCE: return "infonce";
        case MiEstimatorKind::NaiveNS: return "naive-ns";
    }
    return "?";
}

MiEstimatorKind parse_estimator(std::string_view name) {
    if (name == "jsd") return MiEstimatorKind::JSD;
    if (name == "infonce") return MiEstimatorKind::InfoNCE;
    if (name == "naive-ns" || name == "naive_ns" || name == "ns") return MiEstimatorKind::NaiveNS;
    throw InvalidArgument("unknown estimator '" + std::string(name) + "'");
}

Discriminator::Discriminator(std::size_t width, std::uint64_t seed) : width_(width) {
    w1_ = Parameter("disc.w1", xavier_matrix(3 * width, width, seed, "disc.w1"));
    b1_ = Parameter("disc.b1", Tensor({1, width}));
    w2_ = Parameter("disc.w2", xavier_matrix(width, 1, seed, "disc.w2"));
    b2_ = Parameter("disc.b2", Tensor({1, 1}));
}

std::vector<Parameter*> Discriminator::parameters() { return {&w1_, &b1_, &w2_, &b2_}; }

Var Discriminator::log_prob(Tape& tape, Var inputs) {
    if (inputs.cols() != 3 * width_) throw ShapeMismatch("discriminator input " + shape_string(inputs.shape()));
    Var hidden = relu(add(matmul(inputs, tape.param(w1_)), tape.param(b1_)));
    return log_sigmoid(add(matmul(hidden, tape.param(w2_)), tape.param(b2_)));
}

Var Discriminator::score(Tape& tape, const Subgraph& ego, Var ego_embeddings, Var x_v) {
    if (ego_embeddings.rows() != ego.nodes.size() || ego_embeddings.cols() != width_)
        throw ShapeMismatch("ego embeddings " + shape_string(ego_embeddings.shape()));
    if (x_v.rows() != 1 || x_v.cols() != width_) throw ShapeMismatch("x_v " + shape_string(x_v.shape()));
    if (ego.edges.empty()) return tape.constant(Tensor::scalar(0.0));
    std::vector<std::uint32_t> ps, qs, vs(ego.edges.size(), 0);
    for (const LocalEdge& e : ego.edges) {
        ps.push_back(std::min(e.a, e.b));
        qs.push_back(std::max(e.a, e.b));
    }
    Var inputs = concat({gather_rows(ego_embeddings, ps), gather_rows(ego_embeddings, qs), gather_rows(x_v, vs)}, 1);
    return sum(log_prob(tape, inputs));
}

Var Discriminator::score_pairs(Tape& tape, Var stacked,
                               const std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>>& ego_edges,
                               Var anchors, std::span<const std::pair<std::uint32_t, std::uint32_t>> pairs) {
    if (stacked.cols() != width_ || anchors.cols() != width_)
        throw ShapeMismatch("score_pairs widths " + shape_string(stacked.shape()) + ", " + shape_string(anchors.shape()));
    const std::size_t f = width_;
    Var w1 = tape.param(w1_);
    Var p_terms = matmul(stacked, slice_rows(w1, 0, f));
    Var q_terms = matmul(stacked, slice_rows(w1, f, 2 * f));
    Var a_terms = add(matmul(anchors, slice_rows(w1, 2 * f, 3 * f)), tape.param(b1_));

    std::vector<std::uint32_t> ps, qs, as, segment;
    for (std::uint32_t k = 0; k < pairs.size(); ++k) {
        const auto [anchor, ego] = pairs[k];
        if (anchor >= anchors.rows() || ego >= ego_edges.size()) throw InvalidArgument("pair index out of range");
        for (auto [p, q] : ego_edges[ego]) {
            ps.push_back(std::min(p, q));
            qs.push_back(std::max(p, q));
            as.push_back(anchor);
            segment.push_back(k);
        }
    }
    if (ps.empty()) return tape.constant(Tensor({pairs.size(), 1}));
    Var hidden = relu(add(add(gather_rows(p_terms, ps), gather_rows(q_terms, qs)), gather_rows(a_terms, as)));
    Var logp = log_sigmoid(add(matmul(hidden, tape.param(w2_)), tape.param(b2_)));
    return scatter_add_rows(logp, std::move(segment), pairs.size());
}

Var jsd_mi(Var pos_scores, Var neg_scores, bool as_printed) {
    if (pos_scores.value().size() == 0 || neg_scores.value().size() == 0) throw EmptyBatch();
    Var positive = mean(neg(softplus(neg(pos_scores))));
    Var negative = mean(softplus(neg_scores));
    return as_printed ? add(positive, negative) : sub(positive, negative);
}

Var infonce_mi(Var pos_scores, Var neg_scores, std::span<const std::uint32_t> neg_anchor) {
    const std::size_t n_anchors = pos_scores.rows();
    if (n_anchors == 0 || neg_scores.rows() == 0) throw EmptyBatch();
    if (neg_anchor.size() != neg_scores.rows()) throw ShapeMismatch("infonce anchors vs negatives");
    std::vector<double> mx(n_anchors, -INFINITY);
    for (std::size_t i = 0; i < neg_anchor.size(); ++i) {
        if (neg_anchor[i] >= n_anchors) throw InvalidArgument("negative anchor out of range");
        mx[neg_anchor[i]] = std::max(mx[neg_anchor[i]], neg_scores.value()[i]);
    }
    for (double m : mx)
        if (!std::isfinite(m)) throw EmptyBatch();
    Tape& tape = pos_scores.tape();
    std::vector<std::uint32_t> idx(neg_anchor.begin(), neg_anchor.end());
    Var shift = tape.constant(Tensor({n_anchors, 1}, mx));
    Var shifted = exp(sub(neg_scores, gather_rows(shift, idx)));
    Var lse = add(log(scatter_add_rows(shifted, idx, n_anchors)), shift);
    return mean(sub(pos_scores, lse));
}

Var naive_ns_loss(Var pos_scores, Var neg_scores, double margin) {
    if (pos_scores.rows() != neg_scores.rows() || pos_scores.cols() != neg_scores.cols())
        throw ShapeMismatch("naive NS scores " + shape_string(pos_scores.shape()) + " vs " +
                            shape_string(neg_scores.shape()));
    if (pos_scores.value().size() == 0) throw EmptyBatch();
    return mean(relu(add_scalar(sub(neg_scores, pos_scores), margin)));
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> pair_negatives(std::size_t batch_size, PairingMode mode,
                                                                    std::uint64_t seed) {
    if (batch_size < 2) throw BatchTooSmall();
    std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
    if (mode == PairingMode::AllOthers) {
        for (std::uint32_t a = 0; a < batch_size; ++a)
            for (std::uint32_t g = 0; g < batch_size; ++g)
                if (g != a) pairs.emplace_back(a, g);
        return pairs;
    }
    // Sattolo's shuffle yields a single cycle, hence no fixed points.
    std::vector<std::uint32_t> perm(batch_size);
    for (std::uint32_t i = 0; i < batch_size; ++i) perm[i] = i;
    Rng rng = make_rng(seed, "derangement");
    for (std::size_t i = batch_size - 1; i > 0; --i) std::swap(perm[i], perm[uniform_index(rng, i)]);
    for (std::uint32_t a = 0; a < batch_size; ++a) pairs.emplace_back(a, perm[a]);
    return pairs;
}

}  // namespace noran
