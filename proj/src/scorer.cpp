#include <algorithm>
#include <cmath>
#include <deque>

#include "detail.hpp"
#include "noran/error.hpp"
#include "noran/pipeline.hpp"

namespace noran {

namespace {

using Row = std::vector<double>;

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    mac_counter() += a.size();
    return s;
}

// out = in . W for a row vector.
Row times(std::span<const double> in, const Tensor& w) {
    const std::size_t n = w.cols();
    Row out(n, 0.0);
    for (std::size_t k = 0; k < in.size(); ++k) {
        const double v = in[k];
        const auto wr = w.row(k);
        for (std::size_t j = 0; j < n; ++j) out[j] += v * wr[j];
    }
    mac_counter() += in.size() * n;
    return out;
}

// out = W . v for a column vector.
Row apply(const Tensor& w, std::span<const double> v) {
    Row out(w.rows(), 0.0);
    for (std::size_t k = 0; k < w.rows(); ++k) {
        const auto wr = w.row(k);
        for (std::size_t j = 0; j < v.size(); ++j) out[k] += wr[j] * v[j];
    }
    mac_counter() += w.rows() * v.size();
    return out;
}

void relu_inplace(Row& r) {
    for (double& v : r) v = std::max(v, 0.0);
}

Tensor column(std::span<const double> values) { return Tensor({values.size(), 1}, Row(values.begin(), values.end())); }

}  // namespace

Scorer::Scorer(Model& model, const KnowledgeGraph& kg, const RelationNetwork& net)
    : model_(model), kg_(kg), net_(net), src_(model, kg) {
    GnnStack& psi = model.psi();
    const std::size_t n = net.base_nodes(), f = model.dim();
    Tape tape;
    std::vector<Triple> triples;
    for (NodeId v = 0; v < n; ++v) triples.push_back(net.node_triple(v));
    const Var x = gamma_features(tape, model, src_, triples);
    x_ = x.value();
    if (psi.depth() == 0) return;
    z1_ = psi.kind() == MpLayerKind::SGC ? x_ : matmul(x, tape.param(psi.layers()[0].weight)).value();
    if (psi.kind() != MpLayerKind::GAT) return;
    for (const MpLayer& layer : psi.layers()) {
        const auto a = layer.attention.value.data();
        u_self_.push_back(column(apply(layer.weight.value, a.subspan(0, f))));
        u_nb_.push_back(column(apply(layer.weight.value, a.subspan(f, f))));
    }
    s1_self_.resize(n);
    s1_nb_.resize(n);
    const auto& l0 = psi.layers()[0].attention.value;
    for (NodeId v = 0; v < n; ++v) {
        s1_self_[v] = dot(z1_.row(v), l0.data().subspan(0, f));
        s1_nb_[v] = dot(z1_.row(v), l0.data().subspan(f, f));
    }
}

std::vector<double> Scorer::embed(const Triple& t, std::span<const NodeId> excluded) {
    GnnStack& psi = model_.psi();
    const MpLayerKind kind = psi.kind();
    const std::size_t depth = psi.depth(), f = model_.dim();
    const bool relu_act = psi.activation() == Activation::ReLU;

    Row xv;
    {
        Tape tape;
        const Triple one[] = {t};
        const Var x = gamma_features(tape, model_, src_, one);
        xv.assign(x.value().data().begin(), x.value().data().end());
    }
    if (depth == 0) return xv;

    const auto excl = detail::sorted_copy(excluded);
    const auto is_excluded = detail::membership(excl);
    const auto links = net_.links_for(t, kg_, is_excluded);
    const EgoGraph ego = virtual_ego_graph(net_, links, depth, is_excluded);
    const std::size_t n = ego.nodes.size();

    std::vector<std::vector<std::uint32_t>> closed(n);
    for (std::uint32_t i = 0; i < n; ++i) closed[i].push_back(i);
    for (const LocalEdge& e : ego.edges) {
        closed[e.a].push_back(e.b);
        closed[e.b].push_back(e.a);
    }
    std::vector<std::size_t> hop(n, SIZE_MAX);
    hop[0] = 0;
    std::deque<std::uint32_t> queue{0};
    while (!queue.empty()) {
        const auto i = queue.front();
        queue.pop_front();
        for (auto j : closed[i])
            if (hop[j] == SIZE_MAX) {
                hop[j] = hop[i] + 1;
                queue.push_back(j);
            }
    }
    const detail::DegreeAdjust adjust(net_, excl);
    std::vector<double> closed_degree(n);
    closed_degree[0] = static_cast<double>(links.size()) + 1.0;
    for (std::uint32_t j = 1; j < n; ++j) {
        const bool linked = std::find(closed[j].begin(), closed[j].end(), 0u) != closed[j].end();
        closed_degree[j] = adjust.open_degree(ego.nodes[j], linked) + 1.0;
    }

    // First-layer inputs arrive already transformed (C X W = C (X W)).
    const Tensor* w0 = kind == MpLayerKind::SGC ? nullptr : &psi.layers()[0].weight.value;
    const Row zv = w0 ? times(xv, *w0) : xv;
    auto base_row = [&](std::uint32_t j) -> std::span<const double> {
        return j == 0 ? std::span<const double>(zv) : z1_.row(ego.nodes[j]);
    };

    std::vector<Row> prev(n), next(n);
    std::vector<double> s_self(n, 0.0), s_nb(n, 0.0);
    for (std::size_t l = 0; l < depth; ++l) {
        const std::size_t limit = depth - 1 - l;
        auto input = [&](std::uint32_t j) -> std::span<const double> {
            return l == 0 ? base_row(j) : std::span<const double>(prev[j]);
        };
        if (kind == MpLayerKind::GAT) {
            const auto& a = psi.layers()[l].attention.value;
            for (std::uint32_t j = 0; j < n; ++j) {
                if (hop[j] > limit + 1) continue;
                if (l == 0 && j > 0) {
                    s_self[j] = s1_self_[ego.nodes[j]];
                    s_nb[j] = s1_nb_[ego.nodes[j]];
                } else if (l == 0) {
                    s_self[j] = dot(zv, a.data().subspan(0, f));
                    s_nb[j] = dot(zv, a.data().subspan(f, f));
                } else {
                    if (hop[j] <= limit) s_self[j] = dot(prev[j], u_self_[l].data());
                    s_nb[j] = dot(prev[j], u_nb_[l].data());
                }
            }
        }
        for (std::uint32_t i = 0; i < n; ++i) {
            if (hop[i] > limit) continue;
            const auto& nb = closed[i];
            std::vector<double> c(nb.size());
            if (kind == MpLayerKind::GAT) {
                double mx = -INFINITY;
                for (std::size_t e = 0; e < nb.size(); ++e) mx = std::max(mx, s_self[i] + s_nb[nb[e]]);
                double z = 0.0;
                for (std::size_t e = 0; e < nb.size(); ++e) z += (c[e] = std::exp(s_self[i] + s_nb[nb[e]] - mx));
                for (double& v : c) v /= z;
            } else {
                for (std::size_t e = 0; e < nb.size(); ++e)
                    c[e] = fixed_weight(kind, closed_degree[i], closed_degree[nb[e]]);
            }
            Row agg(f, 0.0);
            for (std::size_t e = 0; e < nb.size(); ++e) {
                const auto in = input(nb[e]);
                for (std::size_t k = 0; k < f; ++k) agg[k] += c[e] * in[k];
            }
            mac_counter() += nb.size() * f;

            const MpLayer& layer = psi.layers()[l];
            Row out;
            switch (kind) {
                case MpLayerKind::GCN:
                case MpLayerKind::GraphSAGE:
                case MpLayerKind::GAT: out = l == 0 ? std::move(agg) : times(agg, layer.weight.value); break;
                case MpLayerKind::GIN: {
                    Row h = l == 0 ? std::move(agg) : times(agg, layer.weight.value);
                    if (relu_act) relu_inplace(h);
                    out = times(h, layer.weight2.value);
                    break;
                }
                case MpLayerKind::SGC: out = std::move(agg); break;
            }
            if (relu_act && l + 1 < depth) relu_inplace(out);
            next[i] = std::move(out);
        }
        std::swap(prev, next);
    }
    return prev[0];
}

double Scorer::probability(const Triple& t, std::span<const NodeId> excluded) {
    const Row x = embed(t, excluded);
    const double z = dot(x, model_.classifier_weight().value.data()) + model_.classifier_bias().value[0];
    return 1.0 / (1.0 + std::exp(-z));
}

double score_triple(Model& model, const RelationNetwork& net, const KnowledgeGraph& kg, const Triple& t) {
    Scorer scorer(model, kg, net);
    return scorer.probability(t);
}

}  // namespace noran
