#include "noran/layers.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "noran/error.hpp"
#include "noran/rng.hpp"

namespace noran {

std::string_view kind_name(MpLayerKind kind) {
    switch (kind) {
        case MpLayerKind::GCN: return "gcn";
        case MpLayerKind::GraphSAGE: return "sage";
        case MpLayerKind::GIN: return "gin";
        case MpLayerKind::SGC: return "sgc";
        case MpLayerKind::GAT: return "gat";
    }
    return "?";
}

MpLayerKind parse_kind(std::string_view name) {
    if (name == "gcn") return MpLayerKind::GCN;
    if (name == "sage" || name == "graphsage") return MpLayerKind::GraphSAGE;
    if (name == "gin") return MpLayerKind::GIN;
    if (name == "sgc") return MpLayerKind::SGC;
    if (name == "gat") return MpLayerKind::GAT;
    throw InvalidArgument("unknown layer kind '" + std::string(name) + "'");
}

bool is_fixed(MpLayerKind kind) { return kind != MpLayerKind::GAT; }

GraphStructure make_structure(std::size_t n, std::span<const LocalEdge> edges) {
    std::vector<std::vector<std::uint32_t>> rows(n);
    for (std::size_t i = 0; i < n; ++i) rows[i].push_back(static_cast<std::uint32_t>(i));
    for (const LocalEdge& e : edges) {
        if (e.a >= n || e.b >= n || e.a == e.b) throw InvalidArgument("bad local edge");
        rows[e.a].push_back(e.b);
        rows[e.b].push_back(e.a);
    }
    GraphStructure g;
    g.n = n;
    g.degree.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::sort(rows[i].begin(), rows[i].end());
        if (std::adjacent_find(rows[i].begin(), rows[i].end()) != rows[i].end())
            throw InvalidArgument("duplicate edge in structure");
        g.degree[i] = static_cast<double>(rows[i].size());
    }
    g.closed = std::make_shared<const Csr>(Csr::from_rows(n, rows));
    return g;
}

GraphStructure make_structure(const Subgraph& sub) { return make_structure(sub.nodes.size(), sub.edges); }

GraphStructure make_structure(const RelationNetwork& net) {
    std::vector<LocalEdge> edges;
    for (NodeId u = 0; u < net.num_nodes(); ++u)
        for (NodeId v : net.neighbors(u))
            if (u < v) edges.push_back({u, v, LinkPattern::HeadHead});
    return make_structure(net.num_nodes(), edges);
}

GraphStructure make_structure(const Tensor& adjacency) {
    const std::size_t n = adjacency.rows();
    if (adjacency.cols() != n) throw ShapeMismatch("adjacency must be square, got " + shape_string(adjacency.shape()));
    std::vector<LocalEdge> edges;
    for (std::size_t i = 0; i < n; ++i) {
        if (adjacency.at(i, i) != 0.0) throw InvalidArgument("adjacency must have a zero diagonal");
        for (std::size_t j = 0; j < n; ++j) {
            if (adjacency.at(i, j) != adjacency.at(j, i)) throw AsymmetricAdjacency();
            if (j > i && adjacency.at(i, j) != 0.0)
                edges.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), LinkPattern::HeadHead});
        }
    }
    return make_structure(n, edges);
}

Tensor xavier_matrix(std::size_t fan_in, std::size_t fan_out, std::uint64_t seed, std::string_view name) {
    Rng rng(derive_seed(seed, name));
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(fan_in + fan_out)));
    Tensor t({fan_in, fan_out});
    for (auto& v : t.values()) v = normal(rng);
    return t;
}

double fixed_weight(MpLayerKind kind, double degree_row, double degree_col) {
    switch (kind) {
        case MpLayerKind::GCN:
        case MpLayerKind::SGC: return 1.0 / std::sqrt(degree_row * degree_col);
        case MpLayerKind::GraphSAGE: return 1.0 / degree_row;
        case MpLayerKind::GIN: return 1.0;
        case MpLayerKind::GAT: break;
    }
    throw InvalidArgument("GAT weights depend on features");
}

// ---- GnnStack ----------------------------------------------------------

GnnStack::GnnStack(MpLayerKind kind, std::size_t depth, std::size_t width, std::uint64_t seed, std::string prefix,
                   Activation activation)
    : kind_(kind), width_(width), activation_(activation), prefix_(std::move(prefix)) {
    if (width == 0) throw InvalidArgument("layer width must be positive");
    for (std::size_t l = 0; l < depth; ++l) {
        const std::string base = prefix_ + "." + std::to_string(l) + ".";
        MpLayer layer;
        if (kind != MpLayerKind::SGC)
            layer.weight = Parameter(base + "weight", xavier_matrix(width, width, seed, base + "weight"));
        if (kind == MpLayerKind::GIN)
            layer.weight2 = Parameter(base + "weight2", xavier_matrix(width, width, seed, base + "weight2"));
        if (kind == MpLayerKind::GAT)
            layer.attention = Parameter(base + "attention", xavier_matrix(2 * width, 1, seed, base + "attention"));
        layers_.push_back(std::move(layer));
    }
}

std::vector<Parameter*> GnnStack::parameters() {
    std::vector<Parameter*> out;
    for (auto& l : layers_)
        for (Parameter* p : {&l.weight, &l.weight2, &l.attention})
            if (p->value.size() > 0) out.push_back(p);
    return out;
}

Var GnnStack::conv_weights(Tape& tape, std::size_t l, const GraphStructure& g, Var x) {
    const Csr& c = *g.closed;
    if (kind_ != MpLayerKind::GAT) {
        Tensor w({c.nnz(), 1});
        for (std::size_t e = 0; e < c.nnz(); ++e) w[e] = fixed_weight(kind_, g.degree[c.row_of[e]], g.degree[c.cols[e]]);
        return tape.constant(std::move(w));
    }
    MpLayer& layer = layers_.at(l);
    Var theta = tape.param(layer.weight);
    Var a = tape.param(layer.attention);
    // [Theta x_i || Theta x_j] . a = x_i (Theta a_self) + x_j (Theta a_nb)
    Var s_self = matmul(x, matmul(theta, slice_rows(a, 0, width_)));
    Var s_nb = matmul(x, matmul(theta, slice_rows(a, width_, 2 * width_)));
    Var logits = add(gather_rows(s_self, c.row_of), gather_rows(s_nb, c.cols));
    return segment_softmax(logits, c.row_of, c.n_rows);
}

Var GnnStack::layer_forward(Tape& tape, std::size_t l, const GraphStructure& g, Var x) {
    if (x.rows() != g.n) throw ShapeMismatch("features " + shape_string(x.shape()) + " for " + std::to_string(g.n) + " nodes");
    if (x.cols() != width_) throw ShapeMismatch("feature width " + std::to_string(x.cols()) + ", stack width " + std::to_string(width_));
    MpLayer& layer = layers_.at(l);
    const bool hidden_act = activation_ == Activation::ReLU;
    Var agg = spmm(g.closed, conv_weights(tape, l, g, x), x);
    Var out = agg;
    switch (kind_) {
        case MpLayerKind::GCN:
        case MpLayerKind::GraphSAGE:
        case MpLayerKind::GAT: out = matmul(agg, tape.param(layer.weight)); break;
        case MpLayerKind::GIN: {
            Var h = matmul(agg, tape.param(layer.weight));
            if (hidden_act) h = relu(h);
            out = matmul(h, tape.param(layer.weight2));
            break;
        }
        case MpLayerKind::SGC: break;
    }
    if (hidden_act && l + 1 < layers_.size()) out = relu(out);
    return out;
}

Var GnnStack::forward(Tape& tape, const GraphStructure& g, Var x) {
    for (std::size_t l = 0; l < layers_.size(); ++l) x = layer_forward(tape, l, g, x);
    return x;
}

Tensor conv_matrix(MpLayerKind kind, const Tensor& adjacency, const Tensor* features, GatAttention gat) {
    const GraphStructure g = make_structure(adjacency);
    const std::size_t n = g.n;
    const Csr& c = *g.closed;
    Tensor out({n, n});
    if (kind != MpLayerKind::GAT) {
        for (std::size_t e = 0; e < c.nnz(); ++e)
            out.at(c.row_of[e], c.cols[e]) = fixed_weight(kind, g.degree[c.row_of[e]], g.degree[c.cols[e]]);
        return out;
    }
    if (!features || !gat.theta || !gat.attention) throw MissingFeatures();
    const Tensor& x = *features;
    const Tensor& theta = *gat.theta;
    const Tensor& a = *gat.attention;
    const std::size_t f_in = theta.rows(), f_out = theta.cols();
    if (x.rows() != n || x.cols() != f_in) throw ShapeMismatch("features " + shape_string(x.shape()));
    if (a.size() != 2 * f_out) throw ShapeMismatch("attention " + shape_string(a.shape()));
    // z_i = Theta x_i, then a softmax over each closed neighbourhood.
    Tensor z({n, f_out});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < f_in; ++k)
            for (std::size_t j = 0; j < f_out; ++j) z.at(i, j) += x.at(i, k) * theta.at(k, j);
    std::vector<double> s_self(n, 0.0), s_nb(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < f_out; ++j) {
            s_self[i] += z.at(i, j) * a[j];
            s_nb[i] += z.at(i, j) * a[f_out + j];
        }
    for (std::size_t i = 0; i < n; ++i) {
        double mx = -INFINITY;
        for (std::size_t e = c.offsets[i]; e < c.offsets[i + 1]; ++e) mx = std::max(mx, s_self[i] + s_nb[c.cols[e]]);
        double z_sum = 0.0;
        for (std::size_t e = c.offsets[i]; e < c.offsets[i + 1]; ++e)
            z_sum += (out.at(i, c.cols[e]) = std::exp(s_self[i] + s_nb[c.cols[e]] - mx));
        for (std::size_t e = c.offsets[i]; e < c.offsets[i + 1]; ++e) out.at(i, c.cols[e]) /= z_sum;
    }
    return out;
}

// ---- Bi-LSTM -----------------------------------------------------------

namespace {

LstmCell make_cell(std::size_t in, std::size_t h, std::uint64_t seed, const std::string& base) {
    LstmCell c;
    c.w_x = Parameter(base + "w_x", xavier_matrix(in, 4 * h, seed, base + "w_x"));
    c.w_h = Parameter(base + "w_h", xavier_matrix(h, 4 * h, seed, base + "w_h"));
    c.bias = Parameter(base + "bias", Tensor({1, 4 * h}));
    return c;
}

}  // namespace

BiLstm::BiLstm(std::size_t width, std::uint64_t seed, std::string prefix) : width_(width) {
    if (width < 2 || width % 2 != 0) throw InvalidArgument("Bi-LSTM width must be even and >= 2");
    fwd_ = make_cell(width, width / 2, seed, prefix + ".fwd.");
    bwd_ = make_cell(width, width / 2, seed, prefix + ".bwd.");
}

std::vector<Parameter*> BiLstm::parameters() {
    return {&fwd_.w_x, &fwd_.w_h, &fwd_.bias, &bwd_.w_x, &bwd_.w_h, &bwd_.bias};
}

Var BiLstm::run(Tape& tape, LstmCell& cell, std::span<const Var> sequence) {
    const std::size_t h = hidden();
    Var wx = tape.param(cell.w_x);
    Var wh = tape.param(cell.w_h);
    Var b = tape.param(cell.bias);
    Var hs, cs;
    for (std::size_t step = 0; step < sequence.size(); ++step) {
        // The initial state is zero, so the recurrent terms vanish at step 0.
        Var z = add(matmul(sequence[step], wx), b);
        if (step > 0) z = add(z, matmul(hs, wh));
        Var i = sigmoid(slice_cols(z, 0, h));
        Var f = sigmoid(slice_cols(z, h, 2 * h));
        Var o = sigmoid(slice_cols(z, 2 * h, 3 * h));
        Var g = tanh(slice_cols(z, 3 * h, 4 * h));
        cs = step > 0 ? add(mul(f, cs), mul(i, g)) : mul(i, g);
        hs = mul(o, tanh(cs));
    }
    return hs;
}

Var BiLstm::encode(Tape& tape, Var e_h, Var e_r, Var e_t) {
    for (Var v : {e_h, e_r, e_t})
        if (v.cols() != width_ || v.rows() != e_h.rows())
            throw ShapeMismatch("Bi-LSTM input " + shape_string(v.shape()) + ", width " + std::to_string(width_));
    const Var forward_seq[] = {e_h, e_r, e_t};
    const Var backward_seq[] = {e_t, e_r, e_h};
    return concat({run(tape, fwd_, forward_seq), run(tape, bwd_, backward_seq)}, 1);
}

std::string_view combiner_name(CombinerKind kind) { return kind == CombinerKind::BiLSTM ? "bilstm" : "concat"; }

CombinerKind parse_combiner(std::string_view name) {
    if (name == "bilstm") return CombinerKind::BiLSTM;
    if (name == "concat") return CombinerKind::Concat;
    throw InvalidArgument("unknown combiner '" + std::string(name) + "'");
}

Combiner::Combiner(CombinerKind kind, std::size_t width, std::uint64_t seed) : kind_(kind) {
    if (kind == CombinerKind::BiLSTM)
        lstm_ = BiLstm(width, seed, "gamma.lstm");
    else
        projection_ = Parameter("gamma.projection", xavier_matrix(3 * width, width, seed, "gamma.projection"));
}

std::vector<Parameter*> Combiner::parameters() {
    if (kind_ == CombinerKind::BiLSTM) return lstm_.parameters();
    return {&projection_};
}

Var Combiner::encode(Tape& tape, Var e_h, Var e_r, Var e_t) {
    if (kind_ == CombinerKind::BiLSTM) return lstm_.encode(tape, e_h, e_r, e_t);
    const std::size_t f = projection_.value.cols();
    for (Var v : {e_h, e_r, e_t})
        if (v.cols() != f || v.rows() != e_h.rows()) throw ShapeMismatch("concat input " + shape_string(v.shape()));
    return matmul(concat({e_h, e_r, e_t}, 1), tape.param(projection_));
}

}  // namespace noran
