#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "noran/relnet.hpp"
#include "noran/tensor.hpp"

namespace noran {

enum class MpLayerKind { GCN, GraphSAGE, GIN, SGC, GAT };
enum class Activation { ReLU, Identity };

std::string_view kind_name(MpLayerKind kind);
MpLayerKind parse_kind(std::string_view name);  // gcn, sage, gin, sgc, gat
// GCN, GraphSAGE, GIN and SGC use a convolution matrix fixed by structure.
bool is_fixed(MpLayerKind kind);

// Closed neighborhoods (A + I) of an undirected graph as CSR rows that include
// the node itself, ascending. degree[i] is the diagonal of D~.
struct GraphStructure {
    std::size_t n = 0;
    std::shared_ptr<const Csr> closed;
    std::vector<double> degree;
};

GraphStructure make_structure(std::size_t n, std::span<const LocalEdge> edges);
GraphStructure make_structure(const Subgraph& sub);
GraphStructure make_structure(const RelationNetwork& net);
// Validates symmetry and zero diagonal of a dense 0/1 adjacency matrix.
GraphStructure make_structure(const Tensor& adjacency);

// Xavier-normal matrix, seeded per name.
Tensor xavier_matrix(std::size_t fan_in, std::size_t fan_out, std::uint64_t seed, std::string_view name);

struct MpLayer {
    Parameter weight;     // W or Theta; first MLP layer for GIN; unused by SGC
    Parameter weight2;    // second MLP layer (GIN only)
    Parameter attention;  // a = [a_self; a_neighbor] (GAT only), [2f x 1]
};

class GnnStack {
   public:
    GnnStack() = default;
    GnnStack(MpLayerKind kind, std::size_t depth, std::size_t width, std::uint64_t seed, std::string prefix,
             Activation activation = Activation::ReLU);

    MpLayerKind kind() const { return kind_; }
    std::size_t depth() const { return layers_.size(); }
    std::size_t width() const { return width_; }
    Activation activation() const { return activation_; }
    void set_activation(Activation a) { activation_ = a; }
    const std::string& prefix() const { return prefix_; }

    std::vector<MpLayer>& layers() { return layers_; }
    const std::vector<MpLayer>& layers() const { return layers_; }
    std::vector<Parameter*> parameters();

    // Per-entry convolution weights of layer l over the closed CSR.
    Var conv_weights(Tape& tape, std::size_t l, const GraphStructure& g, Var x);
    // X <- sigma(f(C X)); sigma is skipped after the last layer.
    Var layer_forward(Tape& tape, std::size_t l, const GraphStructure& g, Var x);
    Var forward(Tape& tape, const GraphStructure& g, Var x);

   private:
    MpLayerKind kind_ = MpLayerKind::GCN;
    std::size_t width_ = 0;
    Activation activation_ = Activation::ReLU;
    std::string prefix_;
    std::vector<MpLayer> layers_;
};

// Fixed-family weights for one closed-CSR entry.
double fixed_weight(MpLayerKind kind, double degree_row, double degree_col);

// Dense convolution matrix. GAT needs the layer's Theta and a together with
// node features; the fixed kinds ignore them.
struct GatAttention {
    const Tensor* theta = nullptr;
    const Tensor* attention = nullptr;
};
Tensor conv_matrix(MpLayerKind kind, const Tensor& adjacency, const Tensor* features = nullptr,
                   GatAttention gat = {});

struct LstmCell {
    Parameter w_x;   // [in x 4h], gate blocks i, f, o, g
    Parameter w_h;   // [h x 4h]
    Parameter bias;  // [1 x 4h]
};

// Bidirectional LSTM over the sequence (e_h, e_r, e_t). Hidden width is f/2 so
// the concatenated final states have width f.
class BiLstm {
   public:
    BiLstm() = default;
    BiLstm(std::size_t width, std::uint64_t seed, std::string prefix);

    std::size_t width() const { return width_; }
    std::size_t hidden() const { return width_ / 2; }
    LstmCell& forward_cell() { return fwd_; }
    LstmCell& backward_cell() { return bwd_; }
    std::vector<Parameter*> parameters();

    // Rows are independent triples: inputs [B x f] each, output [B x f].
    Var encode(Tape& tape, Var e_h, Var e_r, Var e_t);

   private:
    Var run(Tape& tape, LstmCell& cell, std::span<const Var> sequence);

    std::size_t width_ = 0;
    LstmCell fwd_;
    LstmCell bwd_;
};

enum class CombinerKind { BiLSTM, Concat };
std::string_view combiner_name(CombinerKind kind);
CombinerKind parse_combiner(std::string_view name);

// Gamma: maps (e_h, e_r, e_t) to a triple embedding of width f.
class Combiner {
   public:
    Combiner() = default;
    Combiner(CombinerKind kind, std::size_t width, std::uint64_t seed);

    CombinerKind kind() const { return kind_; }
    BiLstm& lstm() { return lstm_; }
    Parameter& projection() { return projection_; }  // [3f x f] (Concat)
    std::vector<Parameter*> parameters();

    Var encode(Tape& tape, Var e_h, Var e_r, Var e_t);

   private:
    CombinerKind kind_ = CombinerKind::BiLSTM;
    BiLstm lstm_;
    Parameter projection_;
};

}  // namespace noran
