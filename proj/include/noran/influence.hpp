#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "noran/layers.hpp"
#include "noran/tensor.hpp"

namespace noran {

enum class InfluenceMode { ExactLinear, StatisticalReLU, GatContrast };

std::string_view influence_mode_name(InfluenceMode mode);
InfluenceMode parse_influence_mode(std::string_view name);  // exact, statistical, gat-contrast

// Small undirected graph with two feature matrices. `features_alt` is the
// second assignment used by the contrast check.
struct InfluenceGraph {
    std::string name;
    Tensor adjacency;
    Tensor features;
    Tensor features_alt;
    std::uint32_t center = 0;
};

// path-N, cycle-N, star-N (hub 0) and "asymmetric". Feature width is `width`.
InfluenceGraph builtin_graph(std::string_view spec, std::size_t width = 8, std::uint64_t seed = 0);
// Edge list file: one "u v" pair per line, '#' comments, optional "center u".
InfluenceGraph load_graph(const std::string& path, std::size_t width = 8, std::uint64_t seed = 0);

// S(u, v) for every v: entry sums of d h_u^(k) / d h_v^(0), by one backward pass.
std::vector<double> influence_scores(GnnStack& stack, const GraphStructure& g, const Tensor& x, std::uint32_t u);

// Row u of C^k scaled to sum to one.
std::vector<double> random_walk_distribution(const Tensor& c, std::size_t k, std::uint32_t u);

// L1 normalization; throws InvalidArgument on a zero total.
std::vector<double> normalize(std::vector<double> v);
std::vector<double> normalize_abs(std::vector<double> v);
double total_variation(const std::vector<double>& p, const std::vector<double>& q);

struct InfluenceReport {
    InfluenceMode mode = InfluenceMode::ExactLinear;
    MpLayerKind kind = MpLayerKind::GCN;
    std::size_t k = 0;
    std::uint32_t center = 0;
    std::vector<double> distribution;  // exact: influence; statistical: mean |influence|; contrast: under X
    std::vector<double> oracle;        // walk row; contrast: influence under the alternate X
    std::vector<double> signed_mean;   // statistical only, mean signed scores over their total
    double tv = 0.0;
    std::vector<std::pair<std::size_t, double>> trend;  // statistical: (trials, tv)
    bool passed = false;

    std::string table() const;
};

InfluenceReport verify_walk_influence(MpLayerKind kind, const InfluenceGraph& graph, std::size_t k, std::size_t trials,
                                 std::uint64_t seed, InfluenceMode mode);

}  // namespace noran
