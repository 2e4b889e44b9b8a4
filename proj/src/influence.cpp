#include "noran/influence.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "noran/error.hpp"
#include "noran/rng.hpp"

namespace noran {

std::string_view influence_mode_name(InfluenceMode mode) {
    switch (mode) {
        case InfluenceMode::ExactLinear: return "exact";
        case InfluenceMode::StatisticalReLU: return "statistical";
        case InfluenceMode::GatContrast: return "gat-contrast";
    }
    return "?";
}

InfluenceMode parse_influence_mode(std::string_view name) {
    if (name == "exact") return InfluenceMode::ExactLinear;
    if (name == "statistical") return InfluenceMode::StatisticalReLU;
    if (name == "gat-contrast") return InfluenceMode::GatContrast;
    throw InvalidArgument("unknown influence mode '" + std::string(name) + "'");
}

namespace {

Tensor random_features(std::size_t n, std::size_t width, std::uint64_t seed, std::string_view tag) {
    Rng rng(derive_seed(seed, tag));
    std::normal_distribution<double> normal(0.0, 1.0);
    Tensor x({n, width});
    for (auto& v : x.values()) v = normal(rng);
    return x;
}

InfluenceGraph from_edges(std::string name, std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                          std::uint32_t center, std::size_t width, std::uint64_t seed) {
    if (n == 0) throw InvalidArgument("graph needs at least one node");
    InfluenceGraph g;
    g.name = std::move(name);
    g.adjacency = Tensor({n, n});
    for (auto [a, b] : edges) {
        if (a >= n || b >= n) throw InvalidNode(std::max(a, b));
        if (a == b) throw InvalidArgument("self loops are implicit");
        g.adjacency.at(a, b) = g.adjacency.at(b, a) = 1.0;
    }
    if (center >= n) throw InvalidNode(center);
    g.center = center;
    g.features = random_features(n, width, seed, "features-a");
    g.features_alt = random_features(n, width, seed, "features-b");
    return g;
}

std::size_t parse_size(std::string_view text, std::string_view what) {
    std::size_t v = 0;
    for (char c : text) {
        if (c < '0' || c > '9') throw InvalidArgument("bad " + std::string(what) + " '" + std::string(text) + "'");
        v = v * 10 + static_cast<std::size_t>(c - '0');
    }
    if (text.empty()) throw InvalidArgument("missing " + std::string(what));
    return v;
}

// Center 0 sees a heavy branch (1, 3) and a light one (2, 4). The alternate
// features swap which branch is heavy, so attention must move.
InfluenceGraph asymmetric_gadget(std::size_t width) {
    InfluenceGraph g = from_edges("asymmetric", 5, {{0, 1}, {0, 2}, {1, 3}, {2, 4}, {3, 4}}, 0, width, 0);
    const double scale_a[] = {1.0, 3.0, 0.2, 2.0, 0.5};
    const double scale_b[] = {1.0, 0.2, 3.0, 0.5, 2.0};
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < width; ++j) {
            const double base = 1.0 + 0.25 * static_cast<double>(j % 3);
            g.features.at(i, j) = scale_a[i] * base;
            g.features_alt.at(i, j) = scale_b[i] * base;
        }
    return g;
}

void make_positive(GnnStack& stack) {
    for (Parameter* p : stack.parameters())
        for (double& v : p->value.values()) v = std::abs(v);
}

}  // namespace

InfluenceGraph builtin_graph(std::string_view spec, std::size_t width, std::uint64_t seed) {
    if (width == 0) throw InvalidArgument("feature width must be positive");
    if (spec == "asymmetric") return asymmetric_gadget(width);
    const auto dash = spec.find('-');
    if (dash == std::string_view::npos) throw InvalidArgument("unknown graph '" + std::string(spec) + "'");
    const std::string_view family = spec.substr(0, dash);
    const std::size_t n = parse_size(spec.substr(dash + 1), "node count");
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    if (family == "path") {
        for (std::size_t i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
        return from_edges(std::string(spec), n, edges, n > 1 ? 1 : 0, width, seed);
    }
    if (family == "cycle") {
        if (n < 3) throw InvalidArgument("cycle needs 3 nodes");
        for (std::size_t i = 0; i < n; ++i) edges.emplace_back(i, (i + 1) % n);
        return from_edges(std::string(spec), n, edges, 0, width, seed);
    }
    if (family == "star") {
        for (std::size_t i = 1; i < n; ++i) edges.emplace_back(0, i);
        return from_edges(std::string(spec), n, edges, 0, width, seed);
    }
    throw InvalidArgument("unknown graph '" + std::string(spec) + "'");
}

InfluenceGraph load_graph(const std::string& path, std::size_t width, std::uint64_t seed) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open graph file " + path);
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    std::size_t n = 0, center = 0, line_no = 0;
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        std::istringstream ls(line);
        std::string a, b, extra;
        if (!(ls >> a)) continue;
        if (!(ls >> b) || (ls >> extra)) throw InvalidArgument("malformed graph line " + std::to_string(line_no));
        if (a == "center") {
            center = parse_size(b, "center");
            continue;
        }
        const std::size_t u = parse_size(a, "node"), v = parse_size(b, "node");
        edges.emplace_back(u, v);
        n = std::max({n, u + 1, v + 1});
    }
    n = std::max(n, center + 1);
    return from_edges(path, n, edges, static_cast<std::uint32_t>(center), width, seed);
}

std::vector<double> influence_scores(GnnStack& stack, const GraphStructure& g, const Tensor& x, std::uint32_t u) {
    if (u >= g.n) throw InvalidNode(u);
    Tape tape;
    Var input = tape.variable(x);
    Var h = stack.forward(tape, g, input);
    tape.backward(sum(gather_rows(h, {u})));
    const Tensor grad = tape.grad(input);
    std::vector<double> s(g.n, 0.0);
    for (std::size_t v = 0; v < g.n; ++v)
        for (double d : grad.row(v)) s[v] += d;
    return s;
}

std::vector<double> random_walk_distribution(const Tensor& c, std::size_t k, std::uint32_t u) {
    const std::size_t n = c.rows();
    if (u >= n) throw InvalidNode(u);
    std::vector<double> row(n, 0.0), next(n);
    row[u] = 1.0;
    for (std::size_t step = 0; step < k; ++step) {
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i)
            if (row[i] != 0.0)
                for (std::size_t j = 0; j < n; ++j) next[j] += row[i] * c.at(i, j);
        row.swap(next);
    }
    return normalize(std::move(row));
}

std::vector<double> normalize(std::vector<double> v) {
    double total = 0.0;
    for (double x : v) total += x;
    if (total == 0.0 || !std::isfinite(total)) throw InvalidArgument("cannot normalize a zero-sum vector");
    for (double& x : v) x /= total;
    return v;
}

std::vector<double> normalize_abs(std::vector<double> v) {
    for (double& x : v) x = std::abs(x);
    return normalize(std::move(v));
}

double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size()) throw ShapeMismatch("distributions of different length");
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
    return 0.5 * s;
}

InfluenceReport verify_walk_influence(MpLayerKind kind, const InfluenceGraph& graph, std::size_t k, std::size_t trials,
                                 std::uint64_t seed, InfluenceMode mode) {
    if (mode != InfluenceMode::GatContrast && !is_fixed(kind))
        throw InvalidArgument("walk comparison needs a fixed convolution family");
    if (trials == 0) throw InvalidArgument("trials must be positive");
    const GraphStructure g = make_structure(graph.adjacency);
    const std::size_t width = graph.features.cols();
    InfluenceReport r;
    r.mode = mode;
    r.kind = kind;
    r.k = k;
    r.center = graph.center;

    switch (mode) {
        case InfluenceMode::ExactLinear: {
            GnnStack stack(kind, k, width, derive_seed(seed, "influence"), "influence", Activation::Identity);
            make_positive(stack);
            r.distribution = normalize(influence_scores(stack, g, graph.features, graph.center));
            r.oracle = random_walk_distribution(conv_matrix(kind, graph.adjacency), k, graph.center);
            r.tv = total_variation(r.distribution, r.oracle);
            r.passed = r.tv < 1e-9;
            break;
        }
        case InfluenceMode::StatisticalReLU: {
            r.oracle = random_walk_distribution(conv_matrix(kind, graph.adjacency), k, graph.center);
            std::vector<double> abs_sum(g.n, 0.0), signed_sum(g.n, 0.0);
            std::size_t next_report = 1;
            for (std::size_t t = 1; t <= trials; ++t) {
                GnnStack stack(kind, k, width, derive_seed(seed, t), "influence", Activation::ReLU);
                const auto s = influence_scores(stack, g, graph.features, graph.center);
                double mass = 0.0;
                for (double v : s) mass += std::abs(v);
                if (mass == 0.0) continue;  // every unit dead at this draw
                for (std::size_t v = 0; v < g.n; ++v) {
                    abs_sum[v] += std::abs(s[v]) / mass;
                    signed_sum[v] += s[v];
                }
                if (t == next_report || t == trials) {
                    r.trend.emplace_back(t, total_variation(normalize(abs_sum), r.oracle));
                    next_report *= 2;
                }
            }
            if (r.trend.empty()) throw InvalidArgument("every trial produced zero influence");
            r.distribution = normalize(abs_sum);
            double total = 0.0;
            for (double v : signed_sum) total += v;
            r.signed_mean = signed_sum;
            if (total != 0.0)
                for (double& v : r.signed_mean) v /= total;
            r.tv = r.trend.back().second;
            r.passed = r.trend.size() >= 2 && r.trend.back().second < r.trend.front().second;
            break;
        }
        case InfluenceMode::GatContrast: {
            GnnStack stack(kind, k, width, derive_seed(seed, "influence"), "influence", Activation::Identity);
            make_positive(stack);
            // Attention gradients may be negative, so magnitudes keep this a distribution.
            r.distribution = normalize_abs(influence_scores(stack, g, graph.features, graph.center));
            r.oracle = normalize_abs(influence_scores(stack, g, graph.features_alt, graph.center));
            r.tv = total_variation(r.distribution, r.oracle);
            r.passed = is_fixed(kind) ? r.tv <= 1e-12 : r.tv >= 1e-3;
            break;
        }
    }
    return r;
}

std::string InfluenceReport::table() const {
    std::string out;
    char buf[160];
    const bool contrast = mode == InfluenceMode::GatContrast;
    std::snprintf(buf, sizeof buf, "mode=%s layer=%s k=%zu center=%u\n", std::string(influence_mode_name(mode)).c_str(),
                  std::string(kind_name(kind)).c_str(), k, center);
    out += buf;
    std::snprintf(buf, sizeof buf, "%-6s %14s %14s %12s%s\n", "node", contrast ? "influence(X)" : "influence",
                  contrast ? "influence(X')" : "walk", "|diff|", signed_mean.empty() ? "" : "         signed");
    out += buf;
    for (std::size_t v = 0; v < distribution.size(); ++v) {
        std::snprintf(buf, sizeof buf, "%-6zu %14.10f %14.10f %12.3e", v, distribution[v], oracle[v],
                      std::abs(distribution[v] - oracle[v]));
        out += buf;
        if (!signed_mean.empty()) {
            std::snprintf(buf, sizeof buf, " %14.10f", signed_mean[v]);
            out += buf;
        }
        out += '\n';
    }
    for (auto [t, tv_t] : trend) {
        std::snprintf(buf, sizeof buf, "trials=%zu tv=%.6e\n", t, tv_t);
        out += buf;
    }
    std::snprintf(buf, sizeof buf, "tv=%.6e\nresult=%s\n", tv, passed ? "pass" : "fail");
    out += buf;
    return out;
}

}  // namespace noran
