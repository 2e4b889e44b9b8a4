#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "noran/error.hpp"
#include "noran/influence.hpp"

using namespace noran;

namespace {

Tensor adjacency(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
    Tensor a({n, n});
    for (auto [i, j] : edges) a.at(i, j) = a.at(j, i) = 1.0;
    return a;
}

Tensor random_tensor(std::size_t r, std::size_t c, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    Tensor t({r, c});
    for (double& v : t.values()) v = n(rng);
    return t;
}

std::size_t edge_count(const Tensor& a) {
    std::size_t n = 0;
    for (double v : a.values()) n += v != 0.0;
    return n / 2;
}

// Hop distance from u by breadth-first search over the dense adjacency.
std::vector<int> hops(const Tensor& a, std::uint32_t u) {
    std::vector<int> d(a.rows(), -1);
    std::vector<std::uint32_t> queue{u};
    d[u] = 0;
    for (std::size_t i = 0; i < queue.size(); ++i)
        for (std::uint32_t v = 0; v < a.rows(); ++v)
            if (a.at(queue[i], v) != 0.0 && d[v] < 0) {
                d[v] = d[queue[i]] + 1;
                queue.push_back(v);
            }
    return d;
}

}  // namespace

TEST_CASE("builtin graph specs") {
    const InfluenceGraph path = builtin_graph("path-4");
    CHECK(path.adjacency.shape() == Shape{4, 4});
    CHECK(edge_count(path.adjacency) == 3);
    CHECK(path.center == 1);
    CHECK(path.features.shape() == Shape{4, 8});
    CHECK(path.features.values() != path.features_alt.values());
    CHECK(edge_count(builtin_graph("cycle-5").adjacency) == 5);
    const InfluenceGraph star = builtin_graph("star-5", 3);
    CHECK(edge_count(star.adjacency) == 4);
    CHECK(star.center == 0);
    CHECK(star.features.shape() == Shape{5, 3});
    CHECK(edge_count(builtin_graph("asymmetric").adjacency) == 5);
    CHECK(builtin_graph("path-6", 8, 2).features.values() == builtin_graph("path-6", 8, 2).features.values());
    CHECK_THROWS_AS(builtin_graph("wheel-5"), InvalidArgument);
    CHECK_THROWS_AS(builtin_graph("cycle-2"), InvalidArgument);
}

TEST_CASE("graph files") {
    const auto dir = std::filesystem::temp_directory_path() / "noran_influence_test";
    std::filesystem::create_directories(dir);
    const auto good = dir / "g.txt";
    std::ofstream(good) << "# triangle with a tail\n0 1\n1 2\n0 2\n2 3\ncenter 2\n";
    const InfluenceGraph g = load_graph(good.string(), 4);
    CHECK(g.adjacency.shape() == Shape{4, 4});
    CHECK(edge_count(g.adjacency) == 4);
    CHECK(g.center == 2);
    const auto bad = dir / "bad.txt";
    std::ofstream(bad) << "0 1\n1 x\n";
    CHECK_THROWS_AS(load_graph(bad.string()), InvalidArgument);
    std::filesystem::remove_all(dir);
}

TEST_CASE("mode names") {
    for (InfluenceMode m : {InfluenceMode::ExactLinear, InfluenceMode::StatisticalReLU, InfluenceMode::GatContrast})
        CHECK(parse_influence_mode(influence_mode_name(m)) == m);
    CHECK(influence_mode_name(InfluenceMode::GatContrast) == "gat-contrast");
    CHECK_THROWS_AS(parse_influence_mode("fuzzy"), InvalidArgument);
}

TEST_CASE("walk distribution basics") {
    const Tensor c = conv_matrix(MpLayerKind::GCN, adjacency(2, {{0, 1}}));
    CHECK(random_walk_distribution(c, 0, 1) == std::vector<double>{0.0, 1.0});
    const auto one = random_walk_distribution(c, 1, 0);
    CHECK(one[0] == doctest::Approx(0.5));
    CHECK(one[1] == doctest::Approx(0.5));
    CHECK(normalize({1.0, 3.0}) == std::vector<double>{0.25, 0.75});
    CHECK(normalize_abs({-1.0, 3.0}) == std::vector<double>{0.25, 0.75});
    CHECK_THROWS_AS(normalize({0.0, 0.0}), InvalidArgument);
    CHECK(total_variation({1.0, 0.0}, {0.0, 1.0}) == 1.0);
    CHECK(total_variation({0.5, 0.5}, {0.5, 0.5}) == 0.0);
}

TEST_CASE("an isolated node only influences itself") {
    const Tensor a = adjacency(4, {{0, 1}, {1, 2}});
    for (MpLayerKind kind : {MpLayerKind::GCN, MpLayerKind::GAT, MpLayerKind::GIN}) {
        GnnStack stack(kind, 2, 3, 1, "i", Activation::Identity);
        const auto s = influence_scores(stack, make_structure(a), random_tensor(4, 3, 2), 3);
        CHECK(s[0] == 0.0);
        CHECK(s[1] == 0.0);
        CHECK(s[2] == 0.0);
        CHECK(s[3] != 0.0);
    }
    GnnStack stack(MpLayerKind::GCN, 1, 3, 1, "i");
    CHECK_THROWS_AS(influence_scores(stack, make_structure(a), random_tensor(4, 3, 2), 4), InvalidNode);
}

TEST_CASE("one backward pass matches the full Jacobian") {
    const Tensor a = adjacency(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {1, 3}});
    const GraphStructure g = make_structure(a);
    const Tensor x = random_tensor(5, 3, 4);
    for (MpLayerKind kind : {MpLayerKind::GCN, MpLayerKind::GraphSAGE, MpLayerKind::GIN, MpLayerKind::SGC, MpLayerKind::GAT}) {
        GnnStack stack(kind, 2, 3, 5, "j");
        const std::uint32_t u = 2;
        const auto fast = influence_scores(stack, g, x, u);
        // One backward per output coordinate, each giving a Jacobian row.
        std::vector<double> oracle(5, 0.0);
        for (std::size_t j = 0; j < 3; ++j) {
            Tensor pick({1, 3});
            pick.at(0, j) = 1.0;
            Tape t;
            Var in = t.variable(x);
            Var h = stack.forward(t, g, in);
            t.backward(sum(mul(gather_rows(h, {u}), t.constant(pick))));
            const Tensor jac = t.grad(in);
            for (std::size_t v = 0; v < 5; ++v)
                for (std::size_t c = 0; c < 3; ++c) oracle[v] += jac.at(v, c);
        }
        for (std::size_t v = 0; v < 5; ++v) CHECK(fast[v] == doctest::Approx(oracle[v]).epsilon(1e-12).scale(1.0));
    }
}

TEST_CASE("fixed families match the walk distribution exactly") {
    for (MpLayerKind kind : {MpLayerKind::GCN, MpLayerKind::GraphSAGE, MpLayerKind::GIN, MpLayerKind::SGC})
        for (const char* spec : {"path-4", "cycle-5", "star-5", "asymmetric"})
            for (std::size_t k = 1; k <= 3; ++k) {
                const InfluenceReport r = verify_walk_influence(kind, builtin_graph(spec), k, 1, 7, InfluenceMode::ExactLinear);
                INFO(kind_name(kind), " ", spec, " k=", k);
                CHECK(r.passed);
                CHECK(r.tv < 1e-9);
            }
}

TEST_CASE("exact mode rejects attention") {
    CHECK_THROWS_AS(verify_walk_influence(MpLayerKind::GAT, builtin_graph("path-4"), 2, 1, 0, InfluenceMode::ExactLinear),
                    InvalidArgument);
    CHECK_THROWS_AS(verify_walk_influence(MpLayerKind::GAT, builtin_graph("path-4"), 2, 4, 0, InfluenceMode::StatisticalReLU),
                    InvalidArgument);
}

TEST_CASE("influence support is the k-hop neighbourhood") {
    const InfluenceGraph g = builtin_graph("path-6");
    for (std::size_t k = 1; k <= 3; ++k) {
        const InfluenceReport r = verify_walk_influence(MpLayerKind::GCN, g, k, 1, 3, InfluenceMode::ExactLinear);
        const auto d = hops(g.adjacency, g.center);
        for (std::size_t v = 0; v < d.size(); ++v) CHECK((r.distribution[v] > 0.0) == (d[v] <= int(k)));
    }
}

TEST_CASE("attention breaks feature independence while fixed families keep it") {
    const InfluenceGraph g = builtin_graph("asymmetric");
    for (MpLayerKind kind : {MpLayerKind::GCN, MpLayerKind::GraphSAGE, MpLayerKind::GIN, MpLayerKind::SGC}) {
        const InfluenceReport r = verify_walk_influence(kind, g, 2, 1, 1, InfluenceMode::GatContrast);
        CHECK(r.tv <= 1e-12);
        CHECK(r.passed);
    }
    const InfluenceReport gat = verify_walk_influence(MpLayerKind::GAT, g, 2, 1, 1, InfluenceMode::GatContrast);
    CHECK(gat.tv >= 1e-3);
    CHECK(gat.passed);
    CHECK(gat.table().find("result=pass") != std::string::npos);
}

TEST_CASE("averaging ReLU trials approaches the walk distribution") {
    const InfluenceReport r = verify_walk_influence(MpLayerKind::GCN, builtin_graph("cycle-5"), 2, 64, 9,
                                               InfluenceMode::StatisticalReLU);
    REQUIRE(r.trend.size() >= 2);
    CHECK(r.trend.front().first == 1);
    CHECK(r.trend.back().first == 64);
    CHECK(r.trend.back().second < r.trend.front().second);
    CHECK(r.passed);
    CHECK(r.signed_mean.size() == 5);
    double total = 0.0;
    for (double p : r.distribution) total += p;
    CHECK(total == doctest::Approx(1.0));
}

TEST_CASE("report table lists every node") {
    const InfluenceReport r = verify_walk_influence(MpLayerKind::SGC, builtin_graph("star-5"), 2, 1, 0, InfluenceMode::ExactLinear);
    const std::string table = r.table();
    CHECK(table.find("mode=exact") != std::string::npos);
    CHECK(table.find("k=2") != std::string::npos);
    CHECK(table.find("result=pass") != std::string::npos);
    std::size_t lines = 0;
    for (char c : table) lines += c == '\n';
    CHECK(lines >= 5);
}
