#include "noran/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <random>

#include "noran/layers.hpp"
#include "noran/leim.hpp"
#include "noran/model.hpp"
#include "noran/pipeline.hpp"
#include "noran/rng.hpp"

namespace noran {

double relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-2});
}

GradcheckResult check_cases(const std::string& component, const std::vector<GradcheckCase>& cases, double h,
                            double tolerance) {
    GradcheckResult r;
    r.component = component;
    for (const GradcheckCase& c : cases) {
        for (Parameter* p : c.params) p->zero_grad();
        {
            Tape tape;
            tape.backward(c.loss(tape));
        }
        std::vector<Tensor> analytic;
        for (Parameter* p : c.params) analytic.push_back(p->grad);
        auto value = [&] {
            Tape tape;
            return c.loss(tape).value().item();
        };
        for (std::size_t pi = 0; pi < c.params.size(); ++pi) {
            Parameter& p = *c.params[pi];
            for (std::size_t k = 0; k < p.value.size(); ++k) {
                const double saved = p.value[k];
                p.value[k] = saved + h;
                const double up = value();
                p.value[k] = saved - h;
                const double down = value();
                p.value[k] = saved;
                const double numeric = (up - down) / (2.0 * h);
                const double a = analytic[pi].size() ? analytic[pi][k] : 0.0;
                const double err = relative_error(a, numeric);
                ++r.entries;
                if (r.worst.empty() || err > r.max_rel_error) {
                    r.max_rel_error = err;
                    r.worst = c.name + ":" + p.name + "[" + std::to_string(k) + "]";
                }
            }
        }
    }
    r.passed = r.max_rel_error < tolerance;
    return r;
}

namespace {

// Owns the parameters a component's cases point into.
struct Pool {
    std::vector<std::unique_ptr<Parameter>> owned;
    Rng rng;
    explicit Pool(std::uint64_t seed) : rng(seed) {}

    Parameter* random(std::string name, std::size_t rows, std::size_t cols, double lo = -1.0, double hi = 1.0) {
        std::uniform_real_distribution<double> u(lo, hi);
        Tensor t({rows, cols});
        for (double& v : t.values()) v = u(rng);
        owned.push_back(std::make_unique<Parameter>(std::move(name), std::move(t)));
        return owned.back().get();
    }
    Tensor constant(std::size_t rows, std::size_t cols) {
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        Tensor t({rows, cols});
        for (double& v : t.values()) v = u(rng);
        return t;
    }
};

// Projects a matrix onto a scalar with fixed random weights so no entry of
// the gradient is trivially uniform.
Var project(Tape& tape, Var v, const Tensor& r) { return sum(mul(v, tape.constant(r))); }

std::vector<GradcheckCase> tensor_cases(Pool& pool) {
    std::vector<GradcheckCase> cases;
    Parameter* a = pool.random("a", 3, 4);
    Parameter* b = pool.random("b", 4, 2);
    Parameter* c = pool.random("c", 3, 4);
    Parameter* row = pool.random("row", 1, 4);
    Parameter* pos = pool.random("pos", 3, 4, 0.2, 2.0);
    const Tensor r32 = pool.constant(3, 2), r34 = pool.constant(3, 4), r64 = pool.constant(6, 4),
                 r38 = pool.constant(3, 8), r24 = pool.constant(2, 4), r54 = pool.constant(5, 4),
                 r61 = pool.constant(6, 1);

    cases.push_back({"matmul", {a, b}, [=](Tape& t) { return project(t, matmul(t.param(*a), t.param(*b)), r32); }});
    cases.push_back({"arith", {a, c, row}, [=](Tape& t) {
                         Var x = add(mul(t.param(*a), t.param(*c)), t.param(*row));
                         x = sub(scale(x, 1.5), neg(add_scalar(t.param(*c), 0.3)));
                         return project(t, x, r34);
                     }});
    cases.push_back({"concat-slice", {a, c}, [=](Tape& t) {
                         Var rows = concat({t.param(*a), t.param(*c)}, 0);
                         Var cols = concat({t.param(*a), t.param(*c)}, 1);
                         return add(add(project(t, rows, r64), project(t, cols, r38)),
                                    project(t, slice_cols(slice_rows(cols, 1, 3), 2, 6), r24));
                     }});
    cases.push_back({"gather-scatter", {a}, [=](Tape& t) {
                         Var g = gather_rows(t.param(*a), {2, 0, 2, 1, 0});
                         Var s = scatter_add_rows(g, {1, 1, 0, 2, 2}, 3);
                         return add(project(t, g, r54), project(t, s, r34));
                     }});
    cases.push_back({"pointwise", {a, pos}, [=](Tape& t) {
                         Var x = t.param(*a);
                         Var y = add(add(relu(x), sigmoid(x)), add(tanh(x), exp(x)));
                         y = add(y, add(softplus(x), log_sigmoid(x)));
                         y = add(y, log(t.param(*pos)));
                         return project(t, y, r34);
                     }});
    cases.push_back({"reduce", {a}, [=](Tape& t) { return add(mean(t.param(*a)), scale(sum(mul(t.param(*a), t.param(*a))), 0.5)); }});
    Parameter* logits = pool.random("logits", 6, 1);
    cases.push_back({"segment-softmax", {logits}, [=](Tape& t) {
                         return project(t, segment_softmax(t.param(*logits), {0, 0, 0, 1, 2, 2}, 3), r61);
                     }});
    auto csr = std::make_shared<Csr>();
    csr->n_rows = 3;
    csr->n_cols = 3;
    csr->offsets = {0, 2, 3, 6};
    csr->cols = {0, 2, 1, 0, 1, 2};
    csr->row_of = {0, 0, 1, 2, 2, 2};
    Parameter* w = pool.random("weights", 6, 1);
    std::shared_ptr<const Csr> shared = csr;
    cases.push_back({"spmm", {w, a}, [=](Tape& t) { return project(t, spmm(shared, t.param(*w), t.param(*a)), r34); }});
    return cases;
}

// Six nodes, mixed degrees, one pendant.
GraphStructure six_node_graph() {
    const std::vector<LocalEdge> edges = {{0, 1, LinkPattern::HeadHead}, {0, 2, LinkPattern::HeadHead},
                                          {1, 2, LinkPattern::TailTail}, {2, 3, LinkPattern::HeadTail},
                                          {3, 4, LinkPattern::HeadHead}, {4, 5, LinkPattern::TailTail},
                                          {1, 4, LinkPattern::HeadTail}};
    return make_structure(6, edges);
}

struct LayerFixtures {
    std::vector<std::unique_ptr<GnnStack>> stacks;
};

std::vector<GradcheckCase> layer_cases(Pool& pool, LayerFixtures& fx, std::uint64_t seed) {
    std::vector<GradcheckCase> cases;
    const std::size_t f = 3;
    const GraphStructure g = six_node_graph();
    Parameter* x = pool.random("x", 6, f);
    const Tensor r = pool.constant(6, f);
    for (MpLayerKind kind :
         {MpLayerKind::GCN, MpLayerKind::GraphSAGE, MpLayerKind::GIN, MpLayerKind::SGC, MpLayerKind::GAT}) {
        fx.stacks.push_back(std::make_unique<GnnStack>(kind, 2, f, derive_seed(seed, kind_name(kind)), "mp"));
        GnnStack* stack = fx.stacks.back().get();
        std::vector<Parameter*> params = stack->parameters();
        params.push_back(x);
        cases.push_back({std::string(kind_name(kind)), params,
                         [=](Tape& t) { return project(t, stack->forward(t, g, t.param(*x)), r); }});
    }
    return cases;
}

struct CombinerFixtures {
    std::unique_ptr<Combiner> lstm, concat;
};

std::vector<GradcheckCase> lstm_cases(Pool& pool, CombinerFixtures& fx, std::uint64_t seed) {
    const std::size_t f = 4;
    fx.lstm = std::make_unique<Combiner>(CombinerKind::BiLSTM, f, derive_seed(seed, "lstm"));
    fx.concat = std::make_unique<Combiner>(CombinerKind::Concat, f, derive_seed(seed, "concat"));
    Parameter* eh = pool.random("e_h", 3, f);
    Parameter* er = pool.random("e_r", 3, f);
    Parameter* et = pool.random("e_t", 3, f);
    const Tensor r = pool.constant(3, f);
    std::vector<GradcheckCase> cases;
    for (Combiner* c : {fx.lstm.get(), fx.concat.get()}) {
        std::vector<Parameter*> params = c->parameters();
        params.insert(params.end(), {eh, er, et});
        cases.push_back({std::string(combiner_name(c->kind())), params, [=](Tape& t) {
                             return project(t, c->encode(t, t.param(*eh), t.param(*er), t.param(*et)), r);
                         }});
    }
    return cases;
}

std::vector<GradcheckCase> discriminator_cases(Pool& pool, std::unique_ptr<Discriminator>& disc, std::uint64_t seed) {
    const std::size_t f = 3;
    disc = std::make_unique<Discriminator>(f, derive_seed(seed, "discriminator"));
    Discriminator* d = disc.get();
    Parameter* ego = pool.random("ego", 4, f);
    Parameter* anchors = pool.random("anchors", 2, f);
    Subgraph sub;
    sub.nodes = {0, 1, 2, 3};
    sub.edges = {{0, 1, LinkPattern::HeadHead}, {1, 2, LinkPattern::TailTail}, {0, 3, LinkPattern::HeadTail}};
    std::vector<Parameter*> params = d->parameters();
    params.insert(params.end(), {ego, anchors});
    std::vector<GradcheckCase> cases;
    cases.push_back({"concat-route", params, [=](Tape& t) {
                         return d->score(t, sub, t.param(*ego), slice_rows(t.param(*anchors), 0, 1));
                     }});
    const std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> egos = {{{0, 1}, {1, 2}}, {{3, 0}, {2, 3}}};
    const std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs = {{0, 0}, {1, 1}, {0, 1}, {1, 0}};
    const Tensor r = pool.constant(4, 1);
    cases.push_back({"pair-route", params, [=](Tape& t) {
                         return project(t, d->score_pairs(t, t.param(*ego), egos, t.param(*anchors), pairs), r);
                     }});
    return cases;
}

// A six-triple graph whose relation network has six nodes.
KnowledgeGraph loss_graph() {
    return KnowledgeGraph(Vocabulary({"e0", "e1", "e2", "e3", "e4"}), Vocabulary({"r0", "r1"}),
                          {{0, 0, 1}, {1, 1, 2}, {2, 0, 3}, {0, 1, 2}, {3, 1, 4}, {4, 0, 0}});
}

struct LossFixtures {
    KnowledgeGraph kg;
    RelationNetwork net;
    std::vector<std::unique_ptr<Model>> models;
    std::vector<std::unique_ptr<TrainingGraph>> data;
};

std::vector<GradcheckCase> loss_cases(Pool& pool, LossFixtures& fx, std::uint64_t seed) {
    std::vector<GradcheckCase> cases;
    Parameter* pos = pool.random("pos", 4, 1, -3.0, 1.0);
    Parameter* neg_scores = pool.random("neg", 6, 1, -3.0, 1.0);
    cases.push_back({"jsd", {pos, neg_scores}, [=](Tape& t) { return jsd_mi(t.param(*pos), t.param(*neg_scores)); }});
    const std::vector<std::uint32_t> anchor = {0, 1, 2, 3, 0, 2};
    cases.push_back({"infonce", {pos, neg_scores},
                     [=](Tape& t) { return infonce_mi(t.param(*pos), t.param(*neg_scores), anchor); }});

    fx.kg = loss_graph();
    fx.net = build_relation_network(fx.kg, PatternMask::all(), std::nullopt, derive_seed(seed, "relnet"));
    for (MiEstimatorKind est : {MiEstimatorKind::JSD, MiEstimatorKind::InfoNCE}) {
        TrainConfig cfg;
        cfg.dim = 4;
        cfg.estimator = est;
        cfg.seed = seed;
        fx.models.push_back(std::make_unique<Model>(cfg, fx.kg.entities(), fx.kg.relations()));
        Model* m = fx.models.back().get();
        fx.data.push_back(std::make_unique<TrainingGraph>(*m, fx.kg, fx.net));
        const TrainingGraph* data = fx.data.back().get();
        std::vector<NodeId> batch(fx.net.num_nodes());
        for (NodeId v = 0; v < batch.size(); ++v) batch[v] = v;
        const std::uint64_t batch_seed = derive_seed(seed, "batch");
        cases.push_back({"end-to-end-" + std::string(estimator_name(est)), m->objective_parameters(),
                         [=](Tape& t) { return batch_loss(t, *m, *data, batch, batch_seed); }});
    }
    return cases;
}

}  // namespace

std::vector<GradcheckResult> run_gradcheck(std::uint64_t seed, double h, double tolerance) {
    std::vector<GradcheckResult> out;
    {
        Pool pool(derive_seed(seed, "gradcheck-tensor"));
        out.push_back(check_cases("tensor", tensor_cases(pool), h, tolerance));
    }
    {
        Pool pool(derive_seed(seed, "gradcheck-layers"));
        LayerFixtures fx;
        out.push_back(check_cases("layers", layer_cases(pool, fx, seed), h, tolerance));
    }
    {
        Pool pool(derive_seed(seed, "gradcheck-lstm"));
        CombinerFixtures fx;
        out.push_back(check_cases("lstm", lstm_cases(pool, fx, seed), h, tolerance));
    }
    {
        Pool pool(derive_seed(seed, "gradcheck-discriminator"));
        std::unique_ptr<Discriminator> disc;
        out.push_back(check_cases("discriminator", discriminator_cases(pool, disc, seed), h, tolerance));
    }
    {
        Pool pool(derive_seed(seed, "gradcheck-loss"));
        LossFixtures fx;
        out.push_back(check_cases("loss", loss_cases(pool, fx, seed), h, tolerance));
    }
    return out;
}

std::string gradcheck_table(const std::vector<GradcheckResult>& results) {
    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-14s %8s %12s %-6s %s\n", "component", "entries", "max_rel_err", "result",
                  "worst");
    out += buf;
    for (const auto& r : results) {
        std::snprintf(buf, sizeof buf, "%-14s %8zu %12.3e %-6s %s\n", r.component.c_str(), r.entries, r.max_rel_error,
                      r.passed ? "pass" : "fail", r.worst.c_str());
        out += buf;
    }
    return out;
}

}  // namespace noran
