#include <cmath>
#include <cstdio>

#include "noran/error.hpp"
#include "noran/pipeline.hpp"

namespace noran {

double average_rank(double truth, std::span<const double> others) {
    std::size_t greater = 0, ties = 0;
    for (double s : others) {
        if (s > truth) ++greater;
        else if (s == truth) ++ties;
    }
    return 1.0 + static_cast<double>(greater) + static_cast<double>(ties) / 2.0;
}

EvalReport report_from_ranks(std::vector<double> ranks) {
    if (ranks.empty()) throw EmptyEval();
    EvalReport r;
    for (double rank : ranks) {
        r.mrr += 1.0 / rank;
        r.hit1 += rank <= 1.0 ? 1.0 : 0.0;
        r.hit3 += rank <= 3.0 ? 1.0 : 0.0;
    }
    const auto n = static_cast<double>(ranks.size());
    r.mrr /= n;
    r.hit1 /= n;
    r.hit3 /= n;
    r.n = ranks.size();
    r.ranks = std::move(ranks);
    return r;
}

std::string EvalReport::table() const {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-8s %10s\n%-8s %10.6f\n%-8s %10.6f\n%-8s %10.6f\n%-8s %10zu\n", "metric", "value",
                  "MRR", mrr, "Hit@1", hit1, "Hit@3", hit3, "n", n);
    return buf;
}

std::string EvalReport::key_values() const {
    char buf[160];
    std::snprintf(buf, sizeof buf, "mrr=%.6f\nhit1=%.6f\nhit3=%.6f\nn=%zu\n", mrr, hit1, hit3, n);
    return buf;
}

EvalContext make_eval_context(const KnowledgeGraph& train, std::span<const Triple> eval, const TrainConfig& cfg,
                              bool add_back) {
    EvalContext ctx;
    ctx.kg = add_back ? train.with_triples(eval) : train;
    ctx.net = build_relation_network(ctx.kg, cfg.mask, cfg.degree_cap, derive_seed(cfg.seed, "relnet"));
    return ctx;
}

EvalReport evaluate(Model& model, const EvalContext& ctx, std::span<const Triple> queries, const EvalOptions& options) {
    if (queries.empty()) throw EmptyEval();
    Scorer scorer(model, ctx.kg, ctx.net);
    const FeatureSource& src = scorer.features();
    std::set<Triple> truth;
    if (options.mode == RankMode::Tails) truth.insert(ctx.kg.triples().begin(), ctx.kg.triples().end());

    std::vector<double> ranks;
    std::vector<double> others;
    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
        const Triple& q = queries[qi];
        src.model_relation(q.rel);
        const auto masked = same_pair_nodes(ctx.kg, q);
        const double p = scorer.probability(q, masked);
        others.clear();
        if (options.mode == RankMode::Relations) {
            for (RelationId r = 0; r < ctx.kg.num_relations(); ++r) {
                if (r == q.rel || src.relation_map[r] == FeatureSource::kNoRelation) continue;
                Triple c = q;
                c.rel = r;
                others.push_back(scorer.probability(c, masked));
            }
        } else {
            std::vector<EntityId> pool;
            for (EntityId e = 0; e < ctx.kg.num_entities(); ++e) {
                if (e == q.tail) continue;
                if (!truth.count(Triple{q.head, q.rel, e})) pool.push_back(e);
            }
            Rng rng(derive_seed(derive_seed(options.seed, "tails"), qi));
            const std::size_t take = std::min(options.tail_candidates, pool.size());
            for (std::size_t i = 0; i < take; ++i) std::swap(pool[i], pool[i + uniform_index(rng, pool.size() - i)]);
            for (std::size_t i = 0; i < take; ++i) {
                const Triple c{q.head, q.rel, pool[i]};
                auto mask = masked;
                for (NodeId v : same_pair_nodes(ctx.kg, c)) mask.push_back(v);
                others.push_back(scorer.probability(c, mask));
            }
        }
        ranks.push_back(average_rank(p, others));
    }
    return report_from_ranks(std::move(ranks));
}

double estimate_inference_cost(std::size_t b, std::size_t f, double mean_degree, std::size_t layers) {
    const double bd = static_cast<double>(b), fd = static_cast<double>(f), ld = static_cast<double>(layers);
    return 3.0 * bd * fd * fd + bd * std::pow(mean_degree, ld) * fd + bd * ld * fd * fd;
}

}  // namespace noran
