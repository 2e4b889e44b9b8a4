#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "noran/config.hpp"
#include "noran/error.hpp"
#include "noran/gradcheck.hpp"
#include "noran/influence.hpp"
#include "noran/kg.hpp"
#include "noran/model.hpp"
#include "noran/pipeline.hpp"
#include "noran/relnet.hpp"

namespace fs = std::filesystem;
using namespace noran;

namespace {

constexpr int kOk = 0;
constexpr int kInputError = 2;
constexpr int kTrainingFailure = 3;
constexpr int kVerificationFailure = 4;

// Raised for user errors that are not library errors (bad flag combinations).
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UsageError("cannot write " + path.string());
    out << text;
    if (!out) throw UsageError("write failed for " + path.string());
}

std::string triples_tsv(const KnowledgeGraph& kg, const std::vector<HeldOutTriple>& held) {
    std::string out;
    for (const HeldOutTriple& h : held) out += kg.format(h.triple) + "\n";
    return out;
}

int cmd_split(const std::string& input, double unseen_frac, std::uint64_t seed, const fs::path& out_dir) {
    const KnowledgeGraph kg = load_triples(input);
    const InductiveSplit split = make_inductive_split(kg, unseen_frac, seed);
    fs::create_directories(out_dir);
    write_file(out_dir / "train.tsv", split.train_graph.to_tsv());
    write_file(out_dir / "eval.tsv", triples_tsv(kg, split.eval_triples));
    std::string unseen;
    for (EntityId e : split.unseen_entities) unseen += kg.entities().name(e) + "\n";
    write_file(out_dir / "unseen_entities.txt", unseen);
    std::printf("train=%zu eval=%zu unseen=%zu\n", split.train_graph.num_triples(), split.eval_triples.size(),
                split.unseen_entities.size());
    return kOk;
}

std::optional<std::size_t> parse_cap(const std::string& text) {
    if (text.empty() || text == "none") return std::nullopt;
    TrainConfig probe;
    set_config_value(probe, "degree_cap", text);
    return probe.degree_cap;
}

int cmd_build_net(const std::string& input, const std::string& mask, const std::string& cap, std::uint64_t seed,
                  bool stats, const std::string& export_path) {
    const KnowledgeGraph kg = load_triples(input);
    const RelationNetwork net = build_relation_network(kg, PatternMask::parse(mask), parse_cap(cap), seed);
    if (!export_path.empty()) write_file(export_path, net.export_edges());
    if (stats) {
        const NetworkStats s = network_stats(net);
        std::printf("nodes=%zu\nedges=%zu\nhead_head=%zu\ntail_tail=%zu\nhead_tail=%zu\nmean_degree=%.6f\nmax_degree=%zu\n",
                    s.nodes, s.edges, s.head_head, s.tail_tail, s.head_tail, s.mean_degree, s.max_degree);
    }
    return kOk;
}

int cmd_train(const TrainConfig& cfg, const std::string& train_path, const fs::path& out) {
    const KnowledgeGraph kg = load_triples(train_path);
    std::optional<Model> model;
    try {
        model.emplace(train(kg, cfg, [](const EpochStats& s) {
            std::printf("epoch=%zu loss=%.6f\n", s.epoch, s.loss);
            std::fflush(stdout);
        }));
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        std::fprintf(stderr, "training failed: %s\n", e.what());
        return kTrainingFailure;
    }
    save_checkpoint(*model, out);
    return kOk;
}

int cmd_eval(const fs::path& checkpoint, const std::string& train_path, const std::string& eval_path,
             const std::string& mode, std::uint64_t seed, const std::string& out_path) {
    Model model = load_checkpoint(checkpoint);
    const KnowledgeGraph train_file = load_triples(train_path);
    Vocabulary ents = train_file.entities(), rels = train_file.relations();
    const std::vector<Triple> queries = parse_triples_into(read_file(eval_path), ents, rels);
    const KnowledgeGraph train_kg(ents, rels, train_file.triples());
    EvalOptions options;
    if (mode == "relations") options.mode = RankMode::Relations;
    else if (mode == "tails") options.mode = RankMode::Tails;
    else throw UsageError("--mode must be relations or tails");
    options.seed = seed;
    const EvalContext ctx = make_eval_context(train_kg, queries, model.config());
    const EvalReport report = evaluate(model, ctx, queries, options);
    std::fputs(report.key_values().c_str(), stdout);
    if (!out_path.empty()) write_file(out_path, report.key_values());
    return kOk;
}

int cmd_verify(const std::string& layer, std::size_t k, const std::string& spec, std::size_t trials,
               std::uint64_t seed, const std::string& mode_name) {
    const MpLayerKind kind = parse_kind(layer);
    const InfluenceMode mode = parse_influence_mode(mode_name);
    if (mode != InfluenceMode::GatContrast && !is_fixed(kind))
        throw UsageError("--mode " + mode_name + " needs a fixed family (gcn, sage, gin, sgc)");
    const InfluenceGraph graph = fs::is_regular_file(spec) ? load_graph(spec, 8, seed) : builtin_graph(spec, 8, seed);
    const InfluenceReport report = verify_walk_influence(kind, graph, k, trials, seed, mode);
    std::fputs(report.table().c_str(), stdout);
    return report.passed ? kOk : kVerificationFailure;
}

int cmd_gradcheck(std::uint64_t seed, double fault) {
    testing::set_backward_fault(fault);
    const auto results = run_gradcheck(seed);
    std::fputs(gradcheck_table(results).c_str(), stdout);
    for (const auto& r : results)
        if (!r.passed) return kVerificationFailure;
    return kOk;
}

std::string version_string() {
    char buf[64];
    std::snprintf(buf, sizeof buf, "noran 1.0.0 (checkpoint format %u)", kCheckpointVersion);
    return buf;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Inductive knowledge graph completion over relation networks"};
    app.set_version_flag("--version", version_string());
    app.require_subcommand(1);

    // split
    std::string split_input, split_out;
    double unseen_frac = 0.15;
    std::uint64_t split_seed = 0;
    auto* split = app.add_subcommand("split", "Hold out a fraction of entities and their triples");
    split->add_option("--input", split_input, "Triples TSV")->required();
    split->add_option("--unseen-frac", unseen_frac, "Fraction of entities to hold out")->check(CLI::Range(0.0, 1.0));
    split->add_option("--seed", split_seed);
    split->add_option("--out-dir", split_out, "Receives train.tsv, eval.tsv, unseen_entities.txt")->required();

    // build-net
    std::string net_input, net_mask = "HH,TT,HT", net_cap, net_export;
    std::uint64_t net_seed = 0;
    bool net_stats = false;
    auto* build = app.add_subcommand("build-net", "Build the relation network of a triples file");
    build->add_option("--input", net_input, "Triples TSV")->required();
    build->add_option("--mask", net_mask, "Enabled patterns, subset of HH,TT,HT");
    build->add_option("--degree-cap", net_cap, "Per-node neighbor cap, or none");
    build->add_option("--seed", net_seed);
    build->add_flag("--stats", net_stats, "Print node, edge and degree lines");
    build->add_option("--export", net_export, "Write the edge list here");

    // train
    std::string cfg_path, train_input, ckpt_out;
    std::map<std::string, std::string> overrides;
    auto* trainc = app.add_subcommand("train", "Train an encoder and classifier, then write a checkpoint");
    trainc->add_option("--config", cfg_path, "key = value file");
    trainc->add_option("--train", train_input, "Training triples TSV")->required();
    trainc->add_option("--out-checkpoint", ckpt_out)->required();
    for (const auto& [key, value] : config_to_map(TrainConfig{})) {
        std::string flag = "--" + key;
        for (char& c : flag)
            if (c == '_') c = '-';
        trainc->add_option_function<std::string>(
            flag, [&overrides, key = key](const std::string& v) { overrides[key] = v; }, "default " + value);
    }

    // eval
    std::string eval_ckpt, eval_train, eval_input, eval_mode = "relations", eval_out;
    std::uint64_t eval_seed = 0;
    auto* evalc = app.add_subcommand("eval", "Rank held-out triples with a trained checkpoint");
    evalc->add_option("--checkpoint", eval_ckpt)->required();
    evalc->add_option("--train", eval_train, "Training triples TSV")->required();
    evalc->add_option("--eval", eval_input, "Triples to rank")->required();
    evalc->add_option("--mode", eval_mode, "relations or tails");
    evalc->add_option("--seed", eval_seed);
    evalc->add_option("--out", eval_out, "Also write the report here");

    // verify-influence
    std::string inf_layer = "gcn", inf_graph = "path-4", inf_mode = "exact";
    std::size_t inf_k = 2, inf_trials = 64;
    std::uint64_t inf_seed = 0;
    auto* verify = app.add_subcommand("verify-influence", "Compare influence distributions with walk distributions");
    verify->add_option("--layer", inf_layer, "gcn, sage, gin, sgc or gat");
    verify->add_option("--k", inf_k, "Depth");
    verify->add_option("--graph-spec", inf_graph, "Edge list path, or path-N, cycle-N, star-N, asymmetric");
    verify->add_option("--trials", inf_trials, "Initializations averaged in statistical mode");
    verify->add_option("--seed", inf_seed);
    verify->add_option("--mode", inf_mode, "exact, statistical or gat-contrast");

    // gradcheck
    std::uint64_t gc_seed = 0;
    double gc_fault = 1.0;
    auto* grad = app.add_subcommand("gradcheck", "Finite-difference checks of every backward rule");
    grad->add_option("--seed", gc_seed);
    grad->add_option("--inject-fault", gc_fault)->group("");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kInputError;
    }

    try {
        if (*split) return cmd_split(split_input, unseen_frac, split_seed, split_out);
        if (*build) return cmd_build_net(net_input, net_mask, net_cap, net_seed, net_stats, net_export);
        if (*trainc) {
            TrainConfig cfg;
            if (!cfg_path.empty()) cfg = parse_config(read_file(cfg_path));
            for (const auto& [key, value] : overrides) set_config_value(cfg, key, value);
            return cmd_train(cfg, train_input, ckpt_out);
        }
        if (*evalc) return cmd_eval(eval_ckpt, eval_train, eval_input, eval_mode, eval_seed, eval_out);
        if (*verify) return cmd_verify(inf_layer, inf_k, inf_graph, inf_trials, inf_seed, inf_mode);
        if (*grad) return cmd_gradcheck(gc_seed, gc_fault);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kInputError;
    }
    return kInputError;
}
