#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "noran/synthetic.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out;
};

// Runs the CLI with stdout captured; stderr is discarded.
Run cli(const std::string& args) {
    const std::string cmd = std::string("\"") + NORAN_CLI_PATH + "\" " + args + " 2>/dev/null";
    Run r;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("noran_cli_" + name)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& f) const { return (path / f).string(); }
};

void write(const std::string& path, const std::string& text) { std::ofstream(path, std::ios::binary) << text; }

std::map<std::string, std::string> key_values(const std::string& text) {
    std::map<std::string, std::string> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq != std::string::npos) out[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return out;
}

const char* kQuick = "--dim 6 --batch-size 16 --classifier-epochs 20";

}  // namespace

TEST_CASE("version and help") {
    const Run v = cli("--version");
    CHECK(v.code == 0);
    CHECK(v.out.find("checkpoint format 1") != std::string::npos);
    CHECK(cli("--help").code == 0);
    CHECK(cli("").code == 2);
    CHECK(cli("frobnicate").code == 2);
}

TEST_CASE("split writes three files deterministically") {
    TempDir d("split");
    write(d / "kg.tsv", noran::planted_rule_kg(8, 1).to_tsv());
    REQUIRE(cli("split --input " + d / "kg.tsv" + " --unseen-frac 0.2 --seed 4 --out-dir " + d / "a").code == 0);
    REQUIRE(cli("split --input " + d / "kg.tsv" + " --unseen-frac 0.2 --seed 4 --out-dir " + d / "b").code == 0);
    for (const char* f : {"train.tsv", "eval.tsv", "unseen_entities.txt"}) {
        CHECK(fs::exists(d.path / "a" / f));
        CHECK(slurp(d.path / "a" / f) == slurp(d.path / "b" / f));
    }
    CHECK_FALSE(slurp(d.path / "a" / "eval.tsv").empty());
    REQUIRE(cli("split --input " + d / "kg.tsv" + " --unseen-frac 0 --out-dir " + d / "z").code == 0);
    CHECK(slurp(d.path / "z" / "eval.tsv").empty());
    CHECK(cli("split --input " + d / "missing.tsv" + " --out-dir " + d / "m").code == 2);
    CHECK(cli("split --input " + d / "kg.tsv" + " --unseen-frac 1.5 --out-dir " + d / "m").code == 2);
}

TEST_CASE("build-net statistics and masks") {
    TempDir d("net");
    write(d / "toy.tsv", "a\tr1\tb\nb\tr2\tc\na\tr3\tc\n");
    const Run all = cli("build-net --input " + d / "toy.tsv" + " --stats --export " + d / "edges.txt");
    REQUIRE(all.code == 0);
    const auto s = key_values(all.out);
    CHECK(s.at("nodes") == "3");
    CHECK(s.at("edges") == "3");
    CHECK(s.at("head_head") == "1");
    CHECK(s.at("tail_tail") == "1");
    CHECK(s.at("head_tail") == "1");
    CHECK(s.count("mean_degree"));
    CHECK(s.count("max_degree"));
    CHECK(slurp(d.path / "edges.txt") == "0 1 HT\n0 2 HH\n1 2 TT\n");
    const auto no_ht = key_values(cli("build-net --input " + d / "toy.tsv" + " --mask HH,TT --stats").out);
    CHECK(no_ht.at("edges") == "2");
    CHECK(no_ht.at("head_tail") == "0");
    CHECK(cli("build-net --input " + d / "toy.tsv" + " --mask XY --stats").code == 2);
    write(d / "bad.tsv", "a\tr1\n");
    CHECK(cli("build-net --input " + d / "bad.tsv" + " --stats").code == 2);
}

TEST_CASE("train writes checkpoints and reports epochs") {
    TempDir d("train");
    write(d / "kg.tsv", noran::planted_rule_kg(6, 2).to_tsv());
    const Run zero = cli("train --train " + d / "kg.tsv" + " --out-checkpoint " + d / "z.ckpt " + kQuick + " --epochs 0");
    CHECK(zero.code == 0);
    CHECK(zero.out.find("epoch=") == std::string::npos);
    CHECK(fs::file_size(d.path / "z.ckpt") > 0);

    for (const char* est : {"jsd", "infonce", "naive-ns"}) {
        const Run r = cli("train --train " + d / "kg.tsv" + " --out-checkpoint " + d / "m.ckpt " + kQuick +
                          " --epochs 3 --estimator " + est);
        CHECK(r.code == 0);
        std::istringstream in(r.out);
        std::string line;
        std::size_t expect = 1;
        while (std::getline(in, line))
            if (line.rfind("epoch=", 0) == 0) CHECK(line.rfind("epoch=" + std::to_string(expect++) + " loss=", 0) == 0);
        CHECK(expect == 4);
    }

    write(d / "bad.cfg", "dim = 4\nwidth = 9\n");
    CHECK(cli("train --config " + d / "bad.cfg" + " --train " + d / "kg.tsv" + " --out-checkpoint " + d / "x.ckpt").code ==
          2);
    write(d / "ok.cfg", "dim = 4\nepochs = 1\nbatch_size = 8\nclassifier_epochs = 5\n");
    CHECK(cli("train --config " + d / "ok.cfg" + " --train " + d / "kg.tsv" + " --out-checkpoint " + d / "c.ckpt").code ==
          0);
    CHECK(cli("train --train " + d / "kg.tsv" + " --out-checkpoint " + d / "x.ckpt --gnn mlp").code == 2);
    write(d / "one.tsv", "a\tr\tb\n");
    CHECK(cli("train --train " + d / "one.tsv" + " --out-checkpoint " + d / "x.ckpt --epochs 1 --dim 4").code == 3);
}

TEST_CASE("eval prints a stable report") {
    TempDir d("eval");
    write(d / "kg.tsv", noran::planted_rule_kg(8, 3).to_tsv());
    REQUIRE(cli("split --input " + d / "kg.tsv" + " --unseen-frac 0.2 --seed 1 --out-dir " + d / "s").code == 0);
    REQUIRE(cli("train --train " + d / "s/train.tsv" + " --out-checkpoint " + d / "m.ckpt " + kQuick + " --epochs 2").code ==
            0);
    const std::string args =
        "eval --checkpoint " + d / "m.ckpt" + " --train " + d / "s/train.tsv" + " --eval " + d / "s/eval.tsv";
    const Run a = cli(args + " --out " + d / "report.txt");
    const Run b = cli(args);
    REQUIRE(a.code == 0);
    CHECK(a.out == b.out);
    CHECK(slurp(d.path / "report.txt") == a.out);
    const auto kv = key_values(a.out);
    CHECK(kv.size() == 4);
    for (const char* k : {"mrr", "hit1", "hit3", "n"}) CHECK(kv.count(k));
    CHECK(std::stod(kv.at("hit1")) <= std::stod(kv.at("hit3")));
    const Run tails = cli(args + " --mode tails --seed 2");
    CHECK(tails.code == 0);
    CHECK(key_values(tails.out).at("n") == kv.at("n"));
    CHECK(cli(args + " --mode heads").code == 2);
    write(d / "bad.ckpt", "not a checkpoint");
    CHECK(cli("eval --checkpoint " + d / "bad.ckpt" + " --train " + d / "s/train.tsv" + " --eval " + d / "s/eval.tsv")
              .code == 2);
}

TEST_CASE("verify-influence exit codes") {
    const Run sgc = cli("verify-influence --layer sgc --k 2 --graph-spec path-4 --mode exact");
    CHECK(sgc.code == 0);
    CHECK(sgc.out.find("result=pass") != std::string::npos);
    CHECK(cli("verify-influence --layer gat --k 2 --graph-spec path-4 --mode exact").code == 2);
    CHECK(cli("verify-influence --layer gat --k 2 --graph-spec asymmetric --mode gat-contrast").code == 0);
    CHECK(cli("verify-influence --layer gcn --k 2 --graph-spec cycle-5 --mode statistical --trials 32").code == 0);
    CHECK(cli("verify-influence --layer gcn --k 2 --graph-spec blob-3 --mode exact").code == 2);

    TempDir d("verify");
    write(d / "g.txt", "0 1\n1 2\n2 3\ncenter 1\n");
    CHECK(cli("verify-influence --layer gin --k 3 --graph-spec " + d / "g.txt" + " --mode exact").code == 0);
}

TEST_CASE("gradcheck exit codes") {
    const Run ok = cli("gradcheck --seed 1");
    CHECK(ok.code == 0);
    for (const char* c : {"tensor", "layers", "lstm", "discriminator", "loss"}) CHECK(ok.out.find(c) != std::string::npos);
    const Run bad = cli("gradcheck --inject-fault 1.1");
    CHECK(bad.code == 4);
    CHECK(bad.out.find("fail") != std::string::npos);
}
