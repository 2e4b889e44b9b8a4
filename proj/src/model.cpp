#include "noran/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "noran/error.hpp"
#include "noran/rng.hpp"

namespace noran {

namespace {

std::uint64_t embedding_seed(const TrainConfig& cfg) { return derive_seed(cfg.seed, "embeddings"); }

}  // namespace

Model::Model(const TrainConfig& cfg, const Vocabulary& entities, const Vocabulary& relations)
    : cfg_(cfg), entities_(entities), relations_(relations) {
    const std::size_t f = cfg.dim;
    emb_ = init_embeddings(KnowledgeGraph(entities, relations, {}), f, embedding_seed(cfg));
    gamma_ = Combiner(cfg.combiner, f, derive_seed(cfg.seed, "gamma"));
    psi_ = GnnStack(cfg.gnn, cfg.depth, f, derive_seed(cfg.seed, "psi"), "psi");
    if (!cfg.tie_omega_psi) omega_ = GnnStack(cfg.gnn, cfg.depth, f, derive_seed(cfg.seed, "omega"), "omega");
    disc_ = Discriminator(f, derive_seed(cfg.seed, "discriminator"));
    cls_w_ = Parameter("classifier.w", Tensor({f, 1}));
    cls_b_ = Parameter("classifier.b", Tensor({1, 1}));
}

std::vector<Parameter*> Model::parameters() {
    std::vector<Parameter*> out{&emb_.entity_emb, &emb_.relation_emb};
    for (auto* p : gamma_.parameters()) out.push_back(p);
    for (auto* p : psi_.parameters()) out.push_back(p);
    if (!cfg_.tie_omega_psi)
        for (auto* p : omega_.parameters()) out.push_back(p);
    for (auto* p : disc_.parameters()) out.push_back(p);
    out.push_back(&cls_w_);
    out.push_back(&cls_b_);
    return out;
}

std::vector<Parameter*> Model::objective_parameters() {
    std::vector<Parameter*> out{&emb_.relation_emb};
    for (auto* p : gamma_.parameters()) out.push_back(p);
    for (auto* p : psi_.parameters()) out.push_back(p);
    if (cfg_.estimator == MiEstimatorKind::NaiveNS) {
        out.push_back(&cls_w_);
        out.push_back(&cls_b_);
        return out;
    }
    if (!cfg_.tie_omega_psi)
        for (auto* p : omega_.parameters()) out.push_back(p);
    for (auto* p : disc_.parameters()) out.push_back(p);
    return out;
}

std::vector<double> Model::entity_row(std::string_view name) const {
    if (auto id = entities_.find(name)) {
        auto row = emb_.entity_emb.value.row(*id);
        return {row.begin(), row.end()};
    }
    return xavier_row(embedding_seed(cfg_), "entity", name, cfg_.dim);
}

RelationId Model::relation_id(std::string_view name) const {
    if (auto id = relations_.find(name)) return *id;
    throw UnknownRelation(std::string(name));
}

// ---- checkpoint I/O ----------------------------------------------------

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[4] = {'N', 'O', 'R', 'N'};

template <typename T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

class Reader {
   public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    template <typename T>
    T get() {
        T v;
        std::memcpy(&v, take(sizeof(T)).data(), sizeof(T));
        return v;
    }
    std::string_view take(std::size_t n) {
        if (bytes_.size() - pos_ < n) throw TruncatedFile();
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == bytes_.size(); }

   private:
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

std::string join_names(const Vocabulary& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += '\t';
        out += v.name(static_cast<std::uint32_t>(i));
    }
    return out;
}

Vocabulary split_names(std::string_view s) {
    std::vector<std::string> names;
    while (!s.empty()) {
        const auto tab = s.find('\t');
        names.emplace_back(s.substr(0, tab));
        s = tab == std::string_view::npos ? std::string_view{} : s.substr(tab + 1);
    }
    return Vocabulary(std::move(names));
}

}  // namespace

std::string encode_checkpoint(Model& model) {
    std::string out(kMagic, 4);
    put<std::uint32_t>(out, kCheckpointVersion);
    auto params = model.parameters();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
    for (const Parameter* p : params) {
        put<std::uint16_t>(out, static_cast<std::uint16_t>(p->name.size()));
        out += p->name;
        const Shape& shape = p->value.shape();
        put<std::uint8_t>(out, static_cast<std::uint8_t>(shape.size()));
        for (std::size_t d : shape) put<std::uint64_t>(out, d);
        for (double v : p->value.values()) put<double>(out, v);
    }
    std::string kv;
    auto entries = config_to_map(model.config());
    entries["entities"] = join_names(model.entities());
    entries["relations"] = join_names(model.relations());
    for (const auto& [k, v] : entries) kv += k + "=" + v + "\n";
    put<std::uint64_t>(out, kv.size());
    out += kv;
    return out;
}

Model decode_checkpoint(std::string_view bytes) {
    Reader r(bytes);
    if (bytes.size() < 4 || bytes.substr(0, 4) != std::string_view(kMagic, 4)) throw BadMagic();
    r.take(4);
    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion) throw UnsupportedVersion(version);
    const auto count = r.get<std::uint32_t>();
    std::map<std::string, Tensor> tensors;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name(r.take(r.get<std::uint16_t>()));
        Shape shape(r.get<std::uint8_t>());
        for (auto& d : shape) d = r.get<std::uint64_t>();
        Tensor t(shape);
        for (auto& v : t.values()) v = r.get<double>();
        tensors.emplace(std::move(name), std::move(t));
    }
    const auto kv_size = r.get<std::uint64_t>();
    std::string_view kv = r.take(kv_size);
    if (!r.done()) throw ConfigError("trailing bytes after checkpoint");

    std::map<std::string, std::string> entries;
    while (!kv.empty()) {
        const auto nl = kv.find('\n');
        std::string_view line = kv.substr(0, nl);
        kv = nl == std::string_view::npos ? std::string_view{} : kv.substr(nl + 1);
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ConfigError("bad checkpoint metadata line");
        entries.emplace(std::string(line.substr(0, eq)), std::string(line.substr(eq + 1)));
    }
    auto take_entry = [&](const std::string& key) {
        auto it = entries.find(key);
        if (it == entries.end()) throw ConfigError("checkpoint lacks '" + key + "'");
        std::string v = std::move(it->second);
        entries.erase(it);
        return v;
    };
    Vocabulary ents = split_names(take_entry("entities"));
    Vocabulary rels = split_names(take_entry("relations"));
    Model model(config_from_map(entries), ents, rels);
    auto params = model.parameters();
    if (params.size() != tensors.size()) throw ConfigError("checkpoint tensor set does not match its config");
    for (Parameter* p : params) {
        auto it = tensors.find(p->name);
        if (it == tensors.end()) throw ConfigError("checkpoint lacks tensor '" + p->name + "'");
        if (it->second.shape() != p->value.shape())
            throw ShapeMismatch(p->name + ": " + shape_string(it->second.shape()) + " vs " + shape_string(p->value.shape()));
        p->value = std::move(it->second);
    }
    return model;
}

void save_checkpoint(Model& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    const std::string bytes = encode_checkpoint(model);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed: " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

}  // namespace noran
