#include "noran/kg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "noran/error.hpp"
#include "noran/rng.hpp"

namespace noran {

Vocabulary::Vocabulary(std::vector<std::string> names) {
    for (auto& n : names) intern(n);
}

std::uint32_t Vocabulary::intern(std::string_view name) {
    auto it = index_.find(std::string(name));
    if (it != index_.end()) return it->second;
    const auto id = static_cast<std::uint32_t>(names_.size());
    names_.emplace_back(name);
    index_.emplace(names_.back(), id);
    return id;
}

std::optional<std::uint32_t> Vocabulary::find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

KnowledgeGraph::KnowledgeGraph(Vocabulary entities, Vocabulary relations, std::vector<Triple> triples)
    : entities_(std::move(entities)), relations_(std::move(relations)), triples_(std::move(triples)) {
    incidence_.resize(entities_.size());
    for (TripleId id = 0; id < triples_.size(); ++id) {
        const Triple& t = triples_[id];
        if (t.head >= entities_.size() || t.tail >= entities_.size() || t.rel >= relations_.size())
            throw InvalidArgument("triple " + std::to_string(id) + " references an unknown id");
        incidence_[t.head].as_head.push_back(id);
        incidence_[t.tail].as_tail.push_back(id);
    }
}

KnowledgeGraph KnowledgeGraph::with_triples(std::span<const Triple> extra) const {
    std::vector<Triple> all = triples_;
    all.insert(all.end(), extra.begin(), extra.end());
    return KnowledgeGraph(entities_, relations_, std::move(all));
}

KnowledgeGraph KnowledgeGraph::with_only(std::vector<Triple> triples) const {
    return KnowledgeGraph(entities_, relations_, std::move(triples));
}

std::string KnowledgeGraph::format(const Triple& t) const {
    return entities_.name(t.head) + '\t' + relations_.name(t.rel) + '\t' + entities_.name(t.tail);
}

std::string KnowledgeGraph::to_tsv() const {
    std::string out;
    for (const Triple& t : triples_) {
        out += format(t);
        out += '\n';
    }
    return out;
}

bool KnowledgeGraph::operator==(const KnowledgeGraph& other) const {
    return entities_.names() == other.entities_.names() && relations_.names() == other.relations_.names() &&
           triples_ == other.triples_;
}

std::vector<Triple> parse_triples_into(std::string_view text, Vocabulary& entities, Vocabulary& relations) {
    std::vector<Triple> triples;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty() || line.front() == '#') continue;

        std::string_view fields[3];
        std::size_t count = 0, start = 0;
        while (true) {
            const std::size_t tab = line.find('\t', start);
            const std::string_view field = line.substr(start, tab == std::string_view::npos ? line.npos : tab - start);
            if (count < 3) fields[count] = field;
            ++count;
            if (tab == std::string_view::npos) break;
            start = tab + 1;
        }
        if (count != 3 || fields[0].empty() || fields[1].empty() || fields[2].empty()) throw MalformedLine(line_no);
        Triple t;
        t.head = entities.intern(fields[0]);
        t.rel = relations.intern(fields[1]);
        t.tail = entities.intern(fields[2]);
        triples.push_back(t);
    }
    return triples;
}

KnowledgeGraph parse_triples(std::string_view text) {
    Vocabulary entities, relations;
    auto triples = parse_triples_into(text, entities, relations);
    if (triples.empty()) throw EmptyInput();
    return KnowledgeGraph(std::move(entities), std::move(relations), std::move(triples));
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

KnowledgeGraph load_triples(const std::filesystem::path& path) { return parse_triples(read_file(path)); }

InductiveSplit make_inductive_split(const KnowledgeGraph& kg, double unseen_fraction, std::uint64_t seed) {
    if (!(unseen_fraction >= 0.0 && unseen_fraction <= 1.0))
        throw InvalidArgument("unseen fraction must lie in [0, 1]");
    const std::size_t n = kg.num_entities();
    const auto n_unseen = static_cast<std::size_t>(std::floor(unseen_fraction * static_cast<double>(n)));

    // Partial Fisher-Yates: the first n_unseen slots are a uniform sample.
    std::vector<EntityId> ids(n);
    std::iota(ids.begin(), ids.end(), EntityId{0});
    Rng rng = make_rng(seed, "split");
    for (std::size_t i = 0; i < n_unseen; ++i) {
        const std::size_t j = i + uniform_index(rng, n - i);
        std::swap(ids[i], ids[j]);
    }
    std::vector<EntityId> unseen(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_unseen));
    std::sort(unseen.begin(), unseen.end());
    std::vector<bool> is_unseen(n, false);
    for (EntityId e : unseen) is_unseen[e] = true;

    InductiveSplit split;
    split.seed = seed;
    split.unseen_entities = std::move(unseen);
    std::vector<Triple> train;
    for (const Triple& t : kg.triples()) {
        if (is_unseen[t.head] || is_unseen[t.tail])
            split.eval_triples.push_back({t, true});
        else
            train.push_back(t);
    }
    if (train.empty()) throw EmptyTrainGraph();
    split.train_graph = kg.with_only(std::move(train));
    return split;
}

std::vector<double> xavier_row(std::uint64_t seed, std::string_view table, std::string_view name, std::size_t dim) {
    Rng rng(derive_seed(derive_seed(seed, table), name));
    const double stddev = std::sqrt(2.0 / static_cast<double>(dim + dim));
    std::normal_distribution<double> normal(0.0, stddev);
    std::vector<double> row(dim);
    for (auto& v : row) v = normal(rng);
    return row;
}

namespace {

Tensor table_for(const Vocabulary& vocab, std::uint64_t seed, std::string_view table, std::size_t dim) {
    Tensor t({vocab.size(), dim});
    for (std::size_t i = 0; i < vocab.size(); ++i) {
        auto row = xavier_row(seed, table, vocab.name(static_cast<std::uint32_t>(i)), dim);
        std::copy(row.begin(), row.end(), t.row(i).begin());
    }
    return t;
}

}  // namespace

EmbeddingTables init_embeddings(const KnowledgeGraph& kg, std::size_t dim, std::uint64_t seed) {
    if (dim == 0) throw InvalidArgument("embedding dim must be >= 1");
    EmbeddingTables tables;
    tables.dim = dim;
    tables.entity_emb = Parameter("entity_emb", table_for(kg.entities(), seed, "entity", dim), true);
    tables.relation_emb = Parameter("relation_emb", table_for(kg.relations(), seed, "relation", dim), false);
    return tables;
}

}  // namespace noran
