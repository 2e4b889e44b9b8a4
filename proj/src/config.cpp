#include "noran/config.hpp"

#include <charconv>
#include <cstdio>

#include "noran/error.hpp"

namespace noran {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
    T out{};
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size())
        throw ConfigError("bad value for " + std::string(key) + ": '" + std::string(value) + "'");
    return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("bad boolean for " + std::string(key) + ": '" + std::string(value) + "'");
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void set_config_value(TrainConfig& cfg, std::string_view key, std::string_view value) {
    try {
        if (key == "dim") cfg.dim = parse_number<std::size_t>(key, value);
        else if (key == "gnn") cfg.gnn = parse_kind(value);
        else if (key == "depth") cfg.depth = parse_number<std::size_t>(key, value);
        else if (key == "estimator") cfg.estimator = parse_estimator(value);
        else if (key == "combiner") cfg.combiner = parse_combiner(value);
        else if (key == "mask") cfg.mask = PatternMask::parse(value);
        else if (key == "degree_cap") {
            if (value == "none" || value.empty()) cfg.degree_cap.reset();
            else cfg.degree_cap = parse_number<std::size_t>(key, value);
        } else if (key == "lr") cfg.lr = parse_number<double>(key, value);
        else if (key == "batch_size") cfg.batch_size = parse_number<std::size_t>(key, value);
        else if (key == "epochs") cfg.epochs = parse_number<std::size_t>(key, value);
        else if (key == "margin") cfg.margin = parse_number<double>(key, value);
        else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
        else if (key == "tie_omega_psi") cfg.tie_omega_psi = parse_bool(key, value);
        else if (key == "classifier_epochs") cfg.classifier_epochs = parse_number<std::size_t>(key, value);
        else if (key == "classifier_lr") cfg.classifier_lr = parse_number<double>(key, value);
        else if (key == "jsd_as_printed") cfg.jsd_as_printed = parse_bool(key, value);
        else throw ConfigError("unknown config key '" + std::string(key) + "'");
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
    }
    if (cfg.dim == 0) throw ConfigError("dim must be positive");
    if (cfg.batch_size == 0) throw ConfigError("batch_size must be positive");
    if (cfg.degree_cap && *cfg.degree_cap == 0) throw ConfigError("degree_cap must be positive");
}

TrainConfig parse_config(std::string_view text, TrainConfig base) {
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        set_config_value(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return base;
}

std::map<std::string, std::string> config_to_map(const TrainConfig& cfg) {
    return {
        {"dim", std::to_string(cfg.dim)},
        {"gnn", std::string(kind_name(cfg.gnn))},
        {"depth", std::to_string(cfg.depth)},
        {"estimator", std::string(estimator_name(cfg.estimator))},
        {"combiner", std::string(combiner_name(cfg.combiner))},
        {"mask", cfg.mask.to_string()},
        {"degree_cap", cfg.degree_cap ? std::to_string(*cfg.degree_cap) : "none"},
        {"lr", format_double(cfg.lr)},
        {"batch_size", std::to_string(cfg.batch_size)},
        {"epochs", std::to_string(cfg.epochs)},
        {"margin", format_double(cfg.margin)},
        {"seed", std::to_string(cfg.seed)},
        {"tie_omega_psi", cfg.tie_omega_psi ? "true" : "false"},
        {"classifier_epochs", std::to_string(cfg.classifier_epochs)},
        {"classifier_lr", format_double(cfg.classifier_lr)},
        {"jsd_as_printed", cfg.jsd_as_printed ? "true" : "false"},
    };
}

TrainConfig config_from_map(const std::map<std::string, std::string>& values) {
    TrainConfig cfg;
    for (const auto& [k, v] : values) set_config_value(cfg, k, v);
    return cfg;
}

}  // namespace noran
