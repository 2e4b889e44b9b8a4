#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "noran/layers.hpp"
#include "noran/leim.hpp"
#include "noran/relnet.hpp"

namespace noran {

struct TrainConfig {
    std::size_t dim = 100;
    MpLayerKind gnn = MpLayerKind::GAT;
    std::size_t depth = 2;
    MiEstimatorKind estimator = MiEstimatorKind::JSD;
    CombinerKind combiner = CombinerKind::BiLSTM;
    PatternMask mask = PatternMask::all();
    std::optional<std::size_t> degree_cap;
    double lr = 0.005;
    std::size_t batch_size = 256;
    std::size_t epochs = 50;
    double margin = 0.5;
    std::uint64_t seed = 0;
    bool tie_omega_psi = false;
    std::size_t classifier_epochs = 300;
    double classifier_lr = 0.05;
    bool jsd_as_printed = false;

    bool operator==(const TrainConfig&) const = default;
};

// Sets one field from its snake_case key. Throws ConfigError for unknown keys
// or unparsable values.
void set_config_value(TrainConfig& cfg, std::string_view key, std::string_view value);

// `key = value` lines with '#' comments, applied on top of `base`.
TrainConfig parse_config(std::string_view text, TrainConfig base = {});

// Every field as key -> canonical text; parse(to_map(c)) == c.
std::map<std::string, std::string> config_to_map(const TrainConfig& cfg);
TrainConfig config_from_map(const std::map<std::string, std::string>& values);

}  // namespace noran
