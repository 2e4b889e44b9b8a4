#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "noran/config.hpp"
#include "noran/kg.hpp"
#include "noran/layers.hpp"
#include "noran/leim.hpp"

namespace noran {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Everything a checkpoint holds: config, vocabularies and named parameters.
// Parameters are referenced by pointer from optimizers, so a Model must stay
// in place while one is alive.
class Model {
   public:
    Model() = default;
    Model(const TrainConfig& cfg, const Vocabulary& entities, const Vocabulary& relations);

    Model(const Model&) = delete;
    Model& operator=(const Model&) = delete;
    Model(Model&&) = default;
    Model& operator=(Model&&) = default;

    const TrainConfig& config() const { return cfg_; }
    const Vocabulary& entities() const { return entities_; }
    const Vocabulary& relations() const { return relations_; }
    std::size_t dim() const { return cfg_.dim; }

    EmbeddingTables& embeddings() { return emb_; }
    Combiner& gamma() { return gamma_; }
    GnnStack& psi() { return psi_; }
    // Omega shares Psi's parameters when tie_omega_psi is set.
    GnnStack& omega() { return cfg_.tie_omega_psi ? psi_ : omega_; }
    Discriminator& discriminator() { return disc_; }
    Parameter& classifier_weight() { return cls_w_; }  // [f x 1]
    Parameter& classifier_bias() { return cls_b_; }    // [1 x 1]

    // Serialization order; the frozen entity table comes first.
    std::vector<Parameter*> parameters();
    // Parameters updated by the training objective of cfg.estimator.
    std::vector<Parameter*> objective_parameters();

    // Entity row by name: the stored row when the name is in the vocabulary,
    // otherwise the deterministic frozen initialization for that name.
    std::vector<double> entity_row(std::string_view name) const;
    // Throws UnknownRelation.
    RelationId relation_id(std::string_view name) const;

   private:
    TrainConfig cfg_;
    Vocabulary entities_;
    Vocabulary relations_;
    EmbeddingTables emb_;
    Combiner gamma_;
    GnnStack psi_;
    GnnStack omega_;
    Discriminator disc_;
    Parameter cls_w_;
    Parameter cls_b_;
};

std::string encode_checkpoint(Model& model);
Model decode_checkpoint(std::string_view bytes);
void save_checkpoint(Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace noran
