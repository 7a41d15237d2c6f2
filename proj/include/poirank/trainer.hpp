#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "poirank/joint.hpp"
#include "poirank/spnet.hpp"

namespace poirank {

inline constexpr const char* kCheckpointVersion = "1";

struct TrainConfig {
  std::string model_kind = "spnet";  // spnet | spnet-ablation | joint
  size_t epochs = 30;
  size_t negatives_per_question = 5;  // k
  double margin = 1.0;
  AdamConfig adam;  // lr 1e-3, beta1 0.9, beta2 0.999
  uint64_t seed = 1;
  size_t patience = 5;       // early stop on dev Acc@3
  double hard_frac = 0.35;   // stratification of the per-epoch negative draw
  size_t dev_sample = 250;   // dev questions scored per epoch (0 = all)
  size_t threads = 1;
  SpNetConfig net;

  void validate() const;
};

double margin_loss(double s_pos, double s_neg, double margin);

struct EpochStats {
  size_t epoch = 0;  // 0 = untrained baseline
  double mean_loss = 0.0;
  double dev_acc3 = 0.0;
  size_t skipped_questions = 0;
};

struct TrainOutput {
  nlohmann::json best_checkpoint;
  std::vector<EpochStats> history;
  size_t best_epoch = 0;
  double best_dev_acc3 = 0.0;
};

// Trains the requested model kind with max-margin ranking loss: per question,
// k pool negatives are drawn (stratified hard/soft), the pairwise hinge losses
// are averaged, and one Adam step is taken. Model selection and early stopping
// use Acc@3 against each dev question's stored candidate pool.
// `pretrained` must carry the spatial reasoner when kind == "joint".
TrainOutput train(const TrainConfig& config, const Dataset& dataset, const Catalog& catalog,
                  const SpatialModel* pretrained = nullptr);

// ---- checkpoints ----

nlohmann::json spatial_checkpoint(const SpatialModel& model, const std::string& kind,
                                  nlohmann::json meta);
nlohmann::json joint_checkpoint(const JointModel& model, nlohmann::json meta);

void save_checkpoint(const nlohmann::json& doc, const std::string& path);

struct LoadedModel {
  std::string kind;
  std::optional<SpatialModel> spatial;  // spnet / spnet-ablation
  std::optional<JointModel> joint;
  nlohmann::json meta;

  SpnetMode spatial_mode() const {
    return kind == "spnet-ablation" ? SpnetMode::Ablation : SpnetMode::Full;
  }
};

LoadedModel load_checkpoint(const std::string& path);

}  // namespace poirank
