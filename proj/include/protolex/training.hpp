#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "protolex/dataset.hpp"
#include "protolex/embedding.hpp"
#include "protolex/losses.hpp"
#include "protolex/model.hpp"
#include "protolex/optim.hpp"

namespace protolex {

struct TrainConfig {
  int epochs = 100;
  std::size_t batch_size = 128;
  double lr = 0.005;
  double weight_decay = 0.0005;
  double lr_factor = 0.5;
  int lr_patience_epochs = 30;
  int projection_every = 5;
  double projection_start_fraction = 0.5;
  int final_phase_epochs = 3;
  int prototypes_per_class = 10;
  std::uint64_t seed = 0;
  SimilarityConfig similarity;
  LossConfig loss;
  HeadMode head_mode = HeadMode::prototype;

  // Throws InvalidArgument on violated invariants.
  void validate() const;
};

nlohmann::json to_json(const TrainConfig& config);
// Fields absent from `j` keep the values already in `config`.
void update_from_json(TrainConfig& config, const nlohmann::json& j);

enum class Phase { warm, projection, final };
std::string_view to_string(Phase phase);

// 1-based epoch numbering.
Phase phase_of(int epoch, const TrainConfig& config);
bool is_projection_epoch(int epoch, const TrainConfig& config);

struct EpochRecord {
  int epoch = 0;
  LossBreakdown train_loss;  // sample-weighted mean of the minibatch losses
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  double lr = 0.0;
  Phase phase = Phase::warm;
  bool projected = false;

  bool operator==(const EpochRecord&) const = default;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;

  bool operator==(const TrainHistory&) const = default;
};

nlohmann::json to_json(const EpochRecord& record);
void write_history(const TrainHistory& history, const std::filesystem::path& path);

EmbeddedSplit embed_split(const LabeledTexts& split, const EmbeddingProvider& provider);

struct TrainResult {
  PrototypeModel model;
  TrainHistory history;
};

using ProjectionCallback = std::function<void(const PrototypeModel&, int epoch)>;

// Embeds every text once, then runs the full schedule: minibatch Adam on
// the total objective, per-step weight clamp, periodic projection, and a
// final head-only phase with frozen prototypes and a non-negative head.
// fc_only trains a linear head with cross-entropy instead.
TrainResult train(const LabeledTexts& train_split, const LabeledTexts& validation_split,
                  const EmbeddingProvider& provider, const TrainConfig& config,
                  const ProjectionCallback& on_projection = {});

// Same, starting from already computed embeddings.
TrainResult train_embedded(const EmbeddedSplit& train_set, const EmbeddedSplit& validation_set,
                           const TrainConfig& config, const ProjectionCallback& on_projection = {});

struct SamplePrediction {
  int label = 0;
  int predicted = 0;
  double confidence = 0.0;  // probability of the predicted class

  bool correct() const { return label == predicted; }
};

struct Evaluation {
  double accuracy = 0.0;
  std::vector<SamplePrediction> predictions;
};

Evaluation evaluate(const PrototypeModel& model, const EmbeddingProvider& provider, const LabeledTexts& split);
Evaluation evaluate_embedded(const PrototypeModel& model, const EmbeddedSplit& split);

// Mean total objective (prototype head) or mean cross-entropy (fc_only).
double validation_loss(const PrototypeModel& model, const EmbeddedSplit& split, const LossConfig& config);

}  // namespace protolex
