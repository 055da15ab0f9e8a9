#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "protolex/matrix.hpp"
#include "protolex/similarity.hpp"

namespace protolex {

struct Prototype {
  Vector vector;
  int class_id = 0;
  // Set once the prototype has been projected onto a training sample.
  std::optional<std::string> source_text;
  std::optional<std::size_t> source_index;

  bool operator==(const Prototype&) const = default;
};

// `prototype` classifies through the prototypical layer; `fc_only` is the
// uninterpretable baseline: a direct linear layer on the embedding.
enum class HeadMode { prototype, fc_only };

std::string_view to_string(HeadMode mode);
HeadMode parse_head_mode(std::string_view name);

struct PrototypeModel {
  std::size_t dim = 0;
  int num_classes = 0;
  int per_class = 10;
  SimilarityConfig similarity;
  SimilarityWeights weights;
  std::vector<Prototype> prototypes;
  Matrix head;  // num_classes x K

  HeadMode head_mode = HeadMode::prototype;
  Matrix fc;      // num_classes x dim, fc_only
  Vector fc_bias; // num_classes, fc_only

  nlohmann::json config_echo = nlohmann::json::object();

  std::size_t num_prototypes() const { return prototypes.size(); }
  Vector effective_weights() const { return weights.effective(similarity.kind); }

  bool operator==(const PrototypeModel&) const = default;
};

// Prototypes at the given vectors, unit similarity weights and the class
// indicator head (W[c][j] = 1 iff prototype j belongs to class c).
PrototypeModel make_model(std::size_t dim, int num_classes, int per_class, SimilarityConfig similarity,
                          std::vector<Prototype> prototypes);

PrototypeModel make_fc_model(std::size_t dim, int num_classes);

struct ForwardResult {
  Vector sims;    // K (empty for fc_only)
  Vector logits;  // C
  Vector probs;   // C
};

// Precomputed effective weights let hot loops skip recomputing them.
ForwardResult forward(const PrototypeModel& model, std::span<const double> z);
ForwardResult forward(const PrototypeModel& model, std::span<const double> effective_w, std::span<const double> z);

// Similarity of z to every prototype under the configured kind.
Vector prototype_similarities(const PrototypeModel& model, std::span<const double> effective_w,
                              std::span<const double> z);

Vector softmax(std::span<const double> logits);
// First maximal index.
std::size_t argmax(std::span<const double> values);

int predict(const PrototypeModel& model, std::span<const double> z);

struct Contribution {
  std::size_t prototype = 0;
  double value = 0.0;  // W[predicted, j] * sims[j]

  bool operator==(const Contribution&) const = default;
};

// Top-k prototypes by contribution to the predicted class, descending,
// lower index first on ties. k is clamped to [1, K].
std::vector<Contribution> top_contributing_prototypes(const PrototypeModel& model, std::span<const double> z,
                                                      std::size_t k);

struct EmbeddedSplit {
  std::vector<Vector> embeddings;
  std::vector<int> labels;
  std::vector<std::string> texts;  // optional; same length as embeddings when present

  std::size_t size() const { return embeddings.size(); }
};

// Replaces each prototype by its most similar same-class training embedding
// (current effective weights, lowest index on ties) and records the source.
// Throws MissingClassSamples when a prototype's class has no samples.
void project_prototypes(PrototypeModel& model, const EmbeddedSplit& train);

nlohmann::json model_to_json(const PrototypeModel& model);
PrototypeModel model_from_json(const nlohmann::json& j);
void save_checkpoint(const PrototypeModel& model, const std::filesystem::path& path);
PrototypeModel load_checkpoint(const std::filesystem::path& path);

}  // namespace protolex
