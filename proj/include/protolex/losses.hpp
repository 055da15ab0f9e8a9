#pragma once

#include <span>
#include <vector>

#include "json.hpp"
#include "protolex/matrix.hpp"
#include "protolex/model.hpp"

namespace protolex {

// Coefficients of the auxiliary terms. The full objective is
//   total = ce + clst*Clst + sep*Sep + dist*Dist + divers*Divers + l1*|W|_1
struct LossConfig {
  double clst = 0.5;
  double sep = 0.1;
  double dist = 0.1;
  double divers = 0.1;
  double l1 = 1e-4;
  double margin = 1.0;               // separation hinge
  double diversity_threshold = 0.6;  // diversity hinge

  bool operator==(const LossConfig&) const = default;
};

struct LossBreakdown {
  double ce = 0.0;
  double clst = 0.0;
  double sep = 0.0;
  double dist = 0.0;
  double divers = 0.0;
  double l1 = 0.0;
  double total = 0.0;

  bool operator==(const LossBreakdown&) const = default;
};

nlohmann::json to_json(const LossBreakdown& loss);

// Non-owning view of one labelled embedding.
struct LabeledEmbedding {
  std::span<const double> z;
  int label = 0;
};

using Batch = std::span<const LabeledEmbedding>;

// -log softmax(logits)[label], max-subtracted.
double cross_entropy(std::span<const double> logits, int label);

// Mean over the batch of the distance to the closest same-class prototype.
double cluster_loss(Batch batch, const PrototypeModel& model);
// Mean over the batch of max(0, margin - distance to closest wrong-class prototype).
double separation_loss(Batch batch, const PrototypeModel& model, double margin);
// Mean over prototypes of the distance to the closest batch sample.
double distribution_loss(Batch batch, const PrototypeModel& model);
// Mean over same-class prototype pairs of max(0, threshold - distance).
double diversity_loss(const PrototypeModel& model, double threshold);
double l1_penalty(const Matrix& head);

LossBreakdown total_loss(Batch batch, const PrototypeModel& model, const LossConfig& config);

struct Gradients {
  Matrix prototypes;  // K x dim
  Vector raw_weights; // dim
  Matrix head;        // C x K
};

// Exact gradients of total_loss. Min/max selections and hinges are treated
// as fixed at the evaluation point; the l1 subgradient is sign(W) with 0 at 0.
Gradients loss_gradients(Batch batch, const PrototypeModel& model, const LossConfig& config);

struct LinearGradients {
  Matrix weights;  // C x dim
  Vector bias;     // C
};

// Mean cross-entropy of the fc_only head and its gradient.
double linear_loss(Batch batch, const PrototypeModel& model);
LinearGradients linear_gradients(Batch batch, const PrototypeModel& model);

}  // namespace protolex
