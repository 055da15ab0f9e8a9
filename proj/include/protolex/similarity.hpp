#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace protolex {

using Vector = std::vector<double>;

enum class SimilarityKind { cosine, weighted_cosine, l2, weighted_l2 };

// How the weighted l2 formula combines the two vectors. `literal` uses the
// elementwise product u_i * v_i; `corrected` uses the difference u_i - v_i.
enum class L2Mode { literal, corrected };

struct SimilarityConfig {
  SimilarityKind kind = SimilarityKind::weighted_cosine;
  L2Mode mode = L2Mode::corrected;

  bool operator==(const SimilarityConfig&) const = default;
};

std::string_view to_string(SimilarityKind kind);
std::string_view to_string(L2Mode mode);
SimilarityKind parse_similarity_kind(std::string_view name);
L2Mode parse_l2_mode(std::string_view name);

bool is_weighted(SimilarityKind kind);
bool is_cosine(SimilarityKind kind);

// Trainable per-dimension weights. `raw` is unconstrained; the similarity
// sees effective weights:
//   weighted_cosine: max(raw, 0)
//   weighted_l2:     2 * sigmoid(raw), in (0, 2)
//   unweighted:      all ones
struct SimilarityWeights {
  Vector raw;

  // Raw values that map to effective weights of exactly one.
  static SimilarityWeights unit(SimilarityKind kind, std::size_t dim);

  Vector effective(SimilarityKind kind) const;
  // d(effective_i) / d(raw_i); 0 where the clamp is active (raw <= 0).
  Vector effective_derivative(SimilarityKind kind) const;
  // Projects raw back onto the feasible set (max(raw, 0) for weighted cosine).
  void clamp(SimilarityKind kind);

  bool operator==(const SimilarityWeights&) const = default;
};

// Throws ZeroVector / ShapeMismatch.
double cosine_sim(std::span<const double> u, std::span<const double> v);

// sum(w u v) / (sqrt(sum(w u^2)) sqrt(sum(w v^2))) with the given effective
// weights. Throws DegenerateWeights when either denominator sum is 0.
double weighted_cosine_sim(std::span<const double> w, std::span<const double> u, std::span<const double> v);

// literal:   sqrt(sum((w u v)^2))
// corrected: sqrt(sum((w (u - v))^2))
double weighted_l2(std::span<const double> w, std::span<const double> u, std::span<const double> v, L2Mode mode);

// Layer similarity score: the cosine variants as-is, the l2 variants negated
// so that larger always means more similar. `w` holds effective weights and is
// ignored by the unweighted kinds.
double similarity(const SimilarityConfig& config, std::span<const double> w, std::span<const double> u,
                  std::span<const double> v);

// Distance used by the auxiliary losses: 1 - sim for cosine kinds, the l2
// value for l2 kinds. In both cases distance = const - similarity.
double distance(const SimilarityConfig& config, std::span<const double> w, std::span<const double> u,
                std::span<const double> v);

struct DistanceGradient {
  Vector du;
  Vector dv;
  Vector dw;  // w.r.t. effective weights; zero for unweighted kinds
};

// Analytic gradient of distance(config, w, u, v). At points where the l2
// value is 0 the subgradient 0 is returned.
DistanceGradient distance_gradient(const SimilarityConfig& config, std::span<const double> w,
                                   std::span<const double> u, std::span<const double> v);

}  // namespace protolex
