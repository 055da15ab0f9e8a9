#include "protolex/similarity.hpp"

#include <cmath>

#include "protolex/error.hpp"

namespace protolex {
namespace {

void check_dims(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size())
    throw Error(Errc::shape_mismatch, "vector dims differ: " + std::to_string(u.size()) + " vs " +
                                          std::to_string(v.size()));
}

void check_weights(std::span<const double> w, std::span<const double> u) {
  if (w.size() != u.size())
    throw Error(Errc::shape_mismatch, "weight dim " + std::to_string(w.size()) + " vs vector dim " +
                                          std::to_string(u.size()));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct CosineParts {
  double dot = 0.0;  // sum w u v
  double uu = 0.0;   // sum w u^2
  double vv = 0.0;   // sum w v^2
};

CosineParts cosine_parts(std::span<const double> w, std::span<const double> u, std::span<const double> v) {
  CosineParts p;
  for (std::size_t i = 0; i < u.size(); ++i) {
    double wi = w.empty() ? 1.0 : w[i];
    p.dot += wi * u[i] * v[i];
    p.uu += wi * u[i] * u[i];
    p.vv += wi * v[i] * v[i];
  }
  return p;
}

// Gradient of the (weighted) cosine similarity; `w` empty means unit weights.
DistanceGradient cosine_gradient(std::span<const double> w, std::span<const double> u, std::span<const double> v) {
  auto p = cosine_parts(w, u, v);
  if (p.uu <= 0.0 || p.vv <= 0.0)
    throw Error(w.empty() ? Errc::zero_vector : Errc::degenerate_weights, "zero (weighted) norm");
  double inv = 1.0 / (std::sqrt(p.uu) * std::sqrt(p.vv));
  double s = p.dot * inv;
  std::size_t n = u.size();
  DistanceGradient g{Vector(n), Vector(n), Vector(n, 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    double wi = w.empty() ? 1.0 : w[i];
    g.du[i] = wi * v[i] * inv - s * wi * u[i] / p.uu;
    g.dv[i] = wi * u[i] * inv - s * wi * v[i] / p.vv;
    if (!w.empty()) g.dw[i] = u[i] * v[i] * inv - 0.5 * s * (u[i] * u[i] / p.uu + v[i] * v[i] / p.vv);
  }
  return g;
}

DistanceGradient l2_gradient(std::span<const double> w, std::span<const double> u, std::span<const double> v,
                             L2Mode mode) {
  std::size_t n = u.size();
  DistanceGradient g{Vector(n, 0.0), Vector(n, 0.0), Vector(n, 0.0)};
  double value = weighted_l2(w, u, v, mode);
  if (value == 0.0) return g;
  for (std::size_t i = 0; i < n; ++i) {
    double wi = w[i];
    if (mode == L2Mode::corrected) {
      double diff = u[i] - v[i];
      g.du[i] = wi * wi * diff / value;
      g.dv[i] = -g.du[i];
      g.dw[i] = wi * diff * diff / value;
    } else {
      double prod = u[i] * v[i];
      g.du[i] = wi * wi * prod * v[i] / value;
      g.dv[i] = wi * wi * prod * u[i] / value;
      g.dw[i] = wi * prod * prod / value;
    }
  }
  return g;
}

}  // namespace

std::string_view to_string(SimilarityKind kind) {
  switch (kind) {
    case SimilarityKind::cosine: return "cosine";
    case SimilarityKind::weighted_cosine: return "weighted_cosine";
    case SimilarityKind::l2: return "l2";
    case SimilarityKind::weighted_l2: return "weighted_l2";
  }
  return "?";
}

std::string_view to_string(L2Mode mode) { return mode == L2Mode::literal ? "literal" : "corrected"; }

SimilarityKind parse_similarity_kind(std::string_view name) {
  for (auto k : {SimilarityKind::cosine, SimilarityKind::weighted_cosine, SimilarityKind::l2,
                 SimilarityKind::weighted_l2})
    if (to_string(k) == name) return k;
  throw Error(Errc::invalid_argument, "unknown similarity kind '" + std::string(name) + "'");
}

L2Mode parse_l2_mode(std::string_view name) {
  if (name == "literal") return L2Mode::literal;
  if (name == "corrected") return L2Mode::corrected;
  throw Error(Errc::invalid_argument, "unknown l2 mode '" + std::string(name) + "'");
}

bool is_weighted(SimilarityKind kind) {
  return kind == SimilarityKind::weighted_cosine || kind == SimilarityKind::weighted_l2;
}

bool is_cosine(SimilarityKind kind) {
  return kind == SimilarityKind::cosine || kind == SimilarityKind::weighted_cosine;
}

SimilarityWeights SimilarityWeights::unit(SimilarityKind kind, std::size_t dim) {
  // 2 * sigmoid(0) == 1
  return {Vector(dim, kind == SimilarityKind::weighted_l2 ? 0.0 : 1.0)};
}

Vector SimilarityWeights::effective(SimilarityKind kind) const {
  Vector w(raw.size(), 1.0);
  if (kind == SimilarityKind::weighted_cosine) {
    for (std::size_t i = 0; i < raw.size(); ++i) w[i] = std::max(raw[i], 0.0);
  } else if (kind == SimilarityKind::weighted_l2) {
    for (std::size_t i = 0; i < raw.size(); ++i) w[i] = 2.0 * sigmoid(raw[i]);
  }
  return w;
}

Vector SimilarityWeights::effective_derivative(SimilarityKind kind) const {
  Vector d(raw.size(), 0.0);
  if (kind == SimilarityKind::weighted_cosine) {
    for (std::size_t i = 0; i < raw.size(); ++i) d[i] = raw[i] > 0.0 ? 1.0 : 0.0;
  } else if (kind == SimilarityKind::weighted_l2) {
    for (std::size_t i = 0; i < raw.size(); ++i) {
      double s = sigmoid(raw[i]);
      d[i] = 2.0 * s * (1.0 - s);
    }
  }
  return d;
}

void SimilarityWeights::clamp(SimilarityKind kind) {
  if (kind != SimilarityKind::weighted_cosine) return;
  for (double& r : raw) r = std::max(r, 0.0);
}

double cosine_sim(std::span<const double> u, std::span<const double> v) {
  check_dims(u, v);
  auto p = cosine_parts({}, u, v);
  if (p.uu == 0.0 || p.vv == 0.0) throw Error(Errc::zero_vector, "cosine of a zero vector");
  return p.dot / (std::sqrt(p.uu) * std::sqrt(p.vv));
}

double weighted_cosine_sim(std::span<const double> w, std::span<const double> u, std::span<const double> v) {
  check_dims(u, v);
  check_weights(w, u);
  auto p = cosine_parts(w, u, v);
  if (p.uu <= 0.0 || p.vv <= 0.0)
    throw Error(Errc::degenerate_weights, "weighted norm is zero (all weight on zero coordinates)");
  return p.dot / (std::sqrt(p.uu) * std::sqrt(p.vv));
}

double weighted_l2(std::span<const double> w, std::span<const double> u, std::span<const double> v, L2Mode mode) {
  check_dims(u, v);
  check_weights(w, u);
  double sum = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    double term = mode == L2Mode::corrected ? w[i] * (u[i] - v[i]) : w[i] * u[i] * v[i];
    sum += term * term;
  }
  return std::sqrt(sum);
}

double similarity(const SimilarityConfig& config, std::span<const double> w, std::span<const double> u,
                  std::span<const double> v) {
  switch (config.kind) {
    case SimilarityKind::cosine: return cosine_sim(u, v);
    case SimilarityKind::weighted_cosine: return weighted_cosine_sim(w, u, v);
    case SimilarityKind::l2: {
      Vector ones(u.size(), 1.0);
      return -weighted_l2(ones, u, v, config.mode);
    }
    case SimilarityKind::weighted_l2: return -weighted_l2(w, u, v, config.mode);
  }
  return 0.0;
}

double distance(const SimilarityConfig& config, std::span<const double> w, std::span<const double> u,
                std::span<const double> v) {
  double s = similarity(config, w, u, v);
  return is_cosine(config.kind) ? 1.0 - s : -s;
}

DistanceGradient distance_gradient(const SimilarityConfig& config, std::span<const double> w,
                                   std::span<const double> u, std::span<const double> v) {
  check_dims(u, v);
  DistanceGradient g;
  switch (config.kind) {
    case SimilarityKind::cosine:
      g = cosine_gradient({}, u, v);
      break;
    case SimilarityKind::weighted_cosine:
      check_weights(w, u);
      g = cosine_gradient(w, u, v);
      break;
    case SimilarityKind::l2: {
      Vector ones(u.size(), 1.0);
      g = l2_gradient(ones, u, v, config.mode);
      std::fill(g.dw.begin(), g.dw.end(), 0.0);
      return g;
    }
    case SimilarityKind::weighted_l2:
      check_weights(w, u);
      return l2_gradient(w, u, v, config.mode);
  }
  // distance = 1 - cosine
  for (auto* vec : {&g.du, &g.dv, &g.dw})
    for (double& x : *vec) x = -x;
  return g;
}

}  // namespace protolex
