#pragma once

// Independent reimplementations used as test oracles. These avoid the
// library's code paths on purpose: plain loops, no shared helpers.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "protolex/losses.hpp"
#include "protolex/model.hpp"

namespace protolex::oracle {

inline std::uint64_t fnv(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ULL;
  return h;
}

struct Mix {
  std::uint64_t s;
  std::uint64_t operator()() {
    std::uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  double unit() { return std::ldexp(static_cast<double>((*this)() >> 11), -53); }
};

// ASCII-only sentences: whitespace split, no punctuation handling.
inline std::vector<double> embed(const std::string& text, std::size_t dim, std::uint64_t seed, bool bigrams) {
  std::vector<std::string> words;
  std::string cur;
  for (char c : text + " ") {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) words.push_back(cur);
      cur.clear();
    } else {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
  }
  std::vector<std::string> features = words;
  if (bigrams)
    for (std::size_t i = 1; i < words.size(); ++i) features.push_back(words[i - 1] + " " + words[i]);
  std::vector<double> v(dim, 0.0);
  for (const auto& f : features) {
    Mix g{fnv(f) ^ seed};
    for (std::size_t d = 0; d < dim; ++d) {
      double s = g.unit();
      s += g.unit();
      s += g.unit();
      s += g.unit();
      v[d] += s - 2.0;
    }
  }
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  for (double& x : v) x /= n;
  return v;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Similarity score with explicit effective weights (larger = closer).
inline double sim(SimilarityConfig cfg, const std::vector<double>& w, const std::vector<double>& u,
                  const std::vector<double>& v) {
  std::size_t n = u.size();
  switch (cfg.kind) {
    case SimilarityKind::cosine:
      return dot(u, v) / std::sqrt(dot(u, u) * dot(v, v));
    case SimilarityKind::weighted_cosine: {
      double a = 0, b = 0, c = 0;
      for (std::size_t i = 0; i < n; ++i) {
        a += w[i] * u[i] * v[i];
        b += w[i] * u[i] * u[i];
        c += w[i] * v[i] * v[i];
      }
      return a / (std::sqrt(b) * std::sqrt(c));
    }
    case SimilarityKind::l2:
    case SimilarityKind::weighted_l2: {
      double s = 0;
      for (std::size_t i = 0; i < n; ++i) {
        double wi = cfg.kind == SimilarityKind::l2 ? 1.0 : w[i];
        double t = cfg.mode == L2Mode::literal ? wi * u[i] * v[i] : wi * (u[i] - v[i]);
        s += t * t;
      }
      return -std::sqrt(s);
    }
  }
  return 0;
}

inline std::vector<double> effective(SimilarityKind kind, const std::vector<double>& raw) {
  std::vector<double> w(raw.size(), 1.0);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (kind == SimilarityKind::weighted_cosine) w[i] = raw[i] > 0 ? raw[i] : 0.0;
    if (kind == SimilarityKind::weighted_l2) w[i] = 2.0 / (1.0 + std::exp(-raw[i]));
  }
  return w;
}

inline double dist(const PrototypeModel& m, const std::vector<double>& w, const std::vector<double>& u,
                   const std::vector<double>& v) {
  double s = sim(m.similarity, w, u, v);
  bool cos = m.similarity.kind == SimilarityKind::cosine || m.similarity.kind == SimilarityKind::weighted_cosine;
  return cos ? 1.0 - s : -s;
}

struct Sample {
  std::vector<double> z;
  int label;
};

inline std::vector<double> logits(const PrototypeModel& m, const std::vector<double>& z) {
  auto w = effective(m.similarity.kind, m.weights.raw);
  std::size_t K = m.prototypes.size();
  std::vector<double> s(K);
  for (std::size_t j = 0; j < K; ++j) s[j] = sim(m.similarity, w, z, m.prototypes[j].vector);
  std::vector<double> out(static_cast<std::size_t>(m.num_classes), 0.0);
  for (std::size_t c = 0; c < out.size(); ++c)
    for (std::size_t j = 0; j < K; ++j) out[c] += m.head(c, j) * s[j];
  return out;
}

inline std::size_t first_max(const std::vector<double>& v) {
  std::size_t b = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[b]) b = i;
  return b;
}

// The full objective, written out term by term.
inline double total(const std::vector<Sample>& batch, const PrototypeModel& m, const LossConfig& cfg) {
  auto w = effective(m.similarity.kind, m.weights.raw);
  std::size_t K = m.prototypes.size();
  double n = static_cast<double>(batch.size());
  double ce = 0, clst = 0, sep = 0, dst = 0, div = 0, l1 = 0;
  std::vector<double> col_min(K, std::numeric_limits<double>::infinity());
  for (const auto& s : batch) {
    auto lg = logits(m, s.z);
    double mx = *std::max_element(lg.begin(), lg.end());
    double z = 0;
    for (double x : lg) z += std::exp(x - mx);
    ce += mx + std::log(z) - lg[static_cast<std::size_t>(s.label)];
    double same = std::numeric_limits<double>::infinity(), other = same;
    for (std::size_t j = 0; j < K; ++j) {
      double d = dist(m, w, s.z, m.prototypes[j].vector);
      if (m.prototypes[j].class_id == s.label)
        same = std::min(same, d);
      else
        other = std::min(other, d);
      col_min[j] = std::min(col_min[j], d);
    }
    clst += same;
    if (std::isfinite(other)) sep += std::max(0.0, cfg.margin - other);
  }
  for (double x : col_min) dst += x;
  std::size_t pairs = 0;
  for (std::size_t j = 0; j < K; ++j)
    for (std::size_t k = j + 1; k < K; ++k)
      if (m.prototypes[j].class_id == m.prototypes[k].class_id) {
        ++pairs;
        div += std::max(0.0, cfg.diversity_threshold - dist(m, w, m.prototypes[j].vector, m.prototypes[k].vector));
      }
  for (double x : m.head.data) l1 += std::abs(x);
  return ce / n + cfg.clst * clst / n + cfg.sep * sep / n + cfg.dist * dst / static_cast<double>(K) +
         cfg.divers * (pairs ? div / static_cast<double>(pairs) : 0.0) + cfg.l1 * l1;
}

// Central finite difference of f with respect to *x.
inline double central_difference(const std::function<double()>& f, double& x, double eps) {
  double keep = x;
  x = keep + eps;
  double up = f();
  x = keep - eps;
  double down = f();
  x = keep;
  return (up - down) / (2 * eps);
}

// Accuracy after dropping each sample's top-k contribution columns, by brute force.
inline double masked_accuracy(const PrototypeModel& m, const std::vector<Sample>& data, std::size_t k) {
  auto w = effective(m.similarity.kind, m.weights.raw);
  std::size_t K = m.prototypes.size();
  std::size_t correct = 0;
  for (const auto& s : data) {
    std::vector<double> sims(K);
    for (std::size_t j = 0; j < K; ++j) sims[j] = sim(m.similarity, w, s.z, m.prototypes[j].vector);
    auto lg = logits(m, s.z);
    std::size_t c = first_max(lg);
    std::vector<bool> dropped(K, false);
    for (std::size_t r = 0; r < k; ++r) {
      std::size_t best = K;
      for (std::size_t j = 0; j < K; ++j) {
        if (dropped[j]) continue;
        if (best == K || m.head(c, j) * sims[j] > m.head(c, best) * sims[best]) best = j;
      }
      dropped[best] = true;
    }
    std::vector<double> masked(lg.size(), 0.0);
    for (std::size_t cc = 0; cc < lg.size(); ++cc)
      for (std::size_t j = 0; j < K; ++j)
        if (!dropped[j]) masked[cc] += m.head(cc, j) * sims[j];
    if (static_cast<int>(first_max(masked)) == s.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace protolex::oracle
