#include "protolex/losses.hpp"

#include <cmath>
#include <limits>
#include <optional>

#include "protolex/error.hpp"

namespace protolex {
namespace {

void require_batch(Batch batch) {
  if (batch.empty()) throw Error(Errc::invalid_argument, "empty batch");
}

// d = offset - sim for every kind.
double distance_offset(const PrototypeModel& model) { return is_cosine(model.similarity.kind) ? 1.0 : 0.0; }

// Pairwise sample/prototype quantities shared by the loss and its gradient.
struct Table {
  std::size_t n = 0;
  std::size_t K = 0;
  Vector w;                    // effective weights
  std::vector<Vector> sims;    // n x K
  std::vector<Vector> dists;   // n x K
  std::vector<Vector> logits;  // n x C

  std::optional<std::size_t> closest(std::size_t i, const PrototypeModel& model, bool same_class, int label) const {
    std::optional<std::size_t> best;
    for (std::size_t j = 0; j < K; ++j) {
      bool same = model.prototypes[j].class_id == label;
      if (same != same_class) continue;
      if (!best || dists[i][j] < dists[i][*best]) best = j;
    }
    return best;
  }
};

Table build_table(Batch batch, const PrototypeModel& model) {
  Table t;
  t.n = batch.size();
  t.K = model.prototypes.size();
  t.w = model.effective_weights();
  double offset = distance_offset(model);
  for (const auto& s : batch) {
    auto fwd = forward(model, t.w, s.z);
    Vector d(t.K);
    for (std::size_t j = 0; j < t.K; ++j) d[j] = offset - fwd.sims[j];
    t.sims.push_back(std::move(fwd.sims));
    t.dists.push_back(std::move(d));
    t.logits.push_back(std::move(fwd.logits));
  }
  return t;
}

std::size_t count_pairs(const PrototypeModel& model) {
  std::size_t pairs = 0;
  for (std::size_t j = 0; j < model.prototypes.size(); ++j)
    for (std::size_t k = j + 1; k < model.prototypes.size(); ++k)
      if (model.prototypes[j].class_id == model.prototypes[k].class_id) ++pairs;
  return pairs;
}

double cluster_from_table(Batch batch, const PrototypeModel& model, const Table& t) {
  double sum = 0.0;
  for (std::size_t i = 0; i < t.n; ++i) {
    auto j = t.closest(i, model, true, batch[i].label);
    if (!j) throw Error(Errc::missing_class_samples, "no prototypes for class " + std::to_string(batch[i].label));
    sum += t.dists[i][*j];
  }
  return sum / static_cast<double>(t.n);
}

double separation_from_table(Batch batch, const PrototypeModel& model, const Table& t, double margin) {
  double sum = 0.0;
  for (std::size_t i = 0; i < t.n; ++i) {
    auto j = t.closest(i, model, false, batch[i].label);
    if (j) sum += std::max(0.0, margin - t.dists[i][*j]);
  }
  return sum / static_cast<double>(t.n);
}

double distribution_from_table(const Table& t) {
  if (t.K == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t j = 0; j < t.K; ++j) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < t.n; ++i) best = std::min(best, t.dists[i][j]);
    sum += best;
  }
  return sum / static_cast<double>(t.K);
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

}  // namespace

nlohmann::json to_json(const LossBreakdown& loss) {
  return {{"ce", loss.ce},         {"clst", loss.clst}, {"sep", loss.sep},     {"dist", loss.dist},
          {"divers", loss.divers}, {"l1", loss.l1},     {"total", loss.total}};
}

double cross_entropy(std::span<const double> logits, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size())
    throw Error(Errc::invalid_argument, "label out of range");
  double mx = logits[0];
  for (double x : logits) mx = std::max(mx, x);
  double sum = 0.0;
  for (double x : logits) sum += std::exp(x - mx);
  return std::log(sum) + mx - logits[static_cast<std::size_t>(label)];
}

double cluster_loss(Batch batch, const PrototypeModel& model) {
  require_batch(batch);
  return cluster_from_table(batch, model, build_table(batch, model));
}

double separation_loss(Batch batch, const PrototypeModel& model, double margin) {
  require_batch(batch);
  return separation_from_table(batch, model, build_table(batch, model), margin);
}

double distribution_loss(Batch batch, const PrototypeModel& model) {
  require_batch(batch);
  return distribution_from_table(build_table(batch, model));
}

double diversity_loss(const PrototypeModel& model, double threshold) {
  std::size_t pairs = count_pairs(model);
  if (pairs == 0) return 0.0;
  auto w = model.effective_weights();
  double sum = 0.0;
  const auto& P = model.prototypes;
  for (std::size_t j = 0; j < P.size(); ++j)
    for (std::size_t k = j + 1; k < P.size(); ++k)
      if (P[j].class_id == P[k].class_id)
        sum += std::max(0.0, threshold - distance(model.similarity, w, P[j].vector, P[k].vector));
  return sum / static_cast<double>(pairs);
}

double l1_penalty(const Matrix& head) {
  double sum = 0.0;
  for (double x : head.data) sum += std::abs(x);
  return sum;
}

LossBreakdown total_loss(Batch batch, const PrototypeModel& model, const LossConfig& config) {
  require_batch(batch);
  auto t = build_table(batch, model);
  LossBreakdown b;
  for (std::size_t i = 0; i < t.n; ++i) b.ce += cross_entropy(t.logits[i], batch[i].label);
  b.ce /= static_cast<double>(t.n);
  b.clst = cluster_from_table(batch, model, t);
  b.sep = separation_from_table(batch, model, t, config.margin);
  b.dist = distribution_from_table(t);
  b.divers = diversity_loss(model, config.diversity_threshold);
  b.l1 = l1_penalty(model.head);
  b.total = b.ce + config.clst * b.clst + config.sep * b.sep + config.dist * b.dist + config.divers * b.divers +
            config.l1 * b.l1;
  return b;
}

Gradients loss_gradients(Batch batch, const PrototypeModel& model, const LossConfig& config) {
  require_batch(batch);
  auto t = build_table(batch, model);
  const std::size_t n = t.n, K = t.K, dim = model.dim;
  const auto C = static_cast<std::size_t>(model.num_classes);
  const double inv_n = 1.0 / static_cast<double>(n);

  Gradients g{Matrix(K, dim), Vector(dim, 0.0), Matrix(C, K)};
  Vector grad_w(dim, 0.0);
  // coef[i][j] = dL / d distance(z_i, p_j)
  std::vector<Vector> coef(n, Vector(K, 0.0));

  for (std::size_t i = 0; i < n; ++i) {
    auto probs = softmax(t.logits[i]);
    probs[static_cast<std::size_t>(batch[i].label)] -= 1.0;
    for (std::size_t c = 0; c < C; ++c) {
      double gc = probs[c] * inv_n;
      for (std::size_t j = 0; j < K; ++j) {
        g.head(c, j) += gc * t.sims[i][j];
        coef[i][j] -= gc * model.head(c, j);  // distance = offset - sim
      }
    }

    auto same = t.closest(i, model, true, batch[i].label);
    if (!same) throw Error(Errc::missing_class_samples, "no prototypes for class " + std::to_string(batch[i].label));
    coef[i][*same] += config.clst * inv_n;

    auto other = t.closest(i, model, false, batch[i].label);
    if (other && config.margin - t.dists[i][*other] > 0.0) coef[i][*other] -= config.sep * inv_n;
  }

  if (K > 0) {
    for (std::size_t j = 0; j < K; ++j) {
      std::size_t best = 0;
      for (std::size_t i = 1; i < n; ++i)
        if (t.dists[i][j] < t.dists[best][j]) best = i;
      coef[best][j] += config.dist / static_cast<double>(K);
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < K; ++j) {
      if (coef[i][j] == 0.0) continue;
      auto dg = distance_gradient(model.similarity, t.w, batch[i].z, model.prototypes[j].vector);
      axpy(coef[i][j], dg.dv, g.prototypes.row(j));
      axpy(coef[i][j], dg.dw, grad_w);
    }
  }

  std::size_t pairs = count_pairs(model);
  if (pairs > 0 && config.divers != 0.0) {
    const auto& P = model.prototypes;
    double c = -config.divers / static_cast<double>(pairs);
    for (std::size_t j = 0; j < K; ++j) {
      for (std::size_t k = j + 1; k < K; ++k) {
        if (P[j].class_id != P[k].class_id) continue;
        if (config.diversity_threshold - distance(model.similarity, t.w, P[j].vector, P[k].vector) <= 0.0) continue;
        auto dg = distance_gradient(model.similarity, t.w, P[j].vector, P[k].vector);
        axpy(c, dg.du, g.prototypes.row(j));
        axpy(c, dg.dv, g.prototypes.row(k));
        axpy(c, dg.dw, grad_w);
      }
    }
  }

  for (std::size_t idx = 0; idx < g.head.data.size(); ++idx) {
    double x = model.head.data[idx];
    g.head.data[idx] += config.l1 * (x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0));
  }

  auto chain = model.weights.effective_derivative(model.similarity.kind);
  for (std::size_t d = 0; d < dim; ++d) g.raw_weights[d] = grad_w[d] * chain[d];
  return g;
}

double linear_loss(Batch batch, const PrototypeModel& model) {
  require_batch(batch);
  double sum = 0.0;
  for (const auto& s : batch) sum += cross_entropy(forward(model, s.z).logits, s.label);
  return sum / static_cast<double>(batch.size());
}

LinearGradients linear_gradients(Batch batch, const PrototypeModel& model) {
  require_batch(batch);
  const auto C = static_cast<std::size_t>(model.num_classes);
  LinearGradients g{Matrix(C, model.dim), Vector(C, 0.0)};
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (const auto& s : batch) {
    auto probs = forward(model, s.z).probs;
    probs[static_cast<std::size_t>(s.label)] -= 1.0;
    for (std::size_t c = 0; c < C; ++c) {
      double gc = probs[c] * inv_n;
      g.bias[c] += gc;
      axpy(gc, s.z, g.weights.row(c));
    }
  }
  return g;
}

}  // namespace protolex
