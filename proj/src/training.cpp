#include "protolex/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "protolex/error.hpp"
#include "protolex/hashing.hpp"

namespace protolex {
namespace {

constexpr std::uint64_t kInitStream = 0xA5A5A5A55A5A5A5AULL;

void check_split(const EmbeddedSplit& split, int num_classes, const char* name) {
  if (split.size() == 0) throw Error(Errc::empty_dataset, std::string(name) + " split is empty");
  if (split.labels.size() != split.size())
    throw Error(Errc::shape_mismatch, std::string(name) + " labels and embeddings differ in length");
  for (int label : split.labels)
    if (label < 0 || label >= num_classes)
      throw Error(Errc::invalid_argument, std::string(name) + " label out of range");
}

int infer_num_classes(const EmbeddedSplit& train_set) {
  int mx = -1;
  for (int l : train_set.labels) mx = std::max(mx, l);
  return mx + 1;
}

std::vector<std::vector<std::size_t>> indices_by_class(const EmbeddedSplit& set, int num_classes) {
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(num_classes));
  for (std::size_t i = 0; i < set.size(); ++i) by_class[static_cast<std::size_t>(set.labels[i])].push_back(i);
  return by_class;
}

PrototypeModel initial_model(const EmbeddedSplit& train_set, int num_classes, const TrainConfig& config) {
  const std::size_t dim = train_set.embeddings.front().size();
  if (config.head_mode == HeadMode::fc_only) return make_fc_model(dim, num_classes);

  // Random distinct same-class samples; classes smaller than m wrap around.
  auto by_class = indices_by_class(train_set, num_classes);
  SplitMix64 rng(config.seed ^ kInitStream);
  std::vector<Prototype> prototypes;
  for (int c = 0; c < num_classes; ++c) {
    auto pool = by_class[static_cast<std::size_t>(c)];
    shuffle(pool, rng);
    for (int k = 0; k < config.prototypes_per_class; ++k) {
      std::size_t idx = pool[static_cast<std::size_t>(k) % pool.size()];
      prototypes.push_back({train_set.embeddings[idx], c, std::nullopt, std::nullopt});
    }
  }
  return make_model(dim, num_classes, config.prototypes_per_class, config.similarity, std::move(prototypes));
}

std::vector<double> flatten(const std::vector<Prototype>& protos) {
  std::vector<double> flat;
  for (const auto& p : protos) flat.insert(flat.end(), p.vector.begin(), p.vector.end());
  return flat;
}

void unflatten(std::span<const double> flat, std::vector<Prototype>& protos) {
  std::size_t offset = 0;
  for (auto& p : protos) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), p.vector.size(), p.vector.begin());
    offset += p.vector.size();
  }
}

void accumulate(LossBreakdown& acc, const LossBreakdown& b, double weight) {
  acc.ce += weight * b.ce;
  acc.clst += weight * b.clst;
  acc.sep += weight * b.sep;
  acc.dist += weight * b.dist;
  acc.divers += weight * b.divers;
  acc.l1 += weight * b.l1;
  acc.total += weight * b.total;
}

std::vector<LabeledEmbedding> make_batch(const EmbeddedSplit& set, std::span<const std::size_t> order) {
  std::vector<LabeledEmbedding> batch;
  batch.reserve(order.size());
  for (std::size_t idx : order) batch.push_back({set.embeddings[idx], set.labels[idx]});
  return batch;
}

}  // namespace

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(Errc::invalid_argument, msg); };
  if (epochs < 1) fail("epochs must be >= 1");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(lr > 0.0)) fail("lr must be positive");
  if (weight_decay < 0.0) fail("weight_decay must be >= 0");
  if (!(lr_factor > 0.0 && lr_factor <= 1.0)) fail("lr_factor must lie in (0, 1]");
  if (lr_patience_epochs < 1) fail("lr_patience_epochs must be >= 1");
  if (projection_every < 1) fail("projection_every must be >= 1");
  if (projection_start_fraction < 0.0 || projection_start_fraction > 1.0)
    fail("projection_start_fraction must lie in [0, 1]");
  if (head_mode == HeadMode::prototype) {
    if (final_phase_epochs < 0 || final_phase_epochs >= epochs) fail("final_phase_epochs must be < epochs");
    if (prototypes_per_class < 1) fail("prototypes_per_class must be >= 1");
  }
  for (double l : {loss.clst, loss.sep, loss.dist, loss.divers, loss.l1})
    if (l < 0.0) fail("loss coefficients must be >= 0");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {
      {"epochs", c.epochs},
      {"batch_size", c.batch_size},
      {"lr", c.lr},
      {"weight_decay", c.weight_decay},
      {"lr_factor", c.lr_factor},
      {"lr_patience_epochs", c.lr_patience_epochs},
      {"projection_every", c.projection_every},
      {"projection_start_fraction", c.projection_start_fraction},
      {"final_phase_epochs", c.final_phase_epochs},
      {"prototypes_per_class", c.prototypes_per_class},
      {"seed", c.seed},
      {"sim_kind", to_string(c.similarity.kind)},
      {"l2_mode", to_string(c.similarity.mode)},
      {"head_mode", to_string(c.head_mode)},
      {"loss",
       {{"lambda_clst", c.loss.clst},
        {"lambda_sep", c.loss.sep},
        {"lambda_dist", c.loss.dist},
        {"lambda_divers", c.loss.divers},
        {"lambda_l1", c.loss.l1},
        {"margin", c.loss.margin},
        {"diversity_threshold", c.loss.diversity_threshold}}},
  };
}

void update_from_json(TrainConfig& c, const nlohmann::json& j) {
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j[key].get<std::decay_t<decltype(field)>>();
    };
    get("epochs", c.epochs);
    get("batch_size", c.batch_size);
    get("lr", c.lr);
    get("weight_decay", c.weight_decay);
    get("lr_factor", c.lr_factor);
    get("lr_patience_epochs", c.lr_patience_epochs);
    get("projection_every", c.projection_every);
    get("projection_start_fraction", c.projection_start_fraction);
    get("final_phase_epochs", c.final_phase_epochs);
    get("prototypes_per_class", c.prototypes_per_class);
    get("seed", c.seed);
    if (j.contains("sim_kind")) c.similarity.kind = parse_similarity_kind(j["sim_kind"].get<std::string>());
    if (j.contains("l2_mode")) c.similarity.mode = parse_l2_mode(j["l2_mode"].get<std::string>());
    if (j.contains("head_mode")) c.head_mode = parse_head_mode(j["head_mode"].get<std::string>());
    if (j.contains("loss")) {
      const auto& l = j["loss"];
      auto getl = [&](const char* key, double& field) {
        if (l.contains(key)) field = l[key].get<double>();
      };
      getl("lambda_clst", c.loss.clst);
      getl("lambda_sep", c.loss.sep);
      getl("lambda_dist", c.loss.dist);
      getl("lambda_divers", c.loss.divers);
      getl("lambda_l1", c.loss.l1);
      getl("margin", c.loss.margin);
      getl("diversity_threshold", c.loss.diversity_threshold);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::invalid_argument, std::string("bad training config: ") + e.what());
  }
}

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::warm: return "warm";
    case Phase::projection: return "projection";
    case Phase::final: return "final";
  }
  return "?";
}

Phase phase_of(int epoch, const TrainConfig& config) {
  if (config.head_mode == HeadMode::prototype && epoch > config.epochs - config.final_phase_epochs)
    return Phase::final;
  if (static_cast<double>(epoch) >= config.projection_start_fraction * config.epochs) return Phase::projection;
  return Phase::warm;
}

bool is_projection_epoch(int epoch, const TrainConfig& config) {
  return config.head_mode == HeadMode::prototype && phase_of(epoch, config) == Phase::projection &&
         epoch % config.projection_every == 0;
}

nlohmann::json to_json(const EpochRecord& r) {
  nlohmann::json j = to_json(r.train_loss);
  j["epoch"] = r.epoch;
  j["val_loss"] = r.val_loss;
  j["val_accuracy"] = r.val_accuracy;
  j["lr"] = r.lr;
  j["phase"] = to_string(r.phase);
  j["projected"] = r.projected;
  return j;
}

void write_history(const TrainHistory& history, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::io, "cannot open " + path.string() + " for writing");
  for (const auto& r : history.epochs) out << to_json(r).dump() << '\n';
  if (!out) throw Error(Errc::io, "write failed for " + path.string());
}

EmbeddedSplit embed_split(const LabeledTexts& split, const EmbeddingProvider& provider) {
  EmbeddedSplit out;
  out.embeddings = provider.embed_batch(split.texts);
  out.labels = split.labels;
  out.texts = split.texts;
  return out;
}

double validation_loss(const PrototypeModel& model, const EmbeddedSplit& split, const LossConfig& config) {
  auto batch = make_batch(split, [&] {
    std::vector<std::size_t> all(split.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
  }());
  if (model.head_mode == HeadMode::fc_only) return linear_loss(batch, model);
  return total_loss(batch, model, config).total;
}

TrainResult train_embedded(const EmbeddedSplit& train_set, const EmbeddedSplit& validation_set,
                           const TrainConfig& config, const ProjectionCallback& on_projection) {
  config.validate();
  if (train_set.size() == 0) throw Error(Errc::empty_dataset, "train split is empty");
  const int num_classes = infer_num_classes(train_set);
  check_split(train_set, num_classes, "train");
  check_split(validation_set, num_classes, "validation");
  auto by_class = indices_by_class(train_set, num_classes);
  for (std::size_t c = 0; c < by_class.size(); ++c)
    if (by_class[c].empty())
      throw Error(Errc::missing_class_samples, "class " + std::to_string(c) + " has no training samples");
  const std::size_t dim = train_set.embeddings.front().size();
  for (const auto* set : {&train_set, &validation_set})
    for (const auto& z : set->embeddings)
      if (z.size() != dim) throw Error(Errc::dim_mismatch, "embeddings of different dims");

  TrainResult result{initial_model(train_set, num_classes, config), {}};
  PrototypeModel& model = result.model;
  model.config_echo = to_json(config);

  const bool proto_mode = config.head_mode == HeadMode::prototype;
  const bool train_weights = proto_mode && is_weighted(config.similarity.kind);
  AdamState proto_state(proto_mode ? model.prototypes.size() * dim : 0);
  AdamState weight_state(dim);
  AdamState head_state(proto_mode ? model.head.data.size() : model.fc.data.size());
  AdamState bias_state(model.fc_bias.size());

  SplitMix64 shuffle_rng(config.seed);
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  double lr = config.lr;
  bool frozen = false;
  std::vector<double> val_losses;
  PlateauSchedule schedule{config.lr_factor, config.lr_patience_epochs};

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.phase = phase_of(epoch, config);
    rec.lr = lr;

    if (proto_mode && rec.phase == Phase::final && !frozen) {
      project_prototypes(model, train_set);
      frozen = true;
      rec.projected = true;
      if (on_projection) on_projection(model, epoch);
    }

    shuffle(order, shuffle_rng);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      std::span<const std::size_t> idx(order.data() + start, std::min(config.batch_size, order.size() - start));
      auto batch = make_batch(train_set, idx);
      const double weight = static_cast<double>(batch.size()) / static_cast<double>(order.size());

      if (!proto_mode) {
        double ce = linear_loss(batch, model);
        accumulate(rec.train_loss, {ce, 0, 0, 0, 0, 0, ce}, weight);
        auto g = linear_gradients(batch, model);
        adam_step(model.fc.data, g.weights.data, head_state, lr, config.weight_decay);
        adam_step(model.fc_bias, g.bias, bias_state, lr, config.weight_decay);
        continue;
      }

      accumulate(rec.train_loss, total_loss(batch, model, config.loss), weight);
      auto g = loss_gradients(batch, model, config.loss);
      if (!frozen) {
        auto flat = flatten(model.prototypes);
        adam_step(flat, g.prototypes.data, proto_state, lr, config.weight_decay);
        unflatten(flat, model.prototypes);
        if (train_weights) {
          adam_step(model.weights.raw, g.raw_weights, weight_state, lr, config.weight_decay);
          model.weights.clamp(config.similarity.kind);
        }
      }
      adam_step(model.head.data, g.head.data, head_state, lr, config.weight_decay);
      if (frozen)
        for (double& x : model.head.data) x = std::max(x, 0.0);
    }

    if (is_projection_epoch(epoch, config)) {
      project_prototypes(model, train_set);
      rec.projected = true;
      if (on_projection) on_projection(model, epoch);
    }

    rec.val_loss = validation_loss(model, validation_set, config.loss);
    rec.val_accuracy = evaluate_embedded(model, validation_set).accuracy;
    val_losses.push_back(rec.val_loss);
    lr = lr_schedule(val_losses, lr, schedule);
    result.history.epochs.push_back(rec);
  }
  return result;
}

TrainResult train(const LabeledTexts& train_split, const LabeledTexts& validation_split,
                  const EmbeddingProvider& provider, const TrainConfig& config,
                  const ProjectionCallback& on_projection) {
  config.validate();
  if (train_split.empty()) throw Error(Errc::empty_dataset, "train split is empty");
  if (validation_split.empty()) throw Error(Errc::empty_dataset, "validation split is empty");
  auto train_set = embed_split(train_split, provider);
  auto validation_set = embed_split(validation_split, provider);
  return train_embedded(train_set, validation_set, config, on_projection);
}

Evaluation evaluate_embedded(const PrototypeModel& model, const EmbeddedSplit& split) {
  if (split.size() == 0) throw Error(Errc::empty_dataset, "evaluation split is empty");
  Evaluation ev;
  auto w = model.effective_weights();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < split.size(); ++i) {
    auto fwd = forward(model, w, split.embeddings[i]);
    auto cls = argmax(fwd.logits);
    SamplePrediction p{split.labels[i], static_cast<int>(cls), fwd.probs[cls]};
    if (p.correct()) ++correct;
    ev.predictions.push_back(p);
  }
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(split.size());
  return ev;
}

Evaluation evaluate(const PrototypeModel& model, const EmbeddingProvider& provider, const LabeledTexts& split) {
  if (split.empty()) throw Error(Errc::empty_dataset, "evaluation split is empty");
  return evaluate_embedded(model, embed_split(split, provider));
}

}  // namespace protolex
