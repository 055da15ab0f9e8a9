#include "protolex/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "protolex/error.hpp"

namespace protolex {

std::string_view to_string(HeadMode mode) { return mode == HeadMode::prototype ? "prototype" : "fc_only"; }

HeadMode parse_head_mode(std::string_view name) {
  if (name == "prototype") return HeadMode::prototype;
  if (name == "fc_only") return HeadMode::fc_only;
  throw Error(Errc::invalid_argument, "unknown head mode '" + std::string(name) + "'");
}

PrototypeModel make_model(std::size_t dim, int num_classes, int per_class, SimilarityConfig similarity,
                          std::vector<Prototype> prototypes) {
  PrototypeModel m;
  m.dim = dim;
  m.num_classes = num_classes;
  m.per_class = per_class;
  m.similarity = similarity;
  m.weights = SimilarityWeights::unit(similarity.kind, dim);
  m.prototypes = std::move(prototypes);
  m.head = Matrix(static_cast<std::size_t>(num_classes), m.prototypes.size());
  for (std::size_t j = 0; j < m.prototypes.size(); ++j) {
    const auto& p = m.prototypes[j];
    if (p.vector.size() != dim) throw Error(Errc::shape_mismatch, "prototype dim mismatch");
    if (p.class_id < 0 || p.class_id >= num_classes)
      throw Error(Errc::invalid_argument, "prototype class out of range");
    m.head(static_cast<std::size_t>(p.class_id), j) = 1.0;
  }
  return m;
}

PrototypeModel make_fc_model(std::size_t dim, int num_classes) {
  PrototypeModel m;
  m.dim = dim;
  m.num_classes = num_classes;
  m.per_class = 0;
  m.weights = SimilarityWeights::unit(m.similarity.kind, dim);
  m.head = Matrix(static_cast<std::size_t>(num_classes), 0);
  m.head_mode = HeadMode::fc_only;
  m.fc = Matrix(static_cast<std::size_t>(num_classes), dim);
  m.fc_bias = Vector(static_cast<std::size_t>(num_classes), 0.0);
  return m;
}

Vector softmax(std::span<const double> logits) {
  Vector out(logits.begin(), logits.end());
  if (out.empty()) return out;
  double mx = *std::max_element(out.begin(), out.end());
  double sum = 0.0;
  for (double& x : out) {
    x = std::exp(x - mx);
    sum += x;
  }
  for (double& x : out) x /= sum;
  return out;
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

Vector prototype_similarities(const PrototypeModel& model, std::span<const double> effective_w,
                              std::span<const double> z) {
  Vector sims(model.prototypes.size());
  for (std::size_t j = 0; j < sims.size(); ++j)
    sims[j] = similarity(model.similarity, effective_w, z, model.prototypes[j].vector);
  return sims;
}

ForwardResult forward(const PrototypeModel& model, std::span<const double> effective_w, std::span<const double> z) {
  if (z.size() != model.dim)
    throw Error(Errc::dim_mismatch, "input dim " + std::to_string(z.size()) + ", model dim " +
                                        std::to_string(model.dim));
  ForwardResult r;
  auto C = static_cast<std::size_t>(model.num_classes);
  r.logits.assign(C, 0.0);
  if (model.head_mode == HeadMode::fc_only) {
    for (std::size_t c = 0; c < C; ++c) {
      double acc = model.fc_bias[c];
      auto row = model.fc.row(c);
      for (std::size_t d = 0; d < z.size(); ++d) acc += row[d] * z[d];
      r.logits[c] = acc;
    }
  } else {
    r.sims = prototype_similarities(model, effective_w, z);
    for (std::size_t c = 0; c < C; ++c) {
      double acc = 0.0;
      for (std::size_t j = 0; j < r.sims.size(); ++j) acc += model.head(c, j) * r.sims[j];
      r.logits[c] = acc;
    }
  }
  r.probs = softmax(r.logits);
  return r;
}

ForwardResult forward(const PrototypeModel& model, std::span<const double> z) {
  auto w = model.effective_weights();
  return forward(model, w, z);
}

int predict(const PrototypeModel& model, std::span<const double> z) {
  return static_cast<int>(argmax(forward(model, z).logits));
}

std::vector<Contribution> top_contributing_prototypes(const PrototypeModel& model, std::span<const double> z,
                                                      std::size_t k) {
  if (model.head_mode != HeadMode::prototype)
    throw Error(Errc::invalid_argument, "model has no prototypical layer");
  auto fwd = forward(model, z);
  std::size_t cls = argmax(fwd.logits);
  std::vector<Contribution> all(fwd.sims.size());
  for (std::size_t j = 0; j < all.size(); ++j) all[j] = {j, model.head(cls, j) * fwd.sims[j]};
  std::stable_sort(all.begin(), all.end(),
                   [](const Contribution& a, const Contribution& b) { return a.value > b.value; });
  k = std::clamp<std::size_t>(k, 1, all.size());
  all.resize(std::min(k, all.size()));
  return all;
}

void project_prototypes(PrototypeModel& model, const EmbeddedSplit& train) {
  auto w = model.effective_weights();
  for (auto& proto : model.prototypes) {
    double best = -std::numeric_limits<double>::infinity();
    std::optional<std::size_t> best_index;
    for (std::size_t i = 0; i < train.size(); ++i) {
      if (train.labels[i] != proto.class_id) continue;
      double s = similarity(model.similarity, w, train.embeddings[i], proto.vector);
      if (!best_index || s > best) {
        best = s;
        best_index = i;
      }
    }
    if (!best_index)
      throw Error(Errc::missing_class_samples, "no training samples for class " + std::to_string(proto.class_id));
    proto.vector = train.embeddings[*best_index];
    proto.source_index = *best_index;
    if (*best_index < train.texts.size())
      proto.source_text = train.texts[*best_index];
    else
      proto.source_text.reset();
  }
}

namespace {

nlohmann::json matrix_to_json(const Matrix& m) {
  return {{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}};
}

Matrix matrix_from_json(const nlohmann::json& j) {
  Matrix m;
  m.rows = j.at("rows").get<std::size_t>();
  m.cols = j.at("cols").get<std::size_t>();
  m.data = j.at("data").get<std::vector<double>>();
  if (m.data.size() != m.rows * m.cols) throw Error(Errc::format, "matrix data size does not match shape");
  return m;
}

}  // namespace

nlohmann::json model_to_json(const PrototypeModel& model) {
  nlohmann::json protos = nlohmann::json::array();
  for (const auto& p : model.prototypes) {
    nlohmann::json jp = {{"vector", p.vector}, {"class_id", p.class_id}};
    jp["source_text"] = p.source_text ? nlohmann::json(*p.source_text) : nlohmann::json(nullptr);
    jp["source_index"] = p.source_index ? nlohmann::json(*p.source_index) : nlohmann::json(nullptr);
    protos.push_back(std::move(jp));
  }
  return {
      {"format_version", 1},
      {"dim", model.dim},
      {"num_classes", model.num_classes},
      {"per_class", model.per_class},
      {"sim_kind", to_string(model.similarity.kind)},
      {"mode", to_string(model.similarity.mode)},
      {"raw_sim_weights", model.weights.raw},
      {"prototypes", std::move(protos)},
      {"head", matrix_to_json(model.head)},
      {"head_mode", to_string(model.head_mode)},
      {"fc", matrix_to_json(model.fc)},
      {"fc_bias", model.fc_bias},
      {"config", model.config_echo},
  };
}

PrototypeModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format_version").get<int>() != 1)
      throw Error(Errc::format, "unsupported checkpoint format_version");
    PrototypeModel m;
    m.dim = j.at("dim").get<std::size_t>();
    m.num_classes = j.at("num_classes").get<int>();
    m.per_class = j.at("per_class").get<int>();
    m.similarity.kind = parse_similarity_kind(j.at("sim_kind").get<std::string>());
    m.similarity.mode = parse_l2_mode(j.at("mode").get<std::string>());
    m.weights.raw = j.at("raw_sim_weights").get<Vector>();
    for (const auto& jp : j.at("prototypes")) {
      Prototype p;
      p.vector = jp.at("vector").get<Vector>();
      p.class_id = jp.at("class_id").get<int>();
      if (!jp.at("source_text").is_null()) p.source_text = jp["source_text"].get<std::string>();
      if (!jp.at("source_index").is_null()) p.source_index = jp["source_index"].get<std::size_t>();
      if (p.vector.size() != m.dim) throw Error(Errc::format, "prototype vector length differs from dim");
      m.prototypes.push_back(std::move(p));
    }
    m.head = matrix_from_json(j.at("head"));
    m.head_mode = parse_head_mode(j.value("head_mode", "prototype"));
    if (j.contains("fc")) m.fc = matrix_from_json(j["fc"]);
    if (j.contains("fc_bias")) m.fc_bias = j["fc_bias"].get<Vector>();
    m.config_echo = j.value("config", nlohmann::json::object());
    if (m.weights.raw.size() != m.dim) throw Error(Errc::format, "similarity weight length differs from dim");
    if (m.head.rows != static_cast<std::size_t>(m.num_classes) || m.head.cols != m.prototypes.size())
      throw Error(Errc::format, "head shape does not match classes x prototypes");
    if (m.head_mode == HeadMode::fc_only &&
        (m.fc.rows != static_cast<std::size_t>(m.num_classes) || m.fc.cols != m.dim ||
         m.fc_bias.size() != static_cast<std::size_t>(m.num_classes)))
      throw Error(Errc::format, "fc head shape does not match classes x dim");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::format, std::string("bad checkpoint: ") + e.what());
  }
}

void save_checkpoint(const PrototypeModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::io, "cannot open " + path.string() + " for writing");
  out << model_to_json(model).dump(1) << '\n';
  if (!out) throw Error(Errc::io, "write failed for " + path.string());
}

PrototypeModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::format, path.string() + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace protolex
