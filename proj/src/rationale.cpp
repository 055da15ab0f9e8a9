#include "protolex/rationale.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "protolex/error.hpp"

namespace protolex {

void RationaleConfig::validate() const {
  if (n_removals < 1) throw Error(Errc::invalid_argument, "n_removals must be >= 1");
  if (!(coverage >= 0.0 && coverage <= 1.0)) throw Error(Errc::invalid_argument, "coverage must lie in [0, 1]");
  if (top_prototypes < 1) throw Error(Errc::invalid_argument, "top_prototypes must be >= 1");
}

std::string_view to_string(RationaleKind kind) {
  return kind == RationaleKind::extractive ? "extractive" : "abstractive";
}

RemovalTrace token_importance(std::string_view sentence, std::span<const double> reference,
                              const PrototypeModel& model, const EmbeddingProvider& provider, std::size_t n) {
  RemovalTrace trace;
  trace.tokens = tokenize(sentence);
  if (trace.tokens.empty()) throw Error(Errc::empty_text, "no tokens in sentence");
  if (reference.size() != model.dim) throw Error(Errc::dim_mismatch, "reference dim differs from model dim");

  const auto w = model.effective_weights();
  auto sim_to_reference = [&](std::span<const double> z) { return similarity(model.similarity, w, z, reference); };

  trace.initial_similarity = sim_to_reference(provider.embed(sentence));
  double current = trace.initial_similarity;

  std::vector<std::size_t> remaining(trace.tokens.size());
  std::iota(remaining.begin(), remaining.end(), 0);
  const std::size_t steps = std::min(n, trace.tokens.size() - 1);

  for (std::size_t step = 0; step < steps; ++step) {
    std::vector<std::string> candidates;
    candidates.reserve(remaining.size());
    for (std::size_t drop = 0; drop < remaining.size(); ++drop) {
      std::string text;
      for (std::size_t r = 0; r < remaining.size(); ++r) {
        if (r == drop) continue;
        if (!text.empty()) text.push_back(' ');
        text += trace.tokens[remaining[r]].text;
      }
      candidates.push_back(std::move(text));
    }
    auto embeddings = provider.embed_batch(candidates);

    // remaining is kept in ascending original order, so the first minimum is
    // also the lowest token index.
    std::size_t best = 0;
    double best_sim = sim_to_reference(embeddings[0]);
    for (std::size_t c = 1; c < embeddings.size(); ++c) {
      double s = sim_to_reference(embeddings[c]);
      if (s < best_sim) {
        best_sim = s;
        best = c;
      }
    }
    std::size_t token_index = remaining[best];
    trace.steps.push_back({token_index, trace.tokens[token_index].text, current, best_sim});
    current = best_sim;
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(best));
  }
  trace.full_distance = trace.initial_similarity - current;
  return trace;
}

std::vector<std::size_t> select_rationale(const RemovalTrace& trace, double coverage) {
  const auto& steps = trace.steps;
  if (steps.empty()) return {};
  std::vector<std::size_t> order(steps.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return steps[a].drop() > steps[b].drop(); });

  if (trace.full_distance <= 0.0) return {order.front()};

  // Telescoped drops and full_distance can disagree in the last ulp.
  constexpr double kSlack = 1e-12;
  const double target = coverage * trace.full_distance;
  std::vector<std::size_t> selected;
  double sum = 0.0;
  for (std::size_t idx : order) {
    if (steps[idx].drop() <= 0.0) break;
    selected.push_back(idx);
    sum += steps[idx].drop();
    if (sum + kSlack >= target) break;
  }
  if (selected.empty()) selected.push_back(order.front());
  return selected;
}

Rationale make_rationale(RationaleKind kind, std::size_t prototype, std::optional<std::string> source,
                         RemovalTrace trace, double coverage) {
  Rationale r;
  r.kind = kind;
  r.prototype = prototype;
  r.prototype_source = std::move(source);
  auto chosen = select_rationale(trace, coverage);
  double explained = 0.0;
  for (std::size_t s : chosen) {
    r.selected_indices.push_back(trace.steps[s].token_index);
    explained += trace.steps[s].drop();
  }
  std::sort(r.selected_indices.begin(), r.selected_indices.end());
  for (std::size_t idx : r.selected_indices) r.selected.push_back(trace.tokens[idx]);
  r.explained_fraction = trace.full_distance > 0.0 ? explained / trace.full_distance : 0.0;
  r.trace = std::move(trace);
  return r;
}

ExtractiveResult extract_extractive(std::string_view sample, const PrototypeModel& model,
                                    const EmbeddingProvider& provider, const RationaleConfig& config) {
  config.validate();
  if (model.head_mode != HeadMode::prototype || model.prototypes.empty())
    throw Error(Errc::invalid_argument, "rationales need a model with prototypes");
  ExtractiveResult out;
  out.tokens = tokenize(sample);
  if (out.tokens.empty()) throw Error(Errc::empty_text, "no tokens in sample");
  auto z = provider.embed(sample);
  out.predicted = predict(model, z);
  out.contributions = top_contributing_prototypes(model, z, config.top_prototypes);

  std::set<std::size_t> merged;
  for (const auto& c : out.contributions) {
    const auto& proto = model.prototypes[c.prototype];
    auto trace = token_importance(sample, proto.vector, model, provider, config.n_removals);
    auto r = make_rationale(RationaleKind::extractive, c.prototype, proto.source_text, std::move(trace),
                            config.coverage);
    merged.insert(r.selected_indices.begin(), r.selected_indices.end());
    out.rationales.push_back(std::move(r));
  }
  out.union_indices.assign(merged.begin(), merged.end());
  return out;
}

Rationale extract_abstractive(const PrototypeModel& model, std::size_t prototype,
                              std::span<const double> sample_embedding, const EmbeddingProvider& provider,
                              const RationaleConfig& config) {
  config.validate();
  if (prototype >= model.prototypes.size()) throw Error(Errc::invalid_argument, "prototype index out of range");
  const auto& proto = model.prototypes[prototype];
  if (!proto.source_text)
    throw Error(Errc::missing_source_text, "prototype " + std::to_string(prototype) + " was never projected");
  auto trace = token_importance(*proto.source_text, sample_embedding, model, provider, config.n_removals);
  return make_rationale(RationaleKind::abstractive, prototype, proto.source_text, std::move(trace), config.coverage);
}

Explanation explain(std::string_view sample, const PrototypeModel& model, const EmbeddingProvider& provider,
                    const RationaleConfig& config) {
  auto extractive = extract_extractive(sample, model, provider, config);
  Explanation e;
  e.text = std::string(sample);
  auto z = provider.embed(sample);
  e.probs = forward(model, z).probs;
  e.predicted = extractive.predicted;
  e.tokens = extractive.tokens;
  e.union_indices = extractive.union_indices;
  for (std::size_t i = 0; i < extractive.contributions.size(); ++i) {
    const auto& c = extractive.contributions[i];
    PairedRationale pair{c, std::move(extractive.rationales[i]), {}};
    pair.abstractive = extract_abstractive(model, c.prototype, z, provider, config);
    e.prototypes.push_back(std::move(pair));
  }
  return e;
}

namespace {

nlohmann::json spans_json(const std::vector<Token>& tokens) {
  auto arr = nlohmann::json::array();
  for (const auto& t : tokens) arr.push_back({{"token", t.text}, {"begin", t.begin}, {"end", t.end}});
  return arr;
}

}  // namespace

nlohmann::json to_json(const Rationale& r) {
  auto steps = nlohmann::json::array();
  for (const auto& s : r.trace.steps)
    steps.push_back({{"token_index", s.token_index},
                     {"token", s.token},
                     {"sim_before", s.sim_before},
                     {"sim_after", s.sim_after}});
  return {
      {"kind", to_string(r.kind)},
      {"prototype", r.prototype},
      {"spans", spans_json(r.selected)},
      {"explained_fraction", r.explained_fraction},
      {"full_distance", r.trace.full_distance},
      {"trace", std::move(steps)},
  };
}

nlohmann::json to_json(const Explanation& e, const PrototypeModel& model) {
  auto protos = nlohmann::json::array();
  for (const auto& p : e.prototypes) {
    const auto& proto = model.prototypes[p.contribution.prototype];
    protos.push_back({
        {"prototype", p.contribution.prototype},
        {"prototype_class", proto.class_id},
        {"contribution", p.contribution.value},
        {"extractive", to_json(p.extractive)},
        {"prototype_source_text", proto.source_text ? nlohmann::json(*proto.source_text) : nlohmann::json(nullptr)},
        {"abstractive", to_json(p.abstractive)},
    });
  }
  std::vector<Token> union_tokens;
  for (auto idx : e.union_indices) union_tokens.push_back(e.tokens[idx]);
  return {
      {"text", e.text},
      {"predicted_class", e.predicted},
      {"probabilities", e.probs},
      {"rationale_union", spans_json(union_tokens)},
      {"prototypes", std::move(protos)},
  };
}

}  // namespace protolex
