#include "protolex/faithfulness.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "protolex/error.hpp"
#include "protolex/hashing.hpp"
#include "protolex/training.hpp"

namespace protolex {
namespace {

std::string keep_tokens(const std::vector<Token>& tokens, std::span<const std::size_t> rationale, bool keep) {
  std::vector<bool> in(tokens.size(), false);
  for (std::size_t idx : rationale) {
    if (idx >= tokens.size()) throw Error(Errc::invalid_argument, "rationale index out of range");
    in[idx] = true;
  }
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (in[i] != keep) continue;
    if (!out.empty()) out.push_back(' ');
    out += tokens[i].text;
  }
  return out;
}

// p(c | full) - p(c | altered), c predicted on the full text.
double probability_drop(const PrototypeModel& model, const EmbeddingProvider& provider, std::string_view sample,
                        const std::string& altered) {
  if (tokenize(altered).empty()) throw Error(Errc::empty_text, "altered text has no tokens");
  auto w = model.effective_weights();
  auto full = forward(model, w, provider.embed(sample));
  auto cls = argmax(full.logits);
  auto part = forward(model, w, provider.embed(altered));
  return full.probs[cls] - part.probs[cls];
}

double percentile(const std::vector<double>& sorted, double p) {
  double pos = p * static_cast<double>(sorted.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(pos));
  auto hi = std::min(lo + 1, sorted.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

double sufficiency(const PrototypeModel& model, const EmbeddingProvider& provider, std::string_view sample,
                   std::span<const std::size_t> rationale) {
  if (rationale.empty()) throw Error(Errc::empty_text, "empty rationale");
  auto tokens = tokenize(sample);
  return probability_drop(model, provider, sample, keep_tokens(tokens, rationale, true));
}

double comprehensiveness(const PrototypeModel& model, const EmbeddingProvider& provider, std::string_view sample,
                         std::span<const std::size_t> rationale) {
  if (rationale.empty()) return 0.0;
  auto tokens = tokenize(sample);
  return probability_drop(model, provider, sample, keep_tokens(tokens, rationale, false));
}

std::vector<Interval> bootstrap_ci_joint(const std::vector<std::vector<double>>& columns, std::size_t folds,
                                         std::uint64_t seed) {
  if (columns.empty()) return {};
  const std::size_t n = columns.front().size();
  if (n == 0) throw Error(Errc::invalid_argument, "bootstrap needs at least one value");
  if (folds == 0) throw Error(Errc::invalid_argument, "bootstrap needs at least one fold");
  for (const auto& col : columns)
    if (col.size() != n) throw Error(Errc::shape_mismatch, "bootstrap columns differ in length");

  std::vector<std::vector<double>> fold_means(columns.size(), std::vector<double>(folds, 0.0));
  SplitMix64 rng(seed);
  std::vector<std::size_t> pick(n);
  for (std::size_t f = 0; f < folds; ++f) {
    for (auto& p : pick) p = rng.below(n);
    for (std::size_t c = 0; c < columns.size(); ++c) {
      double sum = 0.0;
      for (std::size_t p : pick) sum += columns[c][p];
      fold_means[c][f] = sum / static_cast<double>(n);
    }
  }

  std::vector<Interval> out;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    auto& means = fold_means[c];
    std::sort(means.begin(), means.end());
    double mean = std::accumulate(columns[c].begin(), columns[c].end(), 0.0) / static_cast<double>(n);
    out.push_back({mean, percentile(means, 0.025), percentile(means, 0.975)});
  }
  return out;
}

Interval bootstrap_ci(std::span<const double> values, std::size_t folds, std::uint64_t seed) {
  return bootstrap_ci_joint({std::vector<double>(values.begin(), values.end())}, folds, seed).front();
}

FaithfulnessReport faithfulness_eval(const PrototypeModel& model, const EmbeddingProvider& provider,
                                     const LabeledTexts& split, const FaithfulnessOptions& options) {
  if (split.empty()) throw Error(Errc::empty_dataset, "faithfulness split is empty");
  options.rationale.validate();
  FaithfulnessReport report;
  report.folds = options.folds;
  report.seed = options.seed;

  for (std::size_t i = 0; i < split.size(); ++i) {
    const auto& text = split.texts[i];
    try {
      auto ex = extract_extractive(text, model, provider, options.rationale);
      std::vector<std::size_t> rationale = ex.union_indices;
      if (options.source == RationaleSource::random) {
        std::vector<std::size_t> all(ex.tokens.size());
        std::iota(all.begin(), all.end(), 0);
        SplitMix64 rng(options.seed ^ (0x9E3779B97F4A7C15ULL * (i + 1)));
        shuffle(all, rng);
        rationale.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(ex.union_indices.size()));
        std::sort(rationale.begin(), rationale.end());
      }
      SampleFaithfulness s;
      s.index = i;
      s.rationale_size = rationale.size();
      s.comprehensiveness = comprehensiveness(model, provider, text, rationale);
      s.sufficiency = sufficiency(model, provider, text, rationale);
      s.correct = ex.predicted == split.labels[i];
      report.samples.push_back(s);
    } catch (const Error& e) {
      report.excluded += 1;
      report.exclusion_reasons.push_back("sample " + std::to_string(i) + ": " + e.what());
    }
  }
  report.processed = report.samples.size();
  if (report.samples.empty()) throw Error(Errc::empty_dataset, "every sample was excluded");

  std::vector<std::vector<double>> cols(3);
  for (const auto& s : report.samples) {
    cols[0].push_back(100.0 * s.comprehensiveness);
    cols[1].push_back(100.0 * s.sufficiency);
    cols[2].push_back(s.correct ? 100.0 : 0.0);
  }
  auto ci = bootstrap_ci_joint(cols, options.folds, options.seed);
  report.comprehensiveness = ci[0];
  report.sufficiency = ci[1];
  report.accuracy = ci[2];
  return report;
}

nlohmann::json to_json(const FaithfulnessReport& r) {
  auto metric = [](const Interval& i) { return nlohmann::json{{"value", i.mean}, {"ci_low", i.low}, {"ci_high", i.high}}; };
  return {
      {"comprehensiveness_pp", metric(r.comprehensiveness)},
      {"sufficiency_pp", metric(r.sufficiency)},
      {"accuracy_pct", metric(r.accuracy)},
      {"folds", r.folds},
      {"seed", r.seed},
      {"processed", r.processed},
      {"excluded", r.excluded},
      {"exclusion_reasons", r.exclusion_reasons},
  };
}

std::string render_table(const FaithfulnessReport& r) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  auto ci = [](const Interval& i) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << "(" << i.low << ", " << i.high << ")";
    return s.str();
  };
  os << std::left << std::setw(10) << "" << std::right << std::setw(18) << "Comp. (%p)" << std::setw(18)
     << "Suff. (%p)" << std::setw(18) << "Accuracy (%)" << '\n';
  os << std::left << std::setw(10) << "model" << std::right << std::setw(18) << r.comprehensiveness.mean
     << std::setw(18) << r.sufficiency.mean << std::setw(18) << r.accuracy.mean << '\n';
  os << std::left << std::setw(10) << "95%-CI" << std::right << std::setw(18) << ci(r.comprehensiveness)
     << std::setw(18) << ci(r.sufficiency) << std::setw(18) << ci(r.accuracy) << '\n';
  os << "samples: " << r.processed << " processed, " << r.excluded << " excluded; " << r.folds
     << " bootstrap folds, seed " << r.seed << '\n';
  return os.str();
}

double prototype_ablation_eval_embedded(const PrototypeModel& model, const EmbeddedSplit& split, std::size_t k) {
  if (split.size() == 0) throw Error(Errc::empty_dataset, "ablation split is empty");
  if (model.head_mode != HeadMode::prototype) throw Error(Errc::invalid_argument, "model has no prototypes");
  const std::size_t K = model.prototypes.size();
  if (k >= K) throw Error(Errc::invalid_argument, "k must be smaller than the number of prototypes");
  const auto C = static_cast<std::size_t>(model.num_classes);
  auto w = model.effective_weights();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < split.size(); ++i) {
    auto fwd = forward(model, w, split.embeddings[i]);
    std::vector<bool> masked(K, false);
    if (k > 0)
      for (const auto& c : top_contributing_prototypes(model, split.embeddings[i], k)) masked[c.prototype] = true;
    Vector logits(C, 0.0);
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t j = 0; j < K; ++j)
        if (!masked[j]) logits[c] += model.head(c, j) * fwd.sims[j];
    if (static_cast<int>(argmax(logits)) == split.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(split.size());
}

double prototype_ablation_eval(const PrototypeModel& model, const EmbeddingProvider& provider,
                               const LabeledTexts& split, std::size_t k) {
  if (split.empty()) throw Error(Errc::empty_dataset, "ablation split is empty");
  return prototype_ablation_eval_embedded(model, embed_split(split, provider), k);
}

}  // namespace protolex
