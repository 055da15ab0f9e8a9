#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "protolex/dataset.hpp"
#include "protolex/embedding.hpp"
#include "protolex/model.hpp"
#include "protolex/rationale.hpp"

namespace protolex {

// p(c | full text) - p(c | only the rationale words, original order), where c
// is the class predicted on the full text. Throws EmptyText if the
// rationale is empty.
double sufficiency(const PrototypeModel& model, const EmbeddingProvider& provider, std::string_view sample,
                   std::span<const std::size_t> rationale);

// p(c | full text) - p(c | text with the rationale words deleted).
// Throws EmptyText if nothing would remain.
double comprehensiveness(const PrototypeModel& model, const EmbeddingProvider& provider, std::string_view sample,
                         std::span<const std::size_t> rationale);

struct Interval {
  double mean = 0.0;
  double low = 0.0;
  double high = 0.0;

  bool operator==(const Interval&) const = default;
};

// Percentile bootstrap: `folds` resamples with replacement, 2.5/97.5
// percentiles of the fold means (linear interpolation).
Interval bootstrap_ci(std::span<const double> values, std::size_t folds = 1000, std::uint64_t seed = 0);

// Resamples rows once per fold and derives every column from that resample.
std::vector<Interval> bootstrap_ci_joint(const std::vector<std::vector<double>>& columns, std::size_t folds,
                                         std::uint64_t seed);

enum class RationaleSource { extracted, random };

struct FaithfulnessOptions {
  RationaleConfig rationale;
  std::size_t folds = 1000;
  std::uint64_t seed = 0;
  // `random` swaps each extracted union for a seeded random word subset of
  // the same size.
  RationaleSource source = RationaleSource::extracted;
};

struct SampleFaithfulness {
  std::size_t index = 0;
  double comprehensiveness = 0.0;
  double sufficiency = 0.0;
  bool correct = false;
  std::size_t rationale_size = 0;
};

// Metrics are in percentage points / percent.
struct FaithfulnessReport {
  Interval comprehensiveness;
  Interval sufficiency;
  Interval accuracy;
  std::size_t folds = 0;
  std::uint64_t seed = 0;
  std::size_t processed = 0;
  std::size_t excluded = 0;
  std::vector<std::string> exclusion_reasons;
  std::vector<SampleFaithfulness> samples;
};

FaithfulnessReport faithfulness_eval(const PrototypeModel& model, const EmbeddingProvider& provider,
                                     const LabeledTexts& split, const FaithfulnessOptions& options);

nlohmann::json to_json(const FaithfulnessReport& report);
// Point estimates on one row, CIs in parentheses beneath.
std::string render_table(const FaithfulnessReport& report);

// Accuracy after zeroing, per sample, the contributions of its top-k
// prototypes and re-taking the argmax. k = 0 reproduces evaluate().
double prototype_ablation_eval(const PrototypeModel& model, const EmbeddingProvider& provider,
                               const LabeledTexts& split, std::size_t k);
double prototype_ablation_eval_embedded(const PrototypeModel& model, const EmbeddedSplit& split, std::size_t k);

}  // namespace protolex
