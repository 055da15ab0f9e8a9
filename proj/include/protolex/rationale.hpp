#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "protolex/embedding.hpp"
#include "protolex/model.hpp"
#include "protolex/tokenize.hpp"

namespace protolex {

struct RationaleConfig {
  std::size_t n_removals = 10;
  double coverage = 0.75;
  std::size_t top_prototypes = 3;

  void validate() const;
};

struct RemovalStep {
  std::size_t token_index = 0;  // position in the original tokenization
  std::string token;
  double sim_before = 0.0;
  double sim_after = 0.0;

  double drop() const { return sim_before - sim_after; }
};

struct RemovalTrace {
  std::vector<Token> tokens;  // original tokenization
  double initial_similarity = 0.0;
  std::vector<RemovalStep> steps;
  double full_distance = 0.0;  // initial similarity - similarity after the last removal
};

// Greedy word removal: at each of min(n, tokens - 1) steps delete the word
// whose removal lowers the similarity to `reference` the most (lowest index
// on ties). Candidates are re-joined with single spaces and re-embedded.
RemovalTrace token_importance(std::string_view sentence, std::span<const double> reference,
                              const PrototypeModel& model, const EmbeddingProvider& provider, std::size_t n);

// Indices into trace.steps of the selected rationale: the shortest prefix of
// positive drops (sorted descending) that reaches coverage * full_distance;
// the single largest drop when full_distance <= 0.
std::vector<std::size_t> select_rationale(const RemovalTrace& trace, double coverage);

enum class RationaleKind { extractive, abstractive };
std::string_view to_string(RationaleKind kind);

struct Rationale {
  RationaleKind kind = RationaleKind::extractive;
  std::size_t prototype = 0;
  std::optional<std::string> prototype_source;
  std::vector<Token> selected;               // in original order
  std::vector<std::size_t> selected_indices; // token indices, ascending
  double explained_fraction = 0.0;           // selected drops / full distance; 0 when full <= 0
  RemovalTrace trace;
};

Rationale make_rationale(RationaleKind kind, std::size_t prototype, std::optional<std::string> source,
                         RemovalTrace trace, double coverage);

struct ExtractiveResult {
  int predicted = 0;
  std::vector<Contribution> contributions;  // top-k prototypes
  std::vector<Rationale> rationales;        // one per top prototype
  std::vector<Token> tokens;
  std::vector<std::size_t> union_indices;   // ascending
};

ExtractiveResult extract_extractive(std::string_view sample, const PrototypeModel& model,
                                    const EmbeddingProvider& provider, const RationaleConfig& config);

// Words of the prototype's source sentence that matter for its similarity
// to the sample. Throws MissingSourceText for unprojected prototypes.
Rationale extract_abstractive(const PrototypeModel& model, std::size_t prototype,
                              std::span<const double> sample_embedding, const EmbeddingProvider& provider,
                              const RationaleConfig& config);

struct PairedRationale {
  Contribution contribution;
  Rationale extractive;
  Rationale abstractive;
};

struct Explanation {
  std::string text;
  int predicted = 0;
  Vector probs;
  std::vector<Token> tokens;
  std::vector<std::size_t> union_indices;
  std::vector<PairedRationale> prototypes;
};

Explanation explain(std::string_view sample, const PrototypeModel& model, const EmbeddingProvider& provider,
                    const RationaleConfig& config);

nlohmann::json to_json(const Rationale& r);
nlohmann::json to_json(const Explanation& e, const PrototypeModel& model);

}  // namespace protolex
