#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "protolex/embedding.hpp"
#include "protolex/rationale.hpp"
#include "protolex/training.hpp"

namespace protolex {

enum class ProviderKind { reference, cache, http };

struct ProviderConfig {
  ProviderKind kind = ProviderKind::reference;
  ReferenceEmbedderConfig reference;
  std::string cache_path;
  HttpEmbedderConfig http;
};

// Everything a command needs. Resolution order per field:
// command-line flag, then --config JSON, then these defaults.
struct RunConfig {
  std::string data_path;
  std::string data_format;  // "", "csv" or "jsonl"; "" guesses from the extension
  double val_fraction = 0.1;
  ProviderConfig provider;
  TrainConfig train;
  RationaleConfig rationale;
  std::string output_dir = "out";
  std::uint64_t seed = 0;
  std::size_t folds = 1000;
  int runs = 1;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
};

// Fields missing from `j` keep their value in `config`.
void update_from_json(RunConfig& config, const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& config);

std::unique_ptr<EmbeddingProvider> make_provider(const ProviderConfig& config);

// Entry point of the command-line tool. Returns 0 on success, 1 on usage
// errors and 2 on data or model errors.
int run_command(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace protolex
