#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace protolex {

enum class Split { train, validation, test };

std::string_view to_string(Split split);
Split parse_split(std::string_view name);

struct DatasetRecord {
  std::string text;
  int label = 0;
  Split split = Split::train;

  bool operator==(const DatasetRecord&) const = default;
};

enum class DatasetFormat { csv, jsonl };

DatasetFormat parse_dataset_format(std::string_view name);
// By extension: .jsonl/.json -> jsonl, otherwise csv.
DatasetFormat guess_dataset_format(const std::filesystem::path& path);

struct Dataset {
  std::vector<DatasetRecord> records;
  int num_classes = 0;
  std::vector<std::size_t> class_counts;
};

// CSV needs a header with `text` and `label` columns (optional `split`),
// RFC-4180 quoting. JSONL objects need `text` and `label` (optional `split`).
// Labels must cover 0..C-1 without gaps. Throws IoError / SchemaError.
Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format);

// RFC-4180 parsing of a whole document into rows of fields.
std::vector<std::vector<std::string>> parse_csv(std::string_view document);

struct LabeledTexts {
  std::vector<std::string> texts;
  std::vector<int> labels;

  std::size_t size() const { return texts.size(); }
  bool empty() const { return texts.empty(); }
  void push_back(std::string text, int label) {
    texts.push_back(std::move(text));
    labels.push_back(label);
  }
};

LabeledTexts select_split(const Dataset& dataset, Split split);

struct TrainValidation {
  LabeledTexts train;
  LabeledTexts validation;
};

// Uses explicit validation records when present; otherwise moves a seeded
// random `fraction` of the training records (at least one) to validation.
TrainValidation train_validation_split(const Dataset& dataset, double fraction, std::uint64_t seed);

}  // namespace protolex
