#include "protolex/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "protolex/error.hpp"
#include "protolex/hashing.hpp"
#include "protolex/tokenize.hpp"

namespace protolex {
namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int parse_label(std::string_view field, const std::string& where) {
  std::string_view s = field;
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  int value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || value < 0)
    throw Error(Errc::schema, where + ": label '" + std::string(field) + "' is not a non-negative integer");
  return value;
}

void check_text(const std::string& text, const std::string& where) {
  if (tokenize(text).empty()) throw Error(Errc::schema, where + ": text has no tokens");
}

void finalize(Dataset& ds, const std::string& source) {
  if (ds.records.empty()) throw Error(Errc::schema, source + ": no records");
  int max_label = 0;
  for (const auto& r : ds.records) max_label = std::max(max_label, r.label);
  ds.num_classes = max_label + 1;
  ds.class_counts.assign(static_cast<std::size_t>(ds.num_classes), 0);
  for (const auto& r : ds.records) ds.class_counts[static_cast<std::size_t>(r.label)] += 1;
  for (std::size_t c = 0; c < ds.class_counts.size(); ++c)
    if (ds.class_counts[c] == 0)
      throw Error(Errc::schema, source + ": label " + std::to_string(c) + " is missing; labels must be 0.." +
                                    std::to_string(max_label) + " without gaps");
}

Dataset load_csv(const std::filesystem::path& path) {
  auto rows = parse_csv(read_file(path));
  const auto source = path.string();
  if (rows.empty()) throw Error(Errc::schema, source + ": missing header");
  const auto& header = rows.front();
  auto column = [&](std::string_view name) -> std::ptrdiff_t {
    for (std::size_t i = 0; i < header.size(); ++i) {
      std::string_view h = header[i];
      if (i == 0 && h.starts_with("\xEF\xBB\xBF")) h.remove_prefix(3);
      if (h == name) return static_cast<std::ptrdiff_t>(i);
    }
    return -1;
  };
  auto text_col = column("text"), label_col = column("label"), split_col = column("split");
  if (text_col < 0) throw Error(Errc::schema, source + ": header lacks a 'text' column");
  if (label_col < 0) throw Error(Errc::schema, source + ": header lacks a 'label' column");

  Dataset ds;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() == 1 && row[0].empty()) continue;
    auto where = source + ": row " + std::to_string(r + 1);
    if (row.size() != header.size())
      throw Error(Errc::schema, where + ": expected " + std::to_string(header.size()) + " fields, got " +
                                    std::to_string(row.size()));
    DatasetRecord rec;
    rec.text = row[static_cast<std::size_t>(text_col)];
    rec.label = parse_label(row[static_cast<std::size_t>(label_col)], where);
    if (split_col >= 0 && !row[static_cast<std::size_t>(split_col)].empty()) {
      try {
        rec.split = parse_split(row[static_cast<std::size_t>(split_col)]);
      } catch (const Error& e) {
        throw Error(Errc::schema, where + ": " + e.what());
      }
    }
    check_text(rec.text, where);
    ds.records.push_back(std::move(rec));
  }
  finalize(ds, source);
  return ds;
}

Dataset load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  const auto source = path.string();
  Dataset ds;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto where = source + ":" + std::to_string(lineno);
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(Errc::schema, where + ": " + e.what());
    }
    if (!obj.is_object() || !obj.contains("text") || !obj["text"].is_string())
      throw Error(Errc::schema, where + ": missing string field 'text'");
    if (!obj.contains("label")) throw Error(Errc::schema, where + ": missing field 'label'");
    DatasetRecord rec;
    rec.text = obj["text"].get<std::string>();
    const auto& label = obj["label"];
    if (label.is_number_integer() && label.get<long long>() >= 0 && label.get<long long>() <= INT32_MAX)
      rec.label = label.get<int>();
    else if (label.is_string())
      rec.label = parse_label(label.get<std::string>(), where);
    else
      throw Error(Errc::schema, where + ": label is not a non-negative integer");
    if (obj.contains("split")) {
      if (!obj["split"].is_string()) throw Error(Errc::schema, where + ": split must be a string");
      try {
        rec.split = parse_split(obj["split"].get<std::string>());
      } catch (const Error& e) {
        throw Error(Errc::schema, where + ": " + e.what());
      }
    }
    check_text(rec.text, where);
    ds.records.push_back(std::move(rec));
  }
  finalize(ds, source);
  return ds;
}

}  // namespace

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "?";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "validation" || name == "val" || name == "dev") return Split::validation;
  if (name == "test") return Split::test;
  throw Error(Errc::invalid_argument, "unknown split '" + std::string(name) + "'");
}

DatasetFormat parse_dataset_format(std::string_view name) {
  if (name == "csv") return DatasetFormat::csv;
  if (name == "jsonl") return DatasetFormat::jsonl;
  throw Error(Errc::invalid_argument, "unknown dataset format '" + std::string(name) + "'");
}

DatasetFormat guess_dataset_format(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  return (ext == ".jsonl" || ext == ".json") ? DatasetFormat::jsonl : DatasetFormat::csv;
}

std::vector<std::vector<std::string>> parse_csv(std::string_view doc) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool any = false;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    char c = doc[i];
    any = true;
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < doc.size() && doc[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < doc.size() && doc[i + 1] == '\n') ++i;
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else {
      field.push_back(c);
    }
  }
  if (in_quotes) throw Error(Errc::schema, "unterminated quoted CSV field");
  if (any) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format) {
  if (!std::filesystem::exists(path)) throw Error(Errc::io, "no such file: " + path.string());
  return format == DatasetFormat::csv ? load_csv(path) : load_jsonl(path);
}

LabeledTexts select_split(const Dataset& dataset, Split split) {
  LabeledTexts out;
  for (const auto& r : dataset.records)
    if (r.split == split) out.push_back(r.text, r.label);
  return out;
}

TrainValidation train_validation_split(const Dataset& dataset, double fraction, std::uint64_t seed) {
  TrainValidation tv;
  tv.train = select_split(dataset, Split::train);
  tv.validation = select_split(dataset, Split::validation);
  if (!tv.validation.empty() || tv.train.size() < 2) return tv;

  std::vector<std::size_t> order(tv.train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  SplitMix64 rng(seed);
  shuffle(order, rng);
  auto n_val = static_cast<std::size_t>(fraction * static_cast<double>(order.size()));
  n_val = std::clamp<std::size_t>(n_val, 1, order.size() - 1);
  std::vector<bool> is_val(order.size(), false);
  for (std::size_t i = 0; i < n_val; ++i) is_val[order[i]] = true;

  LabeledTexts train;
  for (std::size_t i = 0; i < tv.train.size(); ++i) {
    if (is_val[i])
      tv.validation.push_back(tv.train.texts[i], tv.train.labels[i]);
    else
      train.push_back(tv.train.texts[i], tv.train.labels[i]);
  }
  tv.train = std::move(train);
  return tv;
}

}  // namespace protolex
