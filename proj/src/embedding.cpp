#include "protolex/embedding.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"
#include "protolex/error.hpp"
#include "protolex/hashing.hpp"
#include "protolex/tokenize.hpp"

namespace protolex {
namespace {

void add_feature(std::string_view feature, const ReferenceEmbedderConfig& config, Vector& acc) {
  SplitMix64 rng(fnv1a64(feature) ^ config.seed);
  for (std::size_t d = 0; d < config.dim; ++d) {
    double sum = rng.uniform() + rng.uniform() + rng.uniform() + rng.uniform();
    acc[d] += sum - 2.0;
  }
}

bool all_finite(const Vector& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace

std::vector<Vector> EmbeddingProvider::embed_batch(std::span<const std::string> texts) const {
  std::vector<Vector> out;
  out.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    try {
      out.push_back(embed(texts[i]));
    } catch (const Error& e) {
      throw Error(e.code(), "text #" + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

Vector embed_reference(std::string_view text, const ReferenceEmbedderConfig& config) {
  if (config.dim == 0) throw Error(Errc::invalid_argument, "embedding dim must be positive");
  auto tokens = tokenize(text);
  if (tokens.empty()) throw Error(Errc::empty_text, "no tokens in input text");

  std::vector<std::string> words;
  words.reserve(tokens.size());
  for (const auto& t : tokens) words.push_back(ascii_lower(t.text));

  Vector acc(config.dim, 0.0);
  for (const auto& w : words) add_feature(w, config, acc);
  if (config.use_bigrams) {
    for (std::size_t i = 0; i + 1 < words.size(); ++i)
      add_feature(words[i] + " " + words[i + 1], config, acc);
  }

  double norm2 = 0.0;
  for (double x : acc) norm2 += x * x;
  double norm = std::sqrt(norm2);
  // A sum of centered uniforms is zero only on a measure-zero event; keep the
  // raw vector rather than dividing by zero.
  if (norm > 0.0)
    for (double& x : acc) x /= norm;
  return acc;
}

ReferenceEmbedder::ReferenceEmbedder(ReferenceEmbedderConfig config) : config_(config) {
  if (config_.dim == 0) throw Error(Errc::invalid_argument, "embedding dim must be positive");
}

Vector ReferenceEmbedder::embed(std::string_view text) const { return embed_reference(text, config_); }

void EmbeddingCache::insert(std::string text, Vector embedding) {
  if (embedding.empty()) throw Error(Errc::dim_mismatch, "empty embedding for '" + text + "'");
  if (dim_ == 0) dim_ = embedding.size();
  if (embedding.size() != dim_)
    throw Error(Errc::dim_mismatch, "expected dim " + std::to_string(dim_) + ", got " +
                                        std::to_string(embedding.size()));
  if (!all_finite(embedding)) throw Error(Errc::format, "non-finite embedding for '" + text + "'");
  entries_.insert_or_assign(std::move(text), std::move(embedding));
}

bool EmbeddingCache::contains(std::string_view text) const { return entries_.find(text) != entries_.end(); }

const Vector& EmbeddingCache::at(std::string_view text) const {
  auto it = entries_.find(text);
  if (it == entries_.end()) throw Error(Errc::cache_miss, "no cached embedding for '" + std::string(text) + "'");
  return it->second;
}

void cache_store(const EmbeddingCache& cache, const std::filesystem::path& path) {
  if (cache.empty()) throw Error(Errc::invalid_argument, "refusing to store an empty cache");
  std::ofstream out(path);
  if (!out) throw Error(Errc::io, "cannot open " + path.string() + " for writing");
  for (const auto& [text, vec] : cache.entries()) {
    nlohmann::json line = {{"text", text}, {"embedding", vec}};
    out << line.dump() << '\n';
  }
  if (!out) throw Error(Errc::io, "write failed for " + path.string());
}

EmbeddingCache cache_load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  EmbeddingCache cache;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto where = path.string() + ":" + std::to_string(lineno);
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(Errc::format, where + ": " + e.what());
    }
    if (!obj.is_object() || !obj.contains("text") || !obj["text"].is_string() ||
        !obj.contains("embedding") || !obj["embedding"].is_array())
      throw Error(Errc::format, where + ": expected {\"text\": string, \"embedding\": [numbers]}");
    Vector vec;
    for (const auto& x : obj["embedding"]) {
      if (!x.is_number()) throw Error(Errc::format, where + ": non-numeric embedding entry");
      vec.push_back(x.get<double>());
    }
    try {
      cache.insert(obj["text"].get<std::string>(), std::move(vec));
    } catch (const Error& e) {
      throw Error(Errc::format, where + ": " + e.what());
    }
  }
  return cache;
}

std::string_view trim(std::string_view text) {
  auto is_ws = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
  while (!text.empty() && is_ws(text.front())) text.remove_prefix(1);
  while (!text.empty() && is_ws(text.back())) text.remove_suffix(1);
  return text;
}

CachedEmbedder::CachedEmbedder(EmbeddingCache cache) : cache_(std::move(cache)) {
  if (cache_.empty()) throw Error(Errc::invalid_argument, "cache is empty");
}

Vector CachedEmbedder::embed(std::string_view text) const {
  auto key = trim(text);
  if (tokenize(key).empty()) throw Error(Errc::empty_text, "no tokens in input text");
  return cache_.at(key);
}

}  // namespace protolex
