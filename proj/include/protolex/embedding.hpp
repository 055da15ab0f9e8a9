#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace protolex {

using Vector = std::vector<double>;

// Uniform contract for sentence encoders. Implementations are read-only
// after construction and may be queried concurrently.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual std::size_t dim() const = 0;
  virtual Vector embed(std::string_view text) const = 0;

  // Element i is the embedding of texts[i]. The default forwards to embed()
  // and tags failures with the offending index.
  virtual std::vector<Vector> embed_batch(std::span<const std::string> texts) const;
};

struct ReferenceEmbedderConfig {
  std::size_t dim = 64;
  std::uint64_t seed = 0;
  bool use_bigrams = true;
};

// Hashed n-gram random projection: every lowercase unigram (and adjacent
// bigram) seeds a splitmix64 stream that emits dim centered sums of four
// uniforms; features are summed and the result is l2-normalized.
Vector embed_reference(std::string_view text, const ReferenceEmbedderConfig& config);

class ReferenceEmbedder final : public EmbeddingProvider {
 public:
  explicit ReferenceEmbedder(ReferenceEmbedderConfig config = {});

  std::size_t dim() const override { return config_.dim; }
  Vector embed(std::string_view text) const override;

  const ReferenceEmbedderConfig& config() const { return config_; }

 private:
  ReferenceEmbedderConfig config_;
};

// Exact-text keyed store of precomputed vectors.
class EmbeddingCache {
 public:
  explicit EmbeddingCache(std::size_t dim = 0) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  // Throws DimMismatch when the vector length disagrees with dim (the first
  // insert fixes dim if it was 0).
  void insert(std::string text, Vector embedding);
  bool contains(std::string_view text) const;
  // Throws CacheMiss.
  const Vector& at(std::string_view text) const;

  const std::map<std::string, Vector, std::less<>>& entries() const { return entries_; }

  bool operator==(const EmbeddingCache&) const = default;

 private:
  std::size_t dim_;
  std::map<std::string, Vector, std::less<>> entries_;
};

// JSON Lines: {"text": ..., "embedding": [...]} per line.
void cache_store(const EmbeddingCache& cache, const std::filesystem::path& path);
EmbeddingCache cache_load(const std::filesystem::path& path);

// Keys are trimmed of surrounding whitespace before lookup.
class CachedEmbedder final : public EmbeddingProvider {
 public:
  explicit CachedEmbedder(EmbeddingCache cache);

  std::size_t dim() const override { return cache_.dim(); }
  Vector embed(std::string_view text) const override;

 private:
  EmbeddingCache cache_;
};

std::string_view trim(std::string_view text);

struct HttpEmbedderConfig {
  std::string endpoint;  // e.g. "http://127.0.0.1:8080"
  std::chrono::milliseconds timeout{10000};
  std::size_t max_batch = 256;
  // 0 = ask GET /health on first use.
  std::size_t expected_dim = 0;
};

// Client for the sidecar wire protocol:
//   POST /embed  {"texts": [...]} -> {"embeddings": [[...]], "dim": d, "model": m}
//   GET /health  -> {"status": "ok", "dim": d}
class HttpEmbedder final : public EmbeddingProvider {
 public:
  explicit HttpEmbedder(HttpEmbedderConfig config);

  std::size_t dim() const override;
  Vector embed(std::string_view text) const override;
  std::vector<Vector> embed_batch(std::span<const std::string> texts) const override;

  // Raw health probe; returns the advertised dim.
  std::size_t health() const;

 private:
  HttpEmbedderConfig config_;
  std::size_t dim_;
};

std::vector<Vector> http_embed(const std::string& endpoint, std::span<const std::string> texts,
                               std::chrono::milliseconds timeout);

}  // namespace protolex
