#include <cmath>

#include "httplib.h"
#include "json.hpp"
#include "protolex/embedding.hpp"
#include "protolex/error.hpp"
#include "protolex/tokenize.hpp"

namespace protolex {
namespace {

httplib::Client make_client(const std::string& endpoint, std::chrono::milliseconds timeout) {
  httplib::Client client(endpoint);
  if (!client.is_valid()) throw Error(Errc::network, "invalid endpoint '" + endpoint + "'");
  auto sec = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  auto usec = std::chrono::duration_cast<std::chrono::microseconds>(timeout - sec);
  client.set_connection_timeout(sec.count(), usec.count());
  client.set_read_timeout(sec.count(), usec.count());
  client.set_write_timeout(sec.count(), usec.count());
  return client;
}

nlohmann::json parse_body(const httplib::Result& res, const std::string& what) {
  if (!res) throw Error(Errc::network, what + ": " + httplib::to_string(res.error()));
  if (res->status != 200)
    throw Error(Errc::protocol, what + ": HTTP " + std::to_string(res->status) + " " + res->body);
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::protocol, what + ": malformed JSON: " + e.what());
  }
}

std::size_t read_dim(const nlohmann::json& body, const std::string& what) {
  if (!body.contains("dim") || !body["dim"].is_number_integer() || body["dim"].get<long long>() <= 0)
    throw Error(Errc::protocol, what + ": missing or invalid \"dim\"");
  return body["dim"].get<std::size_t>();
}

// Decodes one /embed response; `expected_dim` 0 accepts whatever is advertised.
std::vector<Vector> decode_embeddings(const nlohmann::json& body, std::size_t count, std::size_t expected_dim) {
  const std::string what = "POST /embed";
  if (!body.is_object()) throw Error(Errc::protocol, what + ": response is not an object");
  std::size_t dim = read_dim(body, what);
  if (expected_dim != 0 && dim != expected_dim)
    throw Error(Errc::dim_mismatch, what + ": advertised dim " + std::to_string(dim) + ", expected " +
                                        std::to_string(expected_dim));
  if (!body.contains("embeddings") || !body["embeddings"].is_array())
    throw Error(Errc::protocol, what + ": missing \"embeddings\" array");
  const auto& rows = body["embeddings"];
  if (rows.size() != count)
    throw Error(Errc::protocol, what + ": expected " + std::to_string(count) + " embeddings, got " +
                                    std::to_string(rows.size()));
  std::vector<Vector> out;
  out.reserve(count);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (!row.is_array() || row.size() != dim)
      throw Error(Errc::protocol, what + ": embedding #" + std::to_string(i) + " does not have length " +
                                      std::to_string(dim));
    Vector v;
    v.reserve(dim);
    for (const auto& x : row) {
      if (!x.is_number()) throw Error(Errc::protocol, what + ": non-numeric entry in embedding #" + std::to_string(i));
      double value = x.get<double>();
      if (!std::isfinite(value)) throw Error(Errc::protocol, what + ": non-finite entry");
      v.push_back(value);
    }
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<Vector> post_embed(const std::string& endpoint, std::span<const std::string> texts,
                               std::chrono::milliseconds timeout, std::size_t expected_dim) {
  if (texts.empty()) return {};
  auto client = make_client(endpoint, timeout);
  nlohmann::json request = {{"texts", std::vector<std::string>(texts.begin(), texts.end())}};
  auto res = client.Post("/embed", request.dump(), "application/json");
  auto body = parse_body(res, "POST /embed");
  return decode_embeddings(body, texts.size(), expected_dim);
}

}  // namespace

std::vector<Vector> http_embed(const std::string& endpoint, std::span<const std::string> texts,
                               std::chrono::milliseconds timeout) {
  return post_embed(endpoint, texts, timeout, 0);
}

HttpEmbedder::HttpEmbedder(HttpEmbedderConfig config) : config_(std::move(config)), dim_(config_.expected_dim) {
  if (config_.max_batch == 0) throw Error(Errc::invalid_argument, "max_batch must be positive");
  if (dim_ == 0) dim_ = health();
}

std::size_t HttpEmbedder::dim() const { return dim_; }

std::size_t HttpEmbedder::health() const {
  auto client = make_client(config_.endpoint, config_.timeout);
  auto body = parse_body(client.Get("/health"), "GET /health");
  if (!body.is_object() || body.value("status", "") != "ok")
    throw Error(Errc::protocol, "GET /health: status is not \"ok\"");
  return read_dim(body, "GET /health");
}

Vector HttpEmbedder::embed(std::string_view text) const {
  std::string single(text);
  return embed_batch(std::span<const std::string>(&single, 1)).front();
}

std::vector<Vector> HttpEmbedder::embed_batch(std::span<const std::string> texts) const {
  for (std::size_t i = 0; i < texts.size(); ++i)
    if (tokenize(texts[i]).empty()) throw Error(Errc::empty_text, "text #" + std::to_string(i) + ": no tokens");
  std::vector<Vector> out;
  out.reserve(texts.size());
  for (std::size_t start = 0; start < texts.size(); start += config_.max_batch) {
    auto chunk = texts.subspan(start, std::min(config_.max_batch, texts.size() - start));
    auto part = post_embed(config_.endpoint, chunk, config_.timeout, dim_);
    for (auto& v : part) out.push_back(std::move(v));
  }
  return out;
}

}  // namespace protolex
