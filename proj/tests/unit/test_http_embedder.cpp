#include <atomic>
#include <chrono>
#include <mutex>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "json.hpp"
#include "protolex/embedding.hpp"
#include "support/check.hpp"

using namespace protolex;
using nlohmann::json;

namespace {

// In-process stand-in for the sidecar. `mode` switches between a conforming
// server and specific protocol violations.
class FakeSidecar {
 public:
  enum class Mode { ok, short_row, wrong_count, bad_json, http_error, slow, no_dim };

  explicit FakeSidecar(Mode mode, std::size_t dim = 8) : mode_(mode), dim_(dim), embedder_({dim, 3, true}) {
    server_.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
      json body = {{"status", "ok"}};
      if (mode_ != Mode::no_dim) body["dim"] = dim_;
      res.set_content(body.dump(), "application/json");
    });
    server_.Post("/embed", [this](const httplib::Request& req, httplib::Response& res) { handle(req, res); });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeSidecar() {
    server_.stop();
    thread_.join();
  }

  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }
  std::vector<std::size_t> batch_sizes() const {
    std::lock_guard lock(mutex_);
    return batch_sizes_;
  }

 private:
  void handle(const httplib::Request& req, httplib::Response& res) {
    auto texts = json::parse(req.body).at("texts").get<std::vector<std::string>>();
    {
      std::lock_guard lock(mutex_);
      batch_sizes_.push_back(texts.size());
    }
    json rows = json::array();
    for (const auto& t : texts) rows.push_back(embedder_.embed(t));
    switch (mode_) {
      case Mode::short_row: rows[0].erase(rows[0].size() - 1); break;
      case Mode::wrong_count: rows.erase(rows.size() - 1); break;
      case Mode::bad_json: res.set_content("{\"embeddings\": [", "application/json"); return;
      case Mode::http_error:
        res.status = 500;
        res.set_content("{\"error\": \"inference failed\"}", "application/json");
        return;
      case Mode::slow: std::this_thread::sleep_for(std::chrono::milliseconds(1500)); break;
      default: break;
    }
    json body = {{"embeddings", rows}, {"model", "fake"}};
    if (mode_ != Mode::no_dim) body["dim"] = dim_;
    res.set_content(body.dump(), "application/json");
  }

  Mode mode_;
  std::size_t dim_;
  ReferenceEmbedder embedder_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  mutable std::mutex mutex_;
  std::vector<std::size_t> batch_sizes_;
};

int unused_port() {
  httplib::Server s;
  return s.bind_to_any_port("127.0.0.1");
}

}  // namespace

TEST_CASE("conforming sidecar round trip") {
  FakeSidecar sidecar(FakeSidecar::Mode::ok);
  HttpEmbedder emb({sidecar.endpoint(), std::chrono::milliseconds(2000), 256, 0});
  CHECK(emb.dim() == 8);
  CHECK(emb.health() == 8);
  auto v = emb.embed("hello");
  CHECK(v == embed_reference("hello", {8, 3, true}));
  std::vector<std::string> one{"hello"};
  auto raw = http_embed(sidecar.endpoint(), one, std::chrono::milliseconds(2000));
  REQUIRE(raw.size() == 1);
  CHECK(raw[0].size() == 8);
}

TEST_CASE("batches are chunked and keep request order") {
  FakeSidecar sidecar(FakeSidecar::Mode::ok);
  HttpEmbedder emb({sidecar.endpoint(), std::chrono::milliseconds(2000), 3, 8});
  std::vector<std::string> texts;
  for (int i = 0; i < 8; ++i) texts.push_back("text number " + std::to_string(i));
  auto out = emb.embed_batch(texts);
  REQUIRE(out.size() == 8);
  for (std::size_t i = 0; i < 8; ++i) CHECK(out[i] == embed_reference(texts[i], {8, 3, true}));
  CHECK(sidecar.batch_sizes() == std::vector<std::size_t>{3, 3, 2});
  CHECK(emb.embed_batch({}).empty());
  std::vector<std::string> blank{"ok", " "};
  CHECK_ERRC(emb.embed_batch(blank), Errc::empty_text);
}

TEST_CASE("protocol violations") {
  using Mode = FakeSidecar::Mode;
  const auto timeout = std::chrono::milliseconds(2000);
  std::vector<std::string> texts{"a b", "c d"};
  for (auto mode : {Mode::short_row, Mode::wrong_count, Mode::bad_json, Mode::http_error}) {
    FakeSidecar sidecar(mode);
    CHECK_ERRC(http_embed(sidecar.endpoint(), texts, timeout), Errc::protocol);
  }
  {
    FakeSidecar sidecar(Mode::no_dim);
    CHECK_ERRC(HttpEmbedder({sidecar.endpoint(), timeout, 256, 0}), Errc::protocol);
    CHECK_ERRC(http_embed(sidecar.endpoint(), texts, timeout), Errc::protocol);
  }
  {
    FakeSidecar sidecar(Mode::short_row, 384);
    CHECK_ERRC(http_embed(sidecar.endpoint(), texts, timeout), Errc::protocol);
  }
  {
    FakeSidecar sidecar(Mode::ok, 8);
    HttpEmbedder emb({sidecar.endpoint(), timeout, 256, 16});
    CHECK_ERRC(emb.embed("hello"), Errc::dim_mismatch);
  }
}

TEST_CASE("unreachable endpoint fails within the timeout") {
  const auto timeout = std::chrono::milliseconds(300);
  std::vector<std::string> texts{"hello"};
  auto start = std::chrono::steady_clock::now();
  CHECK_ERRC(http_embed("http://127.0.0.1:" + std::to_string(unused_port()), texts, timeout), Errc::network);
  CHECK_ERRC(HttpEmbedder({"http://127.0.0.1:" + std::to_string(unused_port()), timeout, 256, 0}), Errc::network);
  CHECK(std::chrono::steady_clock::now() - start < std::chrono::seconds(2));
}

TEST_CASE("slow sidecar hits the read timeout") {
  FakeSidecar sidecar(FakeSidecar::Mode::slow);
  std::vector<std::string> texts{"hello"};
  auto start = std::chrono::steady_clock::now();
  CHECK_ERRC(http_embed(sidecar.endpoint(), texts, std::chrono::milliseconds(200)), Errc::network);
  CHECK(std::chrono::steady_clock::now() - start < std::chrono::milliseconds(1400));
}
