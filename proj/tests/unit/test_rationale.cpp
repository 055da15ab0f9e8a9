#include <set>

#include "doctest.h"
#include "protolex/hashing.hpp"
#include "protolex/rationale.hpp"
#include "support/check.hpp"
#include "support/rationale_oracle.hpp"
#include "support/toy_model.hpp"

using namespace protolex;
using protolex::testing::toy_model;

namespace {

RemovalTrace synthetic_trace(const std::vector<double>& drops) {
  RemovalTrace t;
  double sim = 1.0;
  t.initial_similarity = sim;
  for (std::size_t i = 0; i < drops.size(); ++i) {
    t.tokens.push_back({"w" + std::to_string(i), 3 * i, 3 * i + 2});
    t.steps.push_back({i, "w" + std::to_string(i), sim, sim - drops[i]});
    sim -= drops[i];
  }
  t.tokens.push_back({"last", 3 * drops.size(), 3 * drops.size() + 4});
  t.full_distance = t.initial_similarity - sim;
  return t;
}

std::vector<std::size_t> sorted(std::vector<std::size_t> v) {
  std::sort(v.begin(), v.end());
  return v;
}

PrototypeModel unit_model(SimilarityKind kind, std::size_t dim) {
  std::vector<Prototype> ps{{Vector(dim, 1.0), 0, std::nullopt, std::nullopt}};
  return make_model(dim, 1, 1, {kind, L2Mode::corrected}, ps);
}

std::string random_sentence(SplitMix64& rng, std::size_t words) {
  static const char* vocab[] = {"aa", "bb", "cc", "dd", "ee", "ff", "gg", "hh", "good", "bad", "plot", "cast"};
  std::string s;
  for (std::size_t i = 0; i < words; ++i) {
    if (i) s += ' ';
    s += vocab[rng.below(12)];
  }
  return s;
}

}  // namespace

TEST_CASE("select_rationale examples") {
  auto t = synthetic_trace({0.5, 0.3, 0.1, 0.1});
  CHECK(t.full_distance == doctest::Approx(1.0));
  CHECK(sorted(select_rationale(t, 0.75)) == std::vector<std::size_t>{0, 1});
  CHECK(select_rationale(t, 0.0) == std::vector<std::size_t>{0});
  CHECK(sorted(select_rationale(t, 1.0)) == std::vector<std::size_t>{0, 1, 2, 3});
  // Drops are ranked, not taken in removal order.
  auto late = synthetic_trace({0.1, 0.2, 0.6});
  CHECK(select_rationale(late, 0.5) == std::vector<std::size_t>{2});
  // Negative drops are skipped.
  auto neg = synthetic_trace({0.4, -0.2, 0.6});
  CHECK(sorted(select_rationale(neg, 1.0)) == std::vector<std::size_t>{0, 2});
  // Non-positive full distance falls back to the largest drop.
  auto down = synthetic_trace({-0.1, 0.05, -0.2});
  CHECK(down.full_distance < 0);
  CHECK(select_rationale(down, 0.75) == std::vector<std::size_t>{1});
  CHECK(select_rationale(RemovalTrace{}, 0.75).empty());
}

TEST_CASE("make_rationale bookkeeping") {
  auto r = make_rationale(RationaleKind::extractive, 2, "src", synthetic_trace({0.5, 0.3, 0.1, 0.1}), 0.75);
  CHECK(r.selected_indices == std::vector<std::size_t>{0, 1});
  CHECK(r.selected.size() == 2);
  CHECK(r.selected[1].text == "w1");
  CHECK(r.explained_fraction == doctest::Approx(0.8));
  CHECK(testing::coverage_holds(r, 0.75));
  auto down = make_rationale(RationaleKind::extractive, 0, {}, synthetic_trace({-0.1, -0.2}), 0.75);
  CHECK(down.explained_fraction == 0.0);
  CHECK(down.selected_indices == std::vector<std::size_t>{0});
}

TEST_CASE("token_importance examples") {
  ReferenceEmbedder emb;
  auto m = unit_model(SimilarityKind::cosine, 64);
  auto single = token_importance("word", emb.embed("other"), m, emb, 10);
  CHECK(single.steps.empty());
  CHECK(single.full_distance == 0.0);
  CHECK_ERRC(token_importance(" . ", emb.embed("other"), m, emb, 10), Errc::empty_text);
  CHECK_ERRC(token_importance("a b", Vector(3, 1.0), m, emb, 10), Errc::dim_mismatch);

  auto ref = emb.embed("aa");
  auto t = token_importance("aa bb cc", ref, m, emb, 10);
  CHECK(t.steps.size() == 2);
  CHECK(testing::verify_trace(t, ref, m, {}) == "");
  // Deleting "aa" is the only way to lose the shared feature.
  CHECK(t.steps[0].token == "aa");
}

TEST_CASE("greedy traces match exhaustive scans") {
  ReferenceEmbedder emb;
  SplitMix64 rng(31);
  for (auto kind : {SimilarityKind::cosine, SimilarityKind::weighted_cosine, SimilarityKind::l2,
                    SimilarityKind::weighted_l2}) {
    auto m = unit_model(kind, 64);
    for (double& r : m.weights.raw) r = rng.uniform() * 2.0 - 0.5;
    m.weights.raw[0] = 1.0;
    m.weights.clamp(kind);
    for (int rep = 0; rep < 15; ++rep) {
      auto sentence = random_sentence(rng, 1 + rng.below(12));
      auto ref = emb.embed(random_sentence(rng, 1 + rng.below(6)));
      std::size_t n = 1 + rng.below(12);
      auto t = token_importance(sentence, ref, m, emb, n);
      CHECK(t.steps.size() <= n);
      CHECK(t.steps.size() == std::min(n, t.tokens.size() - 1));
      CHECK_MESSAGE(testing::verify_trace(t, ref, m, {}) == "", sentence);
      auto r = make_rationale(RationaleKind::extractive, 0, {}, t, 0.75);
      CHECK(testing::coverage_holds(r, 0.75));
      CHECK(token_importance(sentence, ref, m, emb, n).steps.size() == t.steps.size());
    }
  }
}

TEST_CASE("selected prefix is minimal") {
  SplitMix64 rng(32);
  for (int rep = 0; rep < 500; ++rep) {
    std::vector<double> drops(1 + rng.below(10));
    for (double& d : drops) d = rng.uniform() - 0.2;
    auto t = synthetic_trace(drops);
    double q = rng.uniform();
    auto sel = select_rationale(t, q);
    REQUIRE_FALSE(sel.empty());
    if (t.full_distance <= 0) {
      CHECK(sel.size() == 1);
      continue;
    }
    double sum = 0, smallest = INFINITY;
    for (auto i : sel) {
      sum += drops[i];
      smallest = std::min(smallest, drops[i]);
      CHECK(drops[i] > 0);
    }
    CHECK(sum >= q * t.full_distance - 1e-12);
    // Dropping the weakest member falls short, and no unselected drop beats it.
    CHECK(sum - smallest < q * t.full_distance);
    for (std::size_t i = 0; i < drops.size(); ++i)
      if (std::find(sel.begin(), sel.end(), i) == sel.end()) CHECK(drops[i] <= smallest);
  }
}

TEST_CASE("extractive rationales on the toy model") {
  const auto& toy = toy_model();
  RationaleConfig cfg;
  cfg.top_prototypes = 1;
  const auto& sample = toy.corpus.held_out[0];
  auto one = extract_extractive(sample.text, toy.model(), toy.embedder, cfg);
  CHECK(one.rationales.size() == 1);
  CHECK(one.contributions.size() == 1);

  cfg.top_prototypes = 3;
  auto three = extract_extractive(sample.text, toy.model(), toy.embedder, cfg);
  REQUIRE(three.rationales.size() == 3);
  std::set<std::size_t> merged;
  for (const auto& r : three.rationales) {
    auto ref = toy.model().prototypes[r.prototype].vector;
    CHECK(testing::verify_trace(r.trace, ref, toy.model(), {}) == "");
    CHECK(testing::coverage_holds(r, cfg.coverage));
    CHECK(r.prototype_source == toy.model().prototypes[r.prototype].source_text);
    merged.insert(r.selected_indices.begin(), r.selected_indices.end());
  }
  CHECK(std::vector<std::size_t>(merged.begin(), merged.end()) == three.union_indices);
  CHECK(three.predicted == predict(toy.model(), toy.embedder.embed(sample.text)));

  // Determinism.
  auto again = extract_extractive(sample.text, toy.model(), toy.embedder, cfg);
  CHECK(again.union_indices == three.union_indices);
  CHECK_ERRC(extract_extractive("  ", toy.model(), toy.embedder, cfg), Errc::empty_text);
}

TEST_CASE("class keyword drives the extractive rationale") {
  const auto& toy = toy_model();
  RationaleConfig cfg;
  std::size_t correct = 0, hits = 0;
  for (std::size_t i = 0; i < 100; ++i) {
    const auto& s = toy.corpus.held_out[i];
    auto r = extract_extractive(s.text, toy.model(), toy.embedder, cfg);
    if (r.predicted != s.label) continue;
    ++correct;
    if (std::find(r.union_indices.begin(), r.union_indices.end(), s.keyword_position) != r.union_indices.end()) ++hits;
  }
  REQUIRE(correct > 0);
  CHECK(static_cast<double>(hits) >= 0.9 * static_cast<double>(correct));
}

TEST_CASE("abstractive rationales") {
  const auto& toy = toy_model();
  RationaleConfig cfg;
  auto unprojected = toy.model();
  unprojected.prototypes[0].source_text.reset();
  auto z = toy.embedder.embed("a dreadful film");
  CHECK_ERRC(extract_abstractive(unprojected, 0, z, toy.embedder, cfg), Errc::missing_source_text);

  auto r = extract_abstractive(toy.model(), 3, z, toy.embedder, cfg);
  CHECK(r.kind == RationaleKind::abstractive);
  CHECK(testing::verify_trace(r.trace, z, toy.model(), {}) == "");
  CHECK(join_tokens(r.trace.tokens) == *toy.model().prototypes[3].source_text);

  // A prototype whose source is the sample mirrors the extractive trace.
  auto mirror = toy.model();
  std::string text = "the dreadful river";
  mirror.prototypes[0].source_text = text;
  mirror.prototypes[0].vector = toy.embedder.embed(text);
  auto abs = extract_abstractive(mirror, 0, toy.embedder.embed(text), toy.embedder, cfg);
  auto ext = token_importance(text, mirror.prototypes[0].vector, mirror, toy.embedder, cfg.n_removals);
  REQUIRE(abs.trace.steps.size() == ext.steps.size());
  for (std::size_t i = 0; i < ext.steps.size(); ++i) {
    CHECK(abs.trace.steps[i].token_index == ext.steps[i].token_index);
    CHECK(abs.trace.steps[i].sim_after == ext.steps[i].sim_after);
  }

  mirror.prototypes[1].source_text = "alone";
  CHECK(extract_abstractive(mirror, 1, z, toy.embedder, cfg).trace.steps.empty());
}

TEST_CASE("explanation record") {
  const auto& toy = toy_model();
  auto e = explain("the delightful harbor at night", toy.model(), toy.embedder, {});
  CHECK(e.prototypes.size() == 3);
  CHECK(e.probs.size() == 2);
  auto j = to_json(e, toy.model());
  CHECK(j["text"] == "the delightful harbor at night");
  CHECK(j["predicted_class"] == e.predicted);
  REQUIRE(j["prototypes"].size() == 3);
  const auto& p = j["prototypes"][0];
  for (const char* key : {"prototype", "prototype_class", "contribution", "extractive", "prototype_source_text",
                          "abstractive"})
    CHECK(p.contains(key));
  CHECK(p["extractive"]["kind"] == "extractive");
  CHECK(p["abstractive"]["kind"] == "abstractive");
  for (const auto& span : j["rationale_union"]) {
    auto b = span["begin"].get<std::size_t>(), en = span["end"].get<std::size_t>();
    CHECK(e.text.substr(b, en - b) == span["token"].get<std::string>());
  }
}

TEST_CASE("rationale config validation") {
  RationaleConfig c;
  c.n_removals = 0;
  CHECK_ERRC(c.validate(), Errc::invalid_argument);
  c = {};
  c.coverage = 1.5;
  CHECK_ERRC(c.validate(), Errc::invalid_argument);
  c = {};
  c.top_prototypes = 0;
  CHECK_ERRC(c.validate(), Errc::invalid_argument);
}
