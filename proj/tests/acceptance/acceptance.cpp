// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>

#include "protolex/faithfulness.hpp"
#include "protolex/rationale.hpp"
#include "protolex/training.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"
#include "support/rationale_oracle.hpp"
#include "support/toy_corpus.hpp"

using namespace protolex;
using protolex::testing::to_labeled;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Collects failures; the first few are printed under the FAIL line.
struct Verdict {
  std::vector<std::string> failures;
  std::ostringstream note;

  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
  bool ok() const { return failures.empty(); }
};

int report(const char* name, const std::function<void(Verdict&)>& body) {
  Verdict v;
  try {
    body(v);
  } catch (const std::exception& e) {
    v.failures.push_back(std::string("exception: ") + e.what());
  }
  std::printf("%s %s: %s\n", v.ok() ? "PASS" : "FAIL", name, v.note.str().c_str());
  for (std::size_t i = 0; i < std::min<std::size_t>(v.failures.size(), 5); ++i)
    std::printf("    %s\n", v.failures[i].c_str());
  if (v.failures.size() > 5) std::printf("    ... %zu more\n", v.failures.size() - 5);
  std::fflush(stdout);
  return v.ok() ? 0 : 1;
}

Vector random_vector(SplitMix64& rng, std::size_t n, double scale = 1.0) {
  Vector v(n);
  for (double& x : v) x = scale * (2.0 * rng.uniform() - 1.0);
  return v;
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

struct Toy {
  testing::ToyCorpus corpus;
  ReferenceEmbedder embedder;
  TrainConfig config = [] {
    TrainConfig c;
    c.epochs = 20;
    return c;
  }();
  EmbeddedSplit train_set, val_set;
  TrainResult result;
  double seconds = 0.0;
};

void gradient_check(Verdict& v) {
  auto start = Clock::now();
  double worst = 0.0;
  std::size_t entries = 0;
  for (std::uint64_t i = 0; i < 50; ++i) {
    auto r = testing::check_gradients(testing::make_grad_instance(i));
    entries += r.entries;
    worst = std::max(worst, r.max_rel_error);
    v.expect(r.max_rel_error <= 1e-4, "instance " + std::to_string(i) + ": " + r.worst);
  }
  double t = seconds_since(start);
  v.expect(t < 10.0, "runtime " + std::to_string(t) + " s");
  v.note << "50 instances, " << entries << " entries, max rel error " << worst << ", " << t << " s";
}

void similarity_identities(Verdict& v) {
  SplitMix64 rng(2024);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    std::size_t n = 1 + rng.below(64);
    auto u = random_vector(rng, n), w = random_vector(rng, n);
    auto ones = SimilarityWeights::unit(SimilarityKind::weighted_cosine, n).effective(SimilarityKind::weighted_cosine);
    double gap = std::abs(weighted_cosine_sim(ones, u, w) - cosine_sim(u, w));
    worst = std::max(worst, gap);
    v.expect(gap <= 1e-12, "pair " + std::to_string(i) + " differs by " + std::to_string(gap));
  }
  for (int i = 0; i < 1000; ++i) {
    std::size_t n = 1 + rng.below(16);
    auto u = random_vector(rng, n);
    auto w = SimilarityWeights{random_vector(rng, n, 5.0)}.effective(SimilarityKind::weighted_l2);
    v.expect(weighted_l2(w, u, u, L2Mode::corrected) == 0.0, "corrected l2 of u with itself is not 0");
  }
  for (int i = 0; i < 1000; ++i) {
    SimilarityWeights sw{random_vector(rng, 12, 50.0)};
    for (double x : sw.effective(SimilarityKind::weighted_cosine)) v.expect(x >= 0.0, "negative cosine weight");
    for (double x : sw.effective(SimilarityKind::weighted_l2)) v.expect(x >= 0.0 && x <= 2.0, "l2 weight outside [0, 2]");
    for (double x : SimilarityWeights{random_vector(rng, 12, 10.0)}.effective(SimilarityKind::weighted_l2))
      v.expect(x > 0.0 && x < 2.0, "l2 weight outside (0, 2) for moderate raw");
    for (double x : sw.effective(SimilarityKind::cosine)) v.expect(x == 1.0, "unweighted kind has a non-unit weight");
    auto clamped = sw;
    clamped.clamp(SimilarityKind::weighted_cosine);
    for (std::size_t d = 0; d < 12; ++d) v.expect(clamped.raw[d] == std::max(sw.raw[d], 0.0), "clamp is not max(raw, 0)");
    auto a = random_vector(rng, 12), b = random_vector(rng, 12);
    auto ew = clamped.effective(SimilarityKind::weighted_cosine);
    if (std::any_of(ew.begin(), ew.end(), [](double x) { return x > 0; })) {
      double s = weighted_cosine_sim(ew, a, b);
      v.expect(s >= -1.0 - 1e-12 && s <= 1.0 + 1e-12, "weighted cosine outside [-1, 1]");
    }
    for (auto mode : {L2Mode::literal, L2Mode::corrected}) {
      SimilarityConfig cfg{SimilarityKind::weighted_l2, mode};
      v.expect(similarity(cfg, sw.effective(cfg.kind), a, b) <= 0.0, "l2 similarity is positive");
    }
  }
  v.note << "10000 unit-weight pairs, max gap " << worst << "; corrected l2(u, u) = 0; clamp and ranges on 1000 draws";
}

void end_to_end(Verdict& v, Toy& toy) {
  auto start = Clock::now();
  toy.train_set = embed_split(to_labeled(toy.corpus.train), toy.embedder);
  toy.val_set = embed_split(to_labeled(toy.corpus.validation), toy.embedder);
  toy.result = train_embedded(toy.train_set, toy.val_set, toy.config);
  toy.seconds = seconds_since(start);
  const auto& m = toy.result.model;

  double held_out = evaluate(m, toy.embedder, to_labeled(toy.corpus.held_out)).accuracy;
  v.expect(held_out >= 0.95, "held-out accuracy " + std::to_string(held_out));
  for (std::size_t j = 0; j < m.prototypes.size(); ++j) {
    const auto& p = m.prototypes[j];
    bool sourced = p.source_index && p.source_text && *p.source_index < toy.train_set.size() &&
                   toy.train_set.texts[*p.source_index] == *p.source_text &&
                   toy.train_set.embeddings[*p.source_index] == p.vector;
    v.expect(sourced, "prototype " + std::to_string(j) + " has no matching source sentence");
  }
  for (double x : m.head.data) v.expect(x >= 0.0, "negative head entry");
  auto again = train_embedded(toy.train_set, toy.val_set, toy.config);
  v.expect(again.model == m, "second same-seed run differs");
  v.expect(model_to_json(again.model).dump() == model_to_json(m).dump(), "serialized models differ");
  v.expect(toy.seconds < 60.0, "runtime " + std::to_string(toy.seconds) + " s");
  v.note << "held-out " << 100.0 * held_out << "% on " << toy.corpus.held_out.size() << ", " << m.prototypes.size()
         << " prototypes sourced, head >= 0, same-seed bitwise equal, " << toy.seconds << " s";
}

PrototypeModel unit_model(SimilarityKind kind, std::size_t dim, SplitMix64& rng) {
  std::vector<Prototype> ps{{Vector(dim, 1.0), 0, std::nullopt, std::nullopt}};
  auto m = make_model(dim, 1, 1, {kind, L2Mode::corrected}, ps);
  for (double& r : m.weights.raw) r = rng.uniform() * 2.0 - 0.5;
  m.weights.raw[0] = 1.0;
  m.weights.clamp(kind);
  return m;
}

void rationale_correctness(Verdict& v, const Toy& toy) {
  const auto& m = toy.result.model;
  RationaleConfig cfg;
  std::size_t traces = 0, covered = 0;

  auto check = [&](const Rationale& r, const Vector& ref, const PrototypeModel& model, const std::string& text) {
    ++traces;
    auto why = testing::verify_trace(r.trace, ref, model, {});
    v.expect(why.empty(), "'" + text + "': " + why);
    if (r.trace.full_distance > 0) {
      ++covered;
      v.expect(testing::coverage_holds(r, cfg.coverage), "'" + text + "': coverage rule violated");
    }
  };

  // Synthetic sentences of up to 12 tokens under every similarity kind.
  SplitMix64 rng(77);
  for (auto kind : {SimilarityKind::cosine, SimilarityKind::weighted_cosine, SimilarityKind::l2,
                    SimilarityKind::weighted_l2}) {
    auto um = unit_model(kind, 64, rng);
    for (int rep = 0; rep < 50; ++rep) {
      auto text = random_sentence(rng, 1 + rng.below(12));
      auto ref = toy.embedder.embed(random_sentence(rng, 1 + rng.below(6)));
      auto t = token_importance(text, ref, um, toy.embedder, 1 + rng.below(12));
      check(make_rationale(RationaleKind::extractive, 0, {}, t, cfg.coverage), ref, um, text);
    }
  }

  std::size_t correct = 0, hits = 0;
  for (const auto& s : toy.corpus.held_out) {
    auto e = extract_extractive(s.text, m, toy.embedder, cfg);
    for (const auto& r : e.rationales) check(r, m.prototypes[r.prototype].vector, m, s.text);
    if (e.predicted != s.label) continue;
    ++correct;
    if (std::find(e.union_indices.begin(), e.union_indices.end(), s.keyword_position) != e.union_indices.end()) ++hits;
  }
  double rate = correct ? static_cast<double>(hits) / static_cast<double>(correct) : 0.0;
  v.expect(rate >= 0.9, "keyword in union for " + std::to_string(rate));
  v.note << traces << " traces match exhaustive scans, coverage on " << covered << ", keyword in union for "
         << hits << "/" << correct << " correct (" << 100.0 * rate << "%)";
}

void faithfulness_direction(Verdict& v, const Toy& toy) {
  auto split = to_labeled(toy.corpus.held_out);
  FaithfulnessOptions opt;
  auto extracted = faithfulness_eval(toy.result.model, toy.embedder, split, opt);
  opt.source = RationaleSource::random;
  auto random = faithfulness_eval(toy.result.model, toy.embedder, split, opt);
  double margin = extracted.comprehensiveness.mean - random.comprehensiveness.mean;
  v.expect(extracted.processed >= 200, "only " + std::to_string(extracted.processed) + " processed samples");
  v.expect(random.processed == extracted.processed, "baseline processed a different sample set");
  v.expect(margin > 0.0, "comprehensiveness margin " + std::to_string(margin));
  v.expect(extracted.sufficiency.mean <= random.sufficiency.mean, "extracted sufficiency above random");
  v.note << extracted.processed << " samples; comp " << extracted.comprehensiveness.mean << " vs " << random.comprehensiveness.mean
         << " %p; suff " << extracted.sufficiency.mean << " vs " << random.sufficiency.mean << " %p";
}

void ablation_and_harness(Verdict& v, const Toy& toy) {
  const auto& m = toy.result.model;
  auto split = to_labeled(toy.corpus.held_out);
  auto embedded = embed_split(split, toy.embedder);
  v.expect(prototype_ablation_eval(m, toy.embedder, split, 0) == evaluate(m, toy.embedder, split).accuracy,
           "k = 0 differs from evaluate");

  std::vector<oracle::Sample> samples;
  for (std::size_t i = 0; i < embedded.size(); ++i) samples.push_back({embedded.embeddings[i], embedded.labels[i]});
  auto mixed = m;
  SplitMix64 rng(91);
  for (double& x : mixed.head.data) x = rng.uniform() * 2 - 0.7;
  std::size_t ks = 0;
  for (const PrototypeModel* model : {&m, static_cast<const PrototypeModel*>(&mixed)})
    for (std::size_t k = 0; k < model->num_prototypes(); ++k, ++ks)
      v.expect(prototype_ablation_eval_embedded(*model, embedded, k) == oracle::masked_accuracy(*model, samples, k),
               "oracle disagrees at k = " + std::to_string(k));

  FaithfulnessOptions opt;
  auto a = faithfulness_eval(m, toy.embedder, split, opt);
  auto b = faithfulness_eval(m, toy.embedder, split, opt);
  v.expect(a.comprehensiveness == b.comprehensiveness && a.sufficiency == b.sufficiency && a.accuracy == b.accuracy,
           "faithfulness CIs differ across identical runs");
  for (const auto* i : {&a.comprehensiveness, &a.sufficiency, &a.accuracy})
    v.expect(i->low <= i->mean && i->mean <= i->high, "faithfulness CI does not bracket its estimate");
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> xs(1 + rng.below(200));
    for (double& x : xs) x = rng.uniform() * 4 - 1;
    auto seed = rng.next();
    auto ci = bootstrap_ci(xs, 1000, seed);
    v.expect(ci == bootstrap_ci(xs, 1000, seed), "bootstrap not deterministic");
    v.expect(ci.low <= ci.mean && ci.mean <= ci.high, "bootstrap CI does not bracket the mean");
  }
  v.note << "k = 0 equals evaluate; oracle agrees at " << ks << " (model, k) pairs; bootstrap deterministic and bracketing";
}

}  // namespace

int main() {
  Toy toy;
  int failed = 0;
  failed += report("gradient correctness", gradient_check);
  failed += report("similarity identities", similarity_identities);
  failed += report("end-to-end toy training", [&](Verdict& v) { end_to_end(v, toy); });
  failed += report("rationale correctness", [&](Verdict& v) { rationale_correctness(v, toy); });
  failed += report("faithfulness direction", [&](Verdict& v) { faithfulness_direction(v, toy); });
  failed += report("ablation identity and harness", [&](Verdict& v) { ablation_and_harness(v, toy); });
  std::printf("%d of 6 criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
