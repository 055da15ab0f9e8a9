#include "protolex/cli.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "protolex/dataset.hpp"
#include "protolex/error.hpp"
#include "protolex/faithfulness.hpp"
#include "protolex/report.hpp"

namespace protolex {
namespace {

ProviderKind parse_provider_kind(std::string_view name) {
  if (name == "reference") return ProviderKind::reference;
  if (name == "cache") return ProviderKind::cache;
  if (name == "http") return ProviderKind::http;
  throw Error(Errc::invalid_argument, "unknown provider '" + std::string(name) + "'");
}

std::string_view to_string(ProviderKind kind) {
  switch (kind) {
    case ProviderKind::reference: return "reference";
    case ProviderKind::cache: return "cache";
    case ProviderKind::http: return "http";
  }
  return "?";
}

// Flag values that override the merged configuration when given.
struct Overrides {
  std::vector<std::function<void(RunConfig&)>> apply;

  template <typename T, typename Setter>
  void option(CLI::App* app, const std::string& name, const std::string& desc, Setter set) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app->add_option(name, *value, desc);
    apply.push_back([value, opt, set](RunConfig& c) {
      if (opt->count() > 0) set(c, *value);
    });
  }

  template <typename Setter>
  void flag(CLI::App* app, const std::string& name, const std::string& desc, Setter set) {
    CLI::Option* opt = app->add_flag(name, desc);
    apply.push_back([opt, set](RunConfig& c) {
      if (opt->count() > 0) set(c);
    });
  }
};

void add_common_options(CLI::App* app, Overrides& o) {
  o.option<std::string>(app, "--data", "Dataset file (CSV with text,label[,split] header or JSONL)",
                        [](RunConfig& c, const std::string& v) { c.data_path = v; });
  o.option<std::string>(app, "--format", "Dataset format: csv or jsonl (default: by extension)",
                        [](RunConfig& c, const std::string& v) { c.data_format = v; });
  o.option<double>(app, "--val-fraction", "Share of train records held out for validation",
                   [](RunConfig& c, double v) { c.val_fraction = v; });
  o.option<std::string>(app, "--provider", "Embedding backend: reference, cache or http",
                        [](RunConfig& c, const std::string& v) { c.provider.kind = parse_provider_kind(v); });
  o.option<std::size_t>(app, "--embed-dim", "Reference embedder dimension",
                        [](RunConfig& c, std::size_t v) { c.provider.reference.dim = v; });
  o.option<std::uint64_t>(app, "--embed-seed", "Reference embedder seed",
                          [](RunConfig& c, std::uint64_t v) { c.provider.reference.seed = v; });
  o.flag(app, "--no-bigrams", "Reference embedder: unigram features only",
         [](RunConfig& c) { c.provider.reference.use_bigrams = false; });
  o.option<std::string>(app, "--cache", "Embedding cache (JSON Lines) for --provider cache",
                        [](RunConfig& c, const std::string& v) { c.provider.cache_path = v; });
  o.option<std::string>(app, "--endpoint", "Sidecar URL for --provider http",
                        [](RunConfig& c, const std::string& v) { c.provider.http.endpoint = v; });
  o.option<long>(app, "--timeout-ms", "HTTP timeout in milliseconds",
                 [](RunConfig& c, long v) { c.provider.http.timeout = std::chrono::milliseconds(v); });
  o.option<std::string>(app, "--out", "Output directory",
                        [](RunConfig& c, const std::string& v) { c.output_dir = v; });
  o.option<std::uint64_t>(app, "--seed", "Seed for training, splits and bootstrap",
                          [](RunConfig& c, std::uint64_t v) { c.seed = v; });
  o.option<std::size_t>(app, "--folds", "Bootstrap folds", [](RunConfig& c, std::size_t v) { c.folds = v; });
}

void add_train_options(CLI::App* app, Overrides& o) {
  auto& t = o;
  t.option<int>(app, "--epochs", "Training epochs", [](RunConfig& c, int v) { c.train.epochs = v; });
  t.option<std::size_t>(app, "--batch-size", "Minibatch size",
                        [](RunConfig& c, std::size_t v) { c.train.batch_size = v; });
  t.option<double>(app, "--lr", "Adam learning rate", [](RunConfig& c, double v) { c.train.lr = v; });
  t.option<double>(app, "--weight-decay", "l2 weight decay", [](RunConfig& c, double v) { c.train.weight_decay = v; });
  t.option<double>(app, "--lr-factor", "Plateau decay factor", [](RunConfig& c, double v) { c.train.lr_factor = v; });
  t.option<int>(app, "--lr-patience", "Plateau window in epochs",
                [](RunConfig& c, int v) { c.train.lr_patience_epochs = v; });
  t.option<int>(app, "--projection-every", "Project every n-th epoch",
                [](RunConfig& c, int v) { c.train.projection_every = v; });
  t.option<double>(app, "--projection-start", "Fraction of epochs before projections start",
                   [](RunConfig& c, double v) { c.train.projection_start_fraction = v; });
  t.option<int>(app, "--final-phase-epochs", "Head-only epochs at the end",
                [](RunConfig& c, int v) { c.train.final_phase_epochs = v; });
  t.option<int>(app, "--prototypes-per-class", "Prototypes per class",
                [](RunConfig& c, int v) { c.train.prototypes_per_class = v; });
  t.option<std::string>(app, "--sim", "cosine, weighted_cosine, l2 or weighted_l2",
                        [](RunConfig& c, const std::string& v) { c.train.similarity.kind = parse_similarity_kind(v); });
  t.option<std::string>(app, "--l2-mode", "literal or corrected",
                        [](RunConfig& c, const std::string& v) { c.train.similarity.mode = parse_l2_mode(v); });
  t.option<std::string>(app, "--head", "prototype or fc_only",
                        [](RunConfig& c, const std::string& v) { c.train.head_mode = parse_head_mode(v); });
  t.option<double>(app, "--lambda-clst", "Clustering weight", [](RunConfig& c, double v) { c.train.loss.clst = v; });
  t.option<double>(app, "--lambda-sep", "Separation weight", [](RunConfig& c, double v) { c.train.loss.sep = v; });
  t.option<double>(app, "--lambda-dist", "Distribution weight", [](RunConfig& c, double v) { c.train.loss.dist = v; });
  t.option<double>(app, "--lambda-divers", "Diversity weight",
                   [](RunConfig& c, double v) { c.train.loss.divers = v; });
  t.option<double>(app, "--lambda-l1", "Head l1 weight", [](RunConfig& c, double v) { c.train.loss.l1 = v; });
  t.option<double>(app, "--margin", "Separation margin", [](RunConfig& c, double v) { c.train.loss.margin = v; });
  t.option<double>(app, "--diversity-threshold", "Diversity hinge threshold",
                   [](RunConfig& c, double v) { c.train.loss.diversity_threshold = v; });
  t.option<int>(app, "--runs", "Independent runs over the listed seeds", [](RunConfig& c, int v) { c.runs = v; });
}

void add_rationale_options(CLI::App* app, Overrides& o) {
  o.option<std::size_t>(app, "--n-removals", "Greedy removal steps",
                        [](RunConfig& c, std::size_t v) { c.rationale.n_removals = v; });
  o.option<double>(app, "--coverage", "Share of the full distance a rationale must explain",
                   [](RunConfig& c, double v) { c.rationale.coverage = v; });
  o.option<std::size_t>(app, "--top-k", "Top contributing prototypes to explain against",
                        [](RunConfig& c, std::size_t v) { c.rationale.top_prototypes = v; });
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::invalid_argument, "cannot open config " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::invalid_argument, "config " + path + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::io, "cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

Dataset load_configured_dataset(const RunConfig& c) {
  if (c.data_path.empty()) throw Error(Errc::invalid_argument, "--data is required");
  auto format = c.data_format.empty() ? guess_dataset_format(c.data_path) : parse_dataset_format(c.data_format);
  return load_dataset(c.data_path, format);
}

LabeledTexts configured_split(const RunConfig& c, const Dataset& ds, Split split) {
  LabeledTexts out;
  if (split == Split::test) {
    out = select_split(ds, Split::test);
  } else {
    auto tv = train_validation_split(ds, c.val_fraction, c.seed);
    out = split == Split::train ? tv.train : tv.validation;
  }
  if (out.empty()) throw Error(Errc::empty_dataset, "split '" + std::string(to_string(split)) + "' has no records");
  return out;
}

std::filesystem::path ensure_output_dir(const RunConfig& c) {
  std::filesystem::path dir(c.output_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::io, "cannot create " + dir.string() + ": " + ec.message());
  return dir;
}

std::string fixed(double x, int precision) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << x;
  return os.str();
}

int cmd_train(const RunConfig& c, bool checkpoint_every_projection, std::ostream& out) {
  auto ds = load_configured_dataset(c);
  auto tv = train_validation_split(ds, c.val_fraction, c.seed);
  if (tv.train.empty() || tv.validation.empty()) throw Error(Errc::empty_dataset, "need train and validation records");
  auto test = select_split(ds, Split::test);
  auto provider = make_provider(c.provider);
  auto dir = ensure_output_dir(c);
  write_json_file(dir / "config.json", to_json(c));

  auto train_set = embed_split(tv.train, *provider);
  auto val_set = embed_split(tv.validation, *provider);
  EmbeddedSplit test_set;
  if (!test.empty()) test_set = embed_split(test, *provider);

  out << "dataset: " << ds.records.size() << " records, " << ds.num_classes << " classes (train "
      << tv.train.size() << ", validation " << tv.validation.size() << ", test " << test.size() << ")\n";

  if (c.runs < 1) throw Error(Errc::invalid_argument, "--runs must be >= 1");
  if (c.runs > 1 && static_cast<std::size_t>(c.runs) > c.seeds.size())
    throw Error(Errc::invalid_argument, "--runs exceeds the number of listed seeds");

  std::vector<double> scores;
  nlohmann::json runs = nlohmann::json::array();
  for (int r = 0; r < c.runs; ++r) {
    TrainConfig tc = c.train;
    tc.seed = c.runs == 1 ? c.seed : c.seeds[static_cast<std::size_t>(r)];
    auto run_dir = c.runs == 1 ? dir : dir / ("run_" + std::to_string(r));
    std::filesystem::create_directories(run_dir);

    ProjectionCallback cb;
    if (checkpoint_every_projection)
      cb = [&](const PrototypeModel& m, int epoch) {
        save_checkpoint(m, run_dir / ("model_epoch" + std::to_string(epoch) + ".json"));
      };
    auto result = train_embedded(train_set, val_set, tc, cb);
    save_checkpoint(result.model, run_dir / "model.json");
    write_history(result.history, run_dir / "history.jsonl");

    nlohmann::json metrics = {{"seed", tc.seed},
                              {"final_val_accuracy", result.history.epochs.back().val_accuracy},
                              {"final_val_loss", result.history.epochs.back().val_loss}};
    double score = result.history.epochs.back().val_accuracy;
    if (test_set.size() > 0) {
      score = evaluate_embedded(result.model, test_set).accuracy;
      metrics["test_accuracy"] = score;
    }
    write_json_file(run_dir / "metrics.json", metrics);
    out << "run " << r << " (seed " << tc.seed << "): validation accuracy "
        << fixed(100.0 * result.history.epochs.back().val_accuracy, 2) << "%";
    if (test_set.size() > 0) out << ", test accuracy " << fixed(100.0 * score, 2) << "%";
    out << "\n";
    scores.push_back(score);
    runs.push_back(metrics);
  }

  if (c.runs > 1) {
    double mean = 0.0;
    for (double s : scores) mean += s;
    mean /= static_cast<double>(scores.size());
    double var = 0.0;
    for (double s : scores) var += (s - mean) * (s - mean);
    var /= static_cast<double>(scores.size() - 1);
    double stderr_ = std::sqrt(var / static_cast<double>(scores.size()));
    const char* what = test_set.size() > 0 ? "test" : "validation";
    write_json_file(dir / "summary.json",
                    {{"metric", std::string(what) + "_accuracy"}, {"mean", mean}, {"stderr", stderr_}, {"runs", runs}});
    out << what << " accuracy over " << c.runs << " runs: " << fixed(100.0 * mean, 2) << " +- "
        << fixed(100.0 * stderr_, 2) << " %\n";
  }
  out << "wrote " << dir.string() << "\n";
  return 0;
}

PrototypeModel load_model_arg(const RunConfig& c, const std::string& model_path) {
  auto path = model_path.empty() ? std::filesystem::path(c.output_dir) / "model.json" : std::filesystem::path(model_path);
  return load_checkpoint(path);
}

int cmd_eval(const RunConfig& c, const std::string& model_path, Split split, std::ostream& out) {
  auto model = load_model_arg(c, model_path);
  auto ds = load_configured_dataset(c);
  auto texts = configured_split(c, ds, split);
  auto provider = make_provider(c.provider);
  auto ev = evaluate(model, *provider, texts);
  std::vector<double> correct;
  for (const auto& p : ev.predictions) correct.push_back(p.correct() ? 1.0 : 0.0);
  auto ci = bootstrap_ci(correct, c.folds, c.seed);
  nlohmann::json j = {{"split", to_string(split)}, {"n", texts.size()},    {"accuracy", ev.accuracy},
                      {"ci_low", ci.low},          {"ci_high", ci.high},   {"folds", c.folds}};
  out << j.dump() << "\n";
  return 0;
}

std::vector<std::string> read_lines(const std::string& input, std::istream& in) {
  std::vector<std::string> lines;
  auto consume = [&](std::istream& s) {
    std::string line;
    while (std::getline(s, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!trim(line).empty()) lines.push_back(line);
    }
  };
  if (input == "-") {
    consume(in);
  } else {
    std::ifstream f(input);
    if (!f) throw Error(Errc::io, "cannot open " + input);
    consume(f);
  }
  return lines;
}

int cmd_explain(const RunConfig& c, const std::string& model_path, const std::string& input,
                const std::string& format_name, const std::string& report_path, std::istream& in, std::ostream& out) {
  auto format = parse_report_format(format_name);
  auto model = load_model_arg(c, model_path);
  auto samples = read_lines(input, in);
  if (samples.empty()) throw Error(Errc::empty_dataset, "no input sentences");
  auto provider = make_provider(c.provider);
  std::vector<Explanation> explanations;
  nlohmann::json records = nlohmann::json::array();
  for (const auto& s : samples) {
    explanations.push_back(explain(s, model, *provider, c.rationale));
    records.push_back(to_json(explanations.back(), model));
  }
  auto dir = ensure_output_dir(c);
  write_json_file(dir / "explanations.json", records);
  auto report = render_report(explanations, model, format);
  if (report_path.empty() || report_path == "-") {
    out << report;
  } else {
    std::ofstream f(report_path);
    if (!f) throw Error(Errc::io, "cannot open " + report_path + " for writing");
    f << report;
    out << "wrote " << report_path << "\n";
  }
  return 0;
}

int cmd_faithfulness(const RunConfig& c, const std::string& model_path, Split split, bool random_baseline,
                     std::ostream& out) {
  auto model = load_model_arg(c, model_path);
  auto ds = load_configured_dataset(c);
  auto texts = configured_split(c, ds, split);
  auto provider = make_provider(c.provider);
  FaithfulnessOptions opt{c.rationale, c.folds, c.seed, RationaleSource::extracted};
  auto report = faithfulness_eval(model, *provider, texts, opt);
  out << render_table(report);
  nlohmann::json j = {{"extracted", to_json(report)}};
  if (random_baseline) {
    opt.source = RationaleSource::random;
    auto baseline = faithfulness_eval(model, *provider, texts, opt);
    out << "\nsize-matched random rationales:\n" << render_table(baseline);
    j["random"] = to_json(baseline);
  }
  auto dir = ensure_output_dir(c);
  write_json_file(dir / "faithfulness.json", j);
  return 0;
}

int cmd_ablate(const RunConfig& c, const std::string& model_path, Split split, const std::vector<std::size_t>& ks,
               std::ostream& out) {
  auto model = load_model_arg(c, model_path);
  auto ds = load_configured_dataset(c);
  auto texts = configured_split(c, ds, split);
  auto provider = make_provider(c.provider);
  auto embedded = embed_split(texts, *provider);
  nlohmann::json results = nlohmann::json::array();
  for (auto k : ks) results.push_back({{"k", k}, {"accuracy", prototype_ablation_eval_embedded(model, embedded, k)}});
  out << nlohmann::json({{"split", to_string(split)}, {"n", texts.size()}, {"results", results}}).dump() << "\n";
  return 0;
}

int cmd_embed(const RunConfig& c, const std::string& input, const std::string& cache_out, std::istream& in,
              std::ostream& out) {
  if (cache_out.empty()) throw Error(Errc::invalid_argument, "--cache-out is required");
  std::vector<std::string> texts;
  if (!c.data_path.empty())
    for (const auto& r : load_configured_dataset(c).records) texts.push_back(std::string(trim(r.text)));
  if (!input.empty())
    for (auto& line : read_lines(input, in)) texts.push_back(std::string(trim(line)));
  if (texts.empty()) throw Error(Errc::invalid_argument, "nothing to embed: give --data and/or --input");
  auto provider = make_provider(c.provider);
  auto vectors = provider->embed_batch(texts);
  EmbeddingCache cache(provider->dim());
  for (std::size_t i = 0; i < texts.size(); ++i) cache.insert(texts[i], vectors[i]);
  cache_store(cache, cache_out);
  out << "cached " << cache.size() << " embeddings of dim " << cache.dim() << " in " << cache_out << "\n";
  return 0;
}

std::vector<std::size_t> parse_k_list(const std::string& list) {
  std::vector<std::size_t> ks;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto t = trim(item);
    if (t.empty()) continue;
    std::size_t value = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc() || ptr != t.data() + t.size())
      throw Error(Errc::invalid_argument, "bad --k entry '" + std::string(t) + "'");
    ks.push_back(value);
  }
  if (ks.empty()) throw Error(Errc::invalid_argument, "--k needs at least one value");
  return ks;
}

}  // namespace

void update_from_json(RunConfig& c, const nlohmann::json& j) {
  try {
    if (!j.is_object()) throw Error(Errc::invalid_argument, "config must be a JSON object");
    if (j.contains("data")) {
      const auto& d = j["data"];
      if (d.contains("path")) c.data_path = d["path"].get<std::string>();
      if (d.contains("format")) c.data_format = d["format"].get<std::string>();
      if (d.contains("val_fraction")) c.val_fraction = d["val_fraction"].get<double>();
    }
    if (j.contains("provider")) {
      const auto& p = j["provider"];
      if (p.contains("kind")) c.provider.kind = parse_provider_kind(p["kind"].get<std::string>());
      if (p.contains("dim")) c.provider.reference.dim = p["dim"].get<std::size_t>();
      if (p.contains("seed")) c.provider.reference.seed = p["seed"].get<std::uint64_t>();
      if (p.contains("use_bigrams")) c.provider.reference.use_bigrams = p["use_bigrams"].get<bool>();
      if (p.contains("cache_path")) c.provider.cache_path = p["cache_path"].get<std::string>();
      if (p.contains("endpoint")) c.provider.http.endpoint = p["endpoint"].get<std::string>();
      if (p.contains("timeout_ms")) c.provider.http.timeout = std::chrono::milliseconds(p["timeout_ms"].get<long>());
      if (p.contains("max_batch")) c.provider.http.max_batch = p["max_batch"].get<std::size_t>();
    }
    if (j.contains("train")) update_from_json(c.train, j["train"]);
    if (j.contains("rationale")) {
      const auto& r = j["rationale"];
      if (r.contains("n_removals")) c.rationale.n_removals = r["n_removals"].get<std::size_t>();
      if (r.contains("coverage")) c.rationale.coverage = r["coverage"].get<double>();
      if (r.contains("top_prototypes")) c.rationale.top_prototypes = r["top_prototypes"].get<std::size_t>();
    }
    if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("folds")) c.folds = j["folds"].get<std::size_t>();
    if (j.contains("runs")) c.runs = j["runs"].get<int>();
    if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::invalid_argument, std::string("bad config: ") + e.what());
  }
}

nlohmann::json to_json(const RunConfig& c) {
  return {
      {"data", {{"path", c.data_path}, {"format", c.data_format}, {"val_fraction", c.val_fraction}}},
      {"provider",
       {{"kind", to_string(c.provider.kind)},
        {"dim", c.provider.reference.dim},
        {"seed", c.provider.reference.seed},
        {"use_bigrams", c.provider.reference.use_bigrams},
        {"cache_path", c.provider.cache_path},
        {"endpoint", c.provider.http.endpoint},
        {"timeout_ms", c.provider.http.timeout.count()},
        {"max_batch", c.provider.http.max_batch}}},
      {"train", to_json(c.train)},
      {"rationale",
       {{"n_removals", c.rationale.n_removals},
        {"coverage", c.rationale.coverage},
        {"top_prototypes", c.rationale.top_prototypes}}},
      {"output_dir", c.output_dir},
      {"seed", c.seed},
      {"folds", c.folds},
      {"runs", c.runs},
      {"seeds", c.seeds},
  };
}

std::unique_ptr<EmbeddingProvider> make_provider(const ProviderConfig& config) {
  switch (config.kind) {
    case ProviderKind::reference:
      return std::make_unique<ReferenceEmbedder>(config.reference);
    case ProviderKind::cache:
      if (config.cache_path.empty()) throw Error(Errc::invalid_argument, "--cache is required for the cache provider");
      return std::make_unique<CachedEmbedder>(cache_load(config.cache_path));
    case ProviderKind::http:
      if (config.http.endpoint.empty())
        throw Error(Errc::invalid_argument, "--endpoint is required for the http provider");
      return std::make_unique<HttpEmbedder>(config.http);
  }
  throw Error(Errc::invalid_argument, "no provider");
}

int run_command(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Prototype-based interpretable text classification"};
  app.name("protolex");
  app.require_subcommand(1);
  app.fallthrough();

  Overrides o;
  std::string config_path;
  app.add_option("--config", config_path, "JSON config; flags override its values");
  add_common_options(&app, o);

  auto* train_cmd = app.add_subcommand("train", "Train a model; writes model.json, history.jsonl, metrics.json, config.json");
  add_train_options(train_cmd, o);
  bool checkpoint_every_projection = false;
  train_cmd->add_flag("--checkpoint-every-projection", checkpoint_every_projection,
                      "Also write a checkpoint after each projection");

  std::string model_path;
  std::string split_name = "test";
  auto add_model_split = [&](CLI::App* sub) {
    sub->add_option("--model", model_path, "Checkpoint (default: <out>/model.json)");
    sub->add_option("--split", split_name, "train, validation or test")->capture_default_str();
  };

  auto* eval_cmd = app.add_subcommand("eval", "Accuracy with a bootstrap CI");
  add_model_split(eval_cmd);

  auto* explain_cmd = app.add_subcommand("explain", "Extractive and abstractive rationales for input sentences");
  std::string input;
  std::string report_format = "ansi";
  std::string report_path;
  explain_cmd->add_option("--model", model_path, "Checkpoint (default: <out>/model.json)");
  explain_cmd->add_option("--input", input, "File with one sentence per line, or - for stdin")->required();
  explain_cmd->add_option("--report-format", report_format, "ansi or html")->capture_default_str();
  explain_cmd->add_option("--report", report_path, "Report file (default: stdout)");
  add_rationale_options(explain_cmd, o);

  auto* faith_cmd = app.add_subcommand("faithfulness", "Comprehensiveness and sufficiency with bootstrap CIs");
  add_model_split(faith_cmd);
  bool random_baseline = false;
  faith_cmd->add_flag("--random-baseline", random_baseline, "Also score size-matched random rationales");
  add_rationale_options(faith_cmd, o);

  auto* ablate_cmd = app.add_subcommand("ablate", "Accuracy after removing each sample's top-k prototypes");
  add_model_split(ablate_cmd);
  std::string k_list = "0,1,2,3";
  ablate_cmd->add_option("--k", k_list, "Comma-separated list of k")->capture_default_str();

  auto* embed_cmd = app.add_subcommand("embed", "Precompute an embedding cache for --provider cache");
  std::string cache_out;
  embed_cmd->add_option("--input", input, "Extra sentences, one per line (- for stdin)");
  embed_cmd->add_option("--cache-out", cache_out, "Cache file to write")->required();

  std::vector<std::string> argv_storage;
  argv_storage.push_back("protolex");
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_storage) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    RunConfig config;
    if (!config_path.empty()) update_from_json(config, read_json_file(config_path));
    for (auto& apply : o.apply) apply(config);
    config.train.seed = config.seed;

    if (*train_cmd) return cmd_train(config, checkpoint_every_projection, out);
    if (*embed_cmd) return cmd_embed(config, input, cache_out, in, out);
    if (*explain_cmd) return cmd_explain(config, model_path, input, report_format, report_path, in, out);
    Split split = parse_split(split_name);
    if (*eval_cmd) return cmd_eval(config, model_path, split, out);
    if (*faith_cmd) return cmd_faithfulness(config, model_path, split, random_baseline, out);
    if (*ablate_cmd) return cmd_ablate(config, model_path, split, parse_k_list(k_list), out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == Errc::invalid_argument ? 1 : 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace protolex
