#include "sentrec/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sentrec/config.hpp"
#include "sentrec/corpus.hpp"
#include "sentrec/distill.hpp"
#include "sentrec/embed.hpp"
#include "sentrec/errors.hpp"
#include "sentrec/jsonl.hpp"
#include "sentrec/metrics.hpp"
#include "sentrec/model.hpp"
#include "sentrec/rng.hpp"
#include "sentrec/simulate.hpp"
#include "sentrec/svg.hpp"
#include "sentrec/templates.hpp"
#include "sentrec/text.hpp"
#include "sentrec/types.hpp"

namespace sentrec::cli {
namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

// Thrown for inputs that should exist but do not; mapped to exit code 4.
struct MissingFile : Error {
  using Error::Error;
};

struct UnknownCommand : Error {
  using Error::Error;
};

const char kUsage[] =
    "usage: sentrec <command> [--config FILE] [--seed N] [--offline] [--out DIR] [--verbose]\n"
    "\n"
    "commands:\n"
    "  synth         generate the synthetic corpus (interactions + explanations)\n"
    "  distill       summarize reviews and extract features via a chat client\n"
    "  audit         two-stage quality audit of distilled explanations\n"
    "  split         per-user chronological train/valid/test split\n"
    "  train-rating  train the external MLP rating predictor\n"
    "  train         train the explanation generator\n"
    "  generate      decode explanations for the test split\n"
    "  evaluate      score predictions against the test split (report.json)\n"
    "  sweep         rating-noise sensitivity sweep (sweep.csv + SVG charts)\n"
    "  stats         corpus statistics tables and distribution charts\n";

const char* kCommands[] = {"synth",  "distill", "audit",    "split", "train-rating",
                           "train",  "generate", "evaluate", "sweep", "stats"};

struct Flags {
  std::string command;
  std::string config_path;
  std::optional<uint64_t> seed;
  bool offline = false;
  std::string out_dir;
  bool verbose = false;
};

Flags parse_flags(int argc, char** argv) {
  Flags f;
  if (argc < 2) throw UnknownCommand("no command given");
  f.command = argv[1];
  bool known = false;
  for (const char* c : kCommands) known = known || f.command == c;
  if (!known) throw UnknownCommand("unknown command: " + f.command);

  auto need_value = [&](const std::string& flag, int& i) -> std::string {
    if (i + 1 >= argc) throw ConfigError("flag " + flag + " requires a value");
    return argv[++i];
  };
  for (int i = 2; i < argc; ++i) {
    std::string arg = argv[i];
    std::string value;
    size_t eq = arg.find('=');
    bool has_inline = eq != std::string::npos && arg.rfind("--", 0) == 0;
    std::string name = has_inline ? arg.substr(0, eq) : arg;
    if (has_inline) value = arg.substr(eq + 1);

    if (name == "--config") {
      f.config_path = has_inline ? value : need_value(name, i);
    } else if (name == "--seed") {
      std::string s = has_inline ? value : need_value(name, i);
      try {
        size_t pos = 0;
        f.seed = std::stoull(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw ConfigError("--seed expects an unsigned integer, got '" + s + "'");
      }
    } else if (name == "--out") {
      f.out_dir = has_inline ? value : need_value(name, i);
    } else if (name == "--offline") {
      if (has_inline) throw ConfigError("--offline takes no value");
      f.offline = true;
    } else if (name == "--verbose") {
      if (has_inline) throw ConfigError("--verbose takes no value");
      f.verbose = true;
    } else {
      throw ConfigError("unknown flag: " + arg);
    }
  }
  return f;
}

// Resolved settings: defaults, overridden by config file, overridden by flags.
struct Ctx {
  std::string command;
  config::Map cfg;
  uint64_t seed = 42;
  bool offline = false;
  std::string out = "out";
  bool verbose = false;

  std::string path(const std::string& key, const std::string& default_name) const {
    auto it = cfg.find(key);
    if (it != cfg.end()) return it->second;
    return (fs::path(out) / default_name).string();
  }
};

Ctx build_ctx(const Flags& f) {
  Ctx ctx;
  ctx.command = f.command;
  if (!f.config_path.empty()) {
    if (!fs::exists(f.config_path))
      throw MissingFile("config file not found: " + f.config_path);
    ctx.cfg = config::parse_file(f.config_path);
  }
  ctx.seed = config::get_uint(ctx.cfg, "seed", 42);
  ctx.offline = config::get_bool(ctx.cfg, "offline", false);
  ctx.out = config::get_string(ctx.cfg, "out", "out");
  if (f.seed) ctx.seed = *f.seed;
  if (f.offline) ctx.offline = true;
  if (!f.out_dir.empty()) ctx.out = f.out_dir;
  ctx.verbose = f.verbose;
  return ctx;
}

// ---- logging ------------------------------------------------------------------

class StopWatch {
 public:
  StopWatch() : start_(std::chrono::steady_clock::now()) {}
  int64_t elapsed_ms() const {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

void log_line(const Ctx& ctx, const std::string& fields) {
  std::cerr << "sentrec command=" << ctx.command << " seed=" << ctx.seed << " " << fields
            << "\n";
}

std::string fmt_ms(int64_t ms) { return "elapsed_ms=" + std::to_string(ms); }

// ---- small helpers ---------------------------------------------------------------

void require_input(const std::string& path) {
  if (!fs::exists(path)) throw MissingFile("missing input file: " + path);
}

void ensure_out_dir(const Ctx& ctx) {
  std::error_code ec;
  fs::create_directories(ctx.out, ec);
  if (ec) throw IoError("cannot create output directory " + ctx.out + ": " + ec.message());
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << content;
  if (!out) throw IoError("write failed: " + path);
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::vector<double> parse_double_list(const std::string& s, const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) {
    std::string t = text::trim(part);
    if (t.empty()) continue;
    try {
      size_t pos = 0;
      out.push_back(std::stod(t, &pos));
      if (pos != t.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': bad number '" + t + "'");
    }
  }
  if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
  return out;
}

std::vector<std::string> parse_string_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) {
    std::string t = text::trim(part);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

// Shared by distill and audit: offline runs must not have a remote endpoint
// configured, and online runs need one. Checked before any file I/O.
std::string resolve_chat_endpoint(const Ctx& ctx) {
  std::string endpoint = config::get_string(ctx.cfg, "client.endpoint", "");
  if (ctx.offline && !endpoint.empty())
    throw ConfigError("offline mode conflicts with client.endpoint=" + endpoint);
  if (!ctx.offline && endpoint.empty())
    throw ConfigError("client.endpoint is required unless running with --offline");
  return endpoint;
}

std::unique_ptr<distill::ChatClient> make_chat_client(const Ctx& ctx) {
  std::string endpoint = resolve_chat_endpoint(ctx);
  if (ctx.offline) return std::make_unique<distill::RuleBasedClient>();
  distill::HttpClientConfig hc;
  hc.endpoint = endpoint;
  hc.model = config::get_string(ctx.cfg, "client.model", hc.model);
  hc.temperature = config::get_double(ctx.cfg, "client.temperature", hc.temperature);
  hc.timeout_sec = static_cast<int>(config::get_int(ctx.cfg, "client.timeout_sec", hc.timeout_sec));
  hc.max_retries = static_cast<int>(config::get_int(ctx.cfg, "client.max_retries", hc.max_retries));
  hc.backoff_ms = static_cast<int>(config::get_int(ctx.cfg, "client.backoff_ms", hc.backoff_ms));
  return std::make_unique<distill::HttpChatClient>(hc);
}

// Embedder selection for evaluate/sweep. Offline forbids the remote embedder.
std::unique_ptr<embed::TokenEmbedder> make_embedder(const Ctx& ctx) {
  std::string kind = config::get_string(ctx.cfg, "metric.embedder", "hash");
  if (kind == "hash") {
    int dim = static_cast<int>(config::get_int(ctx.cfg, "metric.embedder_dim", 64));
    if (dim <= 0) throw ConfigError("metric.embedder_dim must be positive");
    return std::make_unique<embed::HashEmbedder>(dim);
  }
  if (kind == "remote") {
    if (ctx.offline)
      throw ConfigError("offline mode conflicts with metric.embedder=remote");
    embed::RemoteEmbedder::Config rc;
    rc.endpoint = config::get_string(ctx.cfg, "metric.embedder_endpoint", "");
    if (rc.endpoint.empty())
      throw ConfigError("metric.embedder_endpoint is required for metric.embedder=remote");
    rc.timeout_sec =
        static_cast<int>(config::get_int(ctx.cfg, "metric.embedder_timeout_sec", rc.timeout_sec));
    rc.max_retries =
        static_cast<int>(config::get_int(ctx.cfg, "metric.embedder_max_retries", rc.max_retries));
    rc.backoff_ms =
        static_cast<int>(config::get_int(ctx.cfg, "metric.embedder_backoff_ms", rc.backoff_ms));
    return std::make_unique<embed::RemoteEmbedder>(rc);
  }
  throw ConfigError("metric.embedder must be 'hash' or 'remote', got '" + kind + "'");
}

std::vector<ExplanationRecord> read_explanations_file(const std::string& path) {
  require_input(path);
  return jsonl::read_explanations(path).records;
}

// First-seen-order unique ids across record lists (train first, then valid,
// then test) so every split's users/items exist in the model tables.
model::IdMap collect_users(const std::vector<const std::vector<ExplanationRecord>*>& splits) {
  std::vector<std::string> names;
  std::set<std::string> seen;
  for (const auto* split : splits)
    for (const auto& r : *split)
      if (seen.insert(r.user_id).second) names.push_back(r.user_id);
  return model::IdMap::build(names);
}

model::IdMap collect_items(const std::vector<const std::vector<ExplanationRecord>*>& splits) {
  std::vector<std::string> names;
  std::set<std::string> seen;
  for (const auto* split : splits)
    for (const auto& r : *split)
      if (seen.insert(r.item_id).second) names.push_back(r.item_id);
  return model::IdMap::build(names);
}

model::TrainConfig train_config_from(const Ctx& ctx, const std::string& prefix,
                                     const model::TrainConfig& defaults) {
  model::TrainConfig tc = defaults;
  tc.lr = config::get_double(ctx.cfg, prefix + ".lr", tc.lr);
  tc.plateau_factor = config::get_double(ctx.cfg, prefix + ".plateau_factor", tc.plateau_factor);
  tc.clip_norm = config::get_double(ctx.cfg, prefix + ".clip", tc.clip_norm);
  tc.batch_size = static_cast<int>(config::get_int(ctx.cfg, prefix + ".batch", tc.batch_size));
  tc.weight_decay = config::get_double(ctx.cfg, prefix + ".weight_decay", tc.weight_decay);
  tc.max_epochs = static_cast<int>(config::get_int(ctx.cfg, prefix + ".epochs", tc.max_epochs));
  tc.patience = static_cast<int>(config::get_int(ctx.cfg, prefix + ".patience", tc.patience));
  tc.lanes = static_cast<int>(config::get_int(ctx.cfg, prefix + ".lanes", tc.lanes));
  tc.seed = ctx.seed;
  if (tc.lr <= 0 || tc.batch_size <= 0 || tc.max_epochs <= 0 || tc.patience <= 0 ||
      tc.lanes <= 0 || tc.clip_norm <= 0 || tc.plateau_factor <= 0 || tc.plateau_factor >= 1 ||
      tc.weight_decay < 0)
    throw ConfigError(prefix + ".*: invalid training hyperparameters");
  return tc;
}

ojson history_json(const model::TrainHistory& h) {
  ojson epochs = ojson::array();
  for (const auto& e : h.epochs) {
    epochs.push_back(ojson{{"train_loss", e.train_loss}, {"valid_loss", e.valid_loss},
                           {"lr", e.lr}});
  }
  return ojson{{"epochs", epochs}, {"stop_reason", h.stop_reason}};
}

ojson report_json(const metrics::MetricReport& r) {
  ojson j;
  j["n"] = r.n;
  j["sentiment"] = r.sentiment;
  j["content_p"] = r.content_p;
  j["content_n"] = r.content_n;
  j["bleu1"] = r.bleu1;
  j["bleu4"] = r.bleu4;
  j["rouge1"] = r.rouge1;
  j["rouge2"] = r.rouge2;
  j["usr"] = r.usr;
  j["bert"] = r.bert;
  j["fmr_p"] = r.fmr_p;
  j["fcr_p"] = r.fcr_p;
  j["div_p"] = r.div_p;
  j["fmr_n"] = r.fmr_n;
  j["fcr_n"] = r.fcr_n;
  j["div_n"] = r.div_n;
  if (r.has_rating_error) {
    j["rating"] = ojson{{"mae", r.mae}, {"rmse", r.rmse}};
  } else {
    j["rating"] = nullptr;
  }
  j["diagnostics"] = ojson{{"rouge1_skipped", r.rouge1_skipped},
                           {"rouge2_skipped", r.rouge2_skipped},
                           {"fmr_p_eligible", r.fmr_p_eligible},
                           {"fmr_n_eligible", r.fmr_n_eligible},
                           {"empty_generated_labels", r.empty_generated_labels}};
  j["config"] =
      ojson{{"embedder", r.embedder_name}, {"idf", r.used_idf}, {"seed", r.seed}};
  return j;
}

const char* label_name(SentimentLabel l) {
  switch (l) {
    case SentimentLabel::Negative: return "negative";
    case SentimentLabel::Mixed: return "mixed";
    case SentimentLabel::Positive: return "positive";
    default: return "empty";
  }
}

// ---- synth ------------------------------------------------------------------------

int cmd_synth(Ctx& ctx) {
  StopWatch sw;
  corpus::SyntheticSpec spec = corpus::SyntheticSpec::defaults();
  spec.n_users = static_cast<int>(config::get_int(ctx.cfg, "synth.users", spec.n_users));
  spec.n_items = static_cast<int>(config::get_int(ctx.cfg, "synth.items", spec.n_items));
  spec.interactions_per_user = static_cast<int>(
      config::get_int(ctx.cfg, "synth.per_user", spec.interactions_per_user));
  spec.max_rating = static_cast<int>(config::get_int(ctx.cfg, "synth.max_rating", spec.max_rating));
  spec.tau_lo = config::get_double(ctx.cfg, "synth.tau_lo", spec.tau_lo);
  spec.tau_hi = config::get_double(ctx.cfg, "synth.tau_hi", spec.tau_hi);
  spec.seed = ctx.seed;
  spec.validate();

  corpus::SyntheticCorpus corpus = corpus::generate_synthetic_corpus(spec);
  ensure_out_dir(ctx);
  std::string interactions_path = ctx.path("paths.interactions", "interactions.jsonl");
  std::string explanations_path = ctx.path("paths.explanations", "explanations.jsonl");
  jsonl::write_interactions(interactions_path, corpus.interactions);
  jsonl::write_explanations(explanations_path, corpus.records);
  log_line(ctx, "interactions=" + std::to_string(corpus.interactions.size()) +
                    " users=" + std::to_string(spec.n_users) +
                    " items=" + std::to_string(spec.n_items) + " " + fmt_ms(sw.elapsed_ms()) +
                    " status=ok");
  std::cout << "wrote " << interactions_path << " and " << explanations_path << " ("
            << corpus.interactions.size() << " records)\n";
  return 0;
}

// ---- distill ------------------------------------------------------------------------

void write_failures(const std::string& path, const std::vector<distill::Failure>& failures) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& f : failures) {
    ojson j{{"key", f.key}, {"stage", f.stage}, {"error", f.error}, {"raw", f.raw}};
    out << j.dump() << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

int cmd_distill(Ctx& ctx) {
  StopWatch sw;
  // Config (including the offline/endpoint conflict) is validated before any
  // file is opened.
  auto client = make_chat_client(ctx);
  distill::DistillOptions opt;
  opt.word_cap = static_cast<int>(config::get_int(ctx.cfg, "dataset.word_cap", opt.word_cap));
  opt.in_flight = static_cast<int>(config::get_int(ctx.cfg, "client.in_flight", opt.in_flight));
  if (opt.word_cap <= 0 || opt.in_flight <= 0)
    throw ConfigError("dataset.word_cap and client.in_flight must be positive");
  int min_words = static_cast<int>(config::get_int(ctx.cfg, "dataset.min_words", 15));
  int k = static_cast<int>(config::get_int(ctx.cfg, "dataset.k", 20));
  if (min_words < 0 || k < 0) throw ConfigError("dataset.min_words and dataset.k must be >= 0");

  std::string interactions_path = ctx.path("paths.interactions", "interactions.jsonl");
  require_input(interactions_path);
  auto interactions = jsonl::read_interactions(interactions_path).records;
  size_t raw_n = interactions.size();
  interactions = corpus::filter_short_reviews(interactions, min_words);
  size_t after_short = interactions.size();
  interactions = corpus::kcore_filter(interactions, k);

  distill::DistillOutput output = distill::distill_corpus(*client, interactions, opt);

  ensure_out_dir(ctx);
  std::string explanations_path = ctx.path("paths.explanations", "explanations.jsonl");
  std::string failures_path = ctx.path("paths.failures", "failures.jsonl");
  jsonl::write_explanations(explanations_path, output.records);
  write_failures(failures_path, output.failures);
  log_line(ctx, "client=" + client->name() + " input=" + std::to_string(raw_n) +
                    " short_dropped=" + std::to_string(raw_n - after_short) +
                    " kcore_dropped=" + std::to_string(after_short - interactions.size()) +
                    " distilled=" + std::to_string(output.records.size()) +
                    " failures=" + std::to_string(output.failures.size()) +
                    " truncated=" + std::to_string(output.truncated_count) +
                    " dropped_phrases=" + std::to_string(output.dropped_phrase_count) + " " +
                    fmt_ms(sw.elapsed_ms()) + " status=ok");
  std::cout << "wrote " << explanations_path << " (" << output.records.size() << " records, "
            << output.failures.size() << " failures)\n";
  return 0;
}

// ---- audit ------------------------------------------------------------------------

int cmd_audit(Ctx& ctx) {
  StopWatch sw;
  auto client = make_chat_client(ctx);
  int64_t sample = config::get_int(ctx.cfg, "audit.sample", 0);
  if (sample < 0) throw ConfigError("audit.sample must be >= 0");

  std::string interactions_path = ctx.path("paths.interactions", "interactions.jsonl");
  std::string explanations_path = ctx.path("paths.explanations", "explanations.jsonl");
  require_input(interactions_path);
  require_input(explanations_path);
  auto interactions = jsonl::read_interactions(interactions_path).records;
  auto records = jsonl::read_explanations(explanations_path).records;

  std::map<std::string, const Interaction*> by_key;
  for (const auto& i : interactions) by_key[i.key()] = &i;

  // Seeded sample without replacement, processed in input order.
  std::vector<size_t> idx(records.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  if (sample > 0 && static_cast<size_t>(sample) < idx.size()) {
    Rng rng(Rng::mix(ctx.seed, 0xa0d17ULL));
    rng.shuffle(idx);
    idx.resize(static_cast<size_t>(sample));
    std::sort(idx.begin(), idx.end());
  }

  std::vector<distill::QualityJudgmentStage1> stage1;
  std::vector<distill::QualityJudgmentStage2> stage2;
  size_t skipped_unmatched = 0, failed = 0;
  for (size_t i : idx) {
    const auto& r = records[i];
    Interaction key_probe;
    key_probe.user_id = r.user_id;
    key_probe.item_id = r.item_id;
    key_probe.timestamp = r.timestamp;
    auto it = by_key.find(key_probe.key());
    if (it == by_key.end()) {
      ++skipped_unmatched;
      continue;
    }
    try {
      stage1.push_back(distill::quality_eval_summary(*client, *it->second, r.explanation));
      stage2.push_back(distill::quality_eval_features(*client, r.positive_features,
                                                      r.negative_features, r.explanation));
    } catch (const Error& e) {
      ++failed;
      if (ctx.verbose) log_line(ctx, "audit_failure key=" + it->second->key());
    }
  }
  if (stage1.empty() && stage2.empty())
    throw Error("audit: no records were successfully judged");

  distill::QualityReport q = distill::aggregate_quality(stage1, stage2);
  ojson j{{"factual", q.factual},
          {"context_p", q.context_p},
          {"context_n", q.context_n},
          {"factual_p", q.factual_p},
          {"complete_p", q.complete_p},
          {"factual_n", q.factual_n},
          {"complete_n", q.complete_n},
          {"n_stage1", q.n_stage1},
          {"n_stage2", q.n_stage2}};
  ensure_out_dir(ctx);
  std::string quality_path = ctx.path("paths.quality", "quality.json");
  write_text_file(quality_path, j.dump(2) + "\n");
  log_line(ctx, "client=" + client->name() + " judged=" + std::to_string(q.n_stage1) +
                    " unmatched=" + std::to_string(skipped_unmatched) +
                    " failed=" + std::to_string(failed) + " " + fmt_ms(sw.elapsed_ms()) +
                    " status=ok");
  std::cout << "quality: factual=" << fmt_double(q.factual)
            << " context_p=" << fmt_double(q.context_p)
            << " context_n=" << fmt_double(q.context_n)
            << " factual_p=" << fmt_double(q.factual_p)
            << " complete_p=" << fmt_double(q.complete_p)
            << " factual_n=" << fmt_double(q.factual_n)
            << " complete_n=" << fmt_double(q.complete_n) << "\n"
            << "wrote " << quality_path << "\n";
  return 0;
}

// ---- split ------------------------------------------------------------------------

int cmd_split(Ctx& ctx) {
  StopWatch sw;
  std::string explanations_path = ctx.path("paths.explanations", "explanations.jsonl");
  auto records = read_explanations_file(explanations_path);
  corpus::SplitDataset split = corpus::chronological_split(records);
  ensure_out_dir(ctx);
  std::string train_path = ctx.path("paths.train", "train.jsonl");
  std::string valid_path = ctx.path("paths.valid", "valid.jsonl");
  std::string test_path = ctx.path("paths.test", "test.jsonl");
  jsonl::write_explanations(train_path, split.train);
  jsonl::write_explanations(valid_path, split.valid);
  jsonl::write_explanations(test_path, split.test);
  log_line(ctx, "train=" + std::to_string(split.train.size()) +
                    " valid=" + std::to_string(split.valid.size()) +
                    " test=" + std::to_string(split.test.size()) + " " + fmt_ms(sw.elapsed_ms()) +
                    " status=ok");
  std::cout << "wrote " << train_path << " (" << split.train.size() << "), " << valid_path
            << " (" << split.valid.size() << "), " << test_path << " (" << split.test.size()
            << ")\n";
  return 0;
}

// ---- train-rating --------------------------------------------------------------------

std::vector<model::Example> predictor_examples(const std::vector<ExplanationRecord>& records,
                                               const model::IdMap& users,
                                               const model::IdMap& items) {
  std::vector<model::Example> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    model::Example e;
    e.user = users.require(r.user_id);
    e.item = items.require(r.item_id);
    e.input_rating = r.rating;
    e.target_rating = r.rating;
    out.push_back(std::move(e));
  }
  return out;
}

int cmd_train_rating(Ctx& ctx) {
  StopWatch sw;
  auto train_records = read_explanations_file(ctx.path("paths.train", "train.jsonl"));
  auto valid_records = read_explanations_file(ctx.path("paths.valid", "valid.jsonl"));
  auto test_records = read_explanations_file(ctx.path("paths.test", "test.jsonl"));

  model::IdMap users = collect_users({&train_records, &valid_records, &test_records});
  model::IdMap items = collect_items({&train_records, &valid_records, &test_records});

  model::PredictorConfig pc;
  pc.embed_dim = static_cast<int>(config::get_int(ctx.cfg, "predictor.embed_dim", pc.embed_dim));
  pc.hidden = static_cast<int>(config::get_int(ctx.cfg, "predictor.hidden", pc.hidden));
  pc.max_rating = static_cast<int>(config::get_int(ctx.cfg, "synth.max_rating", pc.max_rating));
  pc.seed = ctx.seed;
  if (pc.embed_dim <= 0 || pc.hidden <= 0 || pc.max_rating < 1)
    throw ConfigError("predictor.*: invalid dimensions");

  model::TrainConfig defaults;
  defaults.lr = 0.05;
  defaults.batch_size = 256;
  defaults.max_epochs = 30;
  defaults.weight_decay = 1e-4;
  model::TrainConfig tc = train_config_from(ctx, "train_rating", defaults);

  model::RatingPredictor predictor = model::init_predictor(pc, users, items);
  auto train_set = predictor_examples(train_records, users, items);
  auto valid_set = predictor_examples(valid_records, users, items);
  model::TrainHistory history = model::train_predictor(&predictor, train_set, valid_set, tc);

  // Test MAE vs. the global-mean baseline (constant = mean train rating).
  double mean_rating = 0.0;
  for (const auto& r : train_records) mean_rating += r.rating;
  mean_rating /= static_cast<double>(train_records.size());
  std::vector<double> truth, predicted, baseline;
  truth.reserve(test_records.size());
  for (const auto& r : test_records) {
    truth.push_back(r.rating);
    predicted.push_back(model::predict_rating(predictor, r.user_id, r.item_id));
    baseline.push_back(mean_rating);
  }
  metrics::MaeRmse mlp = metrics::mae_rmse(truth, predicted);
  metrics::MaeRmse base = metrics::mae_rmse(truth, baseline);

  ensure_out_dir(ctx);
  std::string predictor_path = ctx.path("paths.predictor", "predictor.bin");
  model::save_predictor(predictor, predictor_path);
  ojson j{{"test_mae", mlp.mae},
          {"test_rmse", mlp.rmse},
          {"baseline_mae", base.mae},
          {"baseline_rmse", base.rmse},
          {"global_mean", mean_rating},
          {"history", history_json(history)}};
  write_text_file(ctx.path("paths.train_rating_report", "train_rating.json"), j.dump(2) + "\n");

  log_line(ctx, "epochs=" + std::to_string(history.epochs.size()) +
                    " test_mae=" + fmt_double(mlp.mae) + " baseline_mae=" + fmt_double(base.mae) +
                    " " + fmt_ms(sw.elapsed_ms()) + " status=ok");
  std::cout << "predictor test MAE " << fmt_double(mlp.mae) << " (global-mean baseline "
            << fmt_double(base.mae) << "), saved to " << predictor_path << "\n";
  return 0;
}

// ---- train ------------------------------------------------------------------------

model::ModelConfig model_config_from(const Ctx& ctx) {
  std::string preset = config::get_string(ctx.cfg, "model.preset", "desk");
  model::ModelConfig mc;
  if (preset == "paper") {
    mc = model::ModelConfig::paper_scale();
  } else if (preset != "desk") {
    throw ConfigError("model.preset must be 'desk' or 'paper', got '" + preset + "'");
  }
  mc.n_layers = static_cast<int>(config::get_int(ctx.cfg, "model.layers", mc.n_layers));
  mc.n_heads = static_cast<int>(config::get_int(ctx.cfg, "model.heads", mc.n_heads));
  mc.embed_dim = static_cast<int>(config::get_int(ctx.cfg, "model.embed_dim", mc.embed_dim));
  mc.ffn_dim = static_cast<int>(config::get_int(ctx.cfg, "model.ffn_dim", mc.ffn_dim));
  mc.dropout = config::get_double(ctx.cfg, "model.dropout", mc.dropout);
  mc.max_len = static_cast<int>(config::get_int(ctx.cfg, "model.max_len", mc.max_len));
  mc.max_rating = static_cast<int>(config::get_int(ctx.cfg, "synth.max_rating", mc.max_rating));
  mc.lambda_e = config::get_double(ctx.cfg, "model.lambda_e", mc.lambda_e);
  mc.lambda_c = config::get_double(ctx.cfg, "model.lambda_c", mc.lambda_c);
  mc.lambda_r = config::get_double(ctx.cfg, "model.lambda_r", mc.lambda_r);
  mc.rating_head_hidden =
      static_cast<int>(config::get_int(ctx.cfg, "model.rating_head_hidden", mc.rating_head_hidden));
  mc.rating_mode =
      model::rating_mode_from_name(config::get_string(ctx.cfg, "model.mode", "d-emb"));
  return mc;
}

int cmd_train(Ctx& ctx) {
  StopWatch sw;
  auto train_records = read_explanations_file(ctx.path("paths.train", "train.jsonl"));
  auto valid_records = read_explanations_file(ctx.path("paths.valid", "valid.jsonl"));
  // The test split, when present, only contributes user/item ids so that
  // later `generate` runs see every id in the tables.
  std::vector<ExplanationRecord> test_records;
  std::string test_path = ctx.path("paths.test", "test.jsonl");
  if (fs::exists(test_path)) test_records = jsonl::read_explanations(test_path).records;

  model::Model m;
  m.cfg = model_config_from(ctx);
  m.vocab = model::build_vocab(train_records);
  m.users = collect_users({&train_records, &valid_records, &test_records});
  m.items = collect_items({&train_records, &valid_records, &test_records});
  m.cfg.vocab_size = m.vocab.size();
  m.cfg.n_users = static_cast<int>(m.users.names.size());
  m.cfg.n_items = static_cast<int>(m.items.names.size());
  m.cfg.seed = ctx.seed;
  m.cfg.validate();
  m.params = model::init_model(m.cfg);

  std::vector<model::Example> train_set, valid_set;
  train_set.reserve(train_records.size());
  valid_set.reserve(valid_records.size());
  for (const auto& r : train_records) train_set.push_back(model::make_example(m, r));
  for (const auto& r : valid_records) valid_set.push_back(model::make_example(m, r));

  model::TrainConfig defaults;
  defaults.max_epochs = 10;
  model::TrainConfig tc = train_config_from(ctx, "train", defaults);
  model::TrainHistory history = model::train(&m, train_set, valid_set, tc);

  ensure_out_dir(ctx);
  std::string model_path = ctx.path("paths.model", "model.bin");
  model::save_model(m, model_path);
  ojson j{{"mode", model::rating_mode_name(m.cfg.rating_mode)},
          {"vocab", m.vocab.size()},
          {"users", m.cfg.n_users},
          {"items", m.cfg.n_items},
          {"history", history_json(history)}};
  write_text_file(ctx.path("paths.train_report", "train.json"), j.dump(2) + "\n");

  double final_valid =
      history.epochs.empty() ? 0.0 : history.epochs.back().valid_loss;
  if (ctx.verbose) {
    for (size_t i = 0; i < history.epochs.size(); ++i) {
      const auto& e = history.epochs[i];
      log_line(ctx, "epoch=" + std::to_string(i + 1) + " train_loss=" + fmt_double(e.train_loss) +
                        " valid_loss=" + fmt_double(e.valid_loss) + " lr=" + fmt_double(e.lr));
    }
  }
  log_line(ctx, "mode=" + model::rating_mode_name(m.cfg.rating_mode) +
                    " epochs=" + std::to_string(history.epochs.size()) +
                    " valid_loss=" + fmt_double(final_valid) + " " + fmt_ms(sw.elapsed_ms()) +
                    " status=ok");
  std::cout << "trained " << model::rating_mode_name(m.cfg.rating_mode) << " generator ("
            << history.stop_reason << "), saved to " << model_path << "\n";
  return 0;
}

// ---- generate ------------------------------------------------------------------------

int cmd_generate(Ctx& ctx) {
  StopWatch sw;
  std::string model_path = ctx.path("paths.model", "model.bin");
  require_input(model_path);
  model::Model m = model::load_model(model_path);
  auto test_records = read_explanations_file(ctx.path("paths.test", "test.jsonl"));

  std::string source = config::get_string(ctx.cfg, "generate.rating_source", "gt");
  bool conditioned = m.cfg.rating_mode == model::RatingMode::CEmb ||
                     m.cfg.rating_mode == model::RatingMode::DEmb;
  std::optional<model::RatingPredictor> predictor;
  if (conditioned) {
    if (source == "mlp") {
      std::string predictor_path = ctx.path("paths.predictor", "predictor.bin");
      require_input(predictor_path);
      predictor = model::load_predictor(predictor_path);
    } else if (source != "gt") {
      throw ConfigError("generate.rating_source must be 'gt' or 'mlp', got '" + source + "'");
    }
  }

  std::vector<Prediction> predictions;
  predictions.reserve(test_records.size());
  for (const auto& r : test_records) {
    Prediction p;
    p.user_id = r.user_id;
    p.item_id = r.item_id;
    double input_rating = 0.0;
    if (conditioned) {
      input_rating = predictor ? model::predict_rating(*predictor, r.user_id, r.item_id)
                               : r.rating;
      p.has_rating = true;
      p.predicted_rating = input_rating;
    } else if (m.cfg.rating_mode == model::RatingMode::Subtask) {
      p.has_rating = true;
      p.predicted_rating = model::subtask_rating(m, r.user_id, r.item_id);
    }
    p.explanation = model::generate_explanation(m, r.user_id, r.item_id, input_rating);
    predictions.push_back(std::move(p));
  }

  ensure_out_dir(ctx);
  std::string predictions_path = ctx.path("paths.predictions", "predictions.jsonl");
  jsonl::write_predictions(predictions_path, predictions);
  log_line(ctx, "mode=" + model::rating_mode_name(m.cfg.rating_mode) + " rating_source=" +
                    (conditioned ? source : std::string("model")) +
                    " predictions=" + std::to_string(predictions.size()) + " " +
                    fmt_ms(sw.elapsed_ms()) + " status=ok");
  std::cout << "wrote " << predictions_path << " (" << predictions.size() << " predictions)\n";
  return 0;
}

// ---- evaluate ------------------------------------------------------------------------

// Pair test records with predictions by position, verifying ids, and fill in
// the extracted feature sets.
std::vector<Prediction> paired_predictions(const std::vector<ExplanationRecord>& truth,
                                           std::vector<Prediction> predictions) {
  if (truth.size() != predictions.size())
    throw Error("evaluate: test split has " + std::to_string(truth.size()) +
                " records but predictions file has " + std::to_string(predictions.size()));
  for (size_t i = 0; i < truth.size(); ++i) {
    if (truth[i].user_id != predictions[i].user_id ||
        truth[i].item_id != predictions[i].item_id)
      throw Error("evaluate: row " + std::to_string(i + 1) + " pairs test " +
                  truth[i].user_id + "/" + truth[i].item_id + " with prediction " +
                  predictions[i].user_id + "/" + predictions[i].item_id);
    predictions[i].features = templates::parse_explanation(predictions[i].explanation);
  }
  return predictions;
}

int cmd_evaluate(Ctx& ctx) {
  StopWatch sw;
  auto embedder = make_embedder(ctx);
  bool use_idf = config::get_bool(ctx.cfg, "metric.idf", false);

  auto truth = read_explanations_file(ctx.path("paths.test", "test.jsonl"));
  std::string predictions_path = ctx.path("paths.predictions", "predictions.jsonl");
  require_input(predictions_path);
  auto predictions = paired_predictions(truth, jsonl::read_predictions(predictions_path).records);

  metrics::EvaluateConfig ec;
  ec.embedder = embedder.get();
  ec.use_idf = use_idf;
  ec.seed = ctx.seed;
  metrics::MetricReport report = metrics::evaluate(truth, predictions, ec, ctx.verbose);

  ensure_out_dir(ctx);
  std::string report_path = ctx.path("paths.report", "report.json");
  write_text_file(report_path, report_json(report).dump(2) + "\n");
  if (ctx.verbose) {
    std::string per_instance_path = ctx.path("paths.per_instance", "per_instance.jsonl");
    std::ofstream out(per_instance_path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + per_instance_path);
    for (size_t i = 0; i < report.per_instance.size(); ++i) {
      const auto& s = report.per_instance[i];
      ojson j{{"user", truth[i].user_id},
              {"item", truth[i].item_id},
              {"truth_label", label_name(s.truth_label)},
              {"generated_label", label_name(s.generated_label)},
              {"sentiment_match", s.sentiment_match},
              {"content_p", s.content_p},
              {"content_n", s.content_n},
              {"bleu1", s.bleu1},
              {"bleu4", s.bleu4},
              {"rouge1", s.rouge1_skipped ? ojson(nullptr) : ojson(s.rouge1)},
              {"rouge2", s.rouge2_skipped ? ojson(nullptr) : ojson(s.rouge2)},
              {"bert_f1", s.bert_f1}};
      out << j.dump() << "\n";
    }
    if (!out) throw IoError("write failed: " + per_instance_path);
  }

  log_line(ctx, "n=" + std::to_string(report.n) + " sentiment=" + fmt_double(report.sentiment) +
                    " content_p=" + fmt_double(report.content_p) +
                    " content_n=" + fmt_double(report.content_n) + " " + fmt_ms(sw.elapsed_ms()) +
                    " status=ok");
  std::cout << "n " << report.n << "\nsentiment " << fmt_double(report.sentiment)
            << "\ncontent_p " << fmt_double(report.content_p) << "\ncontent_n "
            << fmt_double(report.content_n) << "\nBLEU-1 " << fmt_double(report.bleu1)
            << "\nBLEU-4 " << fmt_double(report.bleu4) << "\nROUGE-1 "
            << fmt_double(report.rouge1) << "\nROUGE-2 " << fmt_double(report.rouge2)
            << "\nUSR " << fmt_double(report.usr) << "\nBERT " << fmt_double(report.bert)
            << "\nFMR+ " << fmt_double(report.fmr_p) << "  FCR+ " << fmt_double(report.fcr_p)
            << "  DIV+ " << fmt_double(report.div_p) << "\nFMR- " << fmt_double(report.fmr_n)
            << "  FCR- " << fmt_double(report.fcr_n) << "  DIV- " << fmt_double(report.div_n)
            << "\n";
  if (report.has_rating_error)
    std::cout << "MAE " << fmt_double(report.mae) << "  RMSE " << fmt_double(report.rmse)
              << "\n";
  std::cout << "wrote " << report_path << "\n";
  return 0;
}

// ---- sweep ------------------------------------------------------------------------

int cmd_sweep(Ctx& ctx) {
  StopWatch sw;
  auto embedder = make_embedder(ctx);
  simulate::NoiseGrid grid;
  std::string sigmas = config::get_string(ctx.cfg, "sweep.sigmas", "");
  if (!sigmas.empty()) grid.sigmas = parse_double_list(sigmas, "sweep.sigmas");
  grid.seed = ctx.seed;
  grid.max_rating = static_cast<int>(config::get_int(ctx.cfg, "synth.max_rating", grid.max_rating));
  grid.validate();

  std::string model_path = ctx.path("paths.model", "model.bin");
  require_input(model_path);
  model::Model m = model::load_model(model_path);
  auto test_records = read_explanations_file(ctx.path("paths.test", "test.jsonl"));

  metrics::EvaluateConfig ec;
  ec.embedder = embedder.get();
  ec.use_idf = config::get_bool(ctx.cfg, "metric.idf", false);
  ec.seed = ctx.seed;
  simulate::SweepResult result = simulate::noise_sweep(m, test_records, grid, ec);

  ensure_out_dir(ctx);
  std::string csv_path = ctx.path("paths.sweep_csv", "sweep.csv");
  write_text_file(csv_path, simulate::sweep_csv(result));

  // One line chart per swept metric.
  struct MetricColumn {
    const char* name;
    double (*value)(const simulate::SweepEntry&);
  };
  const MetricColumn columns[] = {
      {"sentiment", [](const simulate::SweepEntry& e) { return e.report.sentiment; }},
      {"content_p", [](const simulate::SweepEntry& e) { return e.report.content_p; }},
      {"content_n", [](const simulate::SweepEntry& e) { return e.report.content_n; }},
      {"B1", [](const simulate::SweepEntry& e) { return e.report.bleu1; }},
      {"R1", [](const simulate::SweepEntry& e) { return e.report.rouge1; }},
      {"induced_rating_MAE", [](const simulate::SweepEntry& e) { return e.induced_rating_mae; }},
  };
  std::vector<std::string> chart_paths;
  for (const auto& col : columns) {
    svg::Series series;
    series.label = col.name;
    for (const auto& e : result.entries) {
      series.xs.push_back(e.sigma);
      series.ys.push_back(col.value(e));
    }
    std::string chart = svg::line_chart(std::string(col.name) + " vs rating noise", "sigma",
                                        col.name, {series});
    std::string path = (fs::path(ctx.out) / ("sweep_" + std::string(col.name) + ".svg")).string();
    write_text_file(path, chart);
    chart_paths.push_back(path);
  }

  log_line(ctx, "points=" + std::to_string(result.entries.size()) +
                    " charts=" + std::to_string(chart_paths.size()) + " " +
                    fmt_ms(sw.elapsed_ms()) + " status=ok");
  std::cout << simulate::sweep_csv(result) << "wrote " << csv_path << " and "
            << chart_paths.size() << " charts\n";
  return 0;
}

// ---- stats ------------------------------------------------------------------------

int cmd_stats(Ctx& ctx) {
  StopWatch sw;
  auto records = read_explanations_file(ctx.path("paths.explanations", "explanations.jsonl"));
  int max_rating = static_cast<int>(config::get_int(ctx.cfg, "synth.max_rating", 5));
  if (max_rating < 1) throw ConfigError("synth.max_rating must be >= 1");

  std::vector<std::string> thresholds = parse_string_list(
      config::get_string(ctx.cfg, "stats.thresholds", "=1,=2,=3,>3"));
  if (thresholds.empty()) throw ConfigError("stats.thresholds: empty list");

  corpus::CorpusStats cs = corpus::corpus_stats(records, max_rating);
  auto occurrence = corpus::feature_occurrence_ratio(records, thresholds);
  auto distribution = corpus::rating_sentiment_distribution(
      records, [](const FeatureSet& f) { return metrics::sentiment_label(f); });

  // Table: corpus statistics.
  std::ostringstream table;
  table << "corpus statistics\n";
  table << "  interactions            " << cs.n_interactions << "\n";
  table << "  users                   " << cs.n_users << "\n";
  table << "  items                   " << cs.n_items << "\n";
  table << "  positive features       " << cs.n_positive_features << "\n";
  table << "  negative features       " << cs.n_negative_features << "\n";
  table << "  records per user        " << fmt_double(cs.records_per_user) << "\n";
  table << "  records per item        " << fmt_double(cs.records_per_item) << "\n";
  table << "  words per explanation   " << fmt_double(cs.words_per_explanation) << "\n";
  table << "\nfeature occurrence (share of unique features by mention count)\n";
  table << "  bucket      positive    negative\n";
  for (const auto& b : occurrence) {
    char line[128];
    std::snprintf(line, sizeof(line), "  %-10s  %-10s  %-10s\n", b.label.c_str(),
                  fmt_double(b.positive_ratio).c_str(), fmt_double(b.negative_ratio).c_str());
    table << line;
  }
  table << "\nrating-sentiment distribution (row share per rounded rating)\n";
  table << "  rating    negative    mixed       positive    empty\n";
  for (const auto& [bucket, shares] : distribution) {
    char line[160];
    std::snprintf(line, sizeof(line), "  %-8d  %-10s  %-10s  %-10s  %-10s\n", bucket,
                  fmt_double(shares[0]).c_str(), fmt_double(shares[1]).c_str(),
                  fmt_double(shares[2]).c_str(), fmt_double(shares[3]).c_str());
    table << line;
  }
  std::cout << table.str();

  // stats.json
  ojson occ = ojson::array();
  for (const auto& b : occurrence)
    occ.push_back(ojson{{"bucket", b.label},
                        {"positive_ratio", b.positive_ratio},
                        {"negative_ratio", b.negative_ratio}});
  ojson dist = ojson::array();
  for (const auto& [bucket, shares] : distribution)
    dist.push_back(ojson{{"rating", bucket},
                         {"negative", shares[0]},
                         {"mixed", shares[1]},
                         {"positive", shares[2]},
                         {"empty", shares[3]}});
  ojson j{{"corpus",
           ojson{{"interactions", cs.n_interactions},
                 {"users", cs.n_users},
                 {"items", cs.n_items},
                 {"positive_features", cs.n_positive_features},
                 {"negative_features", cs.n_negative_features},
                 {"records_per_user", cs.records_per_user},
                 {"records_per_item", cs.records_per_item},
                 {"words_per_explanation", cs.words_per_explanation},
                 {"max_rating", cs.max_rating}}},
          {"feature_occurrence", occ},
          {"rating_sentiment_distribution", dist}};
  ensure_out_dir(ctx);
  std::string stats_path = ctx.path("paths.stats", "stats.json");
  write_text_file(stats_path, j.dump(2) + "\n");

  // Distribution chart: one stacked column per rating bucket.
  svg::StackedBars bars;
  bars.part_labels = {"negative", "mixed", "positive", "empty"};
  for (const auto& [bucket, shares] : distribution) {
    bars.bucket_labels.push_back(std::to_string(bucket));
    bars.shares.push_back({shares[0], shares[1], shares[2], shares[3]});
  }
  std::string chart_path = (fs::path(ctx.out) / "distribution.svg").string();
  write_text_file(chart_path,
                  svg::stacked_bar_chart("sentiment share by rating", "share", bars));

  log_line(ctx, "records=" + std::to_string(records.size()) + " " + fmt_ms(sw.elapsed_ms()) +
                    " status=ok");
  std::cout << "wrote " << stats_path << " and " << chart_path << "\n";
  return 0;
}

int dispatch(Ctx& ctx) {
  if (ctx.command == "synth") return cmd_synth(ctx);
  if (ctx.command == "distill") return cmd_distill(ctx);
  if (ctx.command == "audit") return cmd_audit(ctx);
  if (ctx.command == "split") return cmd_split(ctx);
  if (ctx.command == "train-rating") return cmd_train_rating(ctx);
  if (ctx.command == "train") return cmd_train(ctx);
  if (ctx.command == "generate") return cmd_generate(ctx);
  if (ctx.command == "evaluate") return cmd_evaluate(ctx);
  if (ctx.command == "sweep") return cmd_sweep(ctx);
  if (ctx.command == "stats") return cmd_stats(ctx);
  throw UnknownCommand("unknown command: " + ctx.command);
}

}  // namespace

int run(int argc, char** argv) {
  Flags flags;
  try {
    flags = parse_flags(argc, argv);
  } catch (const UnknownCommand& e) {
    std::cerr << "sentrec: " << e.what() << "\n" << kUsage;
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "sentrec: " << e.what() << "\n";
    return 3;
  }

  try {
    Ctx ctx = build_ctx(flags);
    return dispatch(ctx);
  } catch (const MissingFile& e) {
    std::cerr << "sentrec: " << e.what() << "\n";
    return 4;
  } catch (const ConfigError& e) {
    std::cerr << "sentrec: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "sentrec: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "sentrec: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace sentrec::cli
