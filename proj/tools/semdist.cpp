// semdist: text-image consistency metrics, stability sweeps, hard-negative
// caption construction and gradient projection checks.
//
// Exit codes: 0 success, 1 data / I/O error (error JSON on stdout),
// 2 usage or configuration error.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "semdist/embedding_store.hpp"
#include "semdist/error.hpp"
#include "semdist/hnsc.hpp"
#include "semdist/metrics.hpp"
#include "semdist/parallel.hpp"
#include "semdist/random.hpp"
#include "semdist/sproj.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitData = 1;
constexpr int kExitUsage = 2;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MetricOptions {
  std::string manifest;
  std::string out;
  double ridge_scale = 1e-6;
  double omega = 2.5;
  double scale = 100.0;
  std::string trsv_mode = "diag";
  std::uint64_t seed = 0;
  std::size_t distractors = 99;
};

void add_metric_options(CLI::App* cmd, MetricOptions& o) {
  cmd->add_option("--manifest", o.manifest, "RecordManifest JSON")->required();
  cmd->add_option("--out", o.out, "Output file (default: stdout)");
  cmd->add_option("--ridge-scale", o.ridge_scale, "Ridge on C_ss as a fraction of its mean variance")
      ->capture_default_str();
  cmd->add_option("--omega", o.omega, "CLIPScore weight")->capture_default_str();
  cmd->add_option("--scale", o.scale, "Reporting multiplier")->capture_default_str();
  cmd->add_option("--trsv-mode", o.trsv_mode, "diag or full")->capture_default_str();
  cmd->add_option("--seed", o.seed, "Sampling seed")->capture_default_str();
  cmd->add_option("--distractors", o.distractors, "R-precision distractors per query")->capture_default_str();
}

semdist::MetricConfig to_config(const MetricOptions& o) {
  semdist::MetricConfig c;
  if (!(o.ridge_scale >= 0.0)) throw ConfigError("--ridge-scale must be non-negative");
  if (!(o.omega > 0.0)) throw ConfigError("--omega must be positive");
  if (!(o.scale > 0.0)) throw ConfigError("--scale must be positive");
  if (o.distractors == 0) throw ConfigError("--distractors must be positive");
  if (o.trsv_mode != "diag" && o.trsv_mode != "full") throw ConfigError("--trsv-mode must be diag or full");
  c.ridge_scale = o.ridge_scale;
  c.omega = o.omega;
  c.scale = o.scale;
  c.trsv_mode = semdist::parse_trsv_mode(o.trsv_mode);
  c.seed = o.seed;
  c.distractors = o.distractors;
  return c;
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw semdist::Error(semdist::ErrorKind::io_error, "cannot write " + path);
  out << text;
  if (!out) throw semdist::Error(semdist::ErrorKind::io_error, "write failed for " + path);
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw semdist::Error(semdist::ErrorKind::file_not_found, "file not found: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::string metric_names(const std::set<semdist::MetricSelection>& sel) {
  static const char* names[] = {"ssd", "cs", "cfid", "r", "ssd_t"};
  std::string out;
  for (auto m : sel) {
    if (!out.empty()) out += ',';
    out += names[static_cast<int>(m)];
  }
  return out;
}

// ---------------------------------------------------------------- eval
struct EvalOptions {
  MetricOptions metric;
  std::string metrics = "ssd,cs,cfid,r";
};

int run_eval(const EvalOptions& o) {
  const auto config = to_config(o.metric);
  std::set<semdist::MetricSelection> selection;
  try {
    selection = semdist::parse_metric_selection(o.metrics);
  } catch (const semdist::Error& e) {
    throw ConfigError(e.what());
  }
  if (selection.count(semdist::MetricSelection::ssd_t) &&
      (selection.count(semdist::MetricSelection::ssd) || selection.count(semdist::MetricSelection::cfid))) {
    throw ConfigError("ssd_t cannot be combined with ssd or cfid");
  }

  const auto dataset = semdist::load_manifest(o.metric.manifest);
  const auto report = semdist::evaluate(dataset, selection, config);
  json j = report.to_json();
  j["config"]["manifest"] = o.metric.manifest;
  j["config"]["metrics"] = metric_names(selection);
  emit(o.metric.out, j.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------- sweep
struct SweepOptions {
  MetricOptions metric;
  std::vector<std::size_t> counts;
  std::size_t repeats = 10;
};

int run_sweep(const SweepOptions& o) {
  const auto config = to_config(o.metric);
  if (o.counts.empty()) throw ConfigError("--counts is empty");
  for (std::size_t i = 1; i < o.counts.size(); ++i) {
    if (o.counts[i] == o.counts[i - 1]) throw ConfigError("--counts contains duplicates");
    if (o.counts[i] < o.counts[i - 1]) throw ConfigError("--counts must be increasing");
  }
  if (o.counts.front() < 2) throw ConfigError("--counts entries must be at least 2");
  if (o.repeats == 0) throw ConfigError("--repeats must be positive");

  const auto dataset = semdist::load_manifest(o.metric.manifest);
  const auto curve = semdist::stability_sweep(dataset, o.counts, o.repeats, config.seed, config);

  json echo = {{"manifest", o.metric.manifest}, {"counts", o.counts},     {"repeats", o.repeats},
               {"seed", config.seed},           {"scale", config.scale},  {"ridge_scale", config.ridge_scale},
               {"n_records", dataset.size()},   {"points", curve.to_json()}};
  emit(o.metric.out, curve.to_csv());
  if (o.metric.out.empty()) {
    std::cerr << echo.dump() << '\n';
  } else {
    emit(o.metric.out + ".json", echo.dump(2) + "\n");
  }
  return 0;
}

// ---------------------------------------------------------------- hnsc
struct HnscOptions {
  std::string lexicon;
  std::string captions;
  std::string out;
  std::string log;
  double ratio = 0.1;
  std::uint64_t seed = 0;
};

int run_hnsc(const HnscOptions& o) {
  if (!(o.ratio >= 0.0 && o.ratio <= 1.0)) throw ConfigError("--ratio must lie in [0, 1]");
  const auto lexicon =
      semdist::load_lexicon(o.lexicon, [](const std::string& w) { std::cerr << "warning: " << w << '\n'; });
  const auto lines = read_lines(o.captions);

  std::string corrupted;
  json entries = json::array();
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto tokens = semdist::tokenize(lines[i], lexicon);
    semdist::HardNegative neg;
    try {
      neg = semdist::construct_hard_negative(tokens, lexicon, o.ratio, semdist::mix_seed(o.seed, i));
    } catch (const semdist::Error& e) {
      throw semdist::Error(e.kind(), "caption line " + std::to_string(i + 1) + ": " + e.what());
    }
    corrupted += semdist::render_hard_negative(lines[i], tokens, neg);
    corrupted += '\n';
    entries.push_back({{"line", i + 1},
                       {"replaceable", tokens.replaceable.size()},
                       {"replaced_indices", neg.replaced_indices},
                       {"originals", neg.originals},
                       {"replacements", neg.replacements}});
  }
  json log = {{"config", {{"lexicon", o.lexicon}, {"captions", o.captions}, {"ratio", o.ratio}, {"seed", o.seed}}},
              {"lines", entries}};

  emit(o.out, corrupted);
  std::string log_path = o.log;
  if (log_path.empty() && !o.out.empty()) log_path = o.out + ".log.json";
  if (log_path.empty()) {
    std::cerr << log.dump() << '\n';
  } else {
    emit(log_path, log.dump(2) + "\n");
  }
  return 0;
}

// ---------------------------------------------------------------- sproj-check
struct SprojOptions {
  std::string pairs;
  std::string out;
  bool paper_sign = false;
  bool qp = false;
};

Eigen::VectorXd vector_from(const json& j, std::size_t index, const char* field) {
  if (!j.is_array()) {
    throw semdist::Error(semdist::ErrorKind::parse_error,
                         "pair " + std::to_string(index) + ": '" + field + "' must be an array");
  }
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) {
    if (!j[k].is_number()) {
      throw semdist::Error(semdist::ErrorKind::parse_error,
                           "pair " + std::to_string(index) + ": '" + field + "' holds a non-number");
    }
    v(static_cast<Eigen::Index>(k)) = j[k].get<double>();
  }
  return v;
}

int run_sproj_check(const SprojOptions& o) {
  std::ifstream in(o.pairs);
  if (!in) throw semdist::Error(semdist::ErrorKind::file_not_found, "pairs file not found: " + o.pairs);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw semdist::Error(semdist::ErrorKind::parse_error, std::string("pairs file is not valid JSON: ") + e.what());
  }
  const json& items = doc.is_object() && doc.contains("pairs") ? doc["pairs"] : doc;
  if (!items.is_array()) throw semdist::Error(semdist::ErrorKind::parse_error, "expected an array of pairs");

  const auto trigger =
      o.paper_sign ? semdist::ProjectionTrigger::paper_sign : semdist::ProjectionTrigger::on_conflict;
  json results = json::array();
  for (std::size_t i = 0; i < items.size(); ++i) {
    const json& item = items[i];
    if (!item.is_object() || !item.contains("delta_a") || !item.contains("delta_s")) {
      throw semdist::Error(semdist::ErrorKind::parse_error,
                           "pair " + std::to_string(i) + ": expected {\"delta_a\": [...], \"delta_s\": [...]}");
    }
    semdist::GradientPair pair{vector_from(item["delta_a"], i, "delta_a"), vector_from(item["delta_s"], i, "delta_s")};
    semdist::ProjectionResult r;
    try {
      r = o.qp ? semdist::project_qp(pair, trigger) : semdist::project(pair, trigger);
    } catch (const semdist::Error& e) {
      throw semdist::Error(e.kind(), "pair " + std::to_string(i) + ": " + e.what());
    }
    if (trigger == semdist::ProjectionTrigger::on_conflict &&
        r.inner_after < -1e-12 * pair.delta_a.norm() * r.projected.norm()) {
      throw semdist::Error(semdist::ErrorKind::numerical,
                           "pair " + std::to_string(i) + ": projection left a conflicting direction");
    }
    results.push_back({{"index", i},
                       {"projected", std::vector<double>(r.projected.data(), r.projected.data() + r.projected.size())},
                       {"conflicted", r.conflicted},
                       {"inner_before", r.inner_before},
                       {"inner_after", r.inner_after}});
  }
  json out = {{"config", {{"pairs", o.pairs}, {"paper_sign_convention", o.paper_sign}, {"solver", o.qp ? "qp" : "closed_form"}}},
              {"results", results}};
  emit(o.out, out.dump(2) + "\n");
  return 0;
}

void print_error(const std::string& kind, const std::string& message) {
  json err = {{"error", {{"kind", kind}, {"message", message}}}};
  std::cout << err.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  semdist::configure_threads_from_env();

  CLI::App app{"Semantic similarity distance and related text-image consistency tools"};
  app.require_subcommand(1);

  EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "Compute metrics for a paired dataset");
  add_metric_options(eval_cmd, eval.metric);
  eval_cmd->add_option("--metrics", eval.metrics, "Comma list of ssd,cs,cfid,r,ssd_t")->capture_default_str();

  SweepOptions sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "SSD stability versus sample count (CSV)");
  add_metric_options(sweep_cmd, sweep.metric);
  sweep_cmd->add_option("--counts", sweep.counts, "Increasing sample counts")->delimiter(',')->required();
  sweep_cmd->add_option("--repeats", sweep.repeats, "Subsamples per count")->capture_default_str();

  HnscOptions hnsc;
  auto* hnsc_cmd = app.add_subcommand("hnsc", "Construct hard-negative captions");
  hnsc_cmd->add_option("--lexicon", hnsc.lexicon, "token<TAB>POS lexicon")->required();
  hnsc_cmd->add_option("--captions", hnsc.captions, "Captions, one per line")->required();
  hnsc_cmd->add_option("--out", hnsc.out, "Corrupted captions (default: stdout)");
  hnsc_cmd->add_option("--log", hnsc.log, "Replacement log JSON (default: <out>.log.json)");
  hnsc_cmd->add_option("--ratio", hnsc.ratio, "Fraction of replaceable tokens to replace")->capture_default_str();
  hnsc_cmd->add_option("--seed", hnsc.seed, "Seed")->capture_default_str();

  SprojOptions sproj;
  auto* sproj_cmd = app.add_subcommand("sproj-check", "Project gradient pairs read from JSON");
  sproj_cmd->add_option("--pairs", sproj.pairs, "JSON array of {delta_a, delta_s}")->required();
  sproj_cmd->add_option("--out", sproj.out, "Results JSON (default: stdout)");
  sproj_cmd->add_flag("--paper-sign-convention", sproj.paper_sign, "Project when <delta_a, delta_s> >= 0");
  sproj_cmd->add_flag("--qp", sproj.qp, "Use the quadratic-program solver");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*eval_cmd) return run_eval(eval);
    if (*sweep_cmd) return run_sweep(sweep);
    if (*hnsc_cmd) return run_hnsc(hnsc);
    if (*sproj_cmd) return run_sproj_check(sproj);
  } catch (const ConfigError& e) {
    print_error("config_error", e.what());
    return kExitUsage;
  } catch (const semdist::Error& e) {
    print_error(std::string(semdist::to_string(e.kind())), e.what());
    return kExitData;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return kExitData;
  }
  return kExitUsage;
}
