// patchcheck command-line tool.
//
// Exit status: 0 success, 1 usage error, 2 data error, 3 internal error.

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "patchcheck/patchcheck.hpp"

namespace fs = std::filesystem;
using namespace patchcheck;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitInternal = 3;

// Values shared by several subcommands. Each may come from --config; a flag
// given on the command line wins.
struct Settings {
  std::string manifest;
  std::string model;
  std::string embeddings;
  std::string out;
  std::string report;
  std::string sweep;
  std::string eval_manifest;
  std::string granularity = "executed";
  std::optional<double> threshold;
  bool no_semantic = false;
  bool no_syntactic = false;
  bool json = false;
  std::size_t dim = kDefaultEmbeddingDim;
  double fraction = 0.9;
  TrainConfig train;
  std::string solver_hook;
};

void apply_config_file(const std::string& path, Settings& s, const std::set<std::string>& given) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::InvalidFormat, "config " + path + ": " + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::InvalidFormat, "config " + path + " must be a JSON object");
  const fs::path base = fs::path(path).parent_path();
  auto take = [&](const char* key, auto& field) {
    if (!j.contains(key) || given.contains(key)) return;
    try {
      j[key].get_to(field);
    } catch (const nlohmann::json::exception&) {
      throw Error(ErrorCode::InvalidFormat, std::string("config key ") + key + " has the wrong type");
    }
  };
  auto take_path = [&](const char* key, std::string& field) {
    std::string before = field;
    take(key, field);
    if (field != before && !field.empty() && fs::path(field).is_relative()) field = (base / field).string();
  };
  take_path("manifest", s.manifest);
  take_path("model", s.model);
  take_path("embeddings", s.embeddings);
  take_path("eval_manifest", s.eval_manifest);
  take("granularity", s.granularity);
  if (j.contains("threshold") && !given.contains("threshold")) s.threshold = j["threshold"].get<double>();
  if (j.contains("semantic") && !given.contains("no-semantic")) s.no_semantic = !j["semantic"].get<bool>();
  if (j.contains("syntactic") && !given.contains("no-syntactic")) s.no_syntactic = !j["syntactic"].get<bool>();
  take("dim", s.dim);
  take("fraction", s.fraction);
  take("learning_rate", s.train.learning_rate);
  take("epochs", s.train.epochs);
  take("l2_penalty", s.train.l2_penalty);
  take("seed", s.train.seed);
  take("solver_hook", s.solver_hook);
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw Error(ErrorCode::InvalidArgument, std::string("missing required ") + flag);
}

PredictorModel load_model(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::InvalidFormat, "model " + path + ": " + e.what());
  }
  return model_from_json(j);
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    write_file(path, text);
  }
}

struct EmbeddingSource {
  std::optional<EmbeddingTable> table;

  PipelineConfig config() const {
    PipelineConfig c;
    c.embedder = table ? EmbedderKind::ExternalFile : EmbedderKind::HashingFallback;
    return c;
  }
  const EmbeddingTable* ptr() const { return table ? &*table : nullptr; }
};

EmbeddingSource load_embeddings(const Settings& s) {
  EmbeddingSource src;
  if (!s.embeddings.empty()) {
    src.table = parse_embeddings_jsonl(read_file(s.embeddings));
    for (const auto& w : src.table->warnings) std::cerr << "warning: " << w << '\n';
  }
  return src;
}

std::vector<double> record_features(const PatchRecord& r, const EmbeddingSource& src, std::size_t k) {
  AssessmentInputs inputs{nullptr, src.ptr()};
  auto emb = detail::record_embeddings(r, src.config(), inputs, k);
  auto f = feature_vector(emb[0], emb[1], emb[2]);
  for (const auto& w : f.warnings) std::cerr << "warning: " << r.id << ": " << w << '\n';
  return f.combined;
}

std::vector<std::string> split_methods(const std::vector<std::string>& args) {
  // Commas separate methods except inside parameter lists.
  std::vector<std::string> out;
  for (const auto& arg : args) {
    int depth = 0;
    std::string cur;
    for (char c : arg) {
      if (c == '(') ++depth;
      if (c == ')') --depth;
      if (c == ',' && depth == 0) {
        if (!cur.empty()) out.push_back(cur);
        cur.clear();
      } else if (!std::isspace(static_cast<unsigned char>(c)) || depth > 0) {
        cur += c;
      }
    }
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_parse_invariants(const std::string& file, bool json) {
  auto points = parse_invariant_file(read_file(file));
  if (!json) {
    std::cout << serialize_points(points);
    return 0;
  }
  nlohmann::json out = nlohmann::json::array();
  for (const auto& [point, set] : points) {
    nlohmann::json p;
    p["point"] = point.to_string();
    p["invariants"] = nlohmann::json::array();
    for (const auto& [key, inv] : set) p["invariants"].push_back({{"text", inv.raw_text}, {"canonical", key}});
    out.push_back(p);
  }
  std::cout << out.dump(2) << '\n';
  return 0;
}

int cmd_select_tests(const std::string& coverage_file, const std::vector<std::string>& method_args) {
  auto coverage = parse_coverage_json(read_file(coverage_file));
  std::set<MethodId> modified;
  for (const auto& m : split_methods(method_args)) {
    auto id = parse_method_id(m);
    if (!id) throw Error(ErrorCode::InvalidArgument, "bad method name '" + m + "'");
    modified.insert(*id);
  }
  for (const auto& t : select_related_tests(coverage, modified)) std::cout << t << '\n';
  return 0;
}

int cmd_embed(const Settings& s, const std::string& mode) {
  require(s.manifest, "--manifest");
  auto records = load_manifest(s.manifest);
  std::ostringstream out;
  if (mode == "hashing") {
    for (const auto& r : records) {
      for (auto role : {CodeRole::Buggy, CodeRole::Patched, CodeRole::GroundTruth}) {
        const auto& path = r.code_paths.at(role);
        std::string text;
        try {
          text = read_file(path);
        } catch (const Error&) {
          throw Error(ErrorCode::MissingCodeFile, r.id + " (" + path.string() + ")");
        }
        out << to_jsonl(hashing_embed(text, s.dim, r.embedding_id(role))) << '\n';
      }
    }
  } else {
    // Validates an existing exchange file against the manifest and re-emits
    // the vectors it needs.
    require(s.embeddings, "--embeddings");
    auto src = load_embeddings(s);
    std::size_t missing = 0;
    for (const auto& r : records) {
      for (auto role : {CodeRole::Buggy, CodeRole::Patched, CodeRole::GroundTruth}) {
        const auto* ev = src.table->find(r.embedding_id(role));
        if (ev == nullptr) {
          std::cerr << "missing embedding " << r.embedding_id(role) << '\n';
          ++missing;
        } else {
          out << to_jsonl(*ev) << '\n';
        }
      }
    }
    if (missing > 0) throw Error(ErrorCode::MissingInputs, std::to_string(missing) + " embeddings missing");
  }
  write_output(s.out, out.str());
  return 0;
}

int cmd_train(const Settings& s) {
  require(s.manifest, "--manifest");
  require(s.out, "--out");
  auto records = load_manifest(s.manifest);
  for (const auto& r : records) {
    if (!r.label) throw Error(ErrorCode::InvalidFormat, "training record " + r.id + " has no label");
  }
  if (!s.eval_manifest.empty()) {
    auto dedup = dedup_against_eval(records, load_manifest(s.eval_manifest));
    for (const auto& id : dedup.removed_ids) std::cerr << "dropped " << id << " (duplicates an evaluation patch)\n";
    records = std::move(dedup.kept);
  }
  auto split = split_train_valid(records, s.fraction, s.train.seed);
  auto src = load_embeddings(s);
  const std::size_t k = src.table ? src.table->dim : s.dim;

  std::vector<std::vector<double>> x;
  std::vector<int> y;
  for (const auto& r : split.train) {
    x.push_back(record_features(r, src, k));
    y.push_back(*r.label == Verdict::Overfitting ? 1 : 0);
  }
  auto model = lr_train(x, y, s.train);

  std::vector<ScoredLabel> validation;
  for (const auto& r : split.validation) validation.push_back({lr_predict(model, record_features(r, src, k)), *r.label});
  model.threshold = s.threshold ? *s.threshold : tune_threshold(validation);

  write_file(s.out, to_json(model).dump(2) + "\n");
  std::cout << "trained on " << split.train.size() << " patches, validated on " << split.validation.size()
            << "; threshold " << std::setprecision(17) << model.threshold << '\n';
  return 0;
}

int cmd_tune_threshold(const Settings& s) {
  require(s.manifest, "--manifest");
  require(s.model, "--model");
  auto model = load_model(s.model);
  auto src = load_embeddings(s);
  std::vector<ScoredLabel> scored;
  for (const auto& r : load_manifest(s.manifest)) {
    if (!r.label) continue;
    scored.push_back({lr_predict(model, record_features(r, src, model.k)), *r.label});
  }
  model.threshold = tune_threshold(scored);
  std::cout << std::setprecision(17) << model.threshold << '\n';
  if (!s.out.empty()) write_file(s.out, to_json(model).dump(2) + "\n");
  return 0;
}

int cmd_assess(const Settings& s, bool evaluate) {
  require(s.manifest, "--manifest");
  PipelineConfig config;
  if (s.granularity == "executed") {
    config.granularity = Granularity::ExecutedMethods;
  } else if (s.granularity == "buggy") {
    config.granularity = Granularity::BuggyMethods;
  } else {
    throw Error(ErrorCode::InvalidArgument, "granularity must be 'executed' or 'buggy'");
  }
  config.threshold = s.threshold;
  config.semantic_enabled = !s.no_semantic;
  config.syntactic_enabled = !s.no_syntactic;
  config.validate();

  std::optional<PredictorModel> model;
  if (config.syntactic_enabled) {
    require(s.model, "--model (or --no-syntactic)");
    model = load_model(s.model);
  }
  auto src = load_embeddings(s);
  config.embedder = src.config().embedder;

  std::optional<SolverHook> hook = SolverHook::from_environment();
  if (!hook && !s.solver_hook.empty()) hook = SolverHook(s.solver_hook);
  if (hook) config.solver_hook = hook->command();
  EquivalenceChecker eq(hook);

  auto records = load_manifest(s.manifest);
  if (evaluate) {
    for (const auto& r : records) {
      if (!r.label) throw Error(ErrorCode::InvalidFormat, "evaluate needs labels; " + r.id + " has none");
    }
  }
  auto report = run_batch(records, config, {model ? &*model : nullptr, src.ptr()}, eq);
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';

  auto json_text = report_json(report).dump(2) + "\n";
  if (!s.report.empty()) write_file(s.report, json_text);
  if (!s.sweep.empty()) write_file(s.sweep, threshold_sweep_csv(report));
  std::cout << (s.json ? json_text : report_table(report));
  return 0;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::ModelRequired:
      return kExitUsage;
    default:
      return kExitData;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Overfitting-patch detection: invariant diff, then embedding-distance scoring"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "patchcheck 0.1.0");

  Settings s;
  std::string config_path;
  app.add_option("--config", config_path, "JSON file with default values for any flag")->check(CLI::ExistingFile);

  std::string inv_file;
  bool inv_json = false;
  auto* parse_cmd = app.add_subcommand("parse-invariants", "Parse an invariant dump and print it normalized");
  parse_cmd->add_option("file", inv_file, "Invariant dump")->required()->check(CLI::ExistingFile);
  parse_cmd->add_flag("--json", inv_json, "Emit JSON with canonical keys");

  std::string coverage_file;
  std::vector<std::string> methods;
  auto* select_cmd = app.add_subcommand("select-tests", "List passing tests covering modified methods");
  select_cmd->add_option("--coverage", coverage_file, "Coverage JSON")->required()->check(CLI::ExistingFile);
  select_cmd->add_option("--methods", methods, "Modified methods, Class.method(params), comma separated")
      ->required();

  std::string embed_mode;
  auto* embed_cmd = app.add_subcommand("embed", "Write the embedding exchange file for a manifest");
  embed_cmd->add_option("--mode", embed_mode, "hashing or file")
      ->required()
      ->check(CLI::IsMember({"hashing", "file"}));

  auto* train_cmd = app.add_subcommand("train", "Train the scorer and tune its threshold");
  auto* tune_cmd = app.add_subcommand("tune-threshold", "Largest score among correct patches");
  auto* assess_cmd = app.add_subcommand("assess", "Classify every patch in a manifest");
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Classify a labeled manifest and report metrics");

  for (auto* cmd : {embed_cmd, train_cmd, tune_cmd, assess_cmd, evaluate_cmd}) {
    cmd->add_option("--manifest", s.manifest, "Patch manifest (JSON array)");
    cmd->add_option("--embeddings", s.embeddings, "Embedding exchange file; hashing embedder when omitted");
  }
  for (auto* cmd : {embed_cmd, train_cmd, tune_cmd}) cmd->add_option("--out", s.out, "Output file");
  for (auto* cmd : {embed_cmd, train_cmd}) cmd->add_option("--dim", s.dim, "Hashing embedder dimension");
  for (auto* cmd : {tune_cmd, assess_cmd, evaluate_cmd}) cmd->add_option("--model", s.model, "Model file");
  train_cmd->add_option("--eval-manifest", s.eval_manifest, "Drop training patches duplicating these");
  train_cmd->add_option("--fraction", s.fraction, "Training share of the split");
  train_cmd->add_option("--learning-rate", s.train.learning_rate);
  train_cmd->add_option("--epochs", s.train.epochs);
  train_cmd->add_option("--l2", s.train.l2_penalty);
  train_cmd->add_option("--seed", s.train.seed);
  train_cmd->add_option("--threshold", s.threshold, "Fixed threshold instead of tuning")
      ->check(CLI::Range(0.0, 1.0));
  for (auto* cmd : {assess_cmd, evaluate_cmd}) {
    cmd->add_option("--granularity", s.granularity, "executed or buggy")
        ->check(CLI::IsMember({"executed", "buggy"}));
    cmd->add_option("--threshold", s.threshold, "Classification threshold")->check(CLI::Range(0.0, 1.0));
    cmd->add_flag("--no-semantic", s.no_semantic, "Skip the invariant stage");
    cmd->add_flag("--no-syntactic", s.no_syntactic, "Skip the embedding stage");
    cmd->add_option("--report", s.report, "Write the JSON report here");
    cmd->add_flag("--json", s.json, "Print the JSON report instead of the table");
  }
  evaluate_cmd->add_option("--sweep", s.sweep, "Write a threshold sweep CSV here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (!config_path.empty()) {
      std::set<std::string> given;
      for (auto* sub : app.get_subcommands()) {
        for (const auto* opt : sub->get_options()) {
          if (opt->count() == 0) continue;
          auto name = opt->get_name(false, true);
          while (!name.empty() && name.front() == '-') name.erase(0, 1);
          std::replace(name.begin(), name.end(), '-', '_');
          given.insert(name == "l2" ? "l2_penalty" : name);
          if (name == "no_semantic") given.insert("no-semantic");
          if (name == "no_syntactic") given.insert("no-syntactic");
        }
      }
      apply_config_file(config_path, s, given);
    }

    if (parse_cmd->parsed()) return cmd_parse_invariants(inv_file, inv_json);
    if (select_cmd->parsed()) return cmd_select_tests(coverage_file, methods);
    if (embed_cmd->parsed()) return cmd_embed(s, embed_mode);
    if (train_cmd->parsed()) return cmd_train(s);
    if (tune_cmd->parsed()) return cmd_tune_threshold(s);
    if (assess_cmd->parsed()) return cmd_assess(s, false);
    if (evaluate_cmd->parsed()) return cmd_assess(s, true);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitUsage;
}
