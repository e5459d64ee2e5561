// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
// Usage: acceptance <path-to-patchcheck-binary>

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "corpus_gen.hpp"
#include "mini_fixture.hpp"
#include "oracles.hpp"
#include "patchcheck/patchcheck.hpp"
#include "reference_rows.hpp"

namespace fs = std::filesystem;
using namespace patchcheck;

namespace {

const fs::path kMini = fs::path(PATCHCHECK_DATA_DIR) / "mini";
std::string g_cli;

struct Outcome {
  bool ok = true;
  std::string detail;

  void fail(const std::string& why) {
    if (ok) detail = why;
    ok = false;
  }
};

struct Criterion {
  std::string name;
  double budget_seconds;
  std::function<Outcome()> run;
};

std::string fmt(double v, int digits = 6) {
  std::ostringstream ss;
  ss << std::setprecision(digits) << v;
  return ss.str();
}

std::pair<int, std::string> run_command(const std::string& cmd) {
  std::string out;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return {-1, out};
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) out.append(buf.data(), n);
  int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string shell_arg(const fs::path& p) { return "'" + p.string() + "'"; }

// ---------------------------------------------------------------------------

Outcome confusion_metrics() {
  Outcome o;
  for (const auto& row : reference_rows()) {
    auto m = compute_metrics({row.tp, row.fn, row.fp, row.tn});
    const std::array<std::optional<double>, 4> got{m.recall, m.precision, m.accuracy, m.f1};
    for (std::size_t i = 0; i < 4; ++i) {
      if (!got[i] || std::abs(*got[i] - row.rounded[i]) > 0.005) {
        o.fail(row.name + " metric " + std::to_string(i) + " = " + (got[i] ? fmt(*got[i]) : "absent"));
      }
    }
  }
  if (o.ok) o.detail = std::to_string(reference_rows().size()) + " rows within 0.005";
  return o;
}

Outcome auc() {
  Outcome o;
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> size(2, 50);
  std::uniform_real_distribution<double> u(0, 1);
  std::uniform_int_distribution<int> coarse(0, 8);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    int n = size(rng);
    int n_over = std::uniform_int_distribution<int>(1, n - 1)(rng);
    bool ties = t % 2 == 0;
    std::vector<double> over, correct;
    std::vector<ScoredLabel> scored;
    for (int i = 0; i < n; ++i) {
      double s = ties ? coarse(rng) / 8.0 : u(rng);
      bool is_over = i < n_over;
      (is_over ? over : correct).push_back(s);
      scored.push_back({s, is_over ? Verdict::Overfitting : Verdict::Correct});
    }
    std::shuffle(scored.begin(), scored.end(), rng);
    worst = std::max(worst, std::abs(compute_auc(scored) - oracle::pairwise_auc(over, correct)));
  }
  if (worst > 1e-12) o.fail("max deviation " + fmt(worst));

  std::vector<ScoredLabel> separated{{0.9, Verdict::Overfitting}, {0.8, Verdict::Overfitting}, {0.1, Verdict::Correct}};
  if (compute_auc(separated) != 1.0) o.fail("perfect separation gives " + fmt(compute_auc(separated)));
  std::vector<ScoredLabel> tied{{0.4, Verdict::Overfitting}, {0.4, Verdict::Correct}, {0.4, Verdict::Correct}};
  if (compute_auc(tied) != 0.5) o.fail("all ties give " + fmt(compute_auc(tied)));
  if (o.ok) o.detail = "1000 sets, max deviation " + fmt(worst);
  return o;
}

Outcome equivalence() {
  Outcome o;
  std::mt19937_64 rng(202);
  int agreed = 0, equal_pairs = 0;
  for (int i = 0; i < 5000; ++i) {
    auto x = oracle::random_atom(rng, 3, 4);
    auto y = i % 3 == 0 ? oracle::equivalent_rewrite(x, rng) : i % 3 == 1 ? oracle::near_miss(x, rng)
                                                                          : oracle::random_atom(rng, 3, 4);
    bool verdict = equivalent(parse_atom(oracle::render(x)), parse_atom(oracle::render(y)));
    bool expected = oracle::equivalent_by_sampling(x, y, static_cast<std::uint64_t>(i));
    equal_pairs += expected;
    if (verdict == expected) {
      ++agreed;
    } else {
      o.fail(oracle::render(x) + " vs " + oracle::render(y));
    }
  }
  if (!equivalent(parse_atom("a >= b"), parse_atom("b <= a"))) o.fail("a >= b vs b <= a");
  if (o.ok) o.detail = std::to_string(agreed) + "/5000 agree, " + std::to_string(equal_pairs) + " equivalent";
  return o;
}

ProgramPoint fit_point() {
  return {"org.apache.commons.math.optimization.fitting.GaussianFitter", "fit(double[])", PointKind::Enter,
          std::nullopt};
}

PointMap points_at(const ProgramPoint& p, std::initializer_list<std::string> texts) {
  PointMap out;
  auto& set = out[p];
  for (const auto& t : texts) set.insert(make_invariant(p, t));
  return out;
}

Outcome semantic() {
  Outcome o;
  std::mt19937_64 rng(303);
  corpus_gen::Pool pool;
  int fired[2] = {0, 0};
  for (int i = 0; i < 1000; ++i) {
    if (i % 50 == 0) pool = corpus_gen::make_pool(rng);
    auto rc = corpus_gen::random_corpus(rng, pool);
    if (!corpus_gen::agrees_with_oracle(rc, pool)) o.fail("corpus " + std::to_string(i) + " disagrees");
    auto v = classify_corpus(rc.corpus);
    fired[0] += v.fired(OverfittingRule::Overfitting1);
    fired[1] += v.fired(OverfittingRule::Overfitting2);
  }

  // Class-equality fixture: the patch keeps the buggy runtime type.
  auto fit = fit_point();
  auto passing = points_at(fit, {"n >= 1"});
  auto e = build_error_spec(points_at(fit, {"f.getClass() == Gaussian$Parametric.class", "n >= 1"}),
                            points_at(fit, {"f.getClass() == GaussianFitter$1.class", "n >= 1"}));
  auto v2 = classify_semantic(build_correct_spec(passing, passing), e, passing,
                              points_at(fit, {"f.getClass() == Gaussian$Parametric.class", "n >= 1"}));
  if (v2.fired_rules != std::vector<OverfittingRule>{OverfittingRule::Overfitting2}) {
    o.fail("class-equality fixture did not fire Overfitting-2 alone");
  }

  // Deletion fixture: the patch removes a method whose invariants are in C.
  ProgramPoint gone{"pkg.A", "gone()", PointKind::Exit, std::nullopt};
  ProgramPoint kept{"pkg.A", "kept()", PointKind::Enter, std::nullopt};
  auto both = points_at(gone, {"x >= 0"});
  both[kept].insert(make_invariant(kept, "z > 0"));
  auto v1 = classify_semantic(build_correct_spec(both, both), {SpecKind::Error, {}}, points_at(kept, {"z > 0"}), {});
  if (v1.fired_rules != std::vector<OverfittingRule>{OverfittingRule::Overfitting1} || v1.witnesses.size() != 1 ||
      v1.witnesses[0].point != gone) {
    o.fail("deletion fixture did not fire Overfitting-1 at the deleted point");
  }
  if (o.ok) {
    o.detail = "1000 corpora (rule-1 " + std::to_string(fired[0]) + ", rule-2 " + std::to_string(fired[1]) +
               "), both fixtures";
  }
  return o;
}

Outcome test_selection() {
  Outcome o;
  std::mt19937_64 rng(404);
  std::uniform_int_distribution<int> method(0, 39), count(0, 6), tests(0, 100);
  auto name = [](int m) { return MethodId{"pkg.C" + std::to_string(m % 7), "m" + std::to_string(m) + "(int)"}; };
  for (int round = 0; round < 1000; ++round) {
    CoverageMap cov;
    std::vector<std::pair<std::string, std::vector<int>>> raw;
    for (int t = tests(rng); t > 0; --t) {
      std::vector<int> ms;
      for (int i = count(rng); i > 0; --i) ms.push_back(method(rng));
      auto id = "T" + std::to_string(rng() % 1000) + "_" + std::to_string(t);
      raw.emplace_back(id, ms);
      auto& entry = cov.tests[id];
      for (int m : ms) entry.insert(name(m));
    }
    std::set<MethodId> modified;
    std::set<int> mods;
    for (int i = 1 + count(rng); i > 0; --i) {
      int m = method(rng);
      mods.insert(m);
      modified.insert(name(m));
    }
    std::vector<std::string> expected;
    for (const auto& [id, ms] : raw) {
      bool hit = false;
      for (int m : ms) hit = hit || mods.contains(m);
      if (hit) expected.push_back(id);
    }
    std::sort(expected.begin(), expected.end());
    if (select_related_tests(cov, modified) != expected) o.fail("map " + std::to_string(round) + " differs");
  }
  try {
    select_related_tests({}, {});
    o.fail("empty modified set accepted");
  } catch (const Error& e) {
    if (e.code() != ErrorCode::EmptyModifiedSet) o.fail("wrong error for empty modified set");
  }
  if (o.ok) o.detail = "1000 maps match brute force";
  return o;
}

Outcome logistic() {
  Outcome o;
  std::mt19937_64 rng(505);
  std::normal_distribution<double> g(0, 1);
  const double h = 1e-6;
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const std::size_t d = combined_feature_length(1 + i % 4);
    const std::size_t n = 2 + i % 9;
    std::vector<std::vector<double>> x(n, std::vector<double>(d));
    std::vector<int> y;
    for (auto& row : x) {
      for (auto& v : row) v = g(rng);
    }
    for (std::size_t j = 0; j < n; ++j) y.push_back(static_cast<int>(j % 2));
    std::vector<double> w(d);
    for (auto& v : w) v = 0.5 * g(rng);
    double b = g(rng);
    double l2 = i % 2 ? 1e-4 : 0.3;
    auto lg = logistic_loss_and_gradient(w, b, x, y, l2);
    auto rel = [](double a, double num) { return std::abs(a - num) / std::max({std::abs(a), std::abs(num), 1e-6}); };
    for (std::size_t j = 0; j < d; ++j) {
      double keep = w[j];
      w[j] = keep + h;
      double up = logistic_loss_and_gradient(w, b, x, y, l2).loss;
      w[j] = keep - h;
      double down = logistic_loss_and_gradient(w, b, x, y, l2).loss;
      w[j] = keep;
      worst = std::max(worst, rel(lg.grad_w[j], (up - down) / (2 * h)));
    }
    double up = logistic_loss_and_gradient(w, b + h, x, y, l2).loss;
    double down = logistic_loss_and_gradient(w, b - h, x, y, l2).loss;
    worst = std::max(worst, rel(lg.grad_b, (up - down) / (2 * h)));
  }
  if (worst >= 1e-5) o.fail("gradient relative error " + fmt(worst));

  std::vector<std::vector<double>> toy{std::vector<double>(8, 0.0), std::vector<double>(8, 0.0),
                                       std::vector<double>(8, 0.0), std::vector<double>(8, 0.0)};
  toy[0][6] = 0.1;
  toy[1][6] = 0.2;
  toy[2][6] = 0.8;
  toy[3][6] = 0.9;
  std::vector<int> toy_y{0, 0, 1, 1};
  auto model = lr_train(toy, toy_y);
  for (std::size_t i = 0; i < toy.size(); ++i) {
    if ((lr_predict(model, toy[i]) > 0.5) != (toy_y[i] == 1)) o.fail("toy point " + std::to_string(i) + " misfit");
  }
  if (to_json(model).dump(2) != to_json(lr_train(toy, toy_y)).dump(2)) o.fail("model JSON differs across runs");

  // The same through the command-line trainer.
  auto dir = fs::temp_directory_path() / ("patchcheck-accept-" + std::to_string(::getpid()));
  fs::create_directories(dir);
  std::string base = shell_arg(g_cli) + " train --manifest " + shell_arg(kMini / "manifest.json") +
                     " --fraction 0.5 --dim 16 --epochs 300 --out ";
  auto [rc1, out1] = run_command(base + shell_arg(dir / "a.json") + " 2>&1");
  auto [rc2, out2] = run_command(base + shell_arg(dir / "b.json") + " 2>&1");
  if (rc1 != 0 || rc2 != 0) {
    o.fail("CLI train failed: " + out1);
  } else if (read_file(dir / "a.json") != read_file(dir / "b.json")) {
    o.fail("CLI model files differ");
  }
  fs::remove_all(dir);
  if (o.ok) o.detail = "gradient error " + fmt(worst, 3) + " over 50 instances, model files bit-identical";
  return o;
}

Outcome distance_features() {
  Outcome o;
  auto v = hashing_embed("int x = 1;", kDefaultEmbeddingDim);
  if (feature_vector(v, v, v).combined.size() != 3076) o.fail("k=768 feature length");

  auto id = distance_pair(EmbeddingVector{"p", {0.5, -2, 3}}, EmbeddingVector{"o", {0.5, -2, 3}});
  if (id.values != std::vector<double>{0, 0, 0, 0.25, 4, 9, 0, 1}) o.fail("identity case");

  auto d = distance_pair(EmbeddingVector{"p", {1, 2}}, EmbeddingVector{"o", {3, 4}});
  const std::vector<double> expected{-2, -2, 3, 8, 2.828427, 0.983870};
  if (d.values.size() != expected.size()) {
    o.fail("worked example length");
  } else {
    for (std::size_t i = 0; i < expected.size(); ++i) {
      if (std::abs(d.values[i] - expected[i]) > 1e-5) o.fail("worked example slot " + std::to_string(i));
    }
  }
  if (o.ok) o.detail = "length 3076, identity, worked example";
  return o;
}

Outcome threshold() {
  Outcome o;
  if (classify_threshold(0.975, kDefaultThreshold) != Verdict::Correct) o.fail("0.975 is not Correct");
  if (classify_threshold(std::nextafter(0.975, 1.0), kDefaultThreshold) != Verdict::Overfitting) {
    o.fail("just above 0.975 is not Overfitting");
  }
  std::mt19937_64 rng(606);
  std::uniform_int_distribution<int> size(1, 30);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 200; ++t) {
    std::vector<ScoredLabel> v;
    for (int i = size(rng) - 1; i > 0; --i) v.push_back({u(rng), Verdict::Overfitting});
    for (int i = size(rng); i > 0; --i) v.push_back({u(rng), Verdict::Correct});
    double thr = tune_threshold(v);
    ConfusionMatrix c;
    for (const auto& s : v) c.add(classify_threshold(s.score, thr), s.label);
    if (c.fp != 0) o.fail("set " + std::to_string(t) + " has false positives");
  }
  if (o.ok) o.detail = "0.975 boundary, 200 tuned sets with FP = 0";
  return o;
}

Outcome end_to_end() {
  Outcome o;
  const auto golden = read_file(kMini / "golden_report.json");
  auto [rc, out] = run_command(shell_arg(g_cli) + " assess --manifest " + shell_arg(kMini / "manifest.json") +
                               " --model " + shell_arg(kMini / "model.json") + " --embeddings " +
                               shell_arg(kMini / "embeddings.jsonl") + " --json");
  if (rc != 0) o.fail("CLI exit " + std::to_string(rc));
  if (out != golden) o.fail("CLI report differs from golden_report.json");

  auto records = load_manifest(kMini / "manifest.json");
  auto model = model_from_json(nlohmann::json::parse(read_file(kMini / "model.json")));
  auto table = parse_embeddings_jsonl(read_file(kMini / "embeddings.jsonl"));
  int combos = 0;
  for (bool sem : {true, false}) {
    for (bool syn : {true, false}) {
      if (!sem && !syn) continue;
      for (bool buggy : {false, true}) {
        PipelineConfig config;
        config.embedder = EmbedderKind::ExternalFile;
        config.semantic_enabled = sem;
        config.syntactic_enabled = syn;
        config.granularity = buggy ? Granularity::BuggyMethods : Granularity::ExecutedMethods;
        auto report = run_batch(records, config, {&model, &table});
        auto expected = mini::expected_rows({sem, syn, buggy});
        for (std::size_t i = 0; i < expected.size(); ++i) {
          const auto& got = report.rows.at(i);
          const auto& want = expected[i];
          bool same = got.error.has_value() == want.error;
          if (same && !want.error) {
            same = to_string(got.assessment->stage) == want.stage &&
                   to_string(got.assessment->verdict) == want.verdict && got.assessment->score == want.score;
          }
          if (!same) o.fail(want.id + " under flags " + std::to_string(sem) + std::to_string(syn) + std::to_string(buggy));
        }
        ++combos;
      }
    }
  }
  if (o.ok) o.detail = "CLI report byte-identical, " + std::to_string(combos) + " flag combinations match";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: acceptance <patchcheck-binary>\n";
    return 2;
  }
  g_cli = argv[1];

  const std::vector<Criterion> criteria{
      {"confusion-metrics", 1.0, confusion_metrics},
      {"auc-mann-whitney", 10.0, auc},
      {"invariant-equivalence", 30.0, equivalence},
      {"semantic-rules", 30.0, semantic},
      {"test-selection", 5.0, test_selection},
      {"logistic-training", 60.0, logistic},
      {"distance-features", 1.0, distance_features},
      {"threshold-tuning", 1.0, threshold},
      {"end-to-end", 10.0, end_to_end},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > c.budget_seconds) o.fail("took " + fmt(secs, 3) + " s, budget " + fmt(c.budget_seconds) + " s");
    failures += !o.ok;
    std::cout << (o.ok ? "PASS" : "FAIL") << "  " << std::left << std::setw(24) << c.name << std::right
              << std::fixed << std::setprecision(3) << std::setw(8) << secs << " s  " << o.detail << '\n';
    std::cout.unsetf(std::ios::fixed);
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << '\n';
  return failures == 0 ? 0 : 1;
}
