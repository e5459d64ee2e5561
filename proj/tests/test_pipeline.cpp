#include <gtest/gtest.h>

#include <filesystem>

#include "mini_fixture.hpp"
#include "patchcheck/pipeline.hpp"

namespace patchcheck {
namespace {

namespace fs = std::filesystem;

const fs::path kMini = fs::path(PATCHCHECK_DATA_DIR) / "mini";

struct Loaded {
  std::vector<PatchRecord> records = load_manifest(kMini / "manifest.json");
  PredictorModel model = model_from_json(nlohmann::json::parse(read_file(kMini / "model.json")));
  EmbeddingTable embeddings = parse_embeddings_jsonl(read_file(kMini / "embeddings.jsonl"));

  AssessmentInputs inputs() const { return {&model, &embeddings}; }
};

PipelineConfig external(bool semantic = true, bool syntactic = true) {
  PipelineConfig c;
  c.embedder = EmbedderKind::ExternalFile;
  c.semantic_enabled = semantic;
  c.syntactic_enabled = syntactic;
  return c;
}

TEST(MiniFixture, FilesMatchDescription) {
  auto files = mini::fixture_files();
  files["golden_report.json"] = mini::expected_report_text();
  for (const auto& [rel, text] : files) EXPECT_EQ(read_file(kMini / rel), text) << rel;
}

TEST(MiniFixture, ShapeOfTheDataset) {
  auto rows = mini::expected_rows({});
  std::map<std::string, int> stages;
  for (const auto& r : rows) stages[r.stage + "/" + r.verdict]++;
  EXPECT_EQ(rows.size(), 12U);
  EXPECT_EQ(stages["semantic/overfitting"], 4);
  EXPECT_EQ(stages["syntactic/overfitting"], 4);
  EXPECT_EQ(stages["syntactic/correct"] + stages["fallback/correct"], 4);
  EXPECT_EQ(stages["fallback/correct"], 1);
}

TEST(RunBatch, GoldenReport) {
  Loaded d;
  auto report = run_batch(d.records, external(), d.inputs());
  EXPECT_EQ(report_json(report).dump(2) + "\n", read_file(kMini / "golden_report.json"));
  EXPECT_TRUE(report.warnings.empty());
}

TEST(RunBatch, ByteIdenticalAcrossRuns) {
  Loaded d;
  auto a = report_json(run_batch(d.records, external(), d.inputs())).dump(2);
  auto shuffled = d.records;
  std::reverse(shuffled.begin(), shuffled.end());
  auto b = report_json(run_batch(shuffled, external(), d.inputs())).dump(2);
  EXPECT_EQ(a, b);
}

void expect_rows(const BatchReport& report, const mini::Flags& flags) {
  auto expected = mini::expected_rows(flags);
  ASSERT_EQ(report.rows.size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto& got = report.rows[i];
    const auto& want = expected[i];
    ASSERT_EQ(got.id, want.id);
    EXPECT_EQ(got.error.has_value(), want.error) << want.id;
    if (want.error || !got.assessment) continue;
    EXPECT_EQ(to_string(got.assessment->stage), want.stage) << want.id;
    EXPECT_EQ(to_string(got.assessment->verdict), want.verdict) << want.id;
    EXPECT_EQ(got.assessment->score, want.score) << want.id;
  }
}

TEST(RunBatch, AblationsFollowStageOracles) {
  Loaded d;
  for (bool sem : {true, false}) {
    for (bool syn : {true, false}) {
      if (!sem && !syn) continue;
      for (bool buggy : {false, true}) {
        auto config = external(sem, syn);
        config.granularity = buggy ? Granularity::BuggyMethods : Granularity::ExecutedMethods;
        SCOPED_TRACE(std::to_string(sem) + std::to_string(syn) + std::to_string(buggy));
        expect_rows(run_batch(d.records, config, d.inputs()), {sem, syn, buggy});
      }
    }
  }
}

TEST(RunBatch, AblationChangesVerdicts) {
  Loaded d;
  auto full = run_batch(d.records, external(), d.inputs());
  auto no_sem = run_batch(d.records, external(false, true), d.inputs());
  auto no_syn = run_batch(d.records, external(true, false), d.inputs());
  // Semantic rejections fall back to their low scores without the semantic stage.
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(full.rows[i].assessment->verdict, Verdict::Overfitting);
    EXPECT_EQ(no_sem.rows[i].assessment->verdict, Verdict::Correct);
    EXPECT_EQ(no_syn.rows[i].assessment->verdict, Verdict::Overfitting);
  }
  // Score-decided rejections vanish without the syntactic stage.
  for (int i = 4; i < 8; ++i) {
    EXPECT_EQ(full.rows[i].assessment->verdict, Verdict::Overfitting);
    EXPECT_EQ(no_syn.rows[i].assessment->verdict, Verdict::Correct);
    EXPECT_EQ(no_syn.rows[i].assessment->stage, Stage::Semantic);
  }
  EXPECT_EQ(no_syn.error_count, 1U);
  EXPECT_TRUE(no_syn.rows[11].error.has_value());
}

TEST(RunBatch, SemanticRejectionsIgnoreThreshold) {
  Loaded d;
  auto config = external();
  config.threshold = 1.0;
  auto report = run_batch(d.records, config, d.inputs());
  for (const auto& row : report.rows) {
    bool semantic = row.assessment && row.assessment->stage == Stage::Semantic;
    EXPECT_EQ(row.assessment && row.assessment->verdict == Verdict::Overfitting, semantic) << row.id;
  }
}

TEST(RunBatch, UnlabeledOmitsMetrics) {
  Loaded d;
  for (auto& r : d.records) r.label.reset();
  auto report = run_batch(d.records, external(), d.inputs());
  EXPECT_FALSE(report.metrics);
  auto j = report_json(report);
  EXPECT_FALSE(j.contains("metrics"));
  EXPECT_FALSE(j.contains("confusion"));
  EXPECT_EQ(j["per_patch"].size(), 12U);
  EXPECT_FALSE(j["per_patch"][0].contains("label"));
}

TEST(RunBatch, Errors) {
  Loaded d;
  try {
    run_batch({}, external(), d.inputs());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyManifest);
  }
  try {
    run_batch(d.records, external(), {nullptr, &d.embeddings});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ModelRequired);
  }
  // A missing embedding is a per-record error.
  EmbeddingTable partial = d.embeddings;
  partial.vectors.erase("p07:patched");
  auto report = run_batch(d.records, external(), {&d.model, &partial});
  EXPECT_EQ(report.error_count, 1U);
  EXPECT_NE(report.rows[6].error->find("MissingInputs"), std::string::npos);
}

TEST(AssessPatch, ThresholdPrecedence) {
  Loaded d;
  const auto& p09 = d.records[8];  // score sigmoid(1)
  auto config = external();
  EXPECT_EQ(assess_patch(p09, config, d.inputs()).verdict, Verdict::Correct);
  auto model = d.model;
  model.threshold = 0.5;
  EXPECT_EQ(assess_patch(p09, config, {&model, &d.embeddings}).verdict, Verdict::Overfitting);
  config.threshold = 0.9;
  EXPECT_EQ(assess_patch(p09, config, {&model, &d.embeddings}).verdict, Verdict::Correct);
  config.threshold = 1.5;
  EXPECT_THROW(assess_patch(p09, config, d.inputs()), Error);
  EXPECT_THROW(assess_patch(p09, external(false, false), d.inputs()), Error);
}

TEST(AssessPatch, UnreadableInvariantsFallBack) {
  Loaded d;
  auto broken = d.records[4];
  broken.invariant_paths[{Variant::Patched, Partition::PassingTraces}] = kMini / "does-not-exist.inv";
  auto a = assess_patch(broken, external(), d.inputs());
  EXPECT_EQ(a.stage, Stage::Fallback);
  EXPECT_FALSE(a.warnings.empty());
  EXPECT_THROW(assess_patch(broken, external(true, false), d.inputs()), Error);
}

TEST(AssessPatch, BuggyGranularityNeedsMethods) {
  Loaded d;
  auto r = d.records[0];
  r.modified_methods.clear();
  auto config = external();
  config.granularity = Granularity::BuggyMethods;
  try {
    assess_patch(r, config, d.inputs());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingInputs);
  }
}

TEST(AssessPatch, HashingEmbedderReadsCode) {
  Loaded d;
  PipelineConfig config;  // hashing fallback
  auto a = assess_patch(d.records[11], config, {&d.model, nullptr});
  ASSERT_TRUE(a.score);
  EXPECT_EQ(a.stage, Stage::Fallback);
  // Same computation by hand.
  std::vector<EmbeddingVector> emb;
  for (auto role : {CodeRole::Buggy, CodeRole::Patched, CodeRole::GroundTruth}) {
    emb.push_back(hashing_embed(read_file(d.records[11].code_paths.at(role)), 4));
  }
  EXPECT_EQ(*a.score, lr_predict(d.model, feature_vector(emb[0], emb[1], emb[2]).combined));

  auto missing = d.records[11];
  missing.code_paths.patched = kMini / "nope.java";
  EXPECT_THROW(assess_patch(missing, config, {&d.model, nullptr}), Error);
}

TEST(Reports, SweepAndTable) {
  Loaded d;
  auto report = run_batch(d.records, external(), d.inputs());
  auto csv = threshold_sweep_csv(report);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 42);
  EXPECT_EQ(csv.rfind("threshold,recall,precision,accuracy,f1\n0.000,", 0), 0U);
  EXPECT_NE(csv.find("\n0.975,"), std::string::npos);
  EXPECT_NE(csv.find("\n1.000,"), std::string::npos);

  auto table = report_table(report);
  EXPECT_NE(table.find("p12  fallback  correct     0.5000    correct"), std::string::npos) << table;
  EXPECT_NE(table.find("TP 7  FN 1  FP 1  TN 3"), std::string::npos) << table;
}

}  // namespace
}  // namespace patchcheck
