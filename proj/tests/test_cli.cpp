#include "doctest.h"

#include "support.hpp"
#include "tabrag/cli.hpp"
#include "tabrag/error.hpp"
#include "tabrag/evaluation.hpp"

#include <fcntl.h>

#include <sstream>

using namespace tabrag;
using namespace tabrag::cli;
using namespace tabrag::testing;
namespace fs = std::filesystem;

namespace {

int run_cli(std::vector<std::string> args, std::string* out_text = nullptr, std::string* err_text = nullptr) {
  args.insert(args.begin(), "tabrag");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int rc = run(static_cast<int>(argv.size()), argv.data(), out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return rc;
}

RunConfig stub_config(const fs::path& out) {
  RunConfig cfg;
  cfg.out = out;
  cfg.stub = true;
  return cfg;
}

void write_file(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

}  // namespace

TEST_CASE("ingest stores valid documents and reports bad ones") {
  TempDir dir("ingest");
  const auto in = dir.path() / "in";
  fs::create_directories(in);
  for (int i = 0; i < 9; ++i)
    write_file(in / ("d" + std::to_string(i) + ".json"),
               nlohmann::json{{"doc_id", "doc" + std::to_string(i)},
                              {"blocks", {{{"block_id", "b"}, {"kind", "text"}, {"text", "Hello."}}}}}
                   .dump());
  write_file(in / "bad.json",
             R"({"doc_id":"bad","blocks":[{"block_id":"t","kind":"table","rows":[[{"text":"x","col_span":2},{"text":"y","row_span":2}],[{"text":"z","col_span":3}]]}]})");
  const auto cfg = stub_config(dir.path() / "out");
  const auto s = cmd_ingest(cfg, {in});
  CHECK(s.stored.size() == 9);
  REQUIRE(s.rejected.size() == 1);
  CHECK(s.rejected[0].code == ErrorCode::kOverlappingSpans);
  CHECK(fs::exists(Workspace{cfg.out}.ingest_report()));

  std::string err;
  CHECK(run_cli({"ingest", in.string(), "--out", (dir.path() / "out2").string()}, nullptr, &err) ==
        static_cast<int>(ErrorCode::kOverlappingSpans));
  CHECK(err.find("bad.json") != std::string::npos);
}

TEST_CASE("ingest of the fixture corpus") {
  TempDir dir("ingest_fx");
  const auto cfg = stub_config(dir.path());
  const auto s = cmd_ingest(cfg, {fixture("docs")});
  CHECK(s.stored.size() == 9);
  CHECK(s.rejected.empty());
  CHECK(load_documents(Workspace{cfg.out}).size() == 9);
}

TEST_CASE("convert writes one corpus per strategy") {
  TempDir dir("convert");
  auto cfg = stub_config(dir.path());
  cmd_ingest(cfg, {fixture("docs")});
  auto b = Backends::from_config(cfg);
  CHECK(cmd_convert(cfg, b).size() == 4);
  TempDir dir2("convert_md");
  auto md = stub_config(dir2.path());
  md.strategy = "markdown";
  cmd_ingest(md, {fixture("docs")});
  Backends none;
  CHECK(cmd_convert(md, none).size() == 1);
  md.strategy = "llm";
  CHECK_THROWS_AS(cmd_convert(md, none), Error);
}

TEST_CASE("convert resumes only the failed blocks") {
  TempDir dir("resume");
  auto cfg = stub_config(dir.path());
  cfg.strategy = "llm";
  cmd_ingest(cfg, {fixture("docs")});
  const auto docs = load_documents(Workspace{cfg.out});
  std::size_t tables = 0;
  for (const auto& d : docs)
    for (const auto& bl : d.blocks) tables += bl.kind == BlockKind::kTable ? 1 : 0;

  auto flaky = std::make_shared<StubGenerationBackend>();
  flaky->set_transform([](std::string_view prompt) -> std::string {
    if (prompt.find("ospfAreaTable") != std::string_view::npos || prompt.find("bgpPeerTable") != std::string_view::npos)
      throw Error(ErrorCode::kBackendUnavailable, "flaky");
    return "description";
  });
  Backends b;
  b.generator = flaky;
  CHECK_THROWS_AS(cmd_convert(cfg, b), CorpusAssemblyError);
  CHECK(flaky->call_count() == tables);
  const auto resume = Workspace{cfg.out}.resume_file(StrategyId::kLlm);
  REQUIRE(fs::exists(resume));
  const auto manifest = nlohmann::json::parse(slurp(resume));
  CHECK(manifest["failed"].size() == 2);
  CHECK(manifest["completed"].size() == tables - 2);

  auto healthy = std::make_shared<StubGenerationBackend>();
  healthy->set_transform([](std::string_view) { return std::string("description"); });
  b.generator = healthy;
  CHECK(cmd_convert(cfg, b).size() == 1);
  CHECK(healthy->call_count() == 2);
  CHECK_FALSE(fs::exists(resume));
}

TEST_CASE("ask over a planted question ranks the planted chunk first") {
  TempDir dir("ask");
  auto cfg = stub_config(dir.path());
  cfg.strategy = "markdown";
  cmd_ingest(cfg, {fixture("docs")});
  auto b = Backends::from_config(cfg);
  cmd_convert(cfg, b);
  cmd_chunk(cfg);
  cmd_index(cfg, b);
  const auto r = cmd_ask(cfg, b, AskRequest{"What is the part number 50030265 of the PLCh-Power-1 Description Model?", {}});
  const auto& trace = r["markdown"][0];
  CHECK(trace["hits"][0]["chunk_id"].get<std::string>().starts_with("plch_power_1#"));
}

TEST_CASE("missing upstream artifacts are reported") {
  TempDir dir("missing");
  auto cfg = stub_config(dir.path());
  try {
    cmd_chunk(cfg);
    FAIL("expected MissingUpstreamArtifact");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kMissingUpstreamArtifact);
  }
  CHECK(run_cli({"index", "--stub", "--out", dir.path().string()}) ==
        static_cast<int>(ErrorCode::kMissingUpstreamArtifact));
}

TEST_CASE("output directory lock") {
  TempDir dir("lock");
  write_file(dir.path() / ".tabrag.lock", "");
  std::string err;
  CHECK(run_cli({"chunk", "--out", dir.path().string()}, nullptr, &err) == static_cast<int>(ErrorCode::kOutputLocked));
  fs::remove(dir.path() / ".tabrag.lock");
  CHECK(run_cli({"chunk", "--out", dir.path().string()}) == static_cast<int>(ErrorCode::kMissingUpstreamArtifact));
  CHECK_FALSE(fs::exists(dir.path() / ".tabrag.lock"));
}

TEST_CASE("argument errors") {
  CHECK(run_cli({}) != 0);
  CHECK(run_cli({"convert", "--strategy", "html", "--stub", "--out", TempDir("arg").path().string()}) ==
        static_cast<int>(ErrorCode::kInvalidArgument));
  CHECK(run_cli({"--help"}) == 0);
}

TEST_CASE("config file supplies flags and explicit flags win") {
  TempDir dir("config");
  const auto out = dir.path() / "ws";
  write_file(dir.path() / "cfg.toml", "out = \"" + out.string() + "\"\nstrategy = \"template\"\nstub = true\n");
  CHECK(run_cli({"ingest", fixture("docs").string(), "--config", (dir.path() / "cfg.toml").string()}) == 0);
  CHECK(run_cli({"convert", "--config", (dir.path() / "cfg.toml").string()}) == 0);
  CHECK(fs::exists(out / "corpora" / "template.jsonl"));
  CHECK_FALSE(fs::exists(out / "corpora" / "markdown.jsonl"));
  CHECK(run_cli({"convert", "--config", (dir.path() / "cfg.toml").string(), "--strategy", "markdown"}) == 0);
  CHECK(fs::exists(out / "corpora" / "markdown.jsonl"));
}

TEST_CASE("report over the published means fixture") {
  TempDir dir("report");
  auto cfg = stub_config(dir.path());
  const auto r = cmd_report(cfg, ReportRequest{fixture("table2_means.json")});
  const auto& rsds = r["published_means_rsd"];
  for (const auto& g : published_table2()) {
    CAPTURE(g.name);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", rsds.at(g.name).get<double>());
    char want[32];
    std::snprintf(want, sizeof want, "%.2f", g.rsd);
    CHECK(std::string(buf) == want);
  }
  CHECK(slurp(Workspace{cfg.out}.report_text()).find("human/OPT-1.3B 2.80") != std::string::npos);
}

TEST_CASE("external score sheets with three evaluators") {
  TempDir dir("sheets");
  auto cfg = stub_config(dir.path());
  write_file(dir.path() / "scores.csv",
             "question_id,evaluator_id,A,B,C,D\n"
             "q1,e1,4,3,2,1\nq1,e2,4,3,2,1\nq1,e3,5,4,3,2\n"
             "q2,e1,4,3,2,1\nq2,e2,3,4,2,1\nq2,e3,4,3,2,1\n");
  write_file(dir.path() / "labels.json",
             R"({"q1":{"A":"markdown","B":"template","C":"tplm","D":"llm"},"q2":{"A":"llm","B":"tplm","C":"template","D":"markdown"}})");
  Backends none;
  const auto agg = cmd_eval(cfg, none, EvalRequest{{}, dir.path() / "scores.csv", dir.path() / "labels.json"});
  CHECK(agg["reliability"]["reliable"] == nlohmann::json::array({"q1"}));
  CHECK(agg["reliability"]["needs_reassessment"] == nlohmann::json::array({"q2"}));
  CHECK(agg["evaluators"]["e1"]["means"]["markdown"].get<double>() == doctest::Approx(2.5));
}

TEST_CASE("analyze reports frequencies, lengths and taxonomy") {
  TempDir dir("analyze");
  auto cfg = stub_config(dir.path());
  cmd_ingest(cfg, {fixture("docs")});
  auto b = Backends::from_config(cfg);
  cmd_convert(cfg, b);
  const auto a = cmd_analyze(cfg, AnalyzeRequest{fixture("terms.txt"), fixture("verbs.txt"), fixture("questions.jsonl")});
  CHECK(a["term_verb_frequency"].size() == 4);
  CHECK(a["term_verb_frequency"]["markdown"]["terms"].get<std::size_t>() > 0);
  CHECK(a["avg_generated_length_chars"].size() == 4);
  CHECK(a["question_taxonomy"]["first_word"]["How"] == 2);
  CHECK(a["document_stats"]["table_count"] == 9);
}
