#pragma once

#include "tabrag/backends.hpp"
#include "tabrag/corpus_store.hpp"
#include "tabrag/retrieval.hpp"
#include "tabrag/table_to_text.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace tabrag::cli {

// Directory layout shared by every stage. Stages talk only through these
// files.
struct Workspace {
  std::filesystem::path root;

  std::filesystem::path documents_dir() const { return root / "documents"; }
  std::filesystem::path ingest_report() const { return root / "ingest_report.json"; }
  std::filesystem::path corpus_file(StrategyId s) const;
  std::filesystem::path resume_file(StrategyId s) const;
  std::filesystem::path chunks_file(StrategyId s) const;
  std::filesystem::path index_dir(StrategyId s) const;
  std::filesystem::path traces_file(StrategyId s) const;
  std::filesystem::path similarity_file() const { return root / "traces" / "similarity.json"; }
  std::filesystem::path eval_dir() const { return root / "eval"; }
  std::filesystem::path analysis_file() const { return root / "analysis" / "analysis.json"; }
  std::filesystem::path report_json() const { return root / "report" / "report.json"; }
  std::filesystem::path report_text() const { return root / "report" / "report.txt"; }
};

struct RunConfig {
  std::filesystem::path out = "tabrag_out";
  std::string strategy = "all";
  std::string gen_endpoint;
  std::string embed_endpoint;
  std::size_t dimension = 1024;
  std::size_t top_k = 3;
  std::size_t max_chunk_chars = 3000;
  bool stub = false;
  std::uint64_t seed = kDefaultStubSeed;
  int timeout_ms = 30000;
  int retries = 1;
  std::size_t max_in_flight = 4;

  std::vector<StrategyId> strategies() const;
};

// Backends built from RunConfig; tests may inject their own.
struct Backends {
  std::shared_ptr<GenerationBackend> generator;
  std::shared_ptr<EmbeddingBackend> embedder;
  std::shared_ptr<GenerationBackend> judge;

  // --stub gives deterministic in-process backends; otherwise endpoints must
  // be given explicitly. Missing pieces stay null and fail at use.
  static Backends from_config(const RunConfig& cfg);
};

struct IngestSummary {
  std::vector<std::string> stored;
  struct Reject {
    std::string file;
    ErrorCode code;
    std::string message;
  };
  std::vector<Reject> rejected;
  std::vector<std::string> warnings;
};

IngestSummary cmd_ingest(const RunConfig& cfg, const std::vector<std::filesystem::path>& inputs);
// Returns the corpus files written. Throws CorpusAssemblyError after writing
// the resume manifest when some blocks fail.
std::vector<std::filesystem::path> cmd_convert(const RunConfig& cfg, Backends& backends);
std::vector<std::filesystem::path> cmd_chunk(const RunConfig& cfg);
std::vector<std::filesystem::path> cmd_index(const RunConfig& cfg, Backends& backends);

struct AskRequest {
  std::optional<std::string> question;
  std::optional<std::filesystem::path> questions_file;
};
// Single question: returns traces without writing files. Batch: writes one
// traces file per strategy plus the similarity report.
nlohmann::json cmd_ask(const RunConfig& cfg, Backends& backends, const AskRequest& req);

struct EvalRequest {
  std::optional<std::filesystem::path> questions_file;  // judge mode
  std::optional<std::filesystem::path> scores_csv;      // external sheets
  std::optional<std::filesystem::path> labels_json;
};
nlohmann::json cmd_eval(const RunConfig& cfg, Backends& backends, const EvalRequest& req);

struct AnalyzeRequest {
  std::optional<std::filesystem::path> terms_file;
  std::optional<std::filesystem::path> verbs_file;
  std::optional<std::filesystem::path> questions_file;
};
nlohmann::json cmd_analyze(const RunConfig& cfg, const AnalyzeRequest& req);

struct ReportRequest {
  // {"group": {"markdown": 2.05, ...}, ...}
  std::optional<std::filesystem::path> means_file;
};
nlohmann::json cmd_report(const RunConfig& cfg, const ReportRequest& req);

std::vector<HybridDocument> load_documents(const Workspace& ws);

// Full command-line entry point; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tabrag::cli
