#pragma once

#include "tabrag/backends.hpp"
#include "tabrag/corpus_store.hpp"
#include "tabrag/retrieval.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tabrag {

struct QARecord {
  std::string question;
  std::string golden_answer;
  std::vector<std::string> tags;
  // Optional substring identifying the chunks that hold the answer; drives
  // similarity reports.
  std::string target_text;
};

struct AnswerTrace {
  std::string question;
  StrategyId strategy = StrategyId::kMarkdown;
  std::vector<RetrievalHit> hits;
  std::string prompt;
  std::string answer;
  bool abstained = false;
  std::optional<std::string> error;  // set by batch_answer when the pair failed
};

struct RetrievedPassage {
  std::string title;
  std::string text;
};

struct AnswerConfig {
  RetrievalConfig retrieval;
  std::string abstention_prefix = "I don't know";
};

// Read-only view of one strategy's retrieval artifacts.
class RagContext {
 public:
  RagContext(const VectorIndex& index, std::span<const Chunk> chunks,
             std::unordered_map<std::string, std::string> titles = {});

  const VectorIndex& index() const { return *index_; }
  const Chunk& chunk(std::string_view id) const;
  std::string title(std::string_view doc_id) const;

 private:
  const VectorIndex* index_;
  std::unordered_map<std::string, const Chunk*> by_id_;
  std::unordered_map<std::string, std::string> titles_;
};

std::string build_rag_prompt(std::string_view question, std::span<const RetrievedPassage> passages);

bool is_abstention(std::string_view answer, std::string_view prefix = "I don't know");

AnswerTrace answer(std::string_view question, const RagContext& ctx, const AnswerConfig& cfg,
                   GenerationBackend& gen, EmbeddingBackend& embed);

struct StrategyRuntime {
  const RagContext* context = nullptr;
  GenerationBackend* generator = nullptr;
  EmbeddingBackend* embedder = nullptr;
};

// traces[strategy][i] answers questions[i]. Per-pair failures are recorded
// in AnswerTrace::error and never abort the batch.
std::map<StrategyId, std::vector<AnswerTrace>> batch_answer(std::span<const QARecord> questions,
                                                            const std::map<StrategyId, StrategyRuntime>& runtimes,
                                                            const AnswerConfig& cfg);

inline constexpr std::string_view kDefaultInstruction =
    "Please answer the following questions concerning ICT products.";

// Throws MissingAnswer when the golden answer is empty.
std::string build_instruction_record(const QARecord& q, std::string_view instruction = kDefaultInstruction);

nlohmann::json trace_to_json(const AnswerTrace& t);
QARecord qa_record_from_json(const nlohmann::json& j);
std::vector<QARecord> load_questions(const std::string& path);

}  // namespace tabrag
