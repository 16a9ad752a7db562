#include "tabrag/qa_pipeline.hpp"

#include "tabrag/error.hpp"
#include "tabrag/text.hpp"

#include <fstream>

namespace tabrag {

RagContext::RagContext(const VectorIndex& index, std::span<const Chunk> chunks,
                       std::unordered_map<std::string, std::string> titles)
    : index_(&index), titles_(std::move(titles)) {
  for (const auto& c : chunks) by_id_[c.chunk_id] = &c;
}

const Chunk& RagContext::chunk(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) throw Error(ErrorCode::kUnknownChunkId, std::string(id));
  return *it->second;
}

std::string RagContext::title(std::string_view doc_id) const {
  auto it = titles_.find(std::string(doc_id));
  return it == titles_.end() ? std::string(doc_id) : it->second;
}

std::string build_rag_prompt(std::string_view question, std::span<const RetrievedPassage> passages) {
  std::string out =
      "Use the following retrieved knowledge to answer the question at the end. "
      "If the knowledge does not contain the answer, reply \"I don't know the answer.\" "
      "and do not make up an answer.\n\n";
  for (const auto& p : passages) out += "<Page_Start>: Title: " + p.title + " " + p.text + " <Page_End>\n";
  out += "\nQuestion: ";
  out += question;
  out += "\nAnswer:";
  return out;
}

bool is_abstention(std::string_view answer, std::string_view prefix) {
  return text::trim(answer).starts_with(prefix);
}

AnswerTrace answer(std::string_view question, const RagContext& ctx, const AnswerConfig& cfg,
                   GenerationBackend& gen, EmbeddingBackend& embed) {
  if (text::trim(question).empty()) throw Error(ErrorCode::kInvalidArgument, "question must be non-empty");
  if (ctx.index().empty()) throw Error(ErrorCode::kEmptyIndex, "no chunks indexed");
  AnswerTrace trace;
  trace.question = std::string(question);
  trace.strategy = ctx.index().strategy();
  trace.hits = search(ctx.index(), question, cfg.retrieval, embed);

  std::vector<RetrievedPassage> passages;
  passages.reserve(trace.hits.size());
  for (const auto& hit : trace.hits) {
    const auto& c = ctx.chunk(hit.chunk_id);
    passages.push_back(RetrievedPassage{ctx.title(c.doc_id), c.text});
  }
  trace.prompt = build_rag_prompt(question, passages);
  trace.answer = gen.generate(trace.prompt);
  trace.abstained = is_abstention(trace.answer, cfg.abstention_prefix);
  return trace;
}

std::map<StrategyId, std::vector<AnswerTrace>> batch_answer(std::span<const QARecord> questions,
                                                            const std::map<StrategyId, StrategyRuntime>& runtimes,
                                                            const AnswerConfig& cfg) {
  std::map<StrategyId, std::vector<AnswerTrace>> out;
  for (const auto& [strategy, rt] : runtimes) {
    auto& traces = out[strategy];
    traces.reserve(questions.size());
    for (const auto& q : questions) {
      try {
        if (rt.context == nullptr || rt.generator == nullptr || rt.embedder == nullptr)
          throw Error(ErrorCode::kBackendNotConfigured, std::string(strategy_name(strategy)));
        traces.push_back(answer(q.question, *rt.context, cfg, *rt.generator, *rt.embedder));
      } catch (const std::exception& e) {
        AnswerTrace failed;
        failed.question = q.question;
        failed.strategy = strategy;
        failed.error = e.what();
        traces.push_back(std::move(failed));
      }
    }
  }
  return out;
}

std::string build_instruction_record(const QARecord& q, std::string_view instruction) {
  if (text::trim(q.question).empty()) throw Error(ErrorCode::kInvalidArgument, "question must be non-empty");
  if (text::trim(q.golden_answer).empty()) throw Error(ErrorCode::kMissingAnswer, q.question);
  std::string out =
      "Below is an instruction that describes a task, paired with an input that provides further context. "
      "Write a response that appropriately completes the request.\n\n";
  out += "Instruction: ";
  out += instruction;
  out += "\n\nInput: " + q.question;
  out += "\n\nResponse: " + q.golden_answer;
  return out;
}

nlohmann::json trace_to_json(const AnswerTrace& t) {
  nlohmann::json hits = nlohmann::json::array();
  for (const auto& h : t.hits) hits.push_back(hit_to_json(h));
  nlohmann::json j = {{"question", t.question}, {"strategy", strategy_name(t.strategy)},
                      {"hits", hits},           {"prompt", t.prompt},
                      {"answer", t.answer},     {"abstained", t.abstained}};
  j["error"] = t.error ? nlohmann::json(*t.error) : nlohmann::json(nullptr);
  return j;
}

QARecord qa_record_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kSchemaViolation, "question record must be an object");
  QARecord q;
  try {
    q.question = j.at("question").get<std::string>();
    if (j.contains("golden_answer") && !j["golden_answer"].is_null())
      q.golden_answer = j["golden_answer"].get<std::string>();
    if (j.contains("tags") && !j["tags"].is_null()) q.tags = j["tags"].get<std::vector<std::string>>();
    if (j.contains("target_text") && !j["target_text"].is_null()) q.target_text = j["target_text"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchemaViolation, e.what());
  }
  if (text::trim(q.question).empty()) throw Error(ErrorCode::kSchemaViolation, "question must be non-empty");
  return q;
}

std::vector<QARecord> load_questions(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kMissingUpstreamArtifact, path);
  std::vector<QARecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    try {
      if (j.is_discarded()) throw Error(ErrorCode::kSchemaViolation, "invalid JSON");
      out.push_back(qa_record_from_json(j));
    } catch (const Error& e) {
      throw Error(ErrorCode::kSchemaViolation, path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace tabrag
