#include "tabrag/cli.hpp"

#include "tabrag/document.hpp"
#include "tabrag/error.hpp"
#include "tabrag/evaluation.hpp"
#include "tabrag/qa_pipeline.hpp"
#include "tabrag/text.hpp"

#include <CLI11.hpp>

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace tabrag::cli {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path Workspace::corpus_file(StrategyId s) const {
  return root / "corpora" / (std::string(strategy_name(s)) + ".jsonl");
}
fs::path Workspace::resume_file(StrategyId s) const {
  return root / "corpora" / (std::string(strategy_name(s)) + ".resume.json");
}
fs::path Workspace::chunks_file(StrategyId s) const {
  return root / "chunks" / (std::string(strategy_name(s)) + ".jsonl");
}
fs::path Workspace::index_dir(StrategyId s) const { return root / "indices" / std::string(strategy_name(s)); }
fs::path Workspace::traces_file(StrategyId s) const {
  return root / "traces" / (std::string(strategy_name(s)) + ".jsonl");
}

std::vector<StrategyId> RunConfig::strategies() const {
  if (text::iequals(strategy, "all")) return {kAllStrategies.begin(), kAllStrategies.end()};
  return {parse_strategy(strategy)};
}

Backends Backends::from_config(const RunConfig& cfg) {
  Backends b;
  RemoteOptions opt;
  opt.timeout = std::chrono::milliseconds(cfg.timeout_ms);
  opt.retries = cfg.retries;
  opt.max_in_flight = cfg.max_in_flight;
  if (cfg.stub) {
    b.generator = std::make_shared<StubGenerationBackend>(cfg.max_in_flight);
    b.embedder = std::make_shared<StubEmbeddingBackend>(cfg.dimension, cfg.seed);
    auto judge = std::make_shared<StubGenerationBackend>(cfg.max_in_flight);
    judge->set_transform([](std::string_view prompt) { return stub_judge_reply(prompt); });
    b.judge = judge;
    return b;
  }
  if (!cfg.gen_endpoint.empty()) {
    b.generator = std::make_shared<RemoteGenerationBackend>(cfg.gen_endpoint, opt);
    b.judge = b.generator;
  }
  if (!cfg.embed_endpoint.empty())
    b.embedder = std::make_shared<RemoteEmbeddingBackend>(cfg.embed_endpoint, cfg.dimension, opt);
  return b;
}

namespace {

void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw Error(ErrorCode::kIoFailure, "cannot create " + p.string() + ": " + ec.message());
}

void write_text(const fs::path& p, const std::string& content) {
  ensure_dir(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot write " + p.string());
  out << content;
  if (!out) throw Error(ErrorCode::kIoFailure, "write failed: " + p.string());
}

void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

json read_json(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::kMissingUpstreamArtifact, p.string());
  auto j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::kCorruptRecord, p.string() + ": invalid JSON");
  return j;
}

void require_exists(const fs::path& p) {
  if (!fs::exists(p)) throw Error(ErrorCode::kMissingUpstreamArtifact, p.string());
}

GenerationBackend& need(const std::shared_ptr<GenerationBackend>& b, const char* what) {
  if (!b) throw Error(ErrorCode::kBackendNotConfigured, std::string(what) + ": pass --stub or --gen-endpoint");
  return *b;
}

EmbeddingBackend& need(const std::shared_ptr<EmbeddingBackend>& b) {
  if (!b) throw Error(ErrorCode::kBackendNotConfigured, "embedding backend: pass --stub or --embed-endpoint");
  return *b;
}

std::vector<fs::path> expand_inputs(const std::vector<fs::path>& inputs) {
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(in)) {
        if (e.is_regular_file() && e.path().extension() == ".json") found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.push_back(in);
    }
  }
  return files;
}

std::unordered_map<std::string, std::string> titles_of(const std::vector<HybridDocument>& docs) {
  std::unordered_map<std::string, std::string> t;
  for (const auto& d : docs) t[d.doc_id] = d.title;
  return t;
}

std::string fmt2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::vector<HybridDocument> load_documents(const Workspace& ws) {
  const auto dir = ws.documents_dir();
  require_exists(dir);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<HybridDocument> docs;
  for (const auto& f : files) docs.push_back(document_from_json(read_json(f)));
  return docs;
}

IngestSummary cmd_ingest(const RunConfig& cfg, const std::vector<fs::path>& inputs) {
  const Workspace ws{cfg.out};
  IngestSummary summary;
  std::vector<HybridDocument> accepted;
  std::set<std::string> ids;
  for (const auto& file : expand_inputs(inputs)) {
    try {
      std::ifstream in(file, std::ios::binary);
      if (!in) throw Error(ErrorCode::kIoFailure, "cannot read file");
      json j;
      try {
        j = json::parse(in);
      } catch (const json::parse_error& e) {
        throw Error(ErrorCode::kSchemaViolation, e.what());
      }
      auto doc = document_from_json(j);
      if (ids.contains(doc.doc_id)) throw Error(ErrorCode::kSchemaViolation, "duplicate doc_id " + doc.doc_id);
      for (auto& w : normalize_document(doc)) summary.warnings.push_back(std::move(w));
      ids.insert(doc.doc_id);
      accepted.push_back(std::move(doc));
    } catch (const Error& e) {
      summary.rejected.push_back({file.string(), e.code(), e.what()});
    }
  }

  std::error_code ec;
  fs::remove_all(ws.documents_dir(), ec);
  ensure_dir(ws.documents_dir());
  for (const auto& doc : accepted) {
    write_json(ws.documents_dir() / (doc.doc_id + ".json"), document_to_json(doc));
    summary.stored.push_back(doc.doc_id);
  }

  json rejected = json::array();
  for (const auto& r : summary.rejected)
    rejected.push_back({{"file", r.file}, {"error", error_code_name(r.code)}, {"message", r.message}});
  write_json(ws.ingest_report(), {{"stored", summary.stored},
                                  {"rejected", rejected},
                                  {"warnings", summary.warnings},
                                  {"stats", stats_to_json(compute_stats(accepted))}});
  return summary;
}

std::vector<fs::path> cmd_convert(const RunConfig& cfg, Backends& backends) {
  const Workspace ws{cfg.out};
  const auto docs = load_documents(ws);
  std::vector<fs::path> written;
  for (auto strategy : cfg.strategies()) {
    CorpusDeps deps;
    const bool generative = strategy == StrategyId::kTplm || strategy == StrategyId::kLlm;
    if (generative) deps.backend = &need(backends.generator, "generation backend");

    const auto resume = ws.resume_file(strategy);
    if (generative && fs::exists(resume)) {
      const auto manifest = read_json(resume);
      for (const auto& c : manifest.at("completed"))
        deps.cached[{c.at("doc_id").get<std::string>(), c.at("block_id").get<std::string>()}] =
            c.at("text").get<std::string>();
    }

    try {
      const auto corpus = assemble_corpus(docs, strategy, deps);
      ensure_dir(ws.corpus_file(strategy).parent_path());
      write_corpus(corpus, ws.corpus_file(strategy).string());
      std::error_code ec;
      fs::remove(resume, ec);
      written.push_back(ws.corpus_file(strategy));
    } catch (const CorpusAssemblyError& e) {
      json completed = json::array();
      for (const auto& [key, text] : e.completed())
        completed.push_back({{"doc_id", key.first}, {"block_id", key.second}, {"text", text}});
      json failed = json::array();
      for (const auto& f : e.failures())
        failed.push_back(
            {{"doc_id", f.doc_id}, {"block_id", f.block_id}, {"error", error_code_name(f.code)}, {"message", f.message}});
      write_json(resume, {{"strategy", strategy_name(strategy)}, {"completed", completed}, {"failed", failed}});
      throw;
    }
  }
  return written;
}

std::vector<fs::path> cmd_chunk(const RunConfig& cfg) {
  const Workspace ws{cfg.out};
  ChunkingConfig ccfg;
  ccfg.max_chunk_chars = cfg.max_chunk_chars;
  std::vector<fs::path> written;
  for (auto strategy : cfg.strategies()) {
    require_exists(ws.corpus_file(strategy));
    const auto corpus = read_corpus(ws.corpus_file(strategy).string());
    auto result = chunk_corpus(corpus, ccfg);
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
    ensure_dir(ws.chunks_file(strategy).parent_path());
    persist_chunks(result.chunks, ws.chunks_file(strategy).string(), ccfg);
    written.push_back(ws.chunks_file(strategy));
  }
  return written;
}

std::vector<fs::path> cmd_index(const RunConfig& cfg, Backends& backends) {
  const Workspace ws{cfg.out};
  auto& embedder = need(backends.embedder);
  std::vector<fs::path> written;
  for (auto strategy : cfg.strategies()) {
    require_exists(ws.chunks_file(strategy));
    const auto chunks = load_chunks(ws.chunks_file(strategy).string());
    if (chunks.empty()) throw Error(ErrorCode::kEmptyIndex, "no chunks for " + std::string(strategy_name(strategy)));
    const auto idx = build_index(chunks, embedder);
    idx.save(ws.index_dir(strategy).string());
    written.push_back(ws.index_dir(strategy));
  }
  return written;
}

namespace {

struct LoadedStrategy {
  std::vector<Chunk> chunks;
  std::unique_ptr<VectorIndex> index;
  std::unique_ptr<RagContext> context;
};

std::map<StrategyId, LoadedStrategy> load_strategies(const Workspace& ws, const std::vector<StrategyId>& strategies,
                                                     const std::unordered_map<std::string, std::string>& titles) {
  std::map<StrategyId, LoadedStrategy> out;
  for (auto s : strategies) {
    require_exists(ws.chunks_file(s));
    require_exists(ws.index_dir(s) / "index.json");
    auto& l = out[s];
    l.chunks = load_chunks(ws.chunks_file(s).string());
    l.index = std::make_unique<VectorIndex>(VectorIndex::load(ws.index_dir(s).string()));
    l.context = std::make_unique<RagContext>(*l.index, l.chunks, titles);
  }
  return out;
}

}  // namespace

json cmd_ask(const RunConfig& cfg, Backends& backends, const AskRequest& req) {
  const Workspace ws{cfg.out};
  if (req.question.has_value() == req.questions_file.has_value())
    throw Error(ErrorCode::kInvalidArgument, "ask needs exactly one of --question or --questions");
  auto& gen = need(backends.generator, "generation backend");
  auto& embedder = need(backends.embedder);
  const auto docs = load_documents(ws);
  const auto strategies = cfg.strategies();
  auto loaded = load_strategies(ws, strategies, titles_of(docs));

  AnswerConfig acfg;
  acfg.retrieval.top_k = cfg.top_k;
  std::map<StrategyId, StrategyRuntime> runtimes;
  for (auto& [s, l] : loaded) runtimes[s] = StrategyRuntime{l.context.get(), &gen, &embedder};

  std::vector<QARecord> questions;
  if (req.question) {
    questions.push_back(QARecord{*req.question, {}, {}, {}});
  } else {
    questions = load_questions(req.questions_file->string());
  }
  const auto traces = batch_answer(questions, runtimes, acfg);

  json result = json::object();
  std::size_t failures = 0;
  for (const auto& [s, list] : traces) {
    json arr = json::array();
    std::string lines;
    for (const auto& t : list) {
      if (t.error) ++failures;
      arr.push_back(trace_to_json(t));
      lines += trace_to_json(t).dump() + "\n";
    }
    if (req.questions_file) write_text(ws.traces_file(s), lines);
    result[std::string(strategy_name(s))] = arr;
  }

  if (req.questions_file) {
    json sims = json::array();
    RetrievalConfig rcfg;
    rcfg.top_k = cfg.top_k;
    for (std::size_t i = 0; i < questions.size(); ++i) {
      const auto& q = questions[i];
      if (q.target_text.empty()) continue;
      json per = json::object();
      for (const auto& [s, l] : loaded) {
        std::vector<std::string> targets;
        for (const auto& c : l.chunks) {
          if (c.text.find(q.target_text) != std::string::npos) targets.push_back(c.chunk_id);
        }
        per[std::string(strategy_name(s))] =
            similarity_report_to_json(similarity_report(*l.index, q.question, targets, rcfg, embedder));
      }
      sims.push_back({{"question_index", i}, {"question", q.question}, {"target_text", q.target_text}, {"reports", per}});
    }
    write_json(ws.similarity_file(), sims);
  }
  if (failures > 0) result["failed_pairs"] = failures;
  return result;
}

namespace {

json sheet_aggregates(const ScoreSheet& sheet) {
  json means = json::object();
  const auto m = mean_scores(sheet);
  for (const auto& [s, v] : m) means[std::string(strategy_name(s))] = v;
  json hist = json::object();
  for (const auto& [s, h] : score_distribution(sheet)) hist[std::string(strategy_name(s))] = h;
  json wins = json::object();
  for (const auto& [pair, w] : win_rate_matrix(sheet)) {
    wins[std::string(strategy_name(pair.first))][std::string(strategy_name(pair.second))] = {{"wins", w.a_wins},
                                                                                             {"losses", w.b_wins}};
  }
  json agg = {{"questions", sheet.scores.size()}, {"means", means}, {"histograms", hist}, {"win_rates", wins}};
  agg["rsd"] = m.size() >= 2 ? json(rsd(m)) : json(nullptr);
  return agg;
}

std::string question_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "q%04zu", i + 1);
  return buf;
}

}  // namespace

json cmd_eval(const RunConfig& cfg, Backends& backends, const EvalRequest& req) {
  const Workspace ws{cfg.out};
  std::vector<ScoreRow> rows;
  LabelMap labels;

  if (req.scores_csv) {
    if (!req.labels_json) throw Error(ErrorCode::kInvalidArgument, "--scores needs --labels");
    rows = read_score_csv(req.scores_csv->string());
    labels = label_map_from_json(read_json(*req.labels_json));
  } else {
    if (!req.questions_file) throw Error(ErrorCode::kInvalidArgument, "eval needs --questions or --scores/--labels");
    auto& judge = need(backends.judge, "judge backend");
    const auto questions = load_questions(req.questions_file->string());
    std::map<StrategyId, std::vector<json>> traces;
    for (auto s : kAllStrategies) {
      require_exists(ws.traces_file(s));
      std::ifstream in(ws.traces_file(s), std::ios::binary);
      std::string line;
      while (std::getline(in, line)) {
        if (!line.empty()) traces[s].push_back(json::parse(line));
      }
      if (traces[s].size() != questions.size())
        throw Error(ErrorCode::kCorruptRecord, ws.traces_file(s).string() + ": trace count differs from questions");
    }
    std::string prompts;
    for (std::size_t i = 0; i < questions.size(); ++i) {
      if (text::trim(questions[i].golden_answer).empty()) continue;
      std::map<StrategyId, std::string> answers;
      for (auto s : kAllStrategies) answers[s] = traces[s][i].value("answer", std::string());
      const auto record = make_eval_record(question_id(i), questions[i].question, questions[i].golden_answer,
                                           answers, cfg.seed);
      const auto prompt = build_evaluator_prompt(record);
      const auto reply = judge.generate(prompt);
      rows.push_back(ScoreRow{record.question_id, "judge", parse_scores(reply)});
      labels[record.question_id] = record.label_map;
      prompts += json{{"question_id", record.question_id}, {"prompt", prompt}, {"reply", reply}}.dump() + "\n";
    }
    write_text(ws.eval_dir() / "prompts.jsonl", prompts);
    write_score_csv(rows, (ws.eval_dir() / "scores.csv").string());
    write_json(ws.eval_dir() / "labels.json", label_map_to_json(labels));
  }

  const auto sheets = unblind(rows, labels);
  json per_eval = json::object();
  std::vector<ScoreSheet> sheet_list;
  for (const auto& [id, sheet] : sheets) {
    per_eval[id] = sheet_aggregates(sheet);
    sheet_list.push_back(sheet);
  }
  json aggregates = {{"evaluators", per_eval}};
  if (sheet_list.size() == 3) {
    const auto rel = check_sheets(sheet_list);
    aggregates["reliability"] = {{"reliable", rel.reliable}, {"needs_reassessment", rel.needs_reassessment}};
  } else {
    aggregates["reliability"] = nullptr;
  }
  write_json(ws.eval_dir() / "aggregates.json", aggregates);
  return aggregates;
}

json cmd_analyze(const RunConfig& cfg, const AnalyzeRequest& req) {
  const Workspace ws{cfg.out};
  std::vector<Corpus> corpora;
  for (auto s : cfg.strategies()) {
    require_exists(ws.corpus_file(s));
    corpora.push_back(read_corpus(ws.corpus_file(s).string()));
  }
  std::vector<QARecord> questions;
  if (req.questions_file) questions = load_questions(req.questions_file->string());

  std::vector<std::string> terms;
  std::vector<std::string> verbs;
  bool heuristic = false;
  if (req.terms_file) terms = load_lexicon(req.terms_file->string());
  if (req.verbs_file) verbs = load_lexicon(req.verbs_file->string());
  if ((terms.empty() || verbs.empty()) && !questions.empty()) {
    std::vector<std::string> qa_text;
    for (const auto& q : questions) qa_text.push_back(q.question + " " + q.golden_answer);
    auto suggested = suggest_lexicons(qa_text);
    if (terms.empty()) terms = std::move(suggested.terms);
    if (verbs.empty()) verbs = std::move(suggested.verbs);
    heuristic = true;
  }

  json freq = json::object();
  if (!terms.empty() && !verbs.empty()) {
    for (const auto& c : corpora) {
      const auto f = term_verb_frequency(c, terms, verbs);
      freq[std::string(strategy_name(c.strategy))] = {{"terms", f.term_count}, {"verbs", f.verb_count}};
    }
  }

  std::vector<GeneratedPassage> passages;
  for (const auto& c : corpora) {
    auto p = table_passages(c);
    passages.insert(passages.end(), p.begin(), p.end());
  }
  json lengths = json::object();
  for (const auto& [s, v] : avg_generated_length(passages)) lengths[std::string(strategy_name(s))] = v;

  json taxonomy = nullptr;
  if (!questions.empty()) {
    std::map<std::string, std::size_t> words;
    std::map<std::string, std::size_t> tags;
    std::size_t q_chars = 0;
    std::size_t a_chars = 0;
    for (const auto& q : questions) {
      const auto cls = classify_question(q.question);
      ++words[std::string(question_word_name(cls.first_word))];
      ++tags[cls.tag];
      q_chars += text::utf8_length(q.question);
      a_chars += text::utf8_length(q.golden_answer);
    }
    const double n = static_cast<double>(questions.size());
    taxonomy = {{"first_word", words},
                {"tags", tags},
                {"avg_question_chars", static_cast<double>(q_chars) / n},
                {"avg_answer_chars", static_cast<double>(a_chars) / n}};
  }

  const auto docs = load_documents(ws);
  json analysis = {{"term_verb_frequency", freq},
                   {"lexicon", {{"terms", terms}, {"verbs", verbs}, {"heuristic", heuristic}}},
                   {"avg_generated_length_chars", lengths},
                   {"question_taxonomy", taxonomy},
                   {"document_stats", stats_to_json(compute_stats(docs))}};
  write_json(ws.analysis_file(), analysis);
  return analysis;
}

json cmd_report(const RunConfig& cfg, const ReportRequest& req) {
  const Workspace ws{cfg.out};
  json report = json::object();
  std::ostringstream txt;

  json profiles = json::object();
  txt << "Table-to-text strategies\n";
  txt << "  strategy   resource    speed     diversity\n";
  for (auto s : kAllStrategies) {
    const auto p = strategy_profile(s);
    profiles[std::string(strategy_name(s))] = {{"resource", p.resource}, {"speed", p.speed}, {"diversity", p.diversity}};
    char line[128];
    std::snprintf(line, sizeof line, "  %-10s %-11s %-9s %s\n", std::string(strategy_name(s)).c_str(),
                  std::string(p.resource).c_str(), std::string(p.speed).c_str(), std::string(p.diversity).c_str());
    txt << line;
  }
  report["strategies"] = profiles;

  const auto agg_path = ws.eval_dir() / "aggregates.json";
  if (fs::exists(agg_path)) {
    const auto agg = read_json(agg_path);
    report["evaluation"] = agg;
    for (const auto& [evaluator, a] : agg.at("evaluators").items()) {
      txt << "\nEvaluator " << evaluator << " (" << a.at("questions").get<std::size_t>() << " questions)\n";
      txt << "  strategy   mean   histogram[0..5]\n";
      for (const auto& [s, m] : a.at("means").items()) {
        txt << "  " << s << std::string(s.size() < 10 ? 10 - s.size() : 0, ' ') << " " << fmt2(m.get<double>())
            << "   " << a.at("histograms").at(s).dump() << "\n";
      }
      if (!a.at("rsd").is_null()) txt << "  RSD(%) " << fmt2(a.at("rsd").get<double>()) << "\n";
      txt << "  win rates (row beats column, %)\n";
      for (const auto& [x, row] : a.at("win_rates").items()) {
        txt << "    " << x << ":";
        for (const auto& [y, w] : row.items()) txt << " vs " << y << " " << fmt2(w.at("wins").get<double>());
        txt << "\n";
      }
    }
    if (!agg.at("reliability").is_null()) {
      txt << "\nReliability: " << agg["reliability"]["reliable"].size() << " reliable, "
          << agg["reliability"]["needs_reassessment"].size() << " need reassessment\n";
    }
  }

  if (fs::exists(ws.analysis_file())) {
    const auto analysis = read_json(ws.analysis_file());
    report["analysis"] = analysis;
    txt << "\nAverage generated table text length (chars)\n";
    for (const auto& [s, v] : analysis.at("avg_generated_length_chars").items())
      txt << "  " << s << " " << fmt2(v.get<double>()) << "\n";
    if (!analysis.at("term_verb_frequency").empty()) {
      txt << "Term / verb frequency\n";
      for (const auto& [s, v] : analysis.at("term_verb_frequency").items())
        txt << "  " << s << " terms=" << v.at("terms") << " verbs=" << v.at("verbs") << "\n";
    }
  }

  if (fs::exists(ws.similarity_file())) {
    const auto sims = read_json(ws.similarity_file());
    report["similarity"] = sims;
    txt << "\nTarget retrieval\n";
    for (const auto& q : sims) {
      txt << "  " << q.at("question").get<std::string>() << "\n";
      for (const auto& [s, r] : q.at("reports").items()) {
        txt << "    " << s << ":";
        if (r.at("targets").empty()) txt << " no target chunk";
        for (const auto& t : r.at("targets"))
          txt << " " << t.at("chunk_id").get<std::string>() << " rank " << t.at("rank") << " score "
              << fmt2(t.at("score").get<double>()) << (t.at("retrieved").get<bool>() ? " (retrieved)" : " (missed)");
        txt << "\n";
      }
    }
  }

  if (req.means_file) {
    const auto groups = read_json(*req.means_file);
    json rsds = json::object();
    txt << "\nRSD over supplied means\n";
    for (const auto& [group, means] : groups.items()) {
      std::map<StrategyId, double> m;
      for (const auto& [s, v] : means.items()) m[parse_strategy(s)] = v.get<double>();
      const double r = rsd(m);
      rsds[group] = r;
      txt << "  " << group << " " << fmt2(r) << "\n";
    }
    report["published_means_rsd"] = rsds;
  }

  write_json(ws.report_json(), report);
  write_text(ws.report_text(), txt.str());
  return report;
}

namespace {

// Advisory lock on the output directory for the lifetime of one command.
class OutputLock {
 public:
  explicit OutputLock(const fs::path& out) : path_(out / ".tabrag.lock") {
    ensure_dir(out);
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0)
      throw Error(ErrorCode::kOutputLocked, path_.string() + " exists; another command is using this directory");
  }
  ~OutputLock() {
    ::close(fd_);
    std::error_code ec;
    fs::remove(path_, ec);
  }
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  fs::path path_;
  int fd_ = -1;
};

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hybrid-document corpus builder and retrieval QA harness"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "TOML/INI file mirroring the flags; flags win");

  RunConfig cfg;
  app.add_option("--out", cfg.out, "Workspace directory")->capture_default_str();
  app.add_option("--strategy", cfg.strategy, "markdown|template|tplm|llm|all")->capture_default_str();
  app.add_option("--gen-endpoint", cfg.gen_endpoint, "Generation service base URL");
  app.add_option("--embed-endpoint", cfg.embed_endpoint, "Embedding service base URL");
  app.add_option("--dimension", cfg.dimension, "Embedding dimension")->capture_default_str();
  app.add_option("--top-k", cfg.top_k, "Chunks retrieved per question")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--max-chunk-chars", cfg.max_chunk_chars, "Chunk length limit")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_flag("--stub", cfg.stub, "Use deterministic in-process backends");
  app.add_option("--seed", cfg.seed, "Seed for stub backends and answer blinding");
  app.add_option("--timeout-ms", cfg.timeout_ms, "Remote request timeout")->capture_default_str();
  app.add_option("--retries", cfg.retries, "Remote retry count")->capture_default_str();
  app.add_option("--max-in-flight", cfg.max_in_flight, "Concurrent backend requests")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  std::vector<fs::path> ingest_paths;
  auto* ingest = app.add_subcommand("ingest", "Validate and normalize document JSON files");
  ingest->add_option("paths", ingest_paths, "Files or directories")->required();

  auto* convert = app.add_subcommand("convert", "Render tables and build per-strategy corpora");
  auto* chunk = app.add_subcommand("chunk", "Split corpora into retrieval chunks");
  auto* index = app.add_subcommand("index", "Embed chunks into per-strategy indices");

  AskRequest ask_req;
  std::string question;
  fs::path ask_questions;
  auto* ask = app.add_subcommand("ask", "Answer one question or a questions file");
  auto* q_opt = ask->add_option("--question", question, "Single question");
  auto* qs_opt = ask->add_option("--questions", ask_questions, "Questions JSON Lines file");
  q_opt->excludes(qs_opt);

  EvalRequest eval_req;
  fs::path eval_questions, eval_scores, eval_labels;
  auto* eval = app.add_subcommand("eval", "Score answers and aggregate score sheets");
  auto* eq = eval->add_option("--questions", eval_questions, "Questions with golden answers (judge mode)");
  auto* es = eval->add_option("--scores", eval_scores, "Score sheet CSV");
  auto* el = eval->add_option("--labels", eval_labels, "Label map JSON");

  AnalyzeRequest an_req;
  fs::path an_terms, an_verbs, an_questions;
  auto* analyze = app.add_subcommand("analyze", "Frequency, length and question-taxonomy reports");
  auto* at = analyze->add_option("--terms", an_terms, "Term lexicon");
  auto* av = analyze->add_option("--verbs", an_verbs, "Verb lexicon");
  auto* aq = analyze->add_option("--questions", an_questions, "Questions file");

  fs::path means_file;
  auto* report = app.add_subcommand("report", "Combine evaluation and analysis outputs");
  auto* rm = report->add_option("--means", means_file, "Published means fixture");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    (void)cfg.strategies();
    OutputLock lock(cfg.out);
    auto backends = Backends::from_config(cfg);
    if (ingest->parsed()) {
      const auto s = cmd_ingest(cfg, ingest_paths);
      out << "stored " << s.stored.size() << " document(s), rejected " << s.rejected.size() << "\n";
      for (const auto& w : s.warnings) err << "warning: " << w << "\n";
      for (const auto& r : s.rejected) err << "rejected " << r.file << ": " << r.message << "\n";
      return s.rejected.empty() ? 0 : static_cast<int>(s.rejected.front().code);
    }
    if (convert->parsed()) {
      for (const auto& p : cmd_convert(cfg, backends)) out << "wrote " << p.string() << "\n";
    } else if (chunk->parsed()) {
      for (const auto& p : cmd_chunk(cfg)) out << "wrote " << p.string() << "\n";
    } else if (index->parsed()) {
      for (const auto& p : cmd_index(cfg, backends)) out << "wrote " << p.string() << "\n";
    } else if (ask->parsed()) {
      if (q_opt->count() > 0) ask_req.question = question;
      if (qs_opt->count() > 0) ask_req.questions_file = ask_questions;
      const auto result = cmd_ask(cfg, backends, ask_req);
      if (ask_req.question) {
        for (const auto& [s, traces] : result.items()) {
          for (const auto& t : traces) out << t.dump() << "\n";
        }
      } else {
        out << "wrote traces for " << cfg.strategies().size() << " strategies\n";
      }
      if (result.contains("failed_pairs"))
        return static_cast<int>(ErrorCode::kBackendUnavailable);
    } else if (eval->parsed()) {
      if (eq->count() > 0) eval_req.questions_file = eval_questions;
      if (es->count() > 0) eval_req.scores_csv = eval_scores;
      if (el->count() > 0) eval_req.labels_json = eval_labels;
      cmd_eval(cfg, backends, eval_req);
      out << "wrote " << (Workspace{cfg.out}.eval_dir() / "aggregates.json").string() << "\n";
    } else if (analyze->parsed()) {
      if (at->count() > 0) an_req.terms_file = an_terms;
      if (av->count() > 0) an_req.verbs_file = an_verbs;
      if (aq->count() > 0) an_req.questions_file = an_questions;
      cmd_analyze(cfg, an_req);
      out << "wrote " << Workspace{cfg.out}.analysis_file().string() << "\n";
    } else if (report->parsed()) {
      ReportRequest rr;
      if (rm->count() > 0) rr.means_file = means_file;
      cmd_report(cfg, rr);
      out << "wrote " << Workspace{cfg.out}.report_json().string() << "\n";
    }
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace tabrag::cli
