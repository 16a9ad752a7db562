#include "tabrag/table_to_text.hpp"

#include "tabrag/error.hpp"
#include "tabrag/text.hpp"

#include <algorithm>
#include <atomic>
#include <deque>
#include <fstream>
#include <set>
#include <thread>

namespace tabrag {

std::string_view strategy_name(StrategyId s) {
  switch (s) {
    case StrategyId::kMarkdown: return "markdown";
    case StrategyId::kTemplate: return "template";
    case StrategyId::kTplm: return "tplm";
    case StrategyId::kLlm: return "llm";
  }
  return "unknown";
}

StrategyId parse_strategy(std::string_view name) {
  for (auto s : kAllStrategies) {
    if (text::iequals(name, strategy_name(s))) return s;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown strategy \"" + std::string(name) + "\"");
}

namespace {

bool header_in(std::span<const std::string> set, std::string_view header) {
  const auto h = text::trim(header);
  return std::any_of(set.begin(), set.end(), [&](const std::string& k) { return text::iequals(text::trim(k), h); });
}

bool is_placeholder(std::string_view cell) {
  const auto t = text::trim(cell);
  return t.empty() || t == "-";
}

// "{body}." unless the body already ends with a period.
std::string sentence(std::string body) {
  if (!text::ends_with_period(body)) body.push_back('.');
  return body;
}

void append_sentence(std::string& out, std::string s) {
  if (!out.empty()) out.push_back(' ');
  out += sentence(std::move(s));
}

std::string markdown_cell(std::string_view cell) {
  std::string out;
  out.reserve(cell.size());
  for (char c : cell) {
    if (c == '|') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

std::string markdown_row(const std::vector<std::string>& row) {
  std::string line = "|";
  for (const auto& cell : row) {
    line += " ";
    line += markdown_cell(cell);
    line += " |";
  }
  return line;
}

std::string python_repr(std::string_view s) {
  const bool has_single = s.find('\'') != std::string_view::npos;
  const bool has_double = s.find('"') != std::string_view::npos;
  const char quote = (has_single && !has_double) ? '"' : '\'';
  std::string out(1, quote);
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (c == quote) out.push_back('\\');
        out.push_back(c);
    }
  }
  out.push_back(quote);
  return out;
}

}  // namespace

bool Glossary::is_main_column_keyword(std::string_view header) const {
  return header_in(main_column_keywords, header);
}

bool Glossary::is_name_header(std::string_view header) const { return header_in(main_column_name_headers, header); }

TableKind classify_table(const NormalizedTable& t, const Glossary&) {
  return t.n_cols() == 2 ? TableKind::kKeyValue : TableKind::kRelational;
}

TableSchema detect_main_column(const NormalizedTable& t, const Glossary& g) {
  TableSchema s;
  s.kind = TableKind::kRelational;
  const std::size_t cols = t.n_cols();
  std::optional<std::size_t> main;

  for (std::size_t c = 0; c < cols && !main; ++c) {
    if (g.is_main_column_keyword(t.grid[0][c])) main = c;
  }
  for (std::size_t c = 0; c < cols && !main; ++c) {
    std::set<std::string_view> seen;
    bool distinct = true;
    bool all_placeholder = true;
    for (std::size_t r = 1; r < t.n_rows(); ++r) {
      const auto v = text::trim(t.grid[r][c]);
      if (!seen.insert(v).second) distinct = false;
      if (!is_placeholder(v)) all_placeholder = false;
    }
    if (distinct && !all_placeholder) main = c;
  }
  s.main_column = main.value_or(0);
  for (std::size_t c = 0; c < cols; ++c) {
    if (c != s.main_column) s.attribute_columns.push_back(c);
  }
  return s;
}

TableSchema infer_schema(const NormalizedTable& t, const Glossary& g) {
  if (classify_table(t, g) == TableKind::kKeyValue) {
    TableSchema s;
    s.kind = TableKind::kKeyValue;
    s.main_column = 0;
    s.attribute_columns = {1};
    s.entity_phrase = extract_entity_phrase(t.caption);
    return s;
  }
  return detect_main_column(t, g);
}

std::string extract_entity_phrase(std::string_view caption) {
  caption = text::trim(caption);
  if (caption.empty()) return "it";
  std::size_t best_end = std::string_view::npos;
  std::size_t best_pos = 0;
  for (std::string_view marker : {std::string_view(" about "), std::string_view(" of ")}) {
    const auto pos = caption.rfind(marker);
    if (pos == std::string_view::npos) continue;
    if (best_end == std::string_view::npos || pos > best_pos) {
      best_pos = pos;
      best_end = pos + marker.size();
    }
  }
  if (best_end == std::string_view::npos) return std::string(caption);
  const auto tail = text::trim(caption.substr(best_end));
  return tail.empty() ? std::string(caption) : std::string(tail);
}

std::string render_markdown(const NormalizedTable& t) {
  std::string out = "Table Caption: " + t.caption;
  if (t.grid.empty()) return out;
  out += "\n" + markdown_row(t.header());
  out += "\n|";
  for (std::size_t c = 0; c < t.n_cols(); ++c) out += " :--- |";
  for (std::size_t r = 1; r < t.n_rows(); ++r) out += "\n" + markdown_row(t.grid[r]);
  return out;
}

std::string render_template(const NormalizedTable& t, const TableSchema& s, const Glossary& g,
                            const TemplateOptions& opt) {
  std::string out;
  append_sentence(out, std::string(opt.opening_with_about ? "The following sentences describe about "
                                                          : "The following sentences describe ") +
                           t.caption);
  if (t.grid.empty()) return out;
  const auto& header = t.header();

  if (s.kind == TableKind::kKeyValue) {
    bool first = true;
    for (std::size_t r = 1; r < t.n_rows(); ++r) {
      const auto& key = t.grid[r][0];
      const auto& value = t.grid[r][1];
      if (is_placeholder(value)) continue;
      if (first) {
        append_sentence(out, "The " + key + " of " + s.entity_phrase + " is " + value);
        first = false;
      } else {
        append_sentence(out, "Its " + key + " is " + value);
      }
    }
    return out;
  }

  const std::string& mc_header = header[s.main_column];
  const bool name_rule = g.is_name_header(mc_header);
  for (std::size_t r = 1; r < t.n_rows(); ++r) {
    const auto& entity = t.grid[r][s.main_column];
    bool first = true;
    for (std::size_t col : s.attribute_columns) {
      const auto& value = t.grid[r][col];
      if (is_placeholder(value)) continue;
      if (first) {
        const std::string subject = name_rule ? "the " + entity : "the " + mc_header + " named " + entity;
        append_sentence(out, "The " + header[col] + " of " + subject + " is " + value);
        first = false;
      } else {
        append_sentence(out, "Its " + header[col] + " is " + value);
      }
    }
  }
  return out;
}

std::string table_literal(const NormalizedTable& t) {
  std::string out = "Caption: " + sentence(t.caption) + "\n[";
  for (std::size_t r = 0; r < t.grid.size(); ++r) {
    if (r > 0) out += ", ";
    out += "[";
    for (std::size_t c = 0; c < t.grid[r].size(); ++c) {
      if (c > 0) out += ", ";
      out += python_repr(t.grid[r][c]);
    }
    out += "]";
  }
  out += "].";
  return out;
}

std::string linearize_table(const NormalizedTable& t) {
  std::string out = t.caption;
  for (const auto& row : t.grid) {
    for (const auto& cell : row) {
      out += " | ";
      out += cell;
    }
  }
  return out;
}

const Demonstration& default_demonstration() {
  static const Demonstration demo{
      "Caption: Parameters for the ip link add name and ip link del dev.\n"
      "[['Parameter', 'Description', 'Value'], "
      "['name NAME', 'Specifies the name of a bridge.', "
      "'The value is a string of 1 to 15 case-sensitive characters without spaces.'], "
      "['dev DEV', 'Specifies the name of a bridge.', "
      "'The value is a string of 1 to 15 case-sensitive characters without spaces.'], "
      "['type bridge', 'Indicates that the device type is bridge.', '-']].",
      "The table provides details on the parameters for the ip link add name and ip link del dev commands. "
      "There are different parameters for configuring a bridge. The \"name NAME\" parameter is for specifying "
      "the name of a bridge and accepts a string with 1 to 15 case-sensitive characters, excluding spaces. "
      "The \"dev DEV\" parameter also specifies the name of a bridge and requires a string of 1 to 15 "
      "case-sensitive characters without spaces. The \"type bridge\" parameter indicates that the device being "
      "configured is of the type 'bridge.' It does not require a specific value."};
  return demo;
}

std::string build_t2t_prompt(const NormalizedTable& t, const Demonstration& demo) {
  if (text::trim(demo.table_literal).empty() || text::trim(demo.description).empty())
    throw Error(ErrorCode::kMissingDemonstration, "one-shot prompt needs a demonstration table and description");
  std::string out =
      "Now you have a task to complete. Task description: You will be given a table (with the 2d array format "
      "with the Caption). You need to generate a natural language description of the contents of the table. "
      "You can only generate content from the table content, do not generate other related or unrelated "
      "content. Here is an examples.\n\n";
  out += "Table: " + demo.table_literal + "\n\n";
  out += "Description: " + demo.description + "\n\n";
  out += "Table: " + table_literal(t) + "\n\n";
  out += "Description:";
  return out;
}

GeneratedPassage generate_via_backend(const PassageRequest& req, StrategyId strategy, GenerationBackend& backend,
                                      const Demonstration& demo) {
  if (strategy != StrategyId::kTplm && strategy != StrategyId::kLlm)
    throw Error(ErrorCode::kInvalidArgument, "only tplm and llm strategies use a generation backend");
  const std::string prompt = strategy == StrategyId::kLlm ? build_t2t_prompt(*req.table, demo)
                                                          : linearize_table(*req.table);
  std::string generated;
  try {
    generated = backend.generate(prompt);
  } catch (const Error& e) {
    throw Error(e.code(), req.doc_id + "/" + req.block_id + ": " + e.what());
  }
  const auto trimmed = text::trim(generated);
  if (trimmed.empty()) throw Error(ErrorCode::kBackendRefusal, req.doc_id + "/" + req.block_id + ": empty generation");
  GeneratedPassage p;
  p.doc_id = req.doc_id;
  p.block_id = req.block_id;
  p.strategy = strategy;
  p.text = std::string(trimmed);
  p.char_len = text::utf8_length(p.text);
  return p;
}

std::vector<BatchSlot> generate_batch(std::span<const PassageRequest> reqs, StrategyId strategy,
                                      GenerationBackend& backend, const Demonstration& demo) {
  std::vector<BatchSlot> slots(reqs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < reqs.size(); i = next++) {
      try {
        slots[i].passage = generate_via_backend(reqs[i], strategy, backend, demo);
      } catch (const Error& e) {
        slots[i].error = e;
      } catch (const std::exception& e) {
        slots[i].error = Error(ErrorCode::kBackendRefusal, reqs[i].doc_id + "/" + reqs[i].block_id + ": " + e.what());
      }
    }
  };
  const std::size_t n_workers = std::min(backend.max_in_flight(), reqs.size());
  if (n_workers <= 1) {
    worker();
    return slots;
  }
  std::vector<std::jthread> pool;
  pool.reserve(n_workers);
  for (std::size_t i = 0; i < n_workers; ++i) pool.emplace_back(worker);
  pool.clear();
  return slots;
}

CorpusAssemblyError::CorpusAssemblyError(std::map<std::pair<std::string, std::string>, std::string> completed,
                                         std::vector<Failure> failures)
    : Error(ErrorCode::kCorpusAssemblyFailed,
            std::to_string(failures.size()) + " table block(s) failed; first: " +
                (failures.empty() ? std::string() : failures.front().message)),
      completed_(std::move(completed)),
      failures_(std::move(failures)) {}

Corpus assemble_corpus(std::span<const HybridDocument> docs, StrategyId strategy, const CorpusDeps& deps) {
  Corpus corpus;
  corpus.strategy = strategy;
  const bool needs_backend = strategy == StrategyId::kTplm || strategy == StrategyId::kLlm;

  std::deque<NormalizedTable> tables;
  std::vector<PassageRequest> pending;
  std::vector<std::size_t> pending_slot;
  std::map<std::pair<std::string, std::string>, std::string> completed;

  for (const auto& doc : docs) {
    for (const auto& block : doc.blocks) {
      CorpusPassage p{doc.doc_id, block.block_id, PassageOrigin::kProse, {}};
      if (block.kind == BlockKind::kText) {
        p.text = block.text;
        corpus.passages.push_back(std::move(p));
        continue;
      }
      p.origin = PassageOrigin::kTable;
      const auto& table = tables.emplace_back(normalize_table(block.table).table);
      const auto key = std::make_pair(doc.doc_id, block.block_id);
      switch (strategy) {
        case StrategyId::kMarkdown: p.text = render_markdown(table); break;
        case StrategyId::kTemplate:
          p.text = render_template(table, infer_schema(table, deps.glossary), deps.glossary, deps.template_options);
          break;
        case StrategyId::kTplm:
        case StrategyId::kLlm:
          if (auto it = deps.cached.find(key); it != deps.cached.end()) {
            p.text = it->second;
            completed[key] = it->second;
          } else {
            pending.push_back(PassageRequest{doc.doc_id, block.block_id, &table});
            pending_slot.push_back(corpus.passages.size());
          }
          break;
      }
      corpus.passages.push_back(std::move(p));
    }
  }

  if (pending.empty()) return corpus;
  if (!needs_backend || deps.backend == nullptr)
    throw Error(ErrorCode::kBackendNotConfigured,
                std::string(strategy_name(strategy)) + " strategy needs a generation backend");

  auto slots = generate_batch(pending, strategy, *deps.backend, deps.demonstration);
  std::vector<CorpusAssemblyError::Failure> failures;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    auto& slot = slots[i];
    if (slot.passage) {
      completed[{pending[i].doc_id, pending[i].block_id}] = slot.passage->text;
      corpus.passages[pending_slot[i]].text = std::move(slot.passage->text);
    } else {
      failures.push_back({pending[i].doc_id, pending[i].block_id, slot.error->code(), slot.error->what()});
    }
  }
  if (!failures.empty()) throw CorpusAssemblyError(std::move(completed), std::move(failures));
  return corpus;
}

std::vector<GeneratedPassage> table_passages(const Corpus& c) {
  std::vector<GeneratedPassage> out;
  for (const auto& p : c.passages) {
    if (p.origin != PassageOrigin::kTable) continue;
    out.push_back(GeneratedPassage{p.doc_id, p.block_id, c.strategy, p.text, text::utf8_length(p.text)});
  }
  return out;
}

StrategyProfile strategy_profile(StrategyId s) {
  switch (s) {
    case StrategyId::kMarkdown: return {"CPU", "Fast", "Low"};
    case StrategyId::kTemplate: return {"CPU", "Fast", "Moderate"};
    case StrategyId::kTplm: return {"GPU", "Moderate", "High"};
    case StrategyId::kLlm: return {"GPU or API", "Low", "Very High"};
  }
  return {};
}

nlohmann::json passage_to_json(StrategyId s, const CorpusPassage& p) {
  return {{"strategy", strategy_name(s)},
          {"doc_id", p.doc_id},
          {"block_id", p.block_id},
          {"origin", p.origin == PassageOrigin::kTable ? "table" : "prose"},
          {"text", p.text}};
}

void write_corpus(const Corpus& c, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot write " + path);
  for (const auto& p : c.passages) out << passage_to_json(c.strategy, p).dump() << '\n';
  if (!out) throw Error(ErrorCode::kIoFailure, "write failed: " + path);
}

Corpus read_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kMissingUpstreamArtifact, path);
  Corpus c;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    const auto where = path + ":" + std::to_string(line_no);
    if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::kCorruptRecord, where + ": not a JSON object");
    try {
      const auto s = parse_strategy(j.at("strategy").get<std::string>());
      if (first) {
        c.strategy = s;
        first = false;
      } else if (s != c.strategy) {
        throw Error(ErrorCode::kCorruptRecord, where + ": mixed strategies");
      }
      const auto origin = j.at("origin").get<std::string>();
      if (origin != "table" && origin != "prose") throw Error(ErrorCode::kCorruptRecord, where + ": bad origin");
      c.passages.push_back(CorpusPassage{j.at("doc_id").get<std::string>(), j.at("block_id").get<std::string>(),
                                         origin == "table" ? PassageOrigin::kTable : PassageOrigin::kProse,
                                         j.at("text").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kCorruptRecord, where + ": " + e.what());
    }
  }
  return c;
}

}  // namespace tabrag
