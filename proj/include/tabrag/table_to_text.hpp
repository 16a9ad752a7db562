#pragma once

#include "tabrag/backends.hpp"
#include "tabrag/document.hpp"
#include "tabrag/error.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tabrag {

enum class StrategyId { kMarkdown, kTemplate, kTplm, kLlm };

inline constexpr std::array<StrategyId, 4> kAllStrategies = {StrategyId::kMarkdown, StrategyId::kTemplate,
                                                             StrategyId::kTplm, StrategyId::kLlm};

std::string_view strategy_name(StrategyId s);
// Accepts "markdown", "template", "tplm", "llm"; throws InvalidArgument otherwise.
StrategyId parse_strategy(std::string_view name);

enum class TableKind { kRelational, kKeyValue };

struct TableSchema {
  TableKind kind = TableKind::kRelational;
  std::size_t main_column = 0;
  std::vector<std::size_t> attribute_columns;
  std::string entity_phrase;  // key-value tables only
};

struct Glossary {
  // Header keywords that mark a relational table's main column.
  std::vector<std::string> main_column_keywords = {"Name", "Type", "Parameter"};
  // Main-column headers that drop the "{header} named" wording.
  std::vector<std::string> main_column_name_headers = {"Name"};

  bool is_main_column_keyword(std::string_view header) const;
  bool is_name_header(std::string_view header) const;
};

struct TemplateOptions {
  // true: "The following sentences describe about {caption}." as printed in
  // the worked examples; false: the schematic form without "about".
  bool opening_with_about = true;
};

struct GeneratedPassage {
  std::string doc_id;
  std::string block_id;
  StrategyId strategy = StrategyId::kMarkdown;
  std::string text;
  std::size_t char_len = 0;
};

enum class PassageOrigin { kProse, kTable };

struct CorpusPassage {
  std::string doc_id;
  std::string block_id;
  PassageOrigin origin = PassageOrigin::kProse;
  std::string text;
};

struct Corpus {
  StrategyId strategy = StrategyId::kMarkdown;
  std::vector<CorpusPassage> passages;
};

struct Demonstration {
  std::string table_literal;
  std::string description;
};

struct StrategyProfile {
  std::string_view resource;
  std::string_view speed;
  std::string_view diversity;
};

TableKind classify_table(const NormalizedTable& t, const Glossary& g);
TableSchema detect_main_column(const NormalizedTable& t, const Glossary& g);
// Full schema: classification, main column for relational tables, entity
// phrase for key-value tables.
TableSchema infer_schema(const NormalizedTable& t, const Glossary& g);

std::string extract_entity_phrase(std::string_view caption);

std::string render_markdown(const NormalizedTable& t);
std::string render_template(const NormalizedTable& t, const TableSchema& s, const Glossary& g,
                            const TemplateOptions& opt = {});

// "Caption: {caption}.\n[['a', 'b'], ['c', 'd']]." with Python-style quoting.
std::string table_literal(const NormalizedTable& t);
// "caption | c00 | c01 | ..." in row-major order.
std::string linearize_table(const NormalizedTable& t);

const Demonstration& default_demonstration();
// Throws MissingDemonstration when either demonstration field is empty.
std::string build_t2t_prompt(const NormalizedTable& t, const Demonstration& demo);

struct PassageRequest {
  std::string doc_id;
  std::string block_id;
  const NormalizedTable* table = nullptr;
};

// Renders a table through a generation backend. Backend errors are rethrown
// with the doc/block identifiers prepended.
GeneratedPassage generate_via_backend(const PassageRequest& req, StrategyId strategy, GenerationBackend& backend,
                                      const Demonstration& demo = default_demonstration());

// Runs up to backend.max_in_flight() requests at once; results come back in
// request order. Failed slots hold the error instead of a passage.
struct BatchSlot {
  std::optional<GeneratedPassage> passage;
  std::optional<Error> error;
};
std::vector<BatchSlot> generate_batch(std::span<const PassageRequest> reqs, StrategyId strategy,
                                      GenerationBackend& backend, const Demonstration& demo = default_demonstration());

struct CorpusDeps {
  Glossary glossary;
  TemplateOptions template_options;
  Demonstration demonstration = default_demonstration();
  GenerationBackend* backend = nullptr;  // required for tplm/llm
  // Previously generated table passages keyed by (doc_id, block_id); reused
  // without calling the backend.
  std::map<std::pair<std::string, std::string>, std::string> cached;
};

// Thrown by assemble_corpus when some table blocks failed to generate.
class CorpusAssemblyError : public Error {
 public:
  struct Failure {
    std::string doc_id;
    std::string block_id;
    ErrorCode code;
    std::string message;
  };

  CorpusAssemblyError(std::map<std::pair<std::string, std::string>, std::string> completed,
                      std::vector<Failure> failures);

  const std::map<std::pair<std::string, std::string>, std::string>& completed() const { return completed_; }
  const std::vector<Failure>& failures() const { return failures_; }

 private:
  std::map<std::pair<std::string, std::string>, std::string> completed_;
  std::vector<Failure> failures_;
};

// Replaces each table block by its rendering under `strategy`; prose passes
// through. Expects tables already normalized.
Corpus assemble_corpus(std::span<const HybridDocument> docs, StrategyId strategy, const CorpusDeps& deps);

// Table passages of a corpus as GeneratedPassage records.
std::vector<GeneratedPassage> table_passages(const Corpus& c);

StrategyProfile strategy_profile(StrategyId s);

nlohmann::json passage_to_json(StrategyId s, const CorpusPassage& p);
void write_corpus(const Corpus& c, const std::string& path);
Corpus read_corpus(const std::string& path);

}  // namespace tabrag
