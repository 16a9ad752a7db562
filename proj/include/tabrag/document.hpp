#pragma once

#include <nlohmann/json.hpp>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tabrag {

struct RawCell {
  std::string text;
  int row_span = 1;
  int col_span = 1;
};

struct RawTable {
  std::string caption;
  std::vector<std::vector<RawCell>> rows;
};

// Rectangular table after span expansion. Row 0 is always the header row.
struct NormalizedTable {
  std::string caption;
  std::vector<std::vector<std::string>> grid;

  std::size_t n_rows() const { return grid.size(); }
  std::size_t n_cols() const { return grid.empty() ? 0 : grid.front().size(); }
  std::size_t n_data_rows() const { return grid.empty() ? 0 : grid.size() - 1; }
  const std::vector<std::string>& header() const { return grid.front(); }

  // Span-free raw form, used when persisting normalized documents.
  RawTable to_raw() const;
};

struct NormalizeResult {
  NormalizedTable table;
  std::vector<std::string> warnings;
};

enum class BlockKind { kText, kTable };

struct Block {
  std::string block_id;
  BlockKind kind = BlockKind::kText;
  std::string text;  // kind == kText
  RawTable table;    // kind == kTable
};

struct HybridDocument {
  std::string doc_id;
  std::string title;
  std::vector<Block> blocks;
};

struct TableStats {
  std::size_t total_words = 0;
  std::size_t words_in_tables = 0;
  std::size_t table_count = 0;
  std::size_t cells_in_tables = 0;
  std::optional<double> table_word_share;
  std::optional<double> avg_words_per_table;
  std::optional<double> avg_cells_per_table;
  std::optional<double> avg_words_per_cell;
};

// Expands row/col spans by copying each cell's text into every position it
// covers. Cell text is trimmed. Short rows are right-padded with empty cells
// (reported as warnings); two cells claiming one position throw
// OverlappingSpans. Row spans running past the last row are clamped.
NormalizeResult normalize_table(const RawTable& raw);

// Normalizes every table block in place, returning the collected warnings.
std::vector<std::string> normalize_document(HybridDocument& doc);

// Word = maximal whitespace-delimited token. Table words are counted over
// source cells (not span copies); captions and titles are not counted.
TableStats compute_stats(std::span<const HybridDocument> docs);

// JSON (de)serialization for the ingestion format. Parsing validates the
// document schema and throws SchemaViolation with a JSON-pointer-ish path.
HybridDocument document_from_json(const nlohmann::json& j);
nlohmann::json document_to_json(const HybridDocument& doc);
nlohmann::json stats_to_json(const TableStats& s);

}  // namespace tabrag
