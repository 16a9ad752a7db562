#include "tabrag/document.hpp"

#include "tabrag/error.hpp"
#include "tabrag/text.hpp"

#include <algorithm>
#include <unordered_set>

namespace tabrag {

RawTable NormalizedTable::to_raw() const {
  RawTable raw;
  raw.caption = caption;
  raw.rows.reserve(grid.size());
  for (const auto& row : grid) {
    std::vector<RawCell> cells;
    cells.reserve(row.size());
    for (const auto& t : row) cells.push_back(RawCell{t, 1, 1});
    raw.rows.push_back(std::move(cells));
  }
  return raw;
}

NormalizeResult normalize_table(const RawTable& raw) {
  if (raw.rows.empty()) throw Error(ErrorCode::kSchemaViolation, "table has no rows");
  const std::size_t n_rows = raw.rows.size();

  // occupancy[r][c] holds the source text once a position is claimed
  std::vector<std::vector<std::optional<std::string>>> canvas(n_rows);
  std::vector<std::string> warnings;

  for (std::size_t r = 0; r < n_rows; ++r) {
    const auto& row = raw.rows[r];
    std::size_t c = 0;
    for (const auto& cell : row) {
      if (cell.row_span < 1 || cell.col_span < 1)
        throw Error(ErrorCode::kSchemaViolation,
                    "row " + std::to_string(r) + ": spans must be positive");
      while (c < canvas[r].size() && canvas[r][c].has_value()) ++c;

      std::size_t last_row = r + static_cast<std::size_t>(cell.row_span);
      if (last_row > n_rows) {
        warnings.push_back("row " + std::to_string(r) + ": row_span " + std::to_string(cell.row_span) +
                           " clamped to table height");
        last_row = n_rows;
      }
      const std::string value(text::trim(cell.text));
      for (std::size_t rr = r; rr < last_row; ++rr) {
        auto& target = canvas[rr];
        const std::size_t end = c + static_cast<std::size_t>(cell.col_span);
        if (target.size() < end) target.resize(end);
        for (std::size_t cc = c; cc < end; ++cc) {
          if (target[cc].has_value())
            throw Error(ErrorCode::kOverlappingSpans, "position (" + std::to_string(rr) + "," +
                                                          std::to_string(cc) + ") claimed twice");
          target[cc] = value;
        }
      }
      c += static_cast<std::size_t>(cell.col_span);
    }
  }

  std::size_t width = 0;
  for (const auto& row : canvas) width = std::max(width, row.size());
  if (width == 0) throw Error(ErrorCode::kSchemaViolation, "table has no cells");

  NormalizeResult out;
  out.table.caption = std::string(text::trim(raw.caption));
  out.table.grid.reserve(n_rows);
  for (std::size_t r = 0; r < n_rows; ++r) {
    std::vector<std::string> row;
    row.reserve(width);
    bool padded = false;
    for (std::size_t c = 0; c < width; ++c) {
      if (c < canvas[r].size() && canvas[r][c].has_value()) {
        row.push_back(*canvas[r][c]);
      } else {
        row.emplace_back();
        padded = true;
      }
    }
    if (padded) warnings.push_back("row " + std::to_string(r) + ": padded to width " + std::to_string(width));
    out.table.grid.push_back(std::move(row));
  }
  out.warnings = std::move(warnings);
  return out;
}

std::vector<std::string> normalize_document(HybridDocument& doc) {
  std::vector<std::string> warnings;
  for (auto& block : doc.blocks) {
    if (block.kind != BlockKind::kTable) continue;
    auto result = normalize_table(block.table);
    for (auto& w : result.warnings) warnings.push_back(doc.doc_id + "/" + block.block_id + ": " + w);
    block.table = result.table.to_raw();
  }
  return warnings;
}

TableStats compute_stats(std::span<const HybridDocument> docs) {
  TableStats s;
  std::size_t text_words = 0;
  for (const auto& doc : docs) {
    for (const auto& block : doc.blocks) {
      if (block.kind == BlockKind::kText) {
        text_words += text::count_words(block.text);
        continue;
      }
      ++s.table_count;
      for (const auto& row : block.table.rows) {
        for (const auto& cell : row) {
          s.words_in_tables += text::count_words(cell.text);
          ++s.cells_in_tables;
        }
      }
    }
  }
  s.total_words = text_words + s.words_in_tables;
  if (s.total_words > 0)
    s.table_word_share = static_cast<double>(s.words_in_tables) / static_cast<double>(s.total_words);
  if (s.table_count > 0) {
    s.avg_words_per_table = static_cast<double>(s.words_in_tables) / static_cast<double>(s.table_count);
    s.avg_cells_per_table = static_cast<double>(s.cells_in_tables) / static_cast<double>(s.table_count);
  }
  if (s.cells_in_tables > 0)
    s.avg_words_per_cell = static_cast<double>(s.words_in_tables) / static_cast<double>(s.cells_in_tables);
  return s;
}

namespace {

using nlohmann::json;

const json& require(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw Error(ErrorCode::kSchemaViolation, where + ": missing \"" + key + "\"");
  return *it;
}

std::string require_string(const json& obj, const char* key, const std::string& where) {
  const auto& v = require(obj, key, where);
  if (!v.is_string()) throw Error(ErrorCode::kSchemaViolation, where + "/" + key + ": expected string");
  return v.get<std::string>();
}

int optional_span(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return 1;
  if (!it->is_number_integer() || it->get<long long>() < 1)
    throw Error(ErrorCode::kSchemaViolation, where + "/" + key + ": expected positive integer");
  return it->get<int>();
}

}  // namespace

HybridDocument document_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kSchemaViolation, "document must be a JSON object");
  HybridDocument doc;
  doc.doc_id = require_string(j, "doc_id", "");
  if (doc.doc_id.empty()) throw Error(ErrorCode::kSchemaViolation, "/doc_id: must be non-empty");
  doc.title = j.contains("title") && j["title"].is_string() ? j["title"].get<std::string>() : std::string();
  const auto& blocks = require(j, "blocks", "");
  if (!blocks.is_array()) throw Error(ErrorCode::kSchemaViolation, "/blocks: expected array");

  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const std::string where = "/blocks/" + std::to_string(i);
    const auto& b = blocks[i];
    if (!b.is_object()) throw Error(ErrorCode::kSchemaViolation, where + ": expected object");
    Block block;
    block.block_id = require_string(b, "block_id", where);
    if (!seen.insert(block.block_id).second)
      throw Error(ErrorCode::kSchemaViolation, where + ": duplicate block_id " + block.block_id);
    const std::string kind = require_string(b, "kind", where);
    if (kind == "text") {
      block.kind = BlockKind::kText;
      block.text = require_string(b, "text", where);
    } else if (kind == "table") {
      block.kind = BlockKind::kTable;
      block.table.caption = b.contains("caption") && b["caption"].is_string() ? b["caption"].get<std::string>() : "";
      const auto& rows = require(b, "rows", where);
      if (!rows.is_array() || rows.empty())
        throw Error(ErrorCode::kSchemaViolation, where + "/rows: expected non-empty array");
      for (std::size_t r = 0; r < rows.size(); ++r) {
        const std::string rwhere = where + "/rows/" + std::to_string(r);
        if (!rows[r].is_array()) throw Error(ErrorCode::kSchemaViolation, rwhere + ": expected array");
        std::vector<RawCell> cells;
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
          const std::string cwhere = rwhere + "/" + std::to_string(c);
          const auto& cell = rows[r][c];
          if (!cell.is_object()) throw Error(ErrorCode::kSchemaViolation, cwhere + ": expected object");
          cells.push_back(RawCell{require_string(cell, "text", cwhere), optional_span(cell, "row_span", cwhere),
                                  optional_span(cell, "col_span", cwhere)});
        }
        block.table.rows.push_back(std::move(cells));
      }
    } else {
      throw Error(ErrorCode::kSchemaViolation, where + "/kind: unknown kind \"" + kind + "\"");
    }
    doc.blocks.push_back(std::move(block));
  }
  return doc;
}

json document_to_json(const HybridDocument& doc) {
  json blocks = json::array();
  for (const auto& b : doc.blocks) {
    if (b.kind == BlockKind::kText) {
      blocks.push_back({{"block_id", b.block_id}, {"kind", "text"}, {"text", b.text}});
      continue;
    }
    json rows = json::array();
    for (const auto& row : b.table.rows) {
      json cells = json::array();
      for (const auto& cell : row) {
        json c = {{"text", cell.text}};
        if (cell.row_span != 1) c["row_span"] = cell.row_span;
        if (cell.col_span != 1) c["col_span"] = cell.col_span;
        cells.push_back(std::move(c));
      }
      rows.push_back(std::move(cells));
    }
    blocks.push_back({{"block_id", b.block_id}, {"kind", "table"}, {"caption", b.table.caption}, {"rows", rows}});
  }
  return {{"doc_id", doc.doc_id}, {"title", doc.title}, {"blocks", blocks}};
}

json stats_to_json(const TableStats& s) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return {{"total_words", s.total_words},
          {"words_in_tables", s.words_in_tables},
          {"table_count", s.table_count},
          {"cells_in_tables", s.cells_in_tables},
          {"table_word_share", opt(s.table_word_share)},
          {"avg_words_per_table", opt(s.avg_words_per_table)},
          {"avg_cells_per_table", opt(s.avg_cells_per_table)},
          {"avg_words_per_cell", opt(s.avg_words_per_cell)}};
}

}  // namespace tabrag
