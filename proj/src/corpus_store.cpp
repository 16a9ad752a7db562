#include "tabrag/corpus_store.hpp"

#include "tabrag/error.hpp"
#include "tabrag/text.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>

namespace tabrag {

std::vector<std::string> split_sentences(std::string_view passage, std::string_view terminators) {
  std::vector<std::string> out;
  std::size_t start = 0;
  auto emit = [&](std::size_t end) {
    const auto s = text::trim(passage.substr(start, end - start));
    if (!s.empty()) out.emplace_back(s);
    start = end;
  };
  for (std::size_t i = 0; i < passage.size(); ++i) {
    if (terminators.find(passage[i]) == std::string_view::npos) continue;
    const bool at_end = i + 1 == passage.size();
    if (at_end || std::isspace(static_cast<unsigned char>(passage[i + 1])) != 0) emit(i + 1);
  }
  emit(passage.size());
  return out;
}

std::string make_chunk_id(std::string_view doc_id, std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "#%05zu", n);
  return std::string(doc_id) + buf;
}

ChunkingResult chunk_corpus(const Corpus& c, const ChunkingConfig& cfg) {
  if (cfg.max_chunk_chars < 1) throw Error(ErrorCode::kInvalidArgument, "max_chunk_chars must be >= 1");
  ChunkingResult result;

  std::string current_doc;
  std::size_t next_index = 0;
  Chunk cur;
  bool have_doc = false;

  auto flush = [&] {
    if (cur.sentence_count == 0) return;
    cur.chunk_id = make_chunk_id(cur.doc_id, next_index++);
    result.chunks.push_back(std::move(cur));
    cur = Chunk{};
  };

  for (const auto& passage : c.passages) {
    if (!have_doc || passage.doc_id != current_doc) {
      flush();
      current_doc = passage.doc_id;
      next_index = 0;
      have_doc = true;
    }
    for (auto& s : split_sentences(passage.text, cfg.sentence_terminators)) {
      const std::size_t len = text::utf8_length(s);
      if (len > cfg.max_chunk_chars) {
        flush();
        result.warnings.push_back(passage.doc_id + "/" + passage.block_id + ": sentence of " + std::to_string(len) +
                                  " chars exceeds max_chunk_chars");
        cur = Chunk{{}, passage.doc_id, c.strategy, std::move(s), len, 1, true};
        flush();
        continue;
      }
      if (cur.sentence_count > 0 && cur.char_len + 1 + len > cfg.max_chunk_chars) flush();
      if (cur.sentence_count == 0) {
        cur.doc_id = passage.doc_id;
        cur.strategy = c.strategy;
        cur.text = std::move(s);
        cur.char_len = len;
      } else {
        cur.text += ' ';
        cur.text += s;
        cur.char_len += 1 + len;
      }
      ++cur.sentence_count;
    }
  }
  flush();
  return result;
}

nlohmann::json chunk_to_json(const Chunk& c) {
  return {{"chunk_id", c.chunk_id},     {"doc_id", c.doc_id},
          {"strategy", strategy_name(c.strategy)},
          {"text", c.text},             {"char_len", c.char_len},
          {"sentence_count", c.sentence_count},
          {"oversize", c.oversize}};
}

Chunk chunk_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kCorruptRecord, "not a JSON object");
  try {
    Chunk c;
    c.chunk_id = j.at("chunk_id").get<std::string>();
    c.doc_id = j.at("doc_id").get<std::string>();
    c.strategy = parse_strategy(j.at("strategy").get<std::string>());
    c.text = j.at("text").get<std::string>();
    c.char_len = j.at("char_len").get<std::size_t>();
    c.sentence_count = j.contains("sentence_count") ? j.at("sentence_count").get<std::size_t>() : 0;
    c.oversize = j.at("oversize").get<bool>();
    if (c.chunk_id.empty()) throw Error(ErrorCode::kCorruptRecord, "empty chunk_id");
    if (c.char_len != text::utf8_length(c.text)) throw Error(ErrorCode::kCorruptRecord, "char_len does not match text");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kCorruptRecord, e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::kCorruptRecord, e.what());
  }
}

std::string manifest_path(const std::string& chunks_path) { return chunks_path + ".manifest.json"; }

nlohmann::json persist_chunks(const std::vector<Chunk>& chunks, const std::string& path, const ChunkingConfig& cfg) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot write " + path);
  std::size_t chars = 0;
  std::size_t oversize = 0;
  std::size_t sentences = 0;
  for (const auto& c : chunks) {
    out << chunk_to_json(c).dump() << '\n';
    chars += c.char_len;
    sentences += c.sentence_count;
    if (c.oversize) ++oversize;
  }
  out.close();
  if (!out) throw Error(ErrorCode::kIoFailure, "write failed: " + path);

  nlohmann::json manifest = {{"chunk_count", chunks.size()},
                             {"total_chars", chars},
                             {"sentence_count", sentences},
                             {"oversize_count", oversize},
                             {"config",
                              {{"max_chunk_chars", cfg.max_chunk_chars},
                               {"sentence_terminators", cfg.sentence_terminators}}}};
  std::ofstream m(manifest_path(path), std::ios::binary | std::ios::trunc);
  if (!m) throw Error(ErrorCode::kIoFailure, "cannot write " + manifest_path(path));
  m << manifest.dump(2) << '\n';
  if (!m) throw Error(ErrorCode::kIoFailure, "write failed: " + manifest_path(path));
  return manifest;
}

std::vector<Chunk> load_chunks(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot read " + path);
  std::vector<Chunk> chunks;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw Error(ErrorCode::kCorruptRecord, path + ":" + std::to_string(line_no) + ": invalid JSON");
    try {
      chunks.push_back(chunk_from_json(j));
    } catch (const Error& e) {
      throw Error(ErrorCode::kCorruptRecord, path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return chunks;
}

}  // namespace tabrag
