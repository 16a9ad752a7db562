#pragma once

#include "tabrag/table_to_text.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace tabrag {

struct ChunkingConfig {
  std::size_t max_chunk_chars = 3000;
  std::string sentence_terminators = ".!?";
};

struct Chunk {
  std::string chunk_id;
  std::string doc_id;
  StrategyId strategy = StrategyId::kMarkdown;
  std::string text;
  std::size_t char_len = 0;
  std::size_t sentence_count = 0;
  bool oversize = false;

  bool operator==(const Chunk&) const = default;
};

struct ChunkingResult {
  std::vector<Chunk> chunks;
  std::vector<std::string> warnings;
};

// A sentence ends at a terminator followed by whitespace or end of text.
// Sentences are trimmed; a trailing fragment without terminator counts as a
// sentence.
std::vector<std::string> split_sentences(std::string_view passage, std::string_view terminators = ".!?");

// "{doc_id}#{n}" with n zero-padded to five digits so that lexicographic
// order equals chunk order.
std::string make_chunk_id(std::string_view doc_id, std::size_t n);

// Greedy packing of whole sentences (joined by single spaces) up to
// max_chunk_chars code points. Chunks never cross documents. A sentence
// longer than the limit becomes its own chunk flagged oversize.
ChunkingResult chunk_corpus(const Corpus& c, const ChunkingConfig& cfg = {});

nlohmann::json chunk_to_json(const Chunk& c);
// Throws CorruptRecord (with the offending line number in the message).
Chunk chunk_from_json(const nlohmann::json& j);

// Writes `path` as JSON Lines and `path + ".manifest.json"` alongside it.
nlohmann::json persist_chunks(const std::vector<Chunk>& chunks, const std::string& path,
                              const ChunkingConfig& cfg = {});
std::vector<Chunk> load_chunks(const std::string& path);

std::string manifest_path(const std::string& chunks_path);

}  // namespace tabrag
