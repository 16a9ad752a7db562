#pragma once

#include "tabrag/backends.hpp"
#include "tabrag/corpus_store.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tabrag {

// Flat, exact inner-product index over unit vectors. Immutable after build.
class VectorIndex {
 public:
  VectorIndex(std::size_t dimension, StrategyId strategy, std::vector<std::string> chunk_ids,
              std::vector<float> vectors);

  std::size_t dimension() const { return dimension_; }
  StrategyId strategy() const { return strategy_; }
  std::size_t size() const { return chunk_ids_.size(); }
  bool empty() const { return chunk_ids_.empty(); }
  const std::vector<std::string>& chunk_ids() const { return chunk_ids_; }
  std::span<const float> vector(std::size_t i) const {
    return std::span<const float>(vectors_).subspan(i * dimension_, dimension_);
  }
  std::optional<std::size_t> find(std::string_view chunk_id) const;

  // vectors.bin (little-endian float32, row-major) + index.json.
  void save(const std::string& dir) const;
  static VectorIndex load(const std::string& dir);

 private:
  std::size_t dimension_;
  StrategyId strategy_;
  std::vector<std::string> chunk_ids_;
  std::vector<float> vectors_;
};

struct RetrievalConfig {
  std::size_t top_k = 3;
  std::size_t embed_batch = 64;
};

struct RetrievalHit {
  std::string chunk_id;
  double score = 0.0;
  std::size_t rank = 0;  // 1-based
};

VectorIndex build_index(std::span<const Chunk> chunks, EmbeddingBackend& backend, const RetrievalConfig& cfg = {});

double inner_product(std::span<const float> a, std::span<const float> b);

// Hits ordered by score descending, ties by ascending chunk_id.
std::vector<RetrievalHit> search_vector(const VectorIndex& idx, std::span<const float> query, std::size_t top_k);
std::vector<RetrievalHit> search(const VectorIndex& idx, std::string_view query, const RetrievalConfig& cfg,
                                 EmbeddingBackend& backend);

struct TargetSimilarity {
  std::string chunk_id;
  double score = 0.0;
  std::size_t rank = 0;
  bool retrieved = false;  // rank <= top_k
};

struct SimilarityReport {
  StrategyId strategy = StrategyId::kMarkdown;
  std::string query;
  std::size_t top_k = 0;
  std::vector<TargetSimilarity> targets;
  std::optional<RetrievalHit> best_non_target;
  // Highest-ranked non-target chunks that push a target out of the top_k.
  std::vector<RetrievalHit> distractors;
};

SimilarityReport similarity_report(const VectorIndex& idx, std::string_view query,
                                   std::span<const std::string> target_chunk_ids, const RetrievalConfig& cfg,
                                   EmbeddingBackend& backend);

nlohmann::json hit_to_json(const RetrievalHit& h);
nlohmann::json similarity_report_to_json(const SimilarityReport& r);

}  // namespace tabrag
