#include "tabrag/retrieval.hpp"

#include "tabrag/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

namespace tabrag {

VectorIndex::VectorIndex(std::size_t dimension, StrategyId strategy, std::vector<std::string> chunk_ids,
                         std::vector<float> vectors)
    : dimension_(dimension), strategy_(strategy), chunk_ids_(std::move(chunk_ids)), vectors_(std::move(vectors)) {
  if (dimension_ == 0) throw Error(ErrorCode::kInvalidArgument, "index dimension must be positive");
  if (vectors_.size() != chunk_ids_.size() * dimension_)
    throw Error(ErrorCode::kDimensionMismatch, "vector storage does not match ids x dimension");
  std::unordered_set<std::string_view> seen;
  for (const auto& id : chunk_ids_) {
    if (!seen.insert(id).second) throw Error(ErrorCode::kDuplicateId, "duplicate chunk_id " + id);
  }
}

std::optional<std::size_t> VectorIndex::find(std::string_view chunk_id) const {
  auto it = std::find(chunk_ids_.begin(), chunk_ids_.end(), chunk_id);
  if (it == chunk_ids_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - chunk_ids_.begin());
}

void VectorIndex::save(const std::string& dir) const {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIoFailure, "cannot create " + dir + ": " + ec.message());

  const auto bin_path = (fs::path(dir) / "vectors.bin").string();
  std::ofstream bin(bin_path, std::ios::binary | std::ios::trunc);
  if (!bin) throw Error(ErrorCode::kIoFailure, "cannot write " + bin_path);
  std::vector<char> bytes(vectors_.size() * 4);
  for (std::size_t i = 0; i < vectors_.size(); ++i) {
    const auto u = std::bit_cast<std::uint32_t>(vectors_[i]);
    for (int b = 0; b < 4; ++b) bytes[i * 4 + b] = static_cast<char>((u >> (8 * b)) & 0xFF);
  }
  bin.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!bin) throw Error(ErrorCode::kIoFailure, "write failed: " + bin_path);

  const nlohmann::json meta = {
      {"dimension", dimension_}, {"strategy", strategy_name(strategy_)}, {"chunk_ids", chunk_ids_}};
  const auto json_path = (fs::path(dir) / "index.json").string();
  std::ofstream js(json_path, std::ios::binary | std::ios::trunc);
  if (!js) throw Error(ErrorCode::kIoFailure, "cannot write " + json_path);
  js << meta.dump(2) << '\n';
  if (!js) throw Error(ErrorCode::kIoFailure, "write failed: " + json_path);
}

VectorIndex VectorIndex::load(const std::string& dir) {
  namespace fs = std::filesystem;
  const auto json_path = (fs::path(dir) / "index.json").string();
  const auto bin_path = (fs::path(dir) / "vectors.bin").string();
  std::ifstream js(json_path, std::ios::binary);
  if (!js) throw Error(ErrorCode::kMissingUpstreamArtifact, json_path);
  auto meta = nlohmann::json::parse(js, nullptr, false);
  if (meta.is_discarded()) throw Error(ErrorCode::kCorruptRecord, json_path + ": invalid JSON");
  std::size_t dim = 0;
  StrategyId strategy{};
  std::vector<std::string> ids;
  try {
    dim = meta.at("dimension").get<std::size_t>();
    strategy = parse_strategy(meta.at("strategy").get<std::string>());
    ids = meta.at("chunk_ids").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kCorruptRecord, json_path + ": " + e.what());
  }

  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw Error(ErrorCode::kMissingUpstreamArtifact, bin_path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
  if (bytes.size() != ids.size() * dim * 4)
    throw Error(ErrorCode::kCorruptRecord, bin_path + ": expected " + std::to_string(ids.size() * dim * 4) +
                                               " bytes, found " + std::to_string(bytes.size()));
  std::vector<float> vectors(ids.size() * dim);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    std::uint32_t u = 0;
    for (int b = 0; b < 4; ++b) u |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[i * 4 + b])) << (8 * b);
    vectors[i] = std::bit_cast<float>(u);
  }
  return VectorIndex(dim, strategy, std::move(ids), std::move(vectors));
}

VectorIndex build_index(std::span<const Chunk> chunks, EmbeddingBackend& backend, const RetrievalConfig& cfg) {
  if (chunks.empty()) throw Error(ErrorCode::kEmptyInput, "cannot index an empty chunk list");
  std::unordered_set<std::string_view> seen;
  for (const auto& c : chunks) {
    if (!seen.insert(c.chunk_id).second) throw Error(ErrorCode::kDuplicateId, "duplicate chunk_id " + c.chunk_id);
  }
  const std::size_t dim = backend.dimension();
  const std::size_t batch = std::max<std::size_t>(1, cfg.embed_batch);
  std::vector<std::string> ids;
  std::vector<float> vectors;
  ids.reserve(chunks.size());
  vectors.reserve(chunks.size() * dim);
  std::vector<std::string> texts;
  for (std::size_t start = 0; start < chunks.size(); start += batch) {
    const std::size_t end = std::min(chunks.size(), start + batch);
    texts.clear();
    for (std::size_t i = start; i < end; ++i) texts.push_back(chunks[i].text);
    auto vecs = backend.embed(texts);
    if (vecs.size() != texts.size()) throw Error(ErrorCode::kBackendRefusal, "embedder returned wrong vector count");
    for (std::size_t i = 0; i < vecs.size(); ++i) {
      if (vecs[i].size() != dim) throw Error(ErrorCode::kDimensionMismatch, "embedder returned wrong width");
      ids.push_back(chunks[start + i].chunk_id);
      vectors.insert(vectors.end(), vecs[i].begin(), vecs[i].end());
    }
  }
  return VectorIndex(dim, chunks.front().strategy, std::move(ids), std::move(vectors));
}

double inner_product(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

namespace {

struct Scored {
  std::size_t entry;
  double score;
};

std::vector<Scored> score_all(const VectorIndex& idx, std::span<const float> query) {
  if (query.size() != idx.dimension())
    throw Error(ErrorCode::kDimensionMismatch, "query width differs from index dimension");
  std::vector<Scored> all(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) all[i] = Scored{i, inner_product(idx.vector(i), query)};
  return all;
}

auto ranking_order(const VectorIndex& idx) {
  return [&idx](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    return idx.chunk_ids()[a.entry] < idx.chunk_ids()[b.entry];
  };
}

std::vector<float> embed_query(std::string_view query, EmbeddingBackend& backend) {
  const std::string q(query);
  auto v = backend.embed(std::span<const std::string>(&q, 1));
  if (v.size() != 1) throw Error(ErrorCode::kBackendRefusal, "embedder returned wrong vector count");
  return std::move(v.front());
}

}  // namespace

std::vector<RetrievalHit> search_vector(const VectorIndex& idx, std::span<const float> query, std::size_t top_k) {
  if (idx.empty()) throw Error(ErrorCode::kEmptyIndex, "search over an empty index");
  if (top_k < 1) throw Error(ErrorCode::kInvalidArgument, "top_k must be >= 1");
  auto all = score_all(idx, query);
  const std::size_t k = std::min(top_k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), ranking_order(idx));
  std::vector<RetrievalHit> hits;
  hits.reserve(k);
  for (std::size_t i = 0; i < k; ++i) hits.push_back(RetrievalHit{idx.chunk_ids()[all[i].entry], all[i].score, i + 1});
  return hits;
}

std::vector<RetrievalHit> search(const VectorIndex& idx, std::string_view query, const RetrievalConfig& cfg,
                                 EmbeddingBackend& backend) {
  if (idx.empty()) throw Error(ErrorCode::kEmptyIndex, "search over an empty index");
  const auto q = embed_query(query, backend);
  return search_vector(idx, q, cfg.top_k);
}

SimilarityReport similarity_report(const VectorIndex& idx, std::string_view query,
                                   std::span<const std::string> target_chunk_ids, const RetrievalConfig& cfg,
                                   EmbeddingBackend& backend) {
  SimilarityReport report;
  report.strategy = idx.strategy();
  report.query = std::string(query);
  report.top_k = cfg.top_k;
  if (target_chunk_ids.empty()) return report;

  std::unordered_set<std::string_view> targets;
  for (const auto& id : target_chunk_ids) {
    if (!idx.find(id)) throw Error(ErrorCode::kUnknownChunkId, id);
    targets.insert(id);
  }
  const auto q = embed_query(query, backend);
  auto all = score_all(idx, q);
  std::sort(all.begin(), all.end(), ranking_order(idx));

  std::unordered_map<std::string_view, std::size_t> rank_of;
  for (std::size_t i = 0; i < all.size(); ++i) {
    const auto& id = idx.chunk_ids()[all[i].entry];
    rank_of[id] = i + 1;
    if (targets.contains(id)) continue;
    RetrievalHit hit{id, all[i].score, i + 1};
    if (!report.best_non_target) report.best_non_target = hit;
    if (i < cfg.top_k) report.distractors.push_back(hit);
  }
  for (const auto& id : target_chunk_ids) {
    const auto rank = rank_of.at(id);
    report.targets.push_back(TargetSimilarity{id, all[rank - 1].score, rank, rank <= cfg.top_k});
  }
  return report;
}

nlohmann::json hit_to_json(const RetrievalHit& h) {
  return {{"chunk_id", h.chunk_id}, {"score", h.score}, {"rank", h.rank}};
}

nlohmann::json similarity_report_to_json(const SimilarityReport& r) {
  nlohmann::json targets = nlohmann::json::array();
  for (const auto& t : r.targets)
    targets.push_back({{"chunk_id", t.chunk_id}, {"score", t.score}, {"rank", t.rank}, {"retrieved", t.retrieved}});
  nlohmann::json distractors = nlohmann::json::array();
  for (const auto& d : r.distractors) distractors.push_back(hit_to_json(d));
  return {{"strategy", strategy_name(r.strategy)},
          {"query", r.query},
          {"top_k", r.top_k},
          {"targets", targets},
          {"best_non_target", r.best_non_target ? hit_to_json(*r.best_non_target) : nlohmann::json(nullptr)},
          {"distractors", distractors}};
}

}  // namespace tabrag
