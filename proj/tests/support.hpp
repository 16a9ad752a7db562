#pragma once

// Independent oracles and generators shared by the unit and acceptance tests.

#include "tabrag/backends.hpp"
#include "tabrag/corpus_store.hpp"
#include "tabrag/document.hpp"
#include "tabrag/retrieval.hpp"
#include "tabrag/table_to_text.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

namespace tabrag::testing {

#ifndef FIXTURE_DIR
#define FIXTURE_DIR "tests/fixtures"
#endif

inline std::filesystem::path fixture(const std::string& rel) { return std::filesystem::path(FIXTURE_DIR) / rel; }

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> n{0};
    path_ = std::filesystem::temp_directory_path() /
            ("tabrag_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(n++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// A random legal tiling of an r x c grid. Each tile gets a unique label;
// the expected grid is written straight from the tiling, the raw table is
// derived by listing each tile once at its top-left corner in reading order.
struct TilingCase {
  RawTable raw;
  std::vector<std::vector<std::string>> expected;
};

inline TilingCase random_tiling(std::mt19937_64& rng, std::size_t max_rows = 8, std::size_t max_cols = 7) {
  std::uniform_int_distribution<std::size_t> rows_d(1, max_rows);
  std::uniform_int_distribution<std::size_t> cols_d(1, max_cols);
  const std::size_t R = rows_d(rng);
  const std::size_t C = cols_d(rng);
  std::vector<std::vector<int>> owner(R, std::vector<int>(C, -1));
  struct Tile {
    std::size_t r, c, h, w;
  };
  std::vector<Tile> tiles;
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t c = 0; c < C; ++c) {
      if (owner[r][c] >= 0) continue;
      std::size_t max_w = 0;
      while (c + max_w < C && owner[r][c + max_w] < 0) ++max_w;
      std::size_t w = 1;
      std::size_t h = 1;
      if (rng() % 3 == 0) w = 1 + rng() % std::min<std::size_t>(max_w, 3);
      if (rng() % 3 == 0) h = 1 + rng() % std::min<std::size_t>(R - r, 4);
      for (std::size_t dr = 0; dr < h; ++dr)
        for (std::size_t dc = 0; dc < w; ++dc) owner[r + dr][c + dc] = static_cast<int>(tiles.size());
      tiles.push_back({r, c, h, w});
    }
  }
  TilingCase out;
  out.raw.caption = "random table";
  out.raw.rows.resize(R);
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    const auto& t = tiles[i];
    std::string label = "t" + std::to_string(i);
    if (rng() % 5 == 0) label = "  " + label + " ";
    out.raw.rows[t.r].push_back(RawCell{label, static_cast<int>(t.h), static_cast<int>(t.w)});
  }
  out.expected.assign(R, std::vector<std::string>(C));
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < C; ++c) out.expected[r][c] = "t" + std::to_string(owner[r][c]);
  // A tile's anchor row may hold no cell when every slot is covered from
  // above; such rows stay empty in the raw form, which HTML also allows.
  return out;
}

// Canvas painting written independently of normalize_table: returns the
// painted canvas or nullopt when two cells collide.
inline std::optional<std::vector<std::vector<std::string>>> paint_canvas(const RawTable& raw) {
  std::map<std::pair<std::size_t, std::size_t>, std::string> canvas;
  std::size_t width = 0;
  const std::size_t height = raw.rows.size();
  for (std::size_t r = 0; r < height; ++r) {
    std::size_t c = 0;
    for (const auto& cell : raw.rows[r]) {
      while (canvas.count({r, c}) != 0) ++c;
      std::string t = cell.text;
      t.erase(0, t.find_first_not_of(" \t\n\r"));
      t.erase(t.find_last_not_of(" \t\n\r") + 1);
      for (int dr = 0; dr < cell.row_span; ++dr) {
        const std::size_t rr = r + static_cast<std::size_t>(dr);
        if (rr >= height) break;
        for (int dc = 0; dc < cell.col_span; ++dc) {
          const std::size_t cc = c + static_cast<std::size_t>(dc);
          if (!canvas.emplace(std::make_pair(rr, cc), t).second) return std::nullopt;
          width = std::max(width, cc + 1);
        }
      }
      c += static_cast<std::size_t>(cell.col_span);
    }
  }
  std::vector<std::vector<std::string>> grid(height, std::vector<std::string>(width));
  for (const auto& [pos, t] : canvas) grid[pos.first][pos.second] = t;
  return grid;
}

// Sentence-level generator for chunker properties: every sentence ends with
// a terminator and holds none internally, so the expected split is known.
inline std::string random_sentence(std::mt19937_64& rng, std::size_t max_words) {
  static const char* words[] = {"port",  "vlan",   "device", "group", "indicator", "module", "steady", "blinking",
                                "green", "router", "table",  "entry", "M-LAG",     "VTEP",   "BSR",    "3.5",
                                "v2",    "lldp",   "über",   "naïve", "configure", "state"};
  std::uniform_int_distribution<std::size_t> n_d(1, max_words);
  std::string s;
  const std::size_t n = n_d(rng);
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) s += ' ';
    s += words[rng() % std::size(words)];
  }
  static const char terms[] = {'.', '!', '?'};
  s += terms[rng() % 3];
  return s;
}

struct SyntheticCorpus {
  Corpus corpus;
  // Sentences of each document in order.
  std::vector<std::pair<std::string, std::vector<std::string>>> doc_sentences;
};

inline SyntheticCorpus random_corpus(std::mt19937_64& rng, std::size_t max_words_per_sentence = 40) {
  SyntheticCorpus out;
  out.corpus.strategy = StrategyId::kTemplate;
  const std::size_t n_docs = 1 + rng() % 5;
  for (std::size_t d = 0; d < n_docs; ++d) {
    const std::string doc_id = "doc" + std::to_string(d);
    std::vector<std::string> sentences;
    const std::size_t n_passages = 1 + rng() % 6;
    for (std::size_t p = 0; p < n_passages; ++p) {
      std::string text;
      const std::size_t n_sent = 1 + rng() % 30;
      for (std::size_t s = 0; s < n_sent; ++s) {
        auto sentence = random_sentence(rng, max_words_per_sentence);
        if (rng() % 60 == 0) {
          // oversize sentence
          std::string big;
          while (big.size() < 3200) big += "padding word ";
          sentence = big + "end.";
        }
        if (!text.empty()) text += (rng() % 2 == 0) ? " " : "\n";
        text += sentence;
        sentences.push_back(sentence);
      }
      out.corpus.passages.push_back(
          CorpusPassage{doc_id, "b" + std::to_string(p), p % 2 == 0 ? PassageOrigin::kProse : PassageOrigin::kTable, text});
    }
    out.doc_sentences.emplace_back(doc_id, std::move(sentences));
  }
  return out;
}

inline std::size_t code_points(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char ch : s) n += (ch & 0xC0) != 0x80 ? 1 : 0;
  return n;
}

// Greedy packing oracle: walks the known sentence list of each document.
inline std::vector<std::pair<std::string, std::vector<std::string>>> greedy_pack(
    const std::vector<std::pair<std::string, std::vector<std::string>>>& docs, std::size_t limit) {
  std::vector<std::pair<std::string, std::vector<std::string>>> chunks;
  for (const auto& [doc, sentences] : docs) {
    std::vector<std::string> cur;
    std::size_t len = 0;
    for (const auto& s : sentences) {
      const std::size_t l = code_points(s);
      if (l > limit) {
        if (!cur.empty()) chunks.emplace_back(doc, cur);
        chunks.emplace_back(doc, std::vector<std::string>{s});
        cur.clear();
        len = 0;
        continue;
      }
      if (!cur.empty() && len + 1 + l > limit) {
        chunks.emplace_back(doc, cur);
        cur.clear();
        len = 0;
      }
      len += (cur.empty() ? 0 : 1) + l;
      cur.push_back(s);
    }
    if (!cur.empty()) chunks.emplace_back(doc, cur);
  }
  return chunks;
}

// Exhaustive ranking oracle: scores every vector in long double and sorts
// the whole list.
inline std::vector<std::pair<std::string, long double>> full_sort(const VectorIndex& idx,
                                                                  const std::vector<float>& q) {
  std::vector<std::pair<std::string, long double>> all;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto v = idx.vector(i);
    long double s = 0;
    for (std::size_t d = 0; d < v.size(); ++d) s += static_cast<long double>(v[d]) * q[d];
    all.emplace_back(idx.chunk_ids()[i], s);
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return all;
}

// Rebuilds a stub embedding from token counts using only the exposed bucket
// and sign functions.
inline std::vector<double> stub_vector_oracle(const StubEmbeddingBackend& b, const std::string& text) {
  std::vector<double> v(b.dimension(), 0.0);
  std::string tok;
  bool any = false;
  auto flush = [&] {
    if (tok.empty()) return;
    v[b.bucket(tok)] += b.sign(tok);
    any = true;
    tok.clear();
  };
  for (unsigned char ch : text) {
    if (std::isalnum(ch) != 0 || ch >= 0x80) {
      tok += static_cast<char>(std::tolower(ch));
    } else {
      flush();
    }
  }
  flush();
  double norm = 0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (!any || norm == 0.0) {
    std::fill(v.begin(), v.end(), 0.0);
    v[0] = 1.0;
    return v;
  }
  for (double& x : v) x /= norm;
  return v;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Trims every line and, for pipe rows, every cell; drops blank lines.
inline std::string normalize_markdown(const std::string& md) {
  std::istringstream in(md);
  std::string line;
  std::string out;
  auto trim = [](std::string s) {
    s.erase(0, s.find_first_not_of(" \t"));
    s.erase(s.find_last_not_of(" \t") + 1);
    return s;
  };
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '|') {
      std::string rebuilt = "|";
      std::string cell;
      for (std::size_t i = 1; i < line.size(); ++i) {
        if (line[i] == '|' && line[i - 1] != '\\') {
          rebuilt += " " + trim(cell) + " |";
          cell.clear();
        } else {
          cell += line[i];
        }
      }
      line = rebuilt;
    }
    if (!out.empty()) out += '\n';
    out += line;
  }
  return out;
}

// Table 2: published per-strategy means and RSD values for the human and
// GPT-4 evaluations, ten systems each.
struct PublishedGroup {
  std::string name;
  std::array<double, 4> means;  // markdown, template, tplm, llm
  double rsd;
};

inline std::vector<PublishedGroup> published_table2() {
  const char* systems[] = {"OPT-1.3B",  "OPT-2.7B", "OPT-6.7B",      "OPT-13B",        "Llama2-7B",
                           "Llama2-13B", "GPT-3.5",  "RAG-Llama2-7B", "RAG-Llama2-13B", "RAG-Llama2-70B"};
  const double human[5][10] = {
      {2.05, 2.41, 2.38, 2.51, 2.82, 3.05, 3.29, 3.72, 3.98, 3.94},
      {2.04, 2.40, 2.26, 2.47, 2.82, 3.04, 3.36, 3.44, 3.96, 3.76},
      {2.12, 2.43, 2.43, 2.58, 3.20, 3.13, 3.26, 3.27, 3.92, 3.64},
      {2.18, 2.57, 2.51, 2.62, 2.96, 3.19, 3.62, 3.71, 4.26, 4.09},
      {2.80, 3.40, 5.00, 3.00, 7.60, 3.00, 7.20, 9.00, 6.80, 9.00},
  };
  const double gpt4[5][10] = {
      {1.74, 2.16, 2.27, 2.25, 2.7, 3.06, 3.28, 3.66, 3.67, 3.74},
      {1.81, 2.22, 2.39, 2.34, 2.84, 3.08, 3.27, 3.06, 3.38, 3.37},
      {2.33, 2.46, 2.45, 2.53, 3.20, 3.19, 3.28, 2.9, 3.41, 3.30},
      {2.57, 2.69, 2.73, 2.86, 3.06, 3.30, 3.64, 3.59, 3.69, 3.54},
      {16.60, 10.60, 9.20, 12.20, 10.00, 4.80, 7.40, 15.20, 6.20, 8.80},
  };
  std::vector<PublishedGroup> out;
  for (int i = 0; i < 10; ++i)
    out.push_back({std::string("human/") + systems[i], {human[0][i], human[1][i], human[2][i], human[3][i]}, human[4][i]});
  for (int i = 0; i < 10; ++i)
    out.push_back({std::string("gpt4/") + systems[i], {gpt4[0][i], gpt4[1][i], gpt4[2][i], gpt4[3][i]}, gpt4[4][i]});
  return out;
}

}  // namespace tabrag::testing
