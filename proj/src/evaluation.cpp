#include "tabrag/evaluation.hpp"

#include "tabrag/error.hpp"
#include "tabrag/text.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

namespace tabrag {

Score::Score(int value) : value_(value) {
  if (value < kMin || value > kMax)
    throw Error(ErrorCode::kOutOfRange, "score " + std::to_string(value) + " outside 0..5");
}

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

EvalRecord make_eval_record(std::string question_id, std::string question, std::string golden_answer,
                            const std::map<StrategyId, std::string>& answers, std::uint64_t seed) {
  EvalRecord r;
  r.question_id = std::move(question_id);
  r.question = std::move(question);
  r.golden_answer = std::move(golden_answer);
  std::array<StrategyId, 4> order = kAllStrategies;
  for (auto s : order) {
    if (!answers.contains(s))
      throw Error(ErrorCode::kInvalidArgument, "missing answer for strategy " + std::string(strategy_name(s)));
  }
  std::uint64_t state = seed ^ text::fnv1a64(r.question_id);
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(splitmix64(state) % (i + 1));
    std::swap(order[i], order[j]);
  }
  for (std::size_t i = 0; i < 4; ++i) {
    r.label_map[i] = order[i];
    r.candidates[i] = answers.at(order[i]);
  }
  return r;
}

const std::string& default_evaluator_demonstration() {
  static const std::string demo =
      "<Question>: How long can the Information field be in a PPP data packet?\n"
      "<Correct answer> (Standard Answer): The maximum length for the Information field, including the Padding "
      "field, is the maximum receive unit (MRU). The MRU defaults to 1500 bytes and can be negotiated.\n\n"
      "A answer: The length of the information field is limited to 1500 bytes.\n\n"
      "B answer: The information field can be up to 1500 bytes in length. The maximum size of the information "
      "field is specified by RFC 1661 and is set at 1500 bytes. This allows for the transmission of large "
      "packets, but also ensures that the protocol remains efficient and reliable.\n\n"
      "C answer: The length of the information field is variable and can range from 0 to 1536 bytes.\n\n"
      "D answer: The length of the information field is not specified, but it must be at least 1 byte. The "
      "information field is variable length and contains the protocol specific information that the peer "
      "requires to establish the link. The length of the information field is not specified, but it must be at "
      "least one byte. The format of the information field is defined by the protocol being used. For example, "
      "IPX uses the information field to specify the IPX network number and the IPX node address.\n\n"
      "Score: A:5, B:5, C:4, D:2";
  return demo;
}

std::string build_evaluator_prompt(const EvalRecord& r, std::string_view demonstration) {
  std::string out =
      "[System]\n"
      "You will be provided with a question, the correct answer to the question, and four candidate answers. "
      "Your responsibility is to evaluate the consistency between the candidate answers and the correct answer. "
      "The focus should be on understanding the correlation or similarity of the content, rather than grammar "
      "or style. Please make sure you understand these guidelines before proceeding.\n\n"
      "Consult this guide whenever needed:\n"
      "0, penalty:\n"
      "The candidate answers have issues such as repetitive sentences, which can significantly impair the "
      "helpfulness of the response.\n"
      "1, Very low correlation:\n"
      "Indicates that the candidate answer is almost entirely unrelated or opposite to the correct answer.\n"
      "2, Low correlation:\n"
      "Indicates that the candidate answer significantly deviates from the correct answer.\n"
      "3, Moderate correlation:\n"
      "Suggests that the candidate answer shares some similarities with the correct answer but may lack several "
      "key points or include extra unrelated content.\n"
      "4, High correlation:\n"
      "Indicates that the candidate answer is largely consistent with the correct answer, missing only minor "
      "points or details.\n"
      "5, Very high correlation:\n"
      "Signifies that the candidate answer is almost identical to or captures the complete essence of the "
      "correct answer.\n\n"
      "You will need to categorize the four candidate answers A, B, C, and D based on their relevance.\n\n"
      "For example, A:1, B:2, C:3, D:5 means: A's correlation with the correct answer falls into 1. Very low "
      "correlation. B's correlation with the correct answer is higher than A's, at 2. Low correlation. C's "
      "correlation with the correct answer is 3. Moderate correlation. D's correlation with the correct answer "
      "is 5. Very high correlation.\n\n";
  out += demonstration;
  out += "\n\n[User]\nEvaluation Form (only score, do not output any other explanation):\n";
  out += "<Question>: " + r.question + "\n";
  out += "<Correct answer> (Standard Answer): " + r.golden_answer + "\n";
  for (std::size_t i = 0; i < 4; ++i) out += std::string(1, kLabels[i]) + " answer: " + r.candidates[i] + "\n";
  out += "Score:";
  return out;
}

LabeledScores parse_scores(std::string_view reply) {
  static const std::regex full(R"(A\s*:\s*(\d+)\s*,\s*B\s*:\s*(\d+)\s*,\s*C\s*:\s*(\d+)\s*,\s*D\s*:\s*(\d+))");
  static const std::regex pair(R"(([ABCD])\s*:\s*\d+)");
  const std::string s(reply);
  std::smatch m;
  if (!std::regex_search(s, m, full)) {
    if (std::regex_search(s, pair)) throw Error(ErrorCode::kMissingLabel, "reply lacks one of the labels A-D");
    throw Error(ErrorCode::kMalformedReply, "no \"A:x, B:x, C:x, D:x\" pattern in reply");
  }
  LabeledScores out;
  for (std::size_t i = 0; i < 4; ++i) {
    const std::string digits = m[i + 1].str();
    if (digits.size() > 3) throw Error(ErrorCode::kOutOfRange, "score " + digits + " outside 0..5");
    out[i] = Score(std::stoi(digits));
  }
  return out;
}

std::string render_scores(const LabeledScores& s) {
  std::string out;
  for (std::size_t i = 0; i < 4; ++i) {
    if (i > 0) out += ", ";
    out += std::string(1, kLabels[i]) + ":" + std::to_string(s[i].value());
  }
  return out;
}

std::string stub_judge_reply(std::string_view prompt) {
  const auto user = prompt.rfind("[User]");
  if (user == std::string_view::npos) return "unscorable";
  const std::string_view form = prompt.substr(user);
  const std::string_view golden_marker = "<Correct answer> (Standard Answer): ";
  const std::array<std::string_view, 5> markers = {"\nA answer: ", "\nB answer: ", "\nC answer: ", "\nD answer: ",
                                                   "\nScore:"};
  auto gpos = form.find(golden_marker);
  if (gpos == std::string_view::npos) return "unscorable";
  gpos += golden_marker.size();
  std::array<std::size_t, 5> at{};
  std::size_t from = gpos;
  for (std::size_t i = 0; i < markers.size(); ++i) {
    at[i] = form.find(markers[i], from);
    if (at[i] == std::string_view::npos) return "unscorable";
    from = at[i] + markers[i].size();
  }
  const auto golden_tokens = text::word_tokens(form.substr(gpos, at[0] - gpos));
  const std::set<std::string> golden(golden_tokens.begin(), golden_tokens.end());
  LabeledScores scores;
  for (std::size_t i = 0; i < 4; ++i) {
    const std::size_t b = at[i] + markers[i].size();
    const auto cand_tokens = text::word_tokens(form.substr(b, at[i + 1] - b));
    const std::set<std::string> cand(cand_tokens.begin(), cand_tokens.end());
    std::size_t shared = 0;
    for (const auto& t : golden) shared += cand.contains(t) ? 1 : 0;
    const double recall = golden.empty() ? 0.0 : static_cast<double>(shared) / static_cast<double>(golden.size());
    scores[i] = Score(static_cast<int>(std::lround(recall * Score::kMax)));
  }
  return "Score: " + render_scores(scores);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.emplace_back(text::trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::vector<ScoreRow> read_score_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kMissingUpstreamArtifact, path);
  std::string line;
  std::size_t line_no = 0;
  std::vector<ScoreRow> rows;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    const auto where = path + ":" + std::to_string(line_no);
    if (!header_seen) {
      const std::vector<std::string> expected = {"question_id", "evaluator_id", "A", "B", "C", "D"};
      if (fields != expected) throw Error(ErrorCode::kSchemaViolation, where + ": expected header question_id,evaluator_id,A,B,C,D");
      header_seen = true;
      continue;
    }
    if (fields.size() != 6) throw Error(ErrorCode::kSchemaViolation, where + ": expected 6 fields");
    ScoreRow row;
    row.question_id = fields[0];
    row.evaluator_id = fields[1];
    for (std::size_t i = 0; i < 4; ++i) {
      const auto& f = fields[2 + i];
      if (f.empty() || f.size() > 3 || !std::all_of(f.begin(), f.end(), [](unsigned char c) { return std::isdigit(c); }))
        throw Error(ErrorCode::kSchemaViolation, where + ": score \"" + f + "\" is not an integer");
      try {
        row.scores[i] = Score(std::stoi(f));
      } catch (const Error& e) {
        throw Error(ErrorCode::kOutOfRange, where + ": " + e.what());
      }
    }
    rows.push_back(std::move(row));
  }
  if (!header_seen) throw Error(ErrorCode::kSchemaViolation, path + ": missing header");
  return rows;
}

void write_score_csv(std::span<const ScoreRow> rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot write " + path);
  out << "question_id,evaluator_id,A,B,C,D\n";
  for (const auto& r : rows) {
    out << r.question_id << ',' << r.evaluator_id;
    for (const auto& s : r.scores) out << ',' << s.value();
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::kIoFailure, "write failed: " + path);
}

LabelMap label_map_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kSchemaViolation, "label map must be an object");
  LabelMap m;
  for (const auto& [qid, labels] : j.items()) {
    if (!labels.is_object()) throw Error(ErrorCode::kSchemaViolation, qid + ": labels must be an object");
    std::array<StrategyId, 4> arr{};
    std::set<StrategyId> used;
    for (std::size_t i = 0; i < 4; ++i) {
      const std::string key(1, kLabels[i]);
      if (!labels.contains(key) || !labels[key].is_string())
        throw Error(ErrorCode::kSchemaViolation, qid + ": missing label " + key);
      arr[i] = parse_strategy(labels[key].get<std::string>());
      if (!used.insert(arr[i]).second) throw Error(ErrorCode::kSchemaViolation, qid + ": strategy assigned twice");
    }
    m[qid] = arr;
  }
  return m;
}

nlohmann::json label_map_to_json(const LabelMap& m) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [qid, arr] : m) {
    nlohmann::json labels;
    for (std::size_t i = 0; i < 4; ++i) labels[std::string(1, kLabels[i])] = strategy_name(arr[i]);
    j[qid] = labels;
  }
  return j;
}

std::map<std::string, ScoreSheet> unblind(std::span<const ScoreRow> rows, const LabelMap& labels) {
  std::map<std::string, ScoreSheet> sheets;
  for (const auto& row : rows) {
    auto it = labels.find(row.question_id);
    if (it == labels.end()) throw Error(ErrorCode::kSchemaViolation, "no label map entry for " + row.question_id);
    auto& sheet = sheets[row.evaluator_id];
    sheet.evaluator_id = row.evaluator_id;
    auto [slot, inserted] = sheet.scores.try_emplace(row.question_id);
    if (!inserted)
      throw Error(ErrorCode::kSchemaViolation, "duplicate score row " + row.question_id + "/" + row.evaluator_id);
    for (std::size_t i = 0; i < 4; ++i) slot->second[it->second[i]] = row.scores[i];
  }
  return sheets;
}

namespace {

std::set<StrategyId> sheet_strategies(const ScoreSheet& sheet) {
  if (sheet.scores.empty()) throw Error(ErrorCode::kIncompleteSheet, "sheet has no questions");
  std::set<StrategyId> all;
  for (const auto& [qid, per] : sheet.scores) {
    for (const auto& [s, score] : per) all.insert(s);
  }
  for (const auto& [qid, per] : sheet.scores) {
    if (per.size() != all.size()) throw Error(ErrorCode::kIncompleteSheet, "question " + qid + " is missing a strategy");
  }
  return all;
}

std::vector<Score> column(const ScoreSheet& sheet, StrategyId s) {
  std::vector<Score> out;
  out.reserve(sheet.scores.size());
  for (const auto& [qid, per] : sheet.scores) out.push_back(per.at(s));
  return out;
}

}  // namespace

std::map<StrategyId, double> mean_scores(const ScoreSheet& sheet) {
  std::map<StrategyId, double> means;
  for (auto s : sheet_strategies(sheet)) {
    long total = 0;
    for (const auto& [qid, per] : sheet.scores) total += per.at(s).value();
    means[s] = static_cast<double>(total) / static_cast<double>(sheet.scores.size());
  }
  return means;
}

double rsd(std::span<const double> means) {
  if (means.size() < 2) throw Error(ErrorCode::kTooFewStrategies, "RSD needs at least two means");
  const auto [lo, hi] = std::minmax_element(means.begin(), means.end());
  const double pct = 100.0 * (*hi - *lo) / static_cast<double>(Score::kMax);
  return std::round(pct * 100.0) / 100.0;
}

double rsd(const std::map<StrategyId, double>& means) {
  std::vector<double> v;
  for (const auto& [s, m] : means) v.push_back(m);
  return rsd(v);
}

WinRate win_rate(std::span<const Score> a, std::span<const Score> b) {
  if (a.size() != b.size())
    throw Error(ErrorCode::kLengthMismatch, std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  if (a.empty()) throw Error(ErrorCode::kEmptyInput, "win rate over zero questions");
  std::size_t a_wins = 0;
  std::size_t b_wins = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > b[i]) ++a_wins;
    else if (b[i] > a[i]) ++b_wins;
  }
  const double n = static_cast<double>(a.size());
  return WinRate{100.0 * static_cast<double>(a_wins) / n, 100.0 * static_cast<double>(b_wins) / n};
}

std::map<std::pair<StrategyId, StrategyId>, WinRate> win_rate_matrix(const ScoreSheet& sheet) {
  const auto strategies = sheet_strategies(sheet);
  std::map<std::pair<StrategyId, StrategyId>, WinRate> out;
  for (auto x : strategies) {
    for (auto y : strategies) {
      if (x == y) continue;
      const auto cx = column(sheet, x);
      const auto cy = column(sheet, y);
      out[{x, y}] = win_rate(cx, cy);
    }
  }
  return out;
}

std::map<StrategyId, Histogram> score_distribution(const ScoreSheet& sheet) {
  std::map<StrategyId, Histogram> out;
  for (auto s : sheet_strategies(sheet)) {
    Histogram h{};
    for (const auto& [qid, per] : sheet.scores) ++h[static_cast<std::size_t>(per.at(s).value())];
    out[s] = h;
  }
  return out;
}

Reliability check_reliability(std::span<const LabeledScores> evaluations) {
  if (evaluations.size() != 3)
    throw Error(ErrorCode::kWrongEvaluatorCount, "expected 3 evaluations, got " + std::to_string(evaluations.size()));
  auto cmp = [](Score x, Score y) { return (x > y) - (x < y); };
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = i + 1; j < 4; ++j) {
      const int ref = cmp(evaluations[0][i], evaluations[0][j]);
      for (std::size_t e = 1; e < evaluations.size(); ++e) {
        if (cmp(evaluations[e][i], evaluations[e][j]) != ref) return Reliability::kNeedsReassessment;
      }
    }
  }
  for (std::size_t i = 0; i < 4; ++i) {
    int lo = Score::kMax;
    int hi = Score::kMin;
    for (const auto& ev : evaluations) {
      lo = std::min(lo, ev[i].value());
      hi = std::max(hi, ev[i].value());
    }
    if (hi - lo > 1) return Reliability::kNeedsReassessment;
  }
  return Reliability::kReliable;
}

ReliabilitySummary check_sheets(std::span<const ScoreSheet> sheets) {
  if (sheets.size() != 3)
    throw Error(ErrorCode::kWrongEvaluatorCount, "expected 3 sheets, got " + std::to_string(sheets.size()));
  ReliabilitySummary out;
  for (const auto& [qid, first] : sheets[0].scores) {
    if (first.size() != 4) throw Error(ErrorCode::kIncompleteSheet, qid + ": expected four candidates");
    std::array<LabeledScores, 3> evals;
    for (std::size_t e = 0; e < 3; ++e) {
      auto it = sheets[e].scores.find(qid);
      if (it == sheets[e].scores.end() || it->second.size() != 4)
        throw Error(ErrorCode::kIncompleteSheet, qid + " missing from evaluator " + sheets[e].evaluator_id);
      std::size_t i = 0;
      for (auto s : kAllStrategies) {
        auto sc = it->second.find(s);
        if (sc == it->second.end()) throw Error(ErrorCode::kIncompleteSheet, qid + ": strategy missing");
        evals[e][i++] = sc->second;
      }
    }
    (check_reliability(evals) == Reliability::kReliable ? out.reliable : out.needs_reassessment).push_back(qid);
  }
  return out;
}

std::size_t count_occurrences(std::string_view haystack, std::string_view phrase) {
  const auto needle = text::to_lower(text::trim(phrase));
  if (needle.empty()) return 0;
  const auto hay = text::to_lower(haystack);
  std::size_t count = 0;
  for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) {
    const bool left_ok = pos == 0 || !text::is_word_byte(static_cast<unsigned char>(hay[pos - 1]));
    const std::size_t end = pos + needle.size();
    const bool right_ok = end == hay.size() || !text::is_word_byte(static_cast<unsigned char>(hay[end]));
    if (left_ok && right_ok) ++count;
  }
  return count;
}

FrequencyCounts term_verb_frequency(const Corpus& corpus, std::span<const std::string> terms,
                                    std::span<const std::string> verbs) {
  if (terms.empty() || verbs.empty()) throw Error(ErrorCode::kEmptyInput, "term and verb lexicons must be non-empty");
  FrequencyCounts out;
  for (const auto& p : corpus.passages) {
    for (const auto& t : terms) out.term_count += count_occurrences(p.text, t);
    for (const auto& v : verbs) out.verb_count += count_occurrences(p.text, v);
  }
  return out;
}

std::map<StrategyId, double> avg_generated_length(std::span<const GeneratedPassage> passages) {
  std::map<StrategyId, std::pair<std::size_t, std::size_t>> acc;
  for (const auto& p : passages) {
    auto& [sum, n] = acc[p.strategy];
    sum += p.char_len;
    ++n;
  }
  std::map<StrategyId, double> out;
  for (const auto& [s, v] : acc) out[s] = static_cast<double>(v.first) / static_cast<double>(v.second);
  return out;
}

std::string_view question_word_name(QuestionWord w) {
  switch (w) {
    case QuestionWord::kWhat: return "What";
    case QuestionWord::kHow: return "How";
    case QuestionWord::kWhy: return "Why";
    case QuestionWord::kWhich: return "Which";
    case QuestionWord::kCan: return "Can";
    case QuestionWord::kIs: return "Is";
    case QuestionWord::kOther: return "Other";
  }
  return "Other";
}

const TagLexicon& default_tag_lexicon() {
  static const TagLexicon lexicon = {
      {"Parameter", {"parameter", "parameters", "value", "range", "default value"}},
      {"Configuration", {"configure", "configuring", "configuration", "enable", "set up"}},
      {"Command", {"command", "commands", "run", "display"}},
  };
  return lexicon;
}

QuestionClass classify_question(std::string_view question, const TagLexicon& lexicon) {
  QuestionClass out;
  const auto tokens = text::word_tokens(question);
  if (!tokens.empty()) {
    static const std::array<std::pair<std::string_view, QuestionWord>, 6> words = {{{"what", QuestionWord::kWhat},
                                                                                    {"how", QuestionWord::kHow},
                                                                                    {"why", QuestionWord::kWhy},
                                                                                    {"which", QuestionWord::kWhich},
                                                                                    {"can", QuestionWord::kCan},
                                                                                    {"is", QuestionWord::kIs}}};
    for (const auto& [w, cls] : words) {
      if (tokens.front() == w) out.first_word = cls;
    }
  }
  for (const auto& rule : lexicon) {
    const bool hit = std::any_of(rule.keywords.begin(), rule.keywords.end(),
                                 [&](const std::string& k) { return count_occurrences(question, k) > 0; });
    if (hit) {
      out.tag = rule.tag;
      break;
    }
  }
  return out;
}

SuggestedLexicons suggest_lexicons(std::span<const std::string> texts) {
  static const std::array<std::string_view, 20> kVerbs = {
      "add",     "allow",   "configure", "create",  "delete", "disable", "display", "enable",   "indicate", "modify",
      "provide", "receive", "require",   "run",     "send",   "set",     "specify", "support",  "use",      "view"};
  std::set<std::string> terms;
  std::set<std::string> verbs;
  for (const auto& t : texts) {
    for (auto word : text::whitespace_words(t)) {
      while (!word.empty() && !text::is_word_byte(static_cast<unsigned char>(word.front()))) word.remove_prefix(1);
      while (!word.empty() && !text::is_word_byte(static_cast<unsigned char>(word.back()))) word.remove_suffix(1);
      const auto upper = std::count_if(word.begin(), word.end(), [](unsigned char c) { return std::isupper(c); });
      if (upper >= 2) terms.emplace(word);
    }
    for (auto v : kVerbs) {
      if (count_occurrences(t, v) > 0) verbs.emplace(v);
    }
  }
  return {std::vector<std::string>(terms.begin(), terms.end()), std::vector<std::string>(verbs.begin(), verbs.end())};
}

std::vector<std::string> load_lexicon(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kMissingUpstreamArtifact, path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = text::trim(line);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

}  // namespace tabrag
