#pragma once

#include "tabrag/table_to_text.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tabrag {

// Discrete answer-quality score in [0, 5].
class Score {
 public:
  static constexpr int kMin = 0;
  static constexpr int kMax = 5;

  Score() = default;
  // Throws OutOfRange.
  explicit Score(int value);

  int value() const { return value_; }
  auto operator<=>(const Score&) const = default;

 private:
  int value_ = 0;
};

inline constexpr std::array<char, 4> kLabels = {'A', 'B', 'C', 'D'};
using LabeledScores = std::array<Score, 4>;  // indexed A..D

struct EvalRecord {
  std::string question_id;
  std::string question;
  std::string golden_answer;
  std::array<std::string, 4> candidates;   // A..D
  std::array<StrategyId, 4> label_map{};   // sealed until aggregation
};

// Assigns the four strategies' answers to labels A-D with a permutation
// derived from (seed, question_id), so reruns reproduce the blinding.
EvalRecord make_eval_record(std::string question_id, std::string question, std::string golden_answer,
                            const std::map<StrategyId, std::string>& answers, std::uint64_t seed);

const std::string& default_evaluator_demonstration();
std::string build_evaluator_prompt(const EvalRecord& r,
                                   std::string_view demonstration = default_evaluator_demonstration());

// First well-formed "A:x, B:x, C:x, D:x" in the reply (whitespace tolerant).
// Throws MalformedReply, MissingLabel, or OutOfRange.
LabeledScores parse_scores(std::string_view reply);
std::string render_scores(const LabeledScores& s);

// Deterministic stand-in evaluator: scores each candidate by the share of
// the golden answer's word tokens it contains, scaled to 0..5. Reads the
// evaluation form of a build_evaluator_prompt() prompt.
std::string stub_judge_reply(std::string_view prompt);

// One evaluator's unblinded scores: question_id -> strategy -> score.
struct ScoreSheet {
  std::string evaluator_id;
  std::map<std::string, std::map<StrategyId, Score>> scores;
};

struct ScoreRow {
  std::string question_id;
  std::string evaluator_id;
  LabeledScores scores;
};

using LabelMap = std::map<std::string, std::array<StrategyId, 4>>;

// CSV header: question_id,evaluator_id,A,B,C,D
std::vector<ScoreRow> read_score_csv(const std::string& path);
void write_score_csv(std::span<const ScoreRow> rows, const std::string& path);
LabelMap label_map_from_json(const nlohmann::json& j);
nlohmann::json label_map_to_json(const LabelMap& m);

// Groups rows by evaluator and maps labels back to strategies.
std::map<std::string, ScoreSheet> unblind(std::span<const ScoreRow> rows, const LabelMap& labels);

// Throws IncompleteSheet when the sheet is empty or a question lacks a
// strategy that other questions have.
std::map<StrategyId, double> mean_scores(const ScoreSheet& sheet);

// 100 * (max - min) / 5, rounded to two decimals. Throws TooFewStrategies.
double rsd(std::span<const double> means);
double rsd(const std::map<StrategyId, double>& means);

struct WinRate {
  double a_wins = 0.0;  // percent of questions where a > b
  double b_wins = 0.0;
};
// Throws LengthMismatch for unequal lengths and EmptyInput for empty lists.
WinRate win_rate(std::span<const Score> a, std::span<const Score> b);
// Pairwise matrix over the sheet's strategies: entry (x, y) = x's win share vs y.
std::map<std::pair<StrategyId, StrategyId>, WinRate> win_rate_matrix(const ScoreSheet& sheet);

using Histogram = std::array<std::size_t, 6>;
std::map<StrategyId, Histogram> score_distribution(const ScoreSheet& sheet);

enum class Reliability { kReliable, kNeedsReassessment };

// Three evaluators' scores for one question's four candidates. Reliable iff
// every evaluator induces the same weak order and each candidate's scores
// span at most one point. Throws WrongEvaluatorCount.
Reliability check_reliability(std::span<const LabeledScores> evaluations);

struct ReliabilitySummary {
  std::vector<std::string> reliable;
  std::vector<std::string> needs_reassessment;
};
// Applies check_reliability per question across three evaluators' sheets.
ReliabilitySummary check_sheets(std::span<const ScoreSheet> sheets);

// Case-insensitive occurrences of `phrase` delimited by non-word bytes.
std::size_t count_occurrences(std::string_view text, std::string_view phrase);

struct FrequencyCounts {
  std::size_t term_count = 0;
  std::size_t verb_count = 0;
};
// Throws EmptyInput for an empty lexicon.
FrequencyCounts term_verb_frequency(const Corpus& corpus, std::span<const std::string> terms,
                                    std::span<const std::string> verbs);

std::map<StrategyId, double> avg_generated_length(std::span<const GeneratedPassage> passages);

enum class QuestionWord { kWhat, kHow, kWhy, kWhich, kCan, kIs, kOther };
std::string_view question_word_name(QuestionWord w);

struct TagRule {
  std::string tag;
  std::vector<std::string> keywords;
};
using TagLexicon = std::vector<TagRule>;
const TagLexicon& default_tag_lexicon();

struct QuestionClass {
  QuestionWord first_word = QuestionWord::kOther;
  std::string tag = "Other";
};
// Tag = first rule (in lexicon order) with a keyword hit, else "Other".
QuestionClass classify_question(std::string_view question, const TagLexicon& lexicon = default_tag_lexicon());

// Heuristic lexicon helper: candidate terms are tokens carrying two or more
// uppercase letters (e.g. "VTEP", "M-LAG"); verbs come from a small closed
// list of domain verbs.
struct SuggestedLexicons {
  std::vector<std::string> terms;
  std::vector<std::string> verbs;
};
SuggestedLexicons suggest_lexicons(std::span<const std::string> texts);

// Newline-delimited; blank lines and surrounding whitespace ignored.
std::vector<std::string> load_lexicon(const std::string& path);

}  // namespace tabrag
