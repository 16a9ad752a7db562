#include "doctest.h"

#include "support.hpp"
#include "tabrag/error.hpp"
#include "tabrag/evaluation.hpp"

#include <cstdio>
#include <set>

using namespace tabrag;
using namespace tabrag::testing;

namespace {

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return static_cast<ErrorCode>(0);
}

LabeledScores ls(int a, int b, int c, int d) { return {Score(a), Score(b), Score(c), Score(d)}; }

std::vector<Score> scores(std::initializer_list<int> v) {
  std::vector<Score> out;
  for (int x : v) out.emplace_back(x);
  return out;
}

std::string two_decimals(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

ScoreSheet sheet_from(const std::vector<std::array<int, 4>>& rows, const std::string& id = "e1") {
  ScoreSheet s{id, {}};
  for (std::size_t q = 0; q < rows.size(); ++q) {
    auto& m = s.scores["q" + std::to_string(q)];
    for (std::size_t i = 0; i < 4; ++i) m[kAllStrategies[i]] = Score(rows[q][i]);
  }
  return s;
}

}  // namespace

TEST_CASE("score domain") {
  CHECK_NOTHROW(Score(0));
  CHECK_NOTHROW(Score(5));
  CHECK(code_of([] { Score(6); }) == ErrorCode::kOutOfRange);
  CHECK(code_of([] { Score(-1); }) == ErrorCode::kOutOfRange);
}

TEST_CASE("published RSD values are reproduced from the published means") {
  for (const auto& g : published_table2()) {
    CAPTURE(g.name);
    const double r = rsd(std::span<const double>(g.means));
    CHECK(two_decimals(r) == two_decimals(g.rsd));
  }
  const std::map<StrategyId, double> equal{{StrategyId::kMarkdown, 3.0}, {StrategyId::kTemplate, 3.0}};
  CHECK(rsd(equal) == 0.0);
  const std::vector<double> one{2.0};
  CHECK(code_of([&] { rsd(std::span<const double>(one)); }) == ErrorCode::kTooFewStrategies);
}

TEST_CASE("parse and render round trip over every score combination") {
  for (int a = 0; a <= 5; ++a)
    for (int b = 0; b <= 5; ++b)
      for (int c = 0; c <= 5; ++c)
        for (int d = 0; d <= 5; ++d) {
          const auto s = ls(a, b, c, d);
          CHECK(parse_scores("Score: " + render_scores(s)) == s);
        }
}

TEST_CASE("reply parsing") {
  CHECK(parse_scores(default_evaluator_demonstration()) == ls(5, 5, 4, 2));
  CHECK(parse_scores("Score: A:5, B:5, C:4, D:2") == ls(5, 5, 4, 2));
  CHECK(parse_scores("A:1,B:2,C:3,D:5") == ls(1, 2, 3, 5));
  CHECK(parse_scores("Score:\n A : 1 ,  B:2, C :3,D: 5 trailing") == ls(1, 2, 3, 5));
  CHECK(code_of([] { parse_scores("A:7, B:1, C:1, D:1"); }) == ErrorCode::kOutOfRange);
  CHECK(code_of([] { parse_scores("A:1, B:1, C:1"); }) == ErrorCode::kMissingLabel);
  CHECK(code_of([] { parse_scores("I cannot score these."); }) == ErrorCode::kMalformedReply);
}

TEST_CASE("evaluator prompt") {
  const std::map<StrategyId, std::string> answers{{StrategyId::kMarkdown, "answer md"},
                                                  {StrategyId::kTemplate, "answer tpl"},
                                                  {StrategyId::kTplm, "answer tplm"},
                                                  {StrategyId::kLlm, "answer llm"}};
  const auto r = make_eval_record("q1", "Question?", "Golden.", answers, 42);
  const auto p = build_evaluator_prompt(r);
  CHECK(p.find("5, Very high correlation:") != std::string::npos);
  CHECK(p.find("Score: A:5, B:5, C:4, D:2") != std::string::npos);
  for (const auto& [s, a] : answers) {
    std::size_t n = 0;
    for (auto pos = p.find(a + "\n"); pos != std::string::npos; pos = p.find(a + "\n", pos + 1)) ++n;
    CHECK(n == 1);
  }
  CHECK(p.ends_with("Score:"));
}

TEST_CASE("blinding is a seeded permutation") {
  const std::map<StrategyId, std::string> answers{{StrategyId::kMarkdown, "m"},
                                                  {StrategyId::kTemplate, "t"},
                                                  {StrategyId::kTplm, "p"},
                                                  {StrategyId::kLlm, "l"}};
  const auto a = make_eval_record("q1", "Q", "G", answers, 1);
  const auto b = make_eval_record("q1", "Q", "G", answers, 1);
  CHECK(a.label_map == b.label_map);
  std::set<StrategyId> seen(a.label_map.begin(), a.label_map.end());
  CHECK(seen.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(a.candidates[i] == answers.at(a.label_map[i]));
  std::set<std::array<StrategyId, 4>> perms;
  for (int q = 0; q < 50; ++q) perms.insert(make_eval_record("q" + std::to_string(q), "Q", "G", answers, 1).label_map);
  CHECK(perms.size() > 5);
}

TEST_CASE("stub judge scores by golden token recall") {
  const std::map<StrategyId, std::string> answers{{StrategyId::kMarkdown, "the entries cannot be modified"},
                                                  {StrategyId::kTemplate, "entries modified"},
                                                  {StrategyId::kTplm, "nothing relevant"},
                                                  {StrategyId::kLlm, "I don't know"}};
  const auto r = make_eval_record("q", "Q?", "The entries cannot be modified", answers, 3);
  const auto parsed = parse_scores(stub_judge_reply(build_evaluator_prompt(r)));
  for (std::size_t i = 0; i < 4; ++i) {
    const auto s = r.label_map[i];
    const int expected = s == StrategyId::kMarkdown ? 5 : s == StrategyId::kTemplate ? 2 : 0;
    CHECK(parsed[i].value() == expected);
  }
}

TEST_CASE("means") {
  ScoreSheet s{"e", {}};
  s.scores["q1"][StrategyId::kMarkdown] = Score(3);
  s.scores["q2"][StrategyId::kMarkdown] = Score(4);
  CHECK(mean_scores(s).at(StrategyId::kMarkdown) == doctest::Approx(3.5));
  CHECK(code_of([] { mean_scores(ScoreSheet{}); }) == ErrorCode::kIncompleteSheet);
  s.scores["q2"][StrategyId::kLlm] = Score(4);
  CHECK(code_of([&] { mean_scores(s); }) == ErrorCode::kIncompleteSheet);

  const auto single = mean_scores(sheet_from({{1, 2, 3, 4}}));
  CHECK(single.at(StrategyId::kTplm) == 3.0);

  std::mt19937_64 rng(53);
  std::vector<std::array<int, 4>> rows(500);
  std::array<double, 4> sums{};
  for (auto& r : rows)
    for (std::size_t i = 0; i < 4; ++i) {
      r[i] = static_cast<int>(rng() % 6);
      sums[i] += r[i];
    }
  const auto big = sheet_from(rows);
  const auto means = mean_scores(big);
  const auto hist = score_distribution(big);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(means.at(kAllStrategies[i]) == doctest::Approx(sums[i] / 500.0));
    double weighted = 0;
    std::size_t n = 0;
    for (std::size_t v = 0; v < 6; ++v) {
      weighted += static_cast<double>(v * hist.at(kAllStrategies[i])[v]);
      n += hist.at(kAllStrategies[i])[v];
    }
    CHECK(n == 500);
    CHECK(weighted / 500.0 == doctest::Approx(means.at(kAllStrategies[i])));
  }
}

TEST_CASE("histogram") {
  const auto s = sheet_from({{5, 0, 0, 0}, {5, 0, 0, 0}, {2, 0, 0, 0}});
  const auto h = score_distribution(s).at(StrategyId::kMarkdown);
  CHECK(h == Histogram{0, 0, 1, 0, 0, 2});
  CHECK(code_of([] { score_distribution(ScoreSheet{}); }) == ErrorCode::kIncompleteSheet);
}

TEST_CASE("win rates") {
  const auto a = scores({5, 2, 4});
  const auto b = scores({3, 3, 1});
  const auto w = win_rate(a, b);
  CHECK(two_decimals(w.a_wins) == "66.67");
  CHECK(two_decimals(w.b_wins) == "33.33");
  const auto tied = win_rate(a, scores({3, 3, 4}));
  CHECK(two_decimals(tied.a_wins) == "33.33");
  CHECK(two_decimals(tied.b_wins) == "33.33");
  const auto same = win_rate(a, a);
  CHECK(same.a_wins == 0.0);
  CHECK(same.b_wins == 0.0);
  CHECK(code_of([&] { win_rate(a, scores({1})); }) == ErrorCode::kLengthMismatch);
  CHECK(code_of([] { win_rate(std::vector<Score>{}, std::vector<Score>{}); }) == ErrorCode::kEmptyInput);

  std::mt19937_64 rng(59);
  std::vector<Score> x, y;
  for (int i = 0; i < 200; ++i) {
    x.emplace_back(static_cast<int>(rng() % 6));
    y.emplace_back(static_cast<int>(rng() % 6));
  }
  int xw = 0, yw = 0;
  for (int i = 0; i < 200; ++i) {
    if (x[i].value() > y[i].value()) ++xw;
    if (y[i].value() > x[i].value()) ++yw;
  }
  const auto r = win_rate(x, y);
  CHECK(r.a_wins == doctest::Approx(100.0 * xw / 200));
  CHECK(r.b_wins == doctest::Approx(100.0 * yw / 200));

  const auto m = win_rate_matrix(sheet_from({{5, 3, 1, 0}, {2, 3, 1, 0}}));
  CHECK(m.at({StrategyId::kMarkdown, StrategyId::kTemplate}).a_wins == 50.0);
  CHECK(m.at({StrategyId::kMarkdown, StrategyId::kTemplate}).b_wins == 50.0);
  CHECK(m.at({StrategyId::kTemplate, StrategyId::kTplm}).a_wins == 100.0);
}

TEST_CASE("reliability rule") {
  const std::array<LabeledScores, 3> ok{ls(4, 3, 2, 1), ls(4, 3, 2, 1), ls(5, 4, 3, 2)};
  CHECK(check_reliability(ok) == Reliability::kReliable);
  const std::array<LabeledScores, 3> spread{ls(2, 1, 1, 0), ls(4, 1, 1, 0), ls(3, 1, 1, 0)};
  CHECK(check_reliability(spread) == Reliability::kNeedsReassessment);
  const std::array<LabeledScores, 3> flip{ls(4, 3, 2, 1), ls(3, 4, 2, 1), ls(4, 3, 2, 1)};
  CHECK(check_reliability(flip) == Reliability::kNeedsReassessment);
  const std::array<LabeledScores, 2> two{ls(1, 1, 1, 1), ls(1, 1, 1, 1)};
  CHECK(code_of([&] { check_reliability(two); }) == ErrorCode::kWrongEvaluatorCount);
}

TEST_CASE("reliability over sheets") {
  std::vector<ScoreSheet> sheets{sheet_from({{4, 3, 2, 1}, {4, 3, 2, 1}}, "a"), sheet_from({{4, 3, 2, 1}, {3, 4, 2, 1}}, "b"),
                                 sheet_from({{5, 4, 3, 2}, {4, 3, 2, 1}}, "c")};
  const auto r = check_sheets(sheets);
  CHECK(r.reliable == std::vector<std::string>{"q0"});
  CHECK(r.needs_reassessment == std::vector<std::string>{"q1"});
}

TEST_CASE("score sheet CSV, labels and unblinding") {
  TempDir dir("csv");
  const LabelMap labels{{"q1", {StrategyId::kLlm, StrategyId::kMarkdown, StrategyId::kTplm, StrategyId::kTemplate}}};
  const std::vector<ScoreRow> rows{{"q1", "e1", ls(5, 1, 2, 3)}, {"q1", "e2", ls(4, 2, 2, 3)}};
  const auto path = (dir.path() / "s.csv").string();
  write_score_csv(rows, path);
  CHECK(slurp(path).starts_with("question_id,evaluator_id,A,B,C,D\n"));
  const auto back = read_score_csv(path);
  REQUIRE(back.size() == 2);
  CHECK(back[1].scores == rows[1].scores);
  const auto sheets = unblind(back, label_map_from_json(label_map_to_json(labels)));
  REQUIRE(sheets.size() == 2);
  const auto& e1 = sheets.at("e1").scores.at("q1");
  CHECK(e1.at(StrategyId::kLlm).value() == 5);
  CHECK(e1.at(StrategyId::kMarkdown).value() == 1);
  CHECK(e1.at(StrategyId::kTemplate).value() == 3);
}

TEST_CASE("term and verb frequency") {
  CHECK(count_occurrences("VTEP address and VTEP peer", "VTEP") == 2);
  CHECK(count_occurrences("PIPE and pipeline", "IP") == 0);
  CHECK(count_occurrences("Configure M-LAG; m-lag again", "M-LAG") == 2);

  std::mt19937_64 rng(61);
  Corpus c;
  std::size_t planted_terms = 0, planted_verbs = 0;
  for (int p = 0; p < 20; ++p) {
    std::string text = "filler words here";
    const std::size_t t = rng() % 4, v = rng() % 3;
    for (std::size_t i = 0; i < t; ++i) text += " the VTEP peer";
    for (std::size_t i = 0; i < v; ++i) text += " then configure it";
    planted_terms += t;
    planted_verbs += v;
    c.passages.push_back({"d", "b" + std::to_string(p), PassageOrigin::kProse, text + "."});
  }
  const std::vector<std::string> terms{"VTEP"}, verbs{"configure"};
  const auto f = term_verb_frequency(c, terms, verbs);
  CHECK(f.term_count == planted_terms);
  CHECK(f.verb_count == planted_verbs);
  CHECK(code_of([&] { term_verb_frequency(c, std::vector<std::string>{}, verbs); }) == ErrorCode::kEmptyInput);
}

TEST_CASE("average generated length") {
  std::vector<GeneratedPassage> ps{{"d", "a", StrategyId::kTemplate, "", 10}, {"d", "b", StrategyId::kTemplate, "", 20},
                                   {"d", "c", StrategyId::kLlm, "", 7}};
  const auto m = avg_generated_length(ps);
  CHECK(m.at(StrategyId::kTemplate) == 15.0);
  CHECK(m.at(StrategyId::kLlm) == 7.0);
}

TEST_CASE("question taxonomy") {
  const auto q1 = classify_question(
      "What is the range for the \"number\" parameter when configuring the maximum number of routes supported by the "
      "VPN instance IPv4 address family on the USG9500?");
  CHECK(q1.first_word == QuestionWord::kWhat);
  CHECK(q1.tag == "Parameter");
  const auto q2 = classify_question(
      "Can NetStream sampling be enabled on the ingress or transit node for traffic over Segment Routing tunnels?");
  CHECK(q2.first_word == QuestionWord::kCan);
  const auto q3 = classify_question("Reboot the device?");
  CHECK(q3.first_word == QuestionWord::kOther);
  CHECK(q3.tag == "Other");
}
