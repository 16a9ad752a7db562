#include "tabrag/text.hpp"
#include "tabrag/error.hpp"

#include <algorithm>
#include <cctype>

namespace tabrag {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kSchemaViolation: return "SchemaViolation";
    case ErrorCode::kOverlappingSpans: return "OverlappingSpans";
    case ErrorCode::kMissingDemonstration: return "MissingDemonstration";
    case ErrorCode::kBackendUnavailable: return "BackendUnavailable";
    case ErrorCode::kBackendRefusal: return "BackendRefusal";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kBackendNotConfigured: return "BackendNotConfigured";
    case ErrorCode::kIoFailure: return "IoFailure";
    case ErrorCode::kCorruptRecord: return "CorruptRecord";
    case ErrorCode::kMissingUpstreamArtifact: return "MissingUpstreamArtifact";
    case ErrorCode::kOutputLocked: return "OutputLocked";
    case ErrorCode::kDuplicateId: return "DuplicateId";
    case ErrorCode::kUnknownChunkId: return "UnknownChunkId";
    case ErrorCode::kEmptyIndex: return "EmptyIndex";
    case ErrorCode::kMissingAnswer: return "MissingAnswer";
    case ErrorCode::kMalformedReply: return "MalformedReply";
    case ErrorCode::kOutOfRange: return "OutOfRange";
    case ErrorCode::kMissingLabel: return "MissingLabel";
    case ErrorCode::kIncompleteSheet: return "IncompleteSheet";
    case ErrorCode::kTooFewStrategies: return "TooFewStrategies";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kWrongEvaluatorCount: return "WrongEvaluatorCount";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kCorpusAssemblyFailed: return "CorpusAssemblyFailed";
  }
  return "Unknown";
}

namespace text {

namespace {
bool is_space(unsigned char c) { return std::isspace(c) != 0; }
}  // namespace

std::string_view trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(a[i])) !=
        std::tolower(static_cast<unsigned char>(b[i])))
      return false;
  }
  return true;
}

std::size_t utf8_length(std::string_view s) {
  std::size_t n = 0;
  for (unsigned char c : s) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

std::string_view utf8_tail(std::string_view s, std::size_t n) {
  if (n == 0) return s.substr(s.size());
  std::size_t seen = 0;
  std::size_t i = s.size();
  while (i > 0) {
    --i;
    if ((static_cast<unsigned char>(s[i]) & 0xC0) != 0x80) {
      if (++seen == n) return s.substr(i);
    }
  }
  return s;
}

std::vector<std::string_view> whitespace_words(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t b = i;
    while (i < s.size() && !is_space(static_cast<unsigned char>(s[i]))) ++i;
    if (i > b) out.push_back(s.substr(b, i - b));
  }
  return out;
}

std::size_t count_words(std::string_view s) { return whitespace_words(s).size(); }

bool is_word_byte(unsigned char c) { return std::isalnum(c) != 0 || c >= 0x80; }

std::vector<std::string> word_tokens(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : s) {
    if (is_word_byte(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

bool ends_with_period(std::string_view s) {
  s = trim(s);
  return !s.empty() && s.back() == '.';
}

std::uint64_t fnv1a64(std::string_view s, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace text
}  // namespace tabrag
