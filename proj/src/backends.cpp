#include "tabrag/backends.hpp"

#include "tabrag/error.hpp"
#include "tabrag/text.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <cmath>

namespace tabrag {

ConcurrencyLimiter::ConcurrencyLimiter(std::size_t max_in_flight) : max_in_flight_(max_in_flight) {
  if (max_in_flight_ == 0) throw Error(ErrorCode::kInvalidArgument, "max_in_flight must be positive");
}

ConcurrencyLimiter::Permit ConcurrencyLimiter::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return in_flight_ < max_in_flight_; });
  ++in_flight_;
  peak_ = std::max(peak_, in_flight_);
  return Permit(*this);
}

void ConcurrencyLimiter::release() {
  {
    std::lock_guard lock(mu_);
    --in_flight_;
  }
  cv_.notify_one();
}

std::size_t ConcurrencyLimiter::peak() const {
  std::lock_guard lock(mu_);
  return peak_;
}

Endpoint Endpoint::parse(std::string_view url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos || scheme_end == 0)
    throw Error(ErrorCode::kInvalidArgument, "endpoint must look like http://host:port[/path]: " + std::string(url));
  const auto path_start = url.find('/', scheme_end + 3);
  Endpoint e;
  e.scheme_host_port = std::string(url.substr(0, path_start));
  if (path_start != std::string_view::npos) {
    e.base_path = std::string(url.substr(path_start));
    while (!e.base_path.empty() && e.base_path.back() == '/') e.base_path.pop_back();
  }
  return e;
}

namespace {

using nlohmann::json;

// Posts JSON and returns the parsed reply, mapping transport failures and
// 5xx/429 to BackendUnavailable and everything else unexpected to
// BackendRefusal.
json post_json(const Endpoint& ep, const std::string& route, const json& body, const RemoteOptions& opt) {
  const std::string path = ep.base_path + route;
  const std::string payload = body.dump();
  std::string last_error;
  for (int attempt = 0; attempt <= opt.retries; ++attempt) {
    httplib::Client client(ep.scheme_host_port);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(opt.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(opt.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    auto res = client.Post(path, payload, "application/json");
    if (!res) {
      last_error = ep.scheme_host_port + path + ": " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500 || res->status == 429) {
      last_error = ep.scheme_host_port + path + ": HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200)
      throw Error(ErrorCode::kBackendRefusal, ep.scheme_host_port + path + ": HTTP " + std::to_string(res->status));
    json reply = json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.is_object())
      throw Error(ErrorCode::kBackendRefusal, path + ": reply is not a JSON object");
    if (reply.contains("error"))
      throw Error(ErrorCode::kBackendRefusal, path + ": " + reply["error"].dump());
    return reply;
  }
  throw Error(ErrorCode::kBackendUnavailable, last_error);
}

}  // namespace

RemoteGenerationBackend::RemoteGenerationBackend(std::string endpoint, RemoteOptions options, GenerationParams params)
    : endpoint_(Endpoint::parse(endpoint)), options_(options), params_(params), limiter_(options.max_in_flight) {}

std::string RemoteGenerationBackend::generate(std::string_view prompt) {
  if (prompt.empty()) throw Error(ErrorCode::kInvalidArgument, "prompt must be non-empty");
  auto permit = limiter_.acquire();
  const json body = {{"prompt", prompt}, {"max_tokens", params_.max_tokens}, {"temperature", params_.temperature}};
  const json reply = post_json(endpoint_, "/generate", body, options_);
  auto it = reply.find("text");
  if (it == reply.end() || !it->is_string() || text::trim(it->get_ref<const std::string&>()).empty())
    throw Error(ErrorCode::kBackendRefusal, "empty generation");
  return it->get<std::string>();
}

RemoteEmbeddingBackend::RemoteEmbeddingBackend(std::string endpoint, std::size_t dimension, RemoteOptions options)
    : endpoint_(Endpoint::parse(endpoint)), dimension_(dimension), options_(options), limiter_(options.max_in_flight) {
  if (dimension_ == 0) throw Error(ErrorCode::kInvalidArgument, "dimension must be positive");
}

std::vector<std::vector<float>> RemoteEmbeddingBackend::embed(std::span<const std::string> texts) {
  if (texts.empty()) throw Error(ErrorCode::kInvalidArgument, "embed requires at least one text");
  auto permit = limiter_.acquire();
  const json body = {{"texts", std::vector<std::string>(texts.begin(), texts.end())}};
  const json reply = post_json(endpoint_, "/embed", body, options_);
  auto it = reply.find("vectors");
  if (it == reply.end() || !it->is_array() || it->size() != texts.size())
    throw Error(ErrorCode::kBackendRefusal, "reply must carry one vector per text");
  std::vector<std::vector<float>> out;
  out.reserve(texts.size());
  for (const auto& v : *it) {
    if (!v.is_array() || v.size() != dimension_)
      throw Error(ErrorCode::kDimensionMismatch, "expected " + std::to_string(dimension_) + " components, got " +
                                                     std::to_string(v.is_array() ? v.size() : 0));
    std::vector<float> vec;
    vec.reserve(dimension_);
    for (const auto& x : v) {
      if (!x.is_number()) throw Error(ErrorCode::kBackendRefusal, "non-numeric vector component");
      vec.push_back(x.get<float>());
    }
    l2_normalize(vec);
    out.push_back(std::move(vec));
  }
  return out;
}

StubGenerationBackend::StubGenerationBackend(std::size_t max_in_flight) : limiter_(max_in_flight) {}

void StubGenerationBackend::add_fixture(std::string_view prompt, std::string reply) {
  fixtures_[text::fnv1a64(prompt)] = std::move(reply);
}

std::string StubGenerationBackend::generate(std::string_view prompt) {
  if (prompt.empty()) throw Error(ErrorCode::kInvalidArgument, "prompt must be non-empty");
  auto permit = limiter_.acquire();
  {
    std::lock_guard lock(mu_);
    prompts_.emplace_back(prompt);
  }
  if (!available_) throw Error(ErrorCode::kBackendUnavailable, "stub generator is down");
  std::string reply;
  if (auto it = fixtures_.find(text::fnv1a64(prompt)); it != fixtures_.end()) {
    reply = it->second;
  } else if (transform_) {
    reply = transform_(prompt);
  } else {
    reply = "STUB:" + std::string(text::utf8_tail(prompt, 200));
  }
  if (text::trim(reply).empty()) throw Error(ErrorCode::kBackendRefusal, "empty generation");
  return reply;
}

std::size_t StubGenerationBackend::call_count() const {
  std::lock_guard lock(mu_);
  return prompts_.size();
}

std::vector<std::string> StubGenerationBackend::prompts_seen() const {
  std::lock_guard lock(mu_);
  return prompts_;
}

StubEmbeddingBackend::StubEmbeddingBackend(std::size_t dimension, std::uint64_t seed)
    : dimension_(dimension), seed_(seed) {
  if (dimension_ == 0) throw Error(ErrorCode::kInvalidArgument, "dimension must be positive");
}

std::size_t StubEmbeddingBackend::bucket(std::string_view token) const {
  return static_cast<std::size_t>(text::fnv1a64(token, seed_) % dimension_);
}

int StubEmbeddingBackend::sign(std::string_view token) const {
  return (text::fnv1a64(token, seed_ ^ 0x9e3779b97f4a7c15ULL) >> 63) != 0 ? -1 : 1;
}

std::vector<std::vector<float>> StubEmbeddingBackend::embed(std::span<const std::string> texts) {
  if (texts.empty()) throw Error(ErrorCode::kInvalidArgument, "embed requires at least one text");
  if (!available_) throw Error(ErrorCode::kBackendUnavailable, "stub embedder is down");
  ++calls_;
  std::vector<std::vector<float>> out;
  out.reserve(texts.size());
  std::vector<double> acc(dimension_);
  for (const auto& t : texts) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (const auto& tok : text::word_tokens(t)) acc[bucket(tok)] += sign(tok);
    double norm = 0.0;
    for (double x : acc) norm += x * x;
    std::vector<float> v(dimension_, 0.0f);
    if (norm == 0.0) {
      v[0] = 1.0f;
    } else {
      const double inv = 1.0 / std::sqrt(norm);
      for (std::size_t i = 0; i < dimension_; ++i) v[i] = static_cast<float>(acc[i] * inv);
    }
    out.push_back(std::move(v));
  }
  return out;
}

void l2_normalize(std::vector<float>& v) {
  double norm = 0.0;
  for (float x : v) norm += static_cast<double>(x) * x;
  if (norm == 0.0) throw Error(ErrorCode::kBackendRefusal, "zero vector cannot be normalized");
  const double inv = 1.0 / std::sqrt(norm);
  for (auto& x : v) x = static_cast<float>(x * inv);
}

}  // namespace tabrag
