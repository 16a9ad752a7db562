#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace tabrag {

// Counting limiter for in-flight backend requests. Tracks the peak so tests
// can assert the bound was honored.
class ConcurrencyLimiter {
 public:
  explicit ConcurrencyLimiter(std::size_t max_in_flight);

  class Permit {
   public:
    explicit Permit(ConcurrencyLimiter& owner) : owner_(&owner) {}
    Permit(Permit&& other) noexcept : owner_(std::exchange(other.owner_, nullptr)) {}
    Permit& operator=(Permit&&) = delete;
    ~Permit() {
      if (owner_ != nullptr) owner_->release();
    }

   private:
    ConcurrencyLimiter* owner_;
  };

  Permit acquire();
  std::size_t max_in_flight() const { return max_in_flight_; }
  std::size_t peak() const;

 private:
  void release();

  std::size_t max_in_flight_;
  std::size_t in_flight_ = 0;
  std::size_t peak_ = 0;
  mutable std::mutex mu_;
  std::condition_variable cv_;
};

struct Endpoint {
  std::string scheme_host_port;  // e.g. "http://127.0.0.1:8080"
  std::string base_path;         // "" or "/v1"

  static Endpoint parse(std::string_view url);
};

struct RemoteOptions {
  std::chrono::milliseconds timeout{30000};
  int retries = 0;
  std::size_t max_in_flight = 4;
};

struct GenerationParams {
  int max_tokens = 1024;
  double temperature = 0.0;
};

class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;
  // Throws BackendUnavailable or BackendRefusal.
  virtual std::string generate(std::string_view prompt) = 0;
  virtual std::size_t max_in_flight() const = 0;
};

class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  // One unit-norm vector per input, order-aligned.
  virtual std::vector<std::vector<float>> embed(std::span<const std::string> texts) = 0;
  virtual std::size_t dimension() const = 0;
};

// POST {endpoint}/generate {"prompt","max_tokens","temperature"} -> {"text"}
class RemoteGenerationBackend final : public GenerationBackend {
 public:
  RemoteGenerationBackend(std::string endpoint, RemoteOptions options = {}, GenerationParams params = {});
  std::string generate(std::string_view prompt) override;
  std::size_t max_in_flight() const override { return limiter_.max_in_flight(); }
  const ConcurrencyLimiter& limiter() const { return limiter_; }

 private:
  Endpoint endpoint_;
  RemoteOptions options_;
  GenerationParams params_;
  ConcurrencyLimiter limiter_;
};

// POST {endpoint}/embed {"texts":[...]} -> {"vectors":[[...],...]}
class RemoteEmbeddingBackend final : public EmbeddingBackend {
 public:
  RemoteEmbeddingBackend(std::string endpoint, std::size_t dimension, RemoteOptions options = {});
  std::vector<std::vector<float>> embed(std::span<const std::string> texts) override;
  std::size_t dimension() const override { return dimension_; }
  const ConcurrencyLimiter& limiter() const { return limiter_; }

 private:
  Endpoint endpoint_;
  std::size_t dimension_;
  RemoteOptions options_;
  ConcurrencyLimiter limiter_;
};

inline constexpr std::uint64_t kDefaultStubSeed = 0x5eed7ab1e5ULL;

// Deterministic in-process generator. Lookup order: fixture keyed by the
// prompt's hash, then the optional transform, then "STUB:" followed by the
// last 200 code points of the prompt.
class StubGenerationBackend final : public GenerationBackend {
 public:
  using Transform = std::function<std::string(std::string_view prompt)>;

  explicit StubGenerationBackend(std::size_t max_in_flight = 4);

  void add_fixture(std::string_view prompt, std::string reply);
  void set_transform(Transform t) { transform_ = std::move(t); }
  // Simulates an unreachable service.
  void set_available(bool available) { available_ = available; }

  std::string generate(std::string_view prompt) override;
  std::size_t max_in_flight() const override { return limiter_.max_in_flight(); }

  std::size_t call_count() const;
  std::vector<std::string> prompts_seen() const;

 private:
  std::unordered_map<std::uint64_t, std::string> fixtures_;
  Transform transform_;
  bool available_ = true;
  ConcurrencyLimiter limiter_;
  mutable std::mutex mu_;
  std::vector<std::string> prompts_;
};

// Hashed bag-of-words embedder. Each lowercased word token adds +-1 at a
// hashed bucket; the result is L2-normalized. Token-free text maps to the
// first basis vector.
class StubEmbeddingBackend final : public EmbeddingBackend {
 public:
  explicit StubEmbeddingBackend(std::size_t dimension = 1024, std::uint64_t seed = kDefaultStubSeed);

  std::vector<std::vector<float>> embed(std::span<const std::string> texts) override;
  std::size_t dimension() const override { return dimension_; }

  // Bucket and sign a token contributes; exposed so tests can rebuild vectors
  // from token counts independently of embed().
  std::size_t bucket(std::string_view token) const;
  int sign(std::string_view token) const;

  void set_available(bool available) { available_ = available; }
  std::size_t call_count() const { return calls_.load(); }

 private:
  std::size_t dimension_;
  std::uint64_t seed_;
  bool available_ = true;
  std::atomic<std::size_t> calls_{0};
};

void l2_normalize(std::vector<float>& v);

}  // namespace tabrag
