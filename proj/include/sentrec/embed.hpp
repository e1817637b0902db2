#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace sentrec::embed {

// Maps a single token to a fixed-dimension vector. Implementations must be
// safe to call from multiple threads at once.
class TokenEmbedder {
 public:
  virtual ~TokenEmbedder() = default;
  virtual int dim() const = 0;
  virtual std::vector<double> embed(std::string_view token) const = 0;
  virtual std::string name() const = 0;
};

// Offline embedder: hashed character trigrams of the lowercased token,
// feature-hashed into `dim` buckets with +/-1 signs, then L2-normalized.
// Tokens are padded with '^' and '$' sentinels so one-letter tokens still
// produce a trigram. Deterministic in (token, dim, seed).
class HashEmbedder final : public TokenEmbedder {
 public:
  explicit HashEmbedder(int dim = 64, uint64_t seed = 0x5eed);
  int dim() const override { return dim_; }
  std::vector<double> embed(std::string_view token) const override;
  std::string name() const override;

 private:
  int dim_;
  uint64_t seed_;
};

// Throws on dimension mismatch or a zero vector on either side.
double cosine(const std::vector<double>& a, const std::vector<double>& b);

// Document-frequency weights over a reference corpus, add-one smoothed:
//   weight(t) = log((n_docs + 1) / (df(t) + 1))
// Unseen tokens get log(n_docs + 1).
struct IdfTable {
  size_t n_docs = 0;
  std::unordered_map<std::string, double> weights;
  double lookup(std::string_view token) const;
};

IdfTable build_idf_table(const std::vector<std::string>& reference_texts);

// Remote embedding service client. POSTs {"input": [tokens...]} and expects
// {"vectors": [[...], ...]}. The vector dimension is checked on the first
// response and enforced afterwards. Results are memoized; the cache only
// short-circuits repeat lookups and never changes observable values.
class RemoteEmbedder final : public TokenEmbedder {
 public:
  struct Config {
    std::string endpoint;      // e.g. http://host:port/embed
    int timeout_sec = 30;
    int max_retries = 1;       // retries after the first attempt
    int backoff_ms = 500;      // doubled per retry
  };

  explicit RemoteEmbedder(Config cfg);
  ~RemoteEmbedder() override;

  int dim() const override;
  std::vector<double> embed(std::string_view token) const override;
  std::string name() const override;

 private:
  Config cfg_;
  mutable std::mutex mu_;
  mutable int dim_ = -1;  // learned from the first response
  mutable std::unordered_map<std::string, std::vector<double>> cache_;
};

}  // namespace sentrec::embed
