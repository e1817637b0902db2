#include "sentrec/embed.hpp"

#include <algorithm>
#include <cmath>

#include "sentrec/errors.hpp"
#include "sentrec/text.hpp"

namespace sentrec::embed {

namespace {

// FNV-1a over bytes, folded with a seed.
uint64_t fnv1a(std::string_view s, uint64_t seed) {
  uint64_t h = 1469598103934665603ULL ^ (seed * 0x9e3779b97f4a7c15ULL);
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

uint64_t mix64(uint64_t x) {
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdULL;
  x ^= x >> 33;
  x *= 0xc4ceb9fe1a85ec53ULL;
  x ^= x >> 33;
  return x;
}

}  // namespace

HashEmbedder::HashEmbedder(int dim, uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim < 8) throw ConfigError("HashEmbedder: dim must be at least 8");
}

std::vector<double> HashEmbedder::embed(std::string_view token) const {
  if (token.empty()) throw ConfigError("HashEmbedder: empty token");
  const std::string padded = "^" + text::lower(token) + "$";
  std::vector<double> v(static_cast<size_t>(dim_), 0.0);
  const size_t n = padded.size();
  for (size_t i = 0; i + 3 <= n; ++i) {
    const uint64_t h = fnv1a(std::string_view(padded).substr(i, 3), seed_);
    const uint64_t slot = mix64(h) % static_cast<uint64_t>(dim_);
    const double sign = (h >> 63) ? -1.0 : 1.0;
    v[slot] += sign;
  }
  double norm2 = 0.0;
  for (double x : v) norm2 += x * x;
  if (norm2 <= 0.0) {
    // Signs can cancel; fall back to a single deterministic bucket so the
    // vector is never zero.
    v[mix64(fnv1a(padded, seed_ + 1)) % static_cast<uint64_t>(dim_)] = 1.0;
    norm2 = 1.0;
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& x : v) x *= inv;
  return v;
}

std::string HashEmbedder::name() const {
  return "hash-" + std::to_string(dim_);
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ConfigError("cosine: dimension mismatch");
  if (a.empty()) throw ConfigError("cosine: empty vectors");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na <= 0.0 || nb <= 0.0) throw ConfigError("cosine: zero vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

double IdfTable::lookup(std::string_view token) const {
  const auto it = weights.find(std::string(token));
  if (it != weights.end()) return it->second;
  return std::log(static_cast<double>(n_docs) + 1.0);
}

IdfTable build_idf_table(const std::vector<std::string>& reference_texts) {
  IdfTable table;
  table.n_docs = reference_texts.size();
  std::unordered_map<std::string, size_t> df;
  for (const std::string& doc : reference_texts) {
    std::vector<std::string> toks = text::tokens(doc);
    std::sort(toks.begin(), toks.end());
    toks.erase(std::unique(toks.begin(), toks.end()), toks.end());
    for (std::string& t : toks) df[std::move(t)] += 1;
  }
  const double n1 = static_cast<double>(table.n_docs) + 1.0;
  for (auto& [tok, count] : df) {
    table.weights[tok] = std::log(n1 / (static_cast<double>(count) + 1.0));
  }
  return table;
}

}  // namespace sentrec::embed
