#include "sentrec/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "sentrec/errors.hpp"
#include "sentrec/jsonl.hpp"
#include "sentrec/rng.hpp"
#include "sentrec/templates.hpp"
#include "sentrec/text.hpp"

namespace sentrec::corpus {

std::vector<Interaction> filter_short_reviews(const std::vector<Interaction>& interactions,
                                              int min_words) {
  if (min_words < 0) throw ConfigError("filter_short_reviews: min_words must be >= 0");
  std::vector<Interaction> kept;
  kept.reserve(interactions.size());
  for (const Interaction& it : interactions) {
    if (text::word_count(it.review_text) >= min_words) kept.push_back(it);
  }
  return kept;
}

std::vector<Interaction> kcore_filter(const std::vector<Interaction>& interactions, int k) {
  if (k < 1) throw ConfigError("kcore_filter: k must be >= 1");
  std::vector<char> alive(interactions.size(), 1);

  // Iterative peeling: drop interactions touching a light user or item,
  // recount, repeat until nothing moves.
  bool changed = true;
  while (changed) {
    changed = false;
    std::unordered_map<std::string, int> user_deg, item_deg;
    for (size_t i = 0; i < interactions.size(); ++i) {
      if (!alive[i]) continue;
      user_deg[interactions[i].user_id] += 1;
      item_deg[interactions[i].item_id] += 1;
    }
    for (size_t i = 0; i < interactions.size(); ++i) {
      if (!alive[i]) continue;
      if (user_deg[interactions[i].user_id] < k || item_deg[interactions[i].item_id] < k) {
        alive[i] = 0;
        changed = true;
      }
    }
  }

  std::vector<Interaction> kept;
  for (size_t i = 0; i < interactions.size(); ++i) {
    if (alive[i]) kept.push_back(interactions[i]);
  }
  return kept;
}

SplitDataset chronological_split(const std::vector<ExplanationRecord>& records) {
  if (records.empty()) throw ConfigError("chronological_split: no records");

  struct Keyed {
    size_t pos;
  };
  std::unordered_map<std::string, std::vector<size_t>> by_user;
  for (size_t i = 0; i < records.size(); ++i) by_user[records[i].user_id].push_back(i);

  // Stable iteration order over users: sort user ids.
  std::vector<std::string> users;
  users.reserve(by_user.size());
  for (const auto& [u, _] : by_user) users.push_back(u);
  std::sort(users.begin(), users.end());

  SplitDataset out;
  for (const std::string& u : users) {
    std::vector<size_t>& idx = by_user[u];
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
      const ExplanationRecord& ra = records[a];
      const ExplanationRecord& rb = records[b];
      if (ra.timestamp != rb.timestamp) return ra.timestamp < rb.timestamp;
      if (ra.item_id != rb.item_id) return ra.item_id < rb.item_id;
      return a < b;  // input position breaks remaining ties
    });
    const size_t n = idx.size();
    if (n == 1) {
      out.train.push_back(records[idx[0]]);
      continue;
    }
    for (size_t i = 0; i + 2 < n; ++i) out.train.push_back(records[idx[i]]);
    out.valid.push_back(records[idx[n - 2]]);
    out.test.push_back(records[idx[n - 1]]);
  }
  return out;
}

SyntheticSpec SyntheticSpec::defaults() {
  SyntheticSpec s;
  s.nouns = {
      "display",  "battery", "keyboard", "speaker", "camera",  "hinge",
      "packaging", "manual",  "charger",  "strap",   "handle",  "zipper",
      "fabric",   "lining",  "stitching", "finish",  "coating", "firmware",
      "interface", "menu",   "remote",   "stand",    "cable",   "warranty",
  };
  s.positive_adjectives = {"crisp", "solid", "smooth", "bright", "quiet", "sturdy", "roomy", "snappy"};
  s.negative_adjectives = {"flimsy", "dull", "noisy", "sticky", "cramped", "laggy", "faded", "wobbly"};
  return s;
}

void SyntheticSpec::validate() const {
  if (n_users < 1 || n_items < 1) throw ConfigError("synthetic spec: need users and items");
  if (interactions_per_user < 1) throw ConfigError("synthetic spec: interactions_per_user must be >= 1");
  if (max_rating < 2) throw ConfigError("synthetic spec: max_rating must be >= 2");
  if (!(tau_lo < tau_hi)) throw ConfigError("synthetic spec: tau_lo must be below tau_hi");
  if (tau_lo < 1.0 || tau_hi > max_rating) throw ConfigError("synthetic spec: tau out of rating range");
  if (nouns.empty() || positive_adjectives.empty() || negative_adjectives.empty()) {
    throw ConfigError("synthetic spec: vocab lists must be non-empty");
  }
  static const std::set<std::string> reserved = {"user",  "likes",    "dislikes", "and",
                                                 "but",   "liked",    "disliked", "i"};
  auto check = [&](const std::vector<std::string>& vs, const char* what) {
    for (const std::string& v : vs) {
      for (const std::string& w : text::tokens(v)) {
        if (reserved.count(w)) {
          throw ConfigError(std::string("synthetic spec: ") + what + " '" + v +
                            "' collides with a reserved template word");
        }
      }
      if (v.empty()) throw ConfigError(std::string("synthetic spec: empty ") + what);
    }
  };
  check(nouns, "noun");
  check(positive_adjectives, "adjective");
  check(negative_adjectives, "adjective");
}

SyntheticCorpus generate_synthetic_corpus(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  SyntheticCorpus out;

  const int n_nouns = static_cast<int>(spec.nouns.size());

  // Latent structure: users carry a rating bias and a preference ordering
  // over nouns; items carry a quality offset. Both show up in ratings, and
  // the preference ordering shows up in which features get mentioned, so
  // user/item identity is genuinely predictive.
  std::vector<double> user_bias(spec.n_users), item_quality(spec.n_items);
  std::vector<std::vector<int>> user_pref(spec.n_users);
  for (int u = 0; u < spec.n_users; ++u) {
    user_bias[u] = (rng.next_double() - 0.5) * 1.6;
    std::vector<int> order(n_nouns);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    user_pref[u] = std::move(order);
  }
  for (int i = 0; i < spec.n_items; ++i) item_quality[i] = (rng.next_double() - 0.5) * 1.6;

  auto id_of = [](const char* prefix, int n, int width) {
    std::string s = std::to_string(n);
    while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
    return std::string(prefix) + s;
  };

  const double mid = (1.0 + spec.max_rating) / 2.0;
  const double spread = (spec.max_rating - 1.0) / 4.0;

  // Pick a noun for a user: mostly from the head of their preference order.
  auto pick_noun = [&](int u, std::set<int>* used) {
    for (int attempt = 0; attempt < 16; ++attempt) {
      int idx;
      if (rng.next_bernoulli(0.7)) {
        idx = user_pref[u][static_cast<size_t>(rng.next_below(std::min(n_nouns, 6)))];
      } else {
        idx = static_cast<int>(rng.next_below(n_nouns));
      }
      if (!used->count(idx)) {
        used->insert(idx);
        return idx;
      }
    }
    for (int idx = 0; idx < n_nouns; ++idx) {
      if (!used->count(idx)) {
        used->insert(idx);
        return idx;
      }
    }
    return 0;
  };

  int64_t ts = 1700000000;
  for (int u = 0; u < spec.n_users; ++u) {
    for (int s = 0; s < spec.interactions_per_user; ++s) {
      const int item = static_cast<int>(rng.next_below(spec.n_items));
      const double raw = mid + 0.7 * user_bias[u] + 0.7 * item_quality[item] +
                         spread * rng.next_gaussian();
      const double rating = static_cast<double>(
          std::clamp(static_cast<int>(std::lround(raw)), 1, spec.max_rating));

      const bool pos_only = rating >= spec.tau_hi;
      const bool neg_only = rating <= spec.tau_lo;
      FeatureSet fs;
      std::set<int> used;
      auto add = [&](std::vector<std::string>* side, const std::vector<std::string>& adjs) {
        const int count = 1 + static_cast<int>(rng.next_below(2));
        for (int c = 0; c < count; ++c) {
          const int noun = pick_noun(u, &used);
          const std::string& adj = adjs[static_cast<size_t>(rng.next_below(adjs.size()))];
          side->push_back(adj + " " + spec.nouns[static_cast<size_t>(noun)]);
        }
      };
      if (!neg_only) add(&fs.positives, spec.positive_adjectives);
      if (!pos_only) add(&fs.negatives, spec.negative_adjectives);

      Interaction it;
      it.user_id = id_of("u", u, 4);
      it.item_id = id_of("i", item, 4);
      it.rating = rating;
      it.max_rating = spec.max_rating;
      it.timestamp = ts++;
      it.review_text = templates::render_review(fs);

      ExplanationRecord rec;
      rec.user_id = it.user_id;
      rec.item_id = it.item_id;
      rec.rating = rating;
      rec.timestamp = it.timestamp;
      rec.explanation = templates::render_explanation(fs);
      rec.positive_features = fs.positives;
      rec.negative_features = fs.negatives;
      if (std::string problem = jsonl::validate_explanation_record(rec); !problem.empty()) {
        throw Error("generate_synthetic_corpus: invariant violation: " + problem);
      }

      out.interactions.push_back(std::move(it));
      out.records.push_back(std::move(rec));
    }
  }
  return out;
}

CorpusStats corpus_stats(const std::vector<ExplanationRecord>& records, int max_rating) {
  if (records.empty()) throw ConfigError("corpus_stats: no records");
  CorpusStats st;
  std::unordered_set<std::string> users, items;
  std::unordered_set<std::string> pos, neg;
  size_t word_sum = 0;
  for (const ExplanationRecord& r : records) {
    users.insert(r.user_id);
    items.insert(r.item_id);
    for (const std::string& p : r.positive_features) pos.insert(text::normalize_phrase(p));
    for (const std::string& p : r.negative_features) neg.insert(text::normalize_phrase(p));
    word_sum += static_cast<size_t>(text::word_count(r.explanation));
  }
  st.n_users = users.size();
  st.n_items = items.size();
  st.n_interactions = records.size();
  st.n_positive_features = pos.size();
  st.n_negative_features = neg.size();
  st.records_per_user = static_cast<double>(records.size()) / static_cast<double>(users.size());
  st.records_per_item = static_cast<double>(records.size()) / static_cast<double>(items.size());
  st.words_per_explanation = static_cast<double>(word_sum) / static_cast<double>(records.size());
  st.max_rating = max_rating;
  return st;
}

std::vector<OccurrenceBucket> feature_occurrence_ratio(
    const std::vector<ExplanationRecord>& records,
    const std::vector<std::string>& thresholds) {
  if (records.empty()) throw ConfigError("feature_occurrence_ratio: no records");
  if (thresholds.empty()) throw ConfigError("feature_occurrence_ratio: no thresholds");

  auto count_side = [&](bool positive) {
    std::unordered_map<std::string, size_t> counts;
    for (const ExplanationRecord& r : records) {
      const auto& phrases = positive ? r.positive_features : r.negative_features;
      for (const std::string& p : phrases) counts[text::normalize_phrase(p)] += 1;
    }
    return counts;
  };
  const auto pos_counts = count_side(true);
  const auto neg_counts = count_side(false);

  auto ratio = [](const std::unordered_map<std::string, size_t>& counts, bool exact, long n) {
    if (counts.empty()) return 0.0;
    size_t hit = 0;
    for (const auto& [_, c] : counts) {
      const long lc = static_cast<long>(c);
      if (exact ? lc == n : lc > n) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(counts.size());
  };

  std::vector<OccurrenceBucket> out;
  for (const std::string& t : thresholds) {
    if (t.size() < 2 || (t[0] != '=' && t[0] != '>')) {
      throw ConfigError("feature_occurrence_ratio: bad threshold '" + t + "' (want =n or >n)");
    }
    long n = 0;
    try {
      size_t used = 0;
      n = std::stol(t.substr(1), &used);
      if (used != t.size() - 1) throw std::invalid_argument(t);
    } catch (const std::exception&) {
      throw ConfigError("feature_occurrence_ratio: bad threshold '" + t + "' (want =n or >n)");
    }
    const bool exact = t[0] == '=';
    out.push_back({t, ratio(pos_counts, exact, n), ratio(neg_counts, exact, n)});
  }
  return out;
}

RatingSentimentDistribution rating_sentiment_distribution(
    const std::vector<ExplanationRecord>& records, const Labeler& labeler) {
  if (records.empty()) throw ConfigError("rating_sentiment_distribution: no records");
  std::map<int, std::array<size_t, 4>> counts;
  int max_seen = 0;
  for (const ExplanationRecord& r : records) {
    max_seen = std::max(max_seen, static_cast<int>(std::ceil(r.rating)));
  }
  for (const ExplanationRecord& r : records) {
    const int bucket = round_rating(r.rating, max_seen);
    counts[bucket][static_cast<size_t>(labeler(r.features()))] += 1;
  }
  RatingSentimentDistribution out;
  for (const auto& [bucket, c] : counts) {
    const double total = static_cast<double>(c[0] + c[1] + c[2] + c[3]);
    std::array<double, 4> shares{};
    for (size_t i = 0; i < 4; ++i) shares[i] = static_cast<double>(c[i]) / total;
    out[bucket] = shares;
  }
  return out;
}

int round_rating(double rating, int max_rating) {
  const double r = rating < 0.0 ? -std::floor(0.5 - rating) : std::floor(rating + 0.5);
  return std::clamp(static_cast<int>(r), 0, max_rating);
}

}  // namespace sentrec::corpus
