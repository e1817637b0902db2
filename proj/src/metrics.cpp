#include "sentrec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>
#include <unordered_set>

#include "sentrec/errors.hpp"
#include "sentrec/kernels.hpp"
#include "sentrec/text.hpp"

namespace sentrec::metrics {

namespace {

constexpr double kBleuEps = 1e-9;

std::vector<std::string> ngrams(const std::vector<std::string>& toks, int n) {
  std::vector<std::string> out;
  if (static_cast<int>(toks.size()) < n) return out;
  out.reserve(toks.size() - n + 1);
  for (size_t i = 0; i + n <= toks.size(); ++i) {
    std::string g = toks[i];
    for (int j = 1; j < n; ++j) {
      g += '\x1f';
      g += toks[i + j];
    }
    out.push_back(std::move(g));
  }
  return out;
}

std::unordered_map<std::string, int> counts(const std::vector<std::string>& grams) {
  std::unordered_map<std::string, int> c;
  for (const std::string& g : grams) c[g] += 1;
  return c;
}

// Clipped overlap count between candidate and reference n-grams.
int clipped_matches(const std::vector<std::string>& cand_grams,
                    const std::vector<std::string>& ref_grams) {
  const auto ref_counts = counts(ref_grams);
  std::unordered_map<std::string, int> used;
  int matched = 0;
  for (const std::string& g : cand_grams) {
    const auto it = ref_counts.find(g);
    if (it == ref_counts.end()) continue;
    int& u = used[g];
    if (u < it->second) {
      ++u;
      ++matched;
    }
  }
  return matched;
}

// Smoothed sentence BLEU-n for one pair.
double sentence_bleu(const std::vector<std::string>& cand,
                     const std::vector<std::string>& ref, int n) {
  if (cand.empty()) return 0.0;
  double log_sum = 0.0;
  for (int k = 1; k <= n; ++k) {
    const std::vector<std::string> cg = ngrams(cand, k);
    double pk;
    if (cg.empty()) {
      pk = kBleuEps;
    } else {
      const int matched = clipped_matches(cg, ngrams(ref, k));
      pk = matched > 0 ? static_cast<double>(matched) / static_cast<double>(cg.size())
                       : kBleuEps / static_cast<double>(cg.size());
    }
    log_sum += std::log(pk);
  }
  const double geo = std::exp(log_sum / n);
  const double c = static_cast<double>(cand.size());
  const double r = static_cast<double>(ref.size());
  const double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
  return bp * geo;
}

struct SideVocab {
  std::set<std::string> vocab;
  std::vector<std::optional<std::string>> selected;
};

}  // namespace

SentimentLabel sentiment_label(const FeatureSet& features) {
  const bool has_p = !features.positives.empty();
  const bool has_n = !features.negatives.empty();
  if (has_p && has_n) return SentimentLabel::Mixed;
  if (has_p) return SentimentLabel::Positive;
  if (has_n) return SentimentLabel::Negative;
  return SentimentLabel::Empty;
}

double sentiment_matching(const std::vector<SentimentLabel>& truth,
                          const std::vector<SentimentLabel>& generated) {
  if (truth.empty() || truth.size() != generated.size()) {
    throw ConfigError("sentiment_matching: inputs must be paired and non-empty");
  }
  size_t hits = 0;
  for (size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == generated[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double greedy_match_f1(const std::vector<std::string>& candidate,
                       const std::vector<std::string>& reference,
                       const embed::TokenEmbedder& embedder,
                       const embed::IdfTable* idf) {
  if (candidate.empty() || reference.empty()) {
    throw ConfigError("greedy_match_f1: token lists must be non-empty");
  }
  std::vector<std::vector<double>> cand_vecs, ref_vecs;
  cand_vecs.reserve(candidate.size());
  ref_vecs.reserve(reference.size());
  for (const std::string& t : candidate) cand_vecs.push_back(embedder.embed(t));
  for (const std::string& t : reference) ref_vecs.push_back(embedder.embed(t));

  auto best_against = [](const std::vector<double>& v,
                         const std::vector<std::vector<double>>& pool) {
    double best = 0.0;  // negative similarities clamp to zero
    for (const std::vector<double>& u : pool) {
      best = std::max(best, embed::cosine(v, u));
    }
    return best;
  };

  auto weighted_mean = [&](const std::vector<std::string>& toks,
                           const std::vector<double>& scores) {
    if (idf == nullptr) {
      double s = 0.0;
      for (double x : scores) s += x;
      return s / static_cast<double>(scores.size());
    }
    double wsum = 0.0, s = 0.0;
    for (size_t i = 0; i < toks.size(); ++i) {
      const double w = idf->lookup(toks[i]);
      wsum += w;
      s += w * scores[i];
    }
    if (wsum <= 0.0) {
      // Degenerate table (e.g. every token in every document): fall back to
      // uniform weights rather than dividing by zero.
      double u = 0.0;
      for (double x : scores) u += x;
      return u / static_cast<double>(scores.size());
    }
    return s / wsum;
  };

  std::vector<double> p_scores(candidate.size()), r_scores(reference.size());
  for (size_t i = 0; i < cand_vecs.size(); ++i) p_scores[i] = best_against(cand_vecs[i], ref_vecs);
  for (size_t i = 0; i < ref_vecs.size(); ++i) r_scores[i] = best_against(ref_vecs[i], cand_vecs);

  const double precision = weighted_mean(candidate, p_scores);
  const double recall = weighted_mean(reference, r_scores);
  if (precision + recall <= 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

double content_similarity(const std::vector<std::string>& truth_phrases,
                          const std::vector<std::string>& generated_phrases,
                          const embed::TokenEmbedder& embedder,
                          const embed::IdfTable* idf) {
  const std::vector<std::string> ref = text::tokens(text::join(truth_phrases, " and "));
  const std::vector<std::string> cand = text::tokens(text::join(generated_phrases, " and "));
  if (ref.empty() && cand.empty()) return 1.0;
  if (ref.empty() || cand.empty()) return 0.0;
  return greedy_match_f1(cand, ref, embedder, idf);
}

double bleu_n(const std::vector<std::string>& candidates,
              const std::vector<std::string>& references, int n) {
  if (candidates.empty() || candidates.size() != references.size()) {
    throw ConfigError("bleu_n: inputs must be paired and non-empty");
  }
  if (n < 1) throw ConfigError("bleu_n: order must be >= 1");
  double sum = 0.0;
  for (size_t i = 0; i < candidates.size(); ++i) {
    sum += sentence_bleu(text::tokens(candidates[i]), text::tokens(references[i]), n);
  }
  return sum / static_cast<double>(candidates.size());
}

RougeResult rouge_n(const std::vector<std::string>& candidates,
                    const std::vector<std::string>& references, int n) {
  if (candidates.empty() || candidates.size() != references.size()) {
    throw ConfigError("rouge_n: inputs must be paired and non-empty");
  }
  if (n < 1) throw ConfigError("rouge_n: order must be >= 1");
  RougeResult res;
  double sum = 0.0;
  for (size_t i = 0; i < candidates.size(); ++i) {
    const std::vector<std::string> rg = ngrams(text::tokens(references[i]), n);
    if (rg.empty()) {
      ++res.skipped;
      continue;
    }
    const std::vector<std::string> cg = ngrams(text::tokens(candidates[i]), n);
    sum += static_cast<double>(clipped_matches(cg, rg)) / static_cast<double>(rg.size());
    ++res.counted;
  }
  if (res.counted == 0) {
    throw ConfigError("rouge_n: every reference is shorter than n tokens");
  }
  res.score = sum / static_cast<double>(res.counted);
  return res;
}

double usr(const std::vector<std::string>& texts) {
  if (texts.empty()) throw ConfigError("usr: no texts");
  std::unordered_set<std::string> unique;
  for (const std::string& t : texts) unique.insert(text::collapse_ws(t));
  return static_cast<double>(unique.size()) / static_cast<double>(texts.size());
}

std::optional<std::string> select_feature_word(const std::vector<std::string>& phrases,
                                               Rng& rng) {
  if (phrases.empty()) return std::nullopt;
  const std::string& phrase = phrases[rng.next_below(phrases.size())];
  const std::vector<std::string> ws = text::words(phrase);
  if (ws.empty()) return std::nullopt;
  return text::lower(ws[rng.next_below(ws.size())]);
}

double fmr(const std::vector<std::optional<std::string>>& selected_words,
           const std::vector<std::string>& generated_texts) {
  if (selected_words.size() != generated_texts.size()) {
    throw ConfigError("fmr: inputs must be paired");
  }
  size_t eligible = 0, hits = 0;
  for (size_t i = 0; i < selected_words.size(); ++i) {
    if (!selected_words[i].has_value()) continue;
    ++eligible;
    if (text::contains_token(generated_texts[i], *selected_words[i])) ++hits;
  }
  if (eligible == 0) throw ConfigError("fmr: no eligible instances");
  return static_cast<double>(hits) / static_cast<double>(eligible);
}

double fcr(const std::set<std::string>& vocabulary,
           const std::vector<std::string>& generated_texts) {
  if (vocabulary.empty()) throw ConfigError("fcr: empty vocabulary");
  std::set<std::string> covered;
  for (const std::string& g : generated_texts) {
    const std::vector<std::string> toks = text::tokens(g);
    for (const std::string& t : toks) {
      if (vocabulary.count(t)) covered.insert(t);
    }
  }
  return static_cast<double>(covered.size()) / static_cast<double>(vocabulary.size());
}

double div_repetition(const std::vector<std::set<std::string>>& per_instance_features) {
  const size_t n = per_instance_features.size();
  if (n < 2) throw ConfigError("div_repetition: need at least two instances");
  // Streaming form: sum over words of C(count, 2) equals the sum of pairwise
  // intersection sizes, without touching the O(N^2) pair space.
  std::unordered_map<std::string, size_t> word_counts;
  for (const std::set<std::string>& fs : per_instance_features) {
    for (const std::string& w : fs) word_counts[w] += 1;
  }
  unsigned long long pair_sum = 0;
  for (const auto& [w, c] : word_counts) {
    pair_sum += static_cast<unsigned long long>(c) * (c - 1) / 2;
  }
  return 2.0 * static_cast<double>(pair_sum) /
         (static_cast<double>(n) * static_cast<double>(n - 1));
}

MaeRmse mae_rmse(const std::vector<double>& truth, const std::vector<double>& predicted) {
  if (truth.empty() || truth.size() != predicted.size()) {
    throw ConfigError("mae_rmse: inputs must be paired and non-empty");
  }
  double abs_sum = 0.0, sq_sum = 0.0;
  for (size_t i = 0; i < truth.size(); ++i) {
    const double d = predicted[i] - truth[i];
    abs_sum += std::abs(d);
    sq_sum += d * d;
  }
  const double n = static_cast<double>(truth.size());
  return {abs_sum / n, std::sqrt(sq_sum / n)};
}

MetricReport evaluate(const std::vector<ExplanationRecord>& truth,
                      const std::vector<Prediction>& predictions,
                      const EvaluateConfig& config,
                      bool keep_per_instance) {
  if (config.embedder == nullptr) throw ConfigError("evaluate: embedder is required");
  if (truth.empty() || truth.size() != predictions.size()) {
    throw ConfigError("evaluate: truth and predictions must be paired and non-empty");
  }
  const size_t n = truth.size();

  embed::IdfTable idf_table;
  const embed::IdfTable* idf = nullptr;
  if (config.use_idf) {
    std::vector<std::string> docs;
    docs.reserve(n);
    for (const ExplanationRecord& r : truth) docs.push_back(r.explanation);
    idf_table = embed::build_idf_table(docs);
    idf = &idf_table;
  }

  // Seeded selection happens serially, up front, in input order: positive
  // side then negative side for each record.
  Rng rng(config.seed);
  SideVocab pos, neg;
  pos.selected.resize(n);
  neg.selected.resize(n);
  for (size_t i = 0; i < n; ++i) {
    pos.selected[i] = select_feature_word(truth[i].positive_features, rng);
    neg.selected[i] = select_feature_word(truth[i].negative_features, rng);
    if (pos.selected[i]) pos.vocab.insert(*pos.selected[i]);
    if (neg.selected[i]) neg.vocab.insert(*neg.selected[i]);
  }

  // Independent per-instance scores land in pre-sized slots; the loop can run
  // on any number of threads without changing a single bit of the output.
  std::vector<InstanceScores> scores(n);
  kernels::for_each_index(n, [&](size_t i) {
    InstanceScores& s = scores[i];
    const ExplanationRecord& gt = truth[i];
    const Prediction& pred = predictions[i];

    s.truth_label = sentiment_label(gt.features());
    s.generated_label = sentiment_label(pred.features);
    s.sentiment_match = s.truth_label == s.generated_label;

    s.content_p = content_similarity(gt.positive_features, pred.features.positives,
                                     *config.embedder, idf);
    s.content_n = content_similarity(gt.negative_features, pred.features.negatives,
                                     *config.embedder, idf);

    const std::vector<std::string> ref_toks = text::tokens(gt.explanation);
    const std::vector<std::string> cand_toks = text::tokens(pred.explanation);
    s.bleu1 = sentence_bleu(cand_toks, ref_toks, 1);
    s.bleu4 = sentence_bleu(cand_toks, ref_toks, 4);

    for (int order : {1, 2}) {
      const std::vector<std::string> rg = ngrams(ref_toks, order);
      double score = 0.0;
      bool skipped = rg.empty();
      if (!skipped) {
        score = static_cast<double>(clipped_matches(ngrams(cand_toks, order), rg)) /
                static_cast<double>(rg.size());
      }
      if (order == 1) {
        s.rouge1 = score;
        s.rouge1_skipped = skipped;
      } else {
        s.rouge2 = score;
        s.rouge2_skipped = skipped;
      }
    }

    if (!cand_toks.empty() && !ref_toks.empty()) {
      s.bert_f1 = greedy_match_f1(cand_toks, ref_toks, *config.embedder, idf);
    } else {
      s.bert_f1 = 0.0;
    }
  });

  // Serial reductions in input order.
  MetricReport rep;
  rep.n = n;
  rep.embedder_name = config.embedder->name();
  rep.used_idf = config.use_idf;
  rep.seed = config.seed;

  size_t sent_hits = 0, r1_counted = 0, r2_counted = 0;
  double content_p_sum = 0.0, content_n_sum = 0.0;
  double b1_sum = 0.0, b4_sum = 0.0, r1_sum = 0.0, r2_sum = 0.0, bert_sum = 0.0;
  for (const InstanceScores& s : scores) {
    if (s.sentiment_match) ++sent_hits;
    if (s.generated_label == SentimentLabel::Empty) ++rep.empty_generated_labels;
    content_p_sum += s.content_p;
    content_n_sum += s.content_n;
    b1_sum += s.bleu1;
    b4_sum += s.bleu4;
    if (s.rouge1_skipped) {
      ++rep.rouge1_skipped;
    } else {
      r1_sum += s.rouge1;
      ++r1_counted;
    }
    if (s.rouge2_skipped) {
      ++rep.rouge2_skipped;
    } else {
      r2_sum += s.rouge2;
      ++r2_counted;
    }
    bert_sum += s.bert_f1;
  }
  const double dn = static_cast<double>(n);
  rep.sentiment = static_cast<double>(sent_hits) / dn;
  rep.content_p = content_p_sum / dn;
  rep.content_n = content_n_sum / dn;
  rep.bleu1 = b1_sum / dn;
  rep.bleu4 = b4_sum / dn;
  if (r1_counted == 0 || r2_counted == 0) {
    throw ConfigError("evaluate: every reference is shorter than the ROUGE order");
  }
  rep.rouge1 = r1_sum / static_cast<double>(r1_counted);
  rep.rouge2 = r2_sum / static_cast<double>(r2_counted);
  rep.bert = bert_sum / dn;

  std::vector<std::string> generated_texts;
  generated_texts.reserve(n);
  for (const Prediction& p : predictions) generated_texts.push_back(p.explanation);
  rep.usr = usr(generated_texts);

  // A side with no feature phrases anywhere in the truth yields 0.0 for its
  // three metrics instead of an error; the *_eligible diagnostics expose the
  // situation. DIV needs at least two instances to have any pairs.
  auto side_metrics = [&](const SideVocab& side, double* out_fmr, double* out_fcr,
                          double* out_div, size_t* out_eligible) {
    size_t eligible = 0;
    for (const auto& w : side.selected) {
      if (w.has_value()) ++eligible;
    }
    *out_eligible = eligible;
    if (eligible == 0) {
      *out_fmr = 0.0;
      *out_fcr = 0.0;
      *out_div = 0.0;
      return;
    }
    *out_fmr = fmr(side.selected, generated_texts);
    *out_fcr = fcr(side.vocab, generated_texts);
    if (n < 2) {
      *out_div = 0.0;
      return;
    }
    std::vector<std::set<std::string>> per_instance(n);
    for (size_t i = 0; i < n; ++i) {
      for (const std::string& t : text::tokens(generated_texts[i])) {
        if (side.vocab.count(t)) per_instance[i].insert(t);
      }
    }
    *out_div = div_repetition(per_instance);
  };
  side_metrics(pos, &rep.fmr_p, &rep.fcr_p, &rep.div_p, &rep.fmr_p_eligible);
  side_metrics(neg, &rep.fmr_n, &rep.fcr_n, &rep.div_n, &rep.fmr_n_eligible);

  bool all_rated = true;
  for (const Prediction& p : predictions) {
    if (!p.has_rating) {
      all_rated = false;
      break;
    }
  }
  if (all_rated) {
    std::vector<double> rt, rp;
    rt.reserve(n);
    rp.reserve(n);
    for (size_t i = 0; i < n; ++i) {
      rt.push_back(truth[i].rating);
      rp.push_back(predictions[i].predicted_rating);
    }
    const MaeRmse mr = mae_rmse(rt, rp);
    rep.has_rating_error = true;
    rep.mae = mr.mae;
    rep.rmse = mr.rmse;
  }

  if (keep_per_instance) rep.per_instance = std::move(scores);
  return rep;
}

}  // namespace sentrec::metrics
