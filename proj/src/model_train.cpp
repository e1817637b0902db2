#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "sentrec/errors.hpp"
#include "sentrec/model.hpp"
#include "sentrec/rng.hpp"

namespace sentrec::model {

using ad::Mat;
using ad::Tape;

namespace {

void check_train_config(const TrainConfig& tc) {
  if (tc.lr <= 0.0) throw ConfigError("train: lr must be positive");
  if (tc.plateau_factor <= 0.0 || tc.plateau_factor >= 1.0)
    throw ConfigError("train: plateau_factor must be in (0, 1)");
  if (tc.clip_norm <= 0.0) throw ConfigError("train: clip_norm must be positive");
  if (tc.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (tc.weight_decay < 0.0) throw ConfigError("train: weight_decay must be >= 0");
  if (tc.max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
  if (tc.patience < 1) throw ConfigError("train: patience must be >= 1");
  if (tc.lanes < 1) throw ConfigError("train: lanes must be >= 1");
}

std::string format_history(const TrainHistory& h) {
  std::ostringstream os;
  for (size_t i = 0; i < h.epochs.size(); ++i) {
    const EpochStats& e = h.epochs[i];
    os << "epoch " << (i + 1) << ": train=" << e.train_loss << " valid=" << e.valid_loss
       << " lr=" << e.lr << "; ";
  }
  return os.str();
}

// Scales gradients to the batch mean, adds weight decay, applies global-norm
// clipping, then takes one SGD step. `params` and `grads` must be group lists
// over matching structures.
void sgd_step(std::vector<std::pair<std::string, Mat*>>& params,
              std::vector<std::pair<std::string, Mat*>>& grads, size_t batch_n, double lr,
              double weight_decay, double clip_norm) {
  const double inv = 1.0 / static_cast<double>(batch_n);
  double sq = 0.0;
  for (size_t gi = 0; gi < params.size(); ++gi) {
    double* g = grads[gi].second->a.data();
    const double* p = params[gi].second->a.data();
    const size_t n = grads[gi].second->size();
    for (size_t j = 0; j < n; ++j) {
      g[j] = g[j] * inv + weight_decay * p[j];
      sq += g[j] * g[j];
    }
  }
  const double norm = std::sqrt(sq);
  const double scale = norm > clip_norm ? clip_norm / norm : 1.0;
  const double step = lr * scale;
  for (size_t gi = 0; gi < params.size(); ++gi) {
    const double* g = grads[gi].second->a.data();
    double* p = params[gi].second->a.data();
    const size_t n = grads[gi].second->size();
    for (size_t j = 0; j < n; ++j) p[j] -= step * g[j];
  }
}

// Shared epoch/plateau/patience loop. `run_batch` must zero-fill its gradient
// buffers itself and return the summed loss over the batch; `valid_loss` is
// evaluated once per epoch.
template <typename RunBatch, typename ValidLoss, typename Snapshot, typename Restore>
TrainHistory run_epochs(size_t n_train, const TrainConfig& tc, RunBatch&& run_batch,
                        ValidLoss&& valid_loss, Snapshot&& snapshot, Restore&& restore) {
  TrainHistory hist;
  double lr = tc.lr;
  double best_valid = std::numeric_limits<double>::infinity();
  int bad_epochs = 0;

  std::vector<size_t> order(n_train);
  std::iota(order.begin(), order.end(), size_t{0});

  for (int epoch = 0; epoch < tc.max_epochs; ++epoch) {
    Rng shuffle_rng(Rng::mix(tc.seed, static_cast<uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    for (size_t b0 = 0; b0 < order.size(); b0 += static_cast<size_t>(tc.batch_size)) {
      const size_t bn = std::min(static_cast<size_t>(tc.batch_size), order.size() - b0);
      const uint64_t batch_seed = Rng::mix(Rng::mix(tc.seed, static_cast<uint64_t>(epoch)), b0);
      loss_sum += run_batch(order, b0, bn, lr, batch_seed);
    }

    EpochStats stats;
    stats.train_loss = loss_sum / static_cast<double>(n_train);
    stats.valid_loss = valid_loss();
    stats.lr = lr;
    hist.epochs.push_back(stats);

    if (!std::isfinite(stats.train_loss) || !std::isfinite(stats.valid_loss)) {
      throw Error("training diverged (non-finite loss); history: " + format_history(hist));
    }

    if (stats.valid_loss < best_valid - 1e-12) {
      best_valid = stats.valid_loss;
      bad_epochs = 0;
      snapshot();
    } else {
      ++bad_epochs;
      lr *= tc.plateau_factor;
      if (bad_epochs >= tc.patience) {
        hist.stop_reason = "validation loss plateaued";
        break;
      }
    }
  }
  if (hist.stop_reason.empty()) hist.stop_reason = "reached max epochs";
  restore();
  return hist;
}

}  // namespace

TrainHistory train(Model* m, const std::vector<Example>& train_set,
                   const std::vector<Example>& valid_set, const TrainConfig& tc) {
  if (m == nullptr) throw ConfigError("train: null model");
  check_train_config(tc);
  if (train_set.empty()) throw ConfigError("train: empty training set");
  if (valid_set.empty()) throw ConfigError("train: empty validation set");

  ModelParameters grads = zeros_like(m->params);
  auto pgroups = param_groups(m->params);
  auto ggroups = param_groups(grads);
  ModelParameters best = m->params;
  bool have_best = false;

  auto run_batch = [&](const std::vector<size_t>& order, size_t b0, size_t bn, double lr,
                       uint64_t batch_seed) {
    std::vector<Example> batch;
    batch.reserve(bn);
    for (size_t i = 0; i < bn; ++i) batch.push_back(train_set[order[b0 + i]]);
    for (auto& [name, mat] : ggroups) mat->zero();
    const double loss_sum = batch_loss_and_grads(*m, batch, &grads, batch_seed, tc.lanes);
    sgd_step(pgroups, ggroups, bn, lr, tc.weight_decay, tc.clip_norm);
    return loss_sum;
  };
  auto valid_loss = [&] {
    return batch_loss_and_grads(*m, valid_set, nullptr, std::nullopt, tc.lanes) /
           static_cast<double>(valid_set.size());
  };
  auto snapshot = [&] {
    best = m->params;
    have_best = true;
  };
  auto restore = [&] {
    if (have_best) m->params = best;
  };
  return run_epochs(train_set.size(), tc, run_batch, valid_loss, snapshot, restore);
}

GradCheckResult gradient_check(const ModelConfig& config, uint64_t seed) {
  config.validate();
  Model m;
  m.cfg = config;
  m.vocab.words = {"<pad>", "<bos>", "<eos>", "<unk>"};
  for (int w = 4; w < config.vocab_size; ++w) m.vocab.words.push_back("w" + std::to_string(w));
  for (size_t i = 0; i < m.vocab.words.size(); ++i)
    m.vocab.index[m.vocab.words[i]] = static_cast<int>(i);
  std::vector<std::string> users, items;
  for (int u = 0; u < config.n_users; ++u) users.push_back("u" + std::to_string(u));
  for (int i = 0; i < config.n_items; ++i) items.push_back("i" + std::to_string(i));
  m.users = IdMap::build(users);
  m.items = IdMap::build(items);
  m.params = init_model(config);

  Rng rng(Rng::mix(seed, 0x6772616463686bULL));  // distinct stream per caller seed
  std::vector<Example> batch;
  for (int e = 0; e < 3; ++e) {
    Example ex;
    ex.user = static_cast<int>(rng.next_below(static_cast<uint64_t>(config.n_users)));
    ex.item = static_cast<int>(rng.next_below(static_cast<uint64_t>(config.n_items)));
    const double rating =
        static_cast<double>(rng.next_range(1, config.max_rating));
    ex.input_rating = rating;
    ex.target_rating = rating;
    const int len = 2 + static_cast<int>(rng.next_below(3));
    for (int t = 0; t < len && t < config.max_len; ++t) {
      ex.words.push_back(4 + static_cast<int>(
                                 rng.next_below(static_cast<uint64_t>(config.vocab_size - 4))));
    }
    batch.push_back(std::move(ex));
  }

  ModelParameters grads = zeros_like(m.params);
  batch_loss_and_grads(m, batch, &grads, std::nullopt, 1);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const double h = 1e-5;

  GradCheckResult res;
  auto pgroups = param_groups(m.params);
  auto ggroups = param_groups(grads);
  for (size_t gi = 0; gi < pgroups.size(); ++gi) {
    Mat& pm = *pgroups[gi].second;
    const Mat& gm = *ggroups[gi].second;
    double worst = 0.0;
    for (size_t k = 0; k < pm.size(); ++k) {
      const double orig = pm.a[k];
      pm.a[k] = orig + h;
      const double lp =
          batch_loss_and_grads(m, batch, nullptr, std::nullopt, 1) * inv_b;
      pm.a[k] = orig - h;
      const double lm =
          batch_loss_and_grads(m, batch, nullptr, std::nullopt, 1) * inv_b;
      pm.a[k] = orig;
      const double numeric = (lp - lm) / (2.0 * h);
      const double analytic = gm.a[k] * inv_b;
      const double rel = std::abs(numeric - analytic) /
                         std::max({1.0, std::abs(numeric), std::abs(analytic)});
      worst = std::max(worst, rel);
    }
    res.per_group[pgroups[gi].first] = worst;
    if (worst > res.max_rel_err) {
      res.max_rel_err = worst;
      res.worst_group = pgroups[gi].first;
    }
  }
  return res;
}

// ---- rating predictor -------------------------------------------------------

namespace {

// Builds the batched MLP graph and returns the prediction column (B x 1).
Tape::Id predictor_graph(Tape& tape, const RatingPredictor& p, RatingPredictor* g,
                         const std::vector<Example>& batch) {
  std::vector<int> urows, irows;
  urows.reserve(batch.size());
  irows.reserve(batch.size());
  for (const Example& ex : batch) {
    urows.push_back(ex.user);
    irows.push_back(ex.item);
  }
  auto gs = [&](Mat RatingPredictor::* field) -> Mat* { return g ? &(g->*field) : nullptr; };
  Tape::Id u = tape.gather_rows(&p.user_table, gs(&RatingPredictor::user_table), urows);
  Tape::Id i = tape.gather_rows(&p.item_table, gs(&RatingPredictor::item_table), irows);
  Tape::Id x = tape.concat_cols({u, i});
  Tape::Id z1 = tape.relu(tape.add_rowvec(
      tape.matmul(x, tape.leaf(&p.w1, gs(&RatingPredictor::w1))),
      tape.leaf(&p.b1, gs(&RatingPredictor::b1))));
  Tape::Id z2 = tape.relu(tape.add_rowvec(
      tape.matmul(z1, tape.leaf(&p.w2, gs(&RatingPredictor::w2))),
      tape.leaf(&p.b2, gs(&RatingPredictor::b2))));
  return tape.add_rowvec(tape.matmul(z2, tape.leaf(&p.w3, gs(&RatingPredictor::w3))),
                         tape.leaf(&p.b3, gs(&RatingPredictor::b3)));
}

double predictor_batch_loss(const RatingPredictor& p, RatingPredictor* g,
                            const std::vector<Example>& batch) {
  Tape tape;
  Tape::Id out = predictor_graph(tape, p, g, batch);
  std::vector<double> targets;
  targets.reserve(batch.size());
  for (const Example& ex : batch) targets.push_back(ex.target_rating);
  Tape::Id loss = tape.mean_squared_error_col(out, std::move(targets));
  const double value = tape.scalar(loss);
  if (g != nullptr) tape.backward(loss);
  return value;
}

}  // namespace

TrainHistory train_predictor(RatingPredictor* p, const std::vector<Example>& train_set,
                             const std::vector<Example>& valid_set, const TrainConfig& tc) {
  if (p == nullptr) throw ConfigError("train_predictor: null predictor");
  check_train_config(tc);
  if (train_set.empty()) throw ConfigError("train_predictor: empty training set");
  if (valid_set.empty()) throw ConfigError("train_predictor: empty validation set");

  RatingPredictor grads = *p;
  for (auto& [name, mat] : predictor_groups(grads)) mat->zero();
  auto pgroups = predictor_groups(*p);
  auto ggroups = predictor_groups(grads);

  std::vector<Mat> best;
  auto run_batch = [&](const std::vector<size_t>& order, size_t b0, size_t bn, double lr,
                       uint64_t /*batch_seed*/) {
    std::vector<Example> batch;
    batch.reserve(bn);
    for (size_t i = 0; i < bn; ++i) batch.push_back(train_set[order[b0 + i]]);
    for (auto& [name, mat] : ggroups) mat->zero();
    const double mean_loss = predictor_batch_loss(*p, &grads, batch);
    // The MSE node already averages over the batch, so the per-batch gradient
    // is a mean as well; feed batch_n = 1 to keep sgd_step from re-scaling.
    sgd_step(pgroups, ggroups, 1, lr, tc.weight_decay, tc.clip_norm);
    return mean_loss * static_cast<double>(bn);
  };
  auto valid_loss = [&] { return predictor_batch_loss(*p, nullptr, valid_set); };
  auto snapshot = [&] {
    best.clear();
    for (auto& [name, mat] : pgroups) best.push_back(*mat);
  };
  auto restore = [&] {
    if (best.empty()) return;
    for (size_t i = 0; i < pgroups.size(); ++i) *pgroups[i].second = best[i];
  };
  return run_epochs(train_set.size(), tc, run_batch, valid_loss, snapshot, restore);
}

}  // namespace sentrec::model
