#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sentrec/ad.hpp"
#include "sentrec/types.hpp"

namespace sentrec::model {

// How the (possibly predicted) rating reaches the explanation generator.
//   None    - no rating information
//   Subtask - no rating input; an auxiliary head predicts it (extra loss term)
//   CEmb    - continuous injection: rating times a trainable vector
//   DEmb    - discrete injection: embedding row looked up at the rounded rating
enum class RatingMode { None, Subtask, CEmb, DEmb };

std::string rating_mode_name(RatingMode mode);
RatingMode rating_mode_from_name(const std::string& name);

struct ModelConfig {
  int n_layers = 2;
  int n_heads = 2;
  int embed_dim = 64;
  int ffn_dim = 256;
  double dropout = 0.2;
  int max_len = 15;            // generated words, excluding the end marker
  int vocab_size = 0;          // includes the 4 specials
  int n_users = 0;
  int n_items = 0;
  int max_rating = 5;
  RatingMode rating_mode = RatingMode::None;
  double lambda_e = 1.0;
  double lambda_c = 1.0;
  double lambda_r = 0.1;
  int rating_head_hidden = 400;
  uint64_t seed = 0;

  int prefix_len() const {
    return rating_mode == RatingMode::CEmb || rating_mode == RatingMode::DEmb ? 3 : 2;
  }
  void validate() const;

  // Paper-scale dimensions (d=512, ffn=2048); everything else shared.
  static ModelConfig paper_scale();
};

struct LayerParams {
  ad::Mat wq, bq, wk, bk, wv, bv, wo, bo;
  ad::Mat ln1_g, ln1_b, ln2_g, ln2_b;
  ad::Mat ff1_w, ff1_b, ff2_w, ff2_b;
};

struct ModelParameters {
  ad::Mat user_table, item_table, word_table;
  ad::Mat rating_vec;    // 1 x d      (c-emb)
  ad::Mat rating_table;  // (max_rating+1) x d (d-emb)
  std::vector<LayerParams> layers;
  ad::Mat out_w, out_b;  // word head
  ad::Mat ctx_w, ctx_b;  // context head
  ad::Mat rh1_w, rh1_b, rh2_w, rh2_b, rh3_w, rh3_b;  // subtask rating head
};

// Named views over every tensor, in a fixed order shared by init, SGD,
// checkpointing and the gradient checker.
std::vector<std::pair<std::string, ad::Mat*>> param_groups(ModelParameters& p);

// Allocate and seed all tables: uniform [-0.1, 0.1] for embeddings, scaled
// uniform (Xavier) for weight matrices, zeros for biases, ones for norm gains.
ModelParameters init_model(const ModelConfig& config);

// Same shapes as `p`, all entries zero. Gradient accumulation buffer.
ModelParameters zeros_like(const ModelParameters& p);

// Token ids: 0 <pad>, 1 <bos>, 2 <eos>, 3 <unk>, then corpus words.
struct Vocab {
  std::vector<std::string> words;
  std::map<std::string, int> index;
  static constexpr int kPad = 0, kBos = 1, kEos = 2, kUnk = 3;
  int encode(const std::string& word) const;
  int size() const { return static_cast<int>(words.size()); }
};
Vocab build_vocab(const std::vector<ExplanationRecord>& train_records);

struct IdMap {
  std::vector<std::string> names;
  std::map<std::string, int> index;
  int require(const std::string& name) const;  // throws on unknown id
  static IdMap build(const std::vector<std::string>& names);
};

struct Model {
  ModelConfig cfg;
  Vocab vocab;
  IdMap users, items;
  ModelParameters params;
};

// One training/eval example. `words` are vocab ids of the explanation tokens
// (no specials). `input_rating` feeds c-emb/d-emb; `target_rating` is the
// subtask regression target.
struct Example {
  int user = 0;
  int item = 0;
  double input_rating = 0.0;
  double target_rating = 0.0;
  std::vector<int> words;
};

Example make_example(const Model& m, const ExplanationRecord& record,
                     std::optional<double> rating_input = std::nullopt);

// The row injected at the rating position of the input sequence:
//   c-emb -> rating * v, linear in the rating by construction
//   d-emb -> the rating_table row at the rounded (clamped) rating, so the
//            result is a function of the rounded index only
// Throws ConfigError for modes without a rating position.
ad::Mat rating_embedding(const ModelParameters& params, RatingMode mode, double rating,
                         int max_rating);

// ---- forward / loss ---------------------------------------------------------

struct ForwardResult {
  ad::Mat word_logits;  // text_len x vocab; row t predicts the token after input t
  ad::Mat ctx_logits;   // 1 x vocab, from the item position
  double rating_out = 0.0;  // subtask head output (0 unless Subtask)
};

// Inference-mode forward (no dropout). `token_prefix` must start with <bos>
// and may be at most max_len + 1 tokens long.
ForwardResult forward(const Model& m, int user, int item, double input_rating,
                      const std::vector<int>& token_prefix);

// Mean combined loss over a batch, eval mode (no dropout).
double batch_loss(const Model& m, const std::vector<Example>& batch);

// Sum of per-example losses; per-example gradients are accumulated into
// `grads` (same shapes as the parameters) when non-null. Work is fanned out
// over `lanes` fixed accumulation lanes (parallelized when OpenMP is on);
// lane assignment and the final lane-order reduction are independent of the
// thread count, so results are bit-identical in serial and parallel runs.
// `dropout_seed` enables train-mode dropout with per-example derived streams;
// pass std::nullopt for eval mode.
double batch_loss_and_grads(const Model& m, const std::vector<Example>& batch,
                            ModelParameters* grads, std::optional<uint64_t> dropout_seed,
                            int lanes);

// ---- training ----------------------------------------------------------------

struct TrainConfig {
  double lr = 1.0;
  double plateau_factor = 0.25;
  double clip_norm = 1.0;
  int batch_size = 128;
  double weight_decay = 0.0;
  int max_epochs = 50;
  int patience = 5;
  int lanes = 8;
  uint64_t seed = 0;
};

struct EpochStats {
  double train_loss = 0.0;
  double valid_loss = 0.0;
  double lr = 0.0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  std::string stop_reason;
};

// Plain SGD with global-norm clipping and plateau decay. Non-improving
// validation epochs decay the learning rate by plateau_factor; `patience`
// consecutive non-improving epochs stop the run. The best-validation
// parameters are restored at exit. Throws on divergence (non-finite loss)
// with the history formatted into the message.
TrainHistory train(Model* m, const std::vector<Example>& train_set,
                   const std::vector<Example>& valid_set, const TrainConfig& tc);

// Greedy argmax decoding until <eos> or max_len words. Specials other than
// <eos> are excluded from the argmax. Deterministic.
std::string generate_explanation(const Model& m, const std::string& user_id,
                                 const std::string& item_id, double input_rating);

// Subtask-head rating for one (user, item), clamped to [1, max_rating].
double subtask_rating(const Model& m, const std::string& user_id, const std::string& item_id);

// ---- gradient check ------------------------------------------------------------

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst_group;
  std::map<std::string, double> per_group;
};

// Central finite differences (h = 1e-5) against the analytic gradients of the
// mean batch loss, every element of every parameter group, dropout off.
// Relative error uses max(1, |analytic|, |numeric|) in the denominator.
GradCheckResult gradient_check(const ModelConfig& config, uint64_t seed);

// ---- rating predictor (external MLP) -------------------------------------------

struct PredictorConfig {
  int embed_dim = 64;
  int hidden = 400;  // two hidden layers of this width
  int max_rating = 5;
  uint64_t seed = 0;
};

struct RatingPredictor {
  PredictorConfig cfg;
  IdMap users, items;
  ad::Mat user_table, item_table;
  ad::Mat w1, b1, w2, b2, w3, b3;
};

std::vector<std::pair<std::string, ad::Mat*>> predictor_groups(RatingPredictor& p);

RatingPredictor init_predictor(const PredictorConfig& cfg, const IdMap& users,
                               const IdMap& items);

// Squared-error training with the same SGD/plateau/patience scheme as the
// generator. Weight decay applies to every parameter group.
TrainHistory train_predictor(RatingPredictor* p, const std::vector<Example>& train_set,
                             const std::vector<Example>& valid_set, const TrainConfig& tc);

// Clamped to [1, max_rating]. Throws on unknown user or item.
double predict_rating(const RatingPredictor& p, const std::string& user_id,
                      const std::string& item_id);

// ---- checkpoints ------------------------------------------------------------------

// Versioned binary container; round-trips bit-exactly.
void save_model(const Model& m, const std::string& path);
Model load_model(const std::string& path);
void save_predictor(const RatingPredictor& p, const std::string& path);
RatingPredictor load_predictor(const std::string& path);

}  // namespace sentrec::model
