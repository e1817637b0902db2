#include "sentrec/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "sentrec/corpus.hpp"
#include "sentrec/errors.hpp"
#include "sentrec/kernels.hpp"
#include "sentrec/rng.hpp"
#include "sentrec/text.hpp"

#include "json.hpp"

namespace sentrec::model {

using ad::Mat;
using ad::Tape;

std::string rating_mode_name(RatingMode mode) {
  switch (mode) {
    case RatingMode::None: return "none";
    case RatingMode::Subtask: return "subtask";
    case RatingMode::CEmb: return "c-emb";
    case RatingMode::DEmb: return "d-emb";
  }
  throw Error("rating_mode_name: bad enum value");
}

RatingMode rating_mode_from_name(const std::string& name) {
  if (name == "none") return RatingMode::None;
  if (name == "subtask") return RatingMode::Subtask;
  if (name == "c-emb") return RatingMode::CEmb;
  if (name == "d-emb") return RatingMode::DEmb;
  throw ConfigError("unknown rating mode '" + name +
                    "' (expected none, subtask, c-emb or d-emb)");
}

void ModelConfig::validate() const {
  if (n_layers < 1) throw ConfigError("model: n_layers must be >= 1");
  if (n_heads < 1) throw ConfigError("model: n_heads must be >= 1");
  if (embed_dim < 1) throw ConfigError("model: embed_dim must be >= 1");
  if (embed_dim % n_heads != 0)
    throw ConfigError("model: embed_dim must be divisible by n_heads");
  if (ffn_dim < 1) throw ConfigError("model: ffn_dim must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("model: dropout must be in [0, 1)");
  if (max_len < 1) throw ConfigError("model: max_len must be >= 1");
  if (vocab_size < 4) throw ConfigError("model: vocab_size must cover the 4 specials");
  if (n_users < 1 || n_items < 1) throw ConfigError("model: need at least one user and item");
  if (max_rating < 1) throw ConfigError("model: max_rating must be >= 1");
  if (lambda_e < 0.0 || lambda_c < 0.0 || lambda_r < 0.0)
    throw ConfigError("model: loss weights must be non-negative");
  if (rating_head_hidden < 1) throw ConfigError("model: rating_head_hidden must be >= 1");
}

ModelConfig ModelConfig::paper_scale() {
  ModelConfig c;
  c.embed_dim = 512;
  c.ffn_dim = 2048;
  return c;
}

std::vector<std::pair<std::string, Mat*>> param_groups(ModelParameters& p) {
  std::vector<std::pair<std::string, Mat*>> g;
  g.emplace_back("user_table", &p.user_table);
  g.emplace_back("item_table", &p.item_table);
  g.emplace_back("word_table", &p.word_table);
  g.emplace_back("rating_vec", &p.rating_vec);
  g.emplace_back("rating_table", &p.rating_table);
  for (size_t l = 0; l < p.layers.size(); ++l) {
    const std::string pre = "layer" + std::to_string(l) + ".";
    LayerParams& lp = p.layers[l];
    g.emplace_back(pre + "q_w", &lp.wq);
    g.emplace_back(pre + "q_b", &lp.bq);
    g.emplace_back(pre + "k_w", &lp.wk);
    g.emplace_back(pre + "k_b", &lp.bk);
    g.emplace_back(pre + "v_w", &lp.wv);
    g.emplace_back(pre + "v_b", &lp.bv);
    g.emplace_back(pre + "o_w", &lp.wo);
    g.emplace_back(pre + "o_b", &lp.bo);
    g.emplace_back(pre + "ln1_g", &lp.ln1_g);
    g.emplace_back(pre + "ln1_b", &lp.ln1_b);
    g.emplace_back(pre + "ln2_g", &lp.ln2_g);
    g.emplace_back(pre + "ln2_b", &lp.ln2_b);
    g.emplace_back(pre + "ffn1_w", &lp.ff1_w);
    g.emplace_back(pre + "ffn1_b", &lp.ff1_b);
    g.emplace_back(pre + "ffn2_w", &lp.ff2_w);
    g.emplace_back(pre + "ffn2_b", &lp.ff2_b);
  }
  g.emplace_back("out_w", &p.out_w);
  g.emplace_back("out_b", &p.out_b);
  g.emplace_back("ctx_w", &p.ctx_w);
  g.emplace_back("ctx_b", &p.ctx_b);
  g.emplace_back("rhead1_w", &p.rh1_w);
  g.emplace_back("rhead1_b", &p.rh1_b);
  g.emplace_back("rhead2_w", &p.rh2_w);
  g.emplace_back("rhead2_b", &p.rh2_b);
  g.emplace_back("rhead3_w", &p.rh3_w);
  g.emplace_back("rhead3_b", &p.rh3_b);
  return g;
}

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void seed_group(const std::string& name, Mat& m, Rng& rng) {
  if (ends_with(name, "_g")) {
    std::fill(m.a.begin(), m.a.end(), 1.0);
  } else if (ends_with(name, "_b")) {
    m.zero();
  } else if (name.find("table") != std::string::npos || name == "rating_vec") {
    for (double& x : m.a) x = rng.next_double() * 0.2 - 0.1;
  } else {
    const double s = std::sqrt(6.0 / static_cast<double>(m.rows + m.cols));
    for (double& x : m.a) x = (rng.next_double() * 2.0 - 1.0) * s;
  }
}

}  // namespace

ModelParameters init_model(const ModelConfig& c) {
  c.validate();
  const int d = c.embed_dim;
  ModelParameters p;
  p.user_table = Mat(c.n_users, d);
  p.item_table = Mat(c.n_items, d);
  p.word_table = Mat(c.vocab_size, d);
  p.rating_vec = Mat(1, d);
  p.rating_table = Mat(c.max_rating + 1, d);
  p.layers.resize(static_cast<size_t>(c.n_layers));
  for (LayerParams& lp : p.layers) {
    lp.wq = Mat(d, d);
    lp.bq = Mat(1, d);
    lp.wk = Mat(d, d);
    lp.bk = Mat(1, d);
    lp.wv = Mat(d, d);
    lp.bv = Mat(1, d);
    lp.wo = Mat(d, d);
    lp.bo = Mat(1, d);
    lp.ln1_g = Mat(1, d);
    lp.ln1_b = Mat(1, d);
    lp.ln2_g = Mat(1, d);
    lp.ln2_b = Mat(1, d);
    lp.ff1_w = Mat(d, c.ffn_dim);
    lp.ff1_b = Mat(1, c.ffn_dim);
    lp.ff2_w = Mat(c.ffn_dim, d);
    lp.ff2_b = Mat(1, d);
  }
  p.out_w = Mat(d, c.vocab_size);
  p.out_b = Mat(1, c.vocab_size);
  p.ctx_w = Mat(d, c.vocab_size);
  p.ctx_b = Mat(1, c.vocab_size);
  p.rh1_w = Mat(d, c.rating_head_hidden);
  p.rh1_b = Mat(1, c.rating_head_hidden);
  p.rh2_w = Mat(c.rating_head_hidden, c.rating_head_hidden);
  p.rh2_b = Mat(1, c.rating_head_hidden);
  p.rh3_w = Mat(c.rating_head_hidden, 1);
  p.rh3_b = Mat(1, 1);

  Rng rng(c.seed);
  for (auto& [name, mat] : param_groups(p)) seed_group(name, *mat, rng);
  return p;
}

ModelParameters zeros_like(const ModelParameters& p) {
  ModelParameters z = p;
  for (auto& [name, mat] : param_groups(z)) mat->zero();
  return z;
}

int Vocab::encode(const std::string& word) const {
  auto it = index.find(word);
  return it == index.end() ? kUnk : it->second;
}

Vocab build_vocab(const std::vector<ExplanationRecord>& train_records) {
  std::set<std::string> seen;
  for (const ExplanationRecord& r : train_records) {
    for (const std::string& w : text::tokens(r.explanation)) seen.insert(w);
  }
  Vocab v;
  v.words = {"<pad>", "<bos>", "<eos>", "<unk>"};
  v.words.insert(v.words.end(), seen.begin(), seen.end());
  for (size_t i = 0; i < v.words.size(); ++i) v.index[v.words[i]] = static_cast<int>(i);
  return v;
}

int IdMap::require(const std::string& name) const {
  auto it = index.find(name);
  if (it == index.end()) throw Error("unknown id '" + name + "'");
  return it->second;
}

IdMap IdMap::build(const std::vector<std::string>& names) {
  IdMap m;
  m.names = names;
  for (size_t i = 0; i < names.size(); ++i) {
    if (!m.index.emplace(names[i], static_cast<int>(i)).second)
      throw Error("duplicate id '" + names[i] + "'");
  }
  return m;
}

Example make_example(const Model& m, const ExplanationRecord& record,
                     std::optional<double> rating_input) {
  Example e;
  e.user = m.users.require(record.user_id);
  e.item = m.items.require(record.item_id);
  e.target_rating = record.rating;
  e.input_rating = rating_input.has_value() ? *rating_input : record.rating;
  for (const std::string& w : text::tokens(record.explanation)) {
    if (static_cast<int>(e.words.size()) >= m.cfg.max_len) break;
    e.words.push_back(m.vocab.encode(w));
  }
  return e;
}

Mat rating_embedding(const ModelParameters& params, RatingMode mode, double rating,
                     int max_rating) {
  if (mode == RatingMode::CEmb) {
    Mat out(1, params.rating_vec.cols);
    for (int j = 0; j < out.cols; ++j) out.a[static_cast<size_t>(j)] = rating * params.rating_vec.a[static_cast<size_t>(j)];
    return out;
  }
  if (mode == RatingMode::DEmb) {
    const int slot = corpus::round_rating(rating, max_rating);
    Mat out(1, params.rating_table.cols);
    for (int j = 0; j < out.cols; ++j) out.a[static_cast<size_t>(j)] = params.rating_table.at(slot, j);
    return out;
  }
  throw ConfigError("rating_embedding: mode '" + rating_mode_name(mode) +
                    "' has no rating input");
}

namespace {

Mat positional_encoding(int len, int d) {
  Mat pe(len, d);
  for (int pos = 0; pos < len; ++pos) {
    for (int i = 0; i < d; i += 2) {
      const double angle = pos / std::pow(10000.0, static_cast<double>(i) / d);
      pe.at(pos, i) = std::sin(angle);
      if (i + 1 < d) pe.at(pos, i + 1) = std::cos(angle);
    }
  }
  return pe;
}

struct GraphIds {
  Tape::Id word_logits = -1;
  Tape::Id ctx_logits = -1;
  Tape::Id rating = -1;  // -1 unless the subtask head is active
};

// Builds the full forward graph for one (user, item, rating, token prefix)
// tuple. `g` non-null routes gradients into the matching parameter buffers;
// `drop` non-null applies train-mode (inverted) dropout with masks drawn from
// it in a fixed order.
GraphIds build_graph(Tape& tape, const Model& m, int user, int item, double input_rating,
                     const std::vector<int>& tokens, ModelParameters* g, Rng* drop) {
  const ModelConfig& c = m.cfg;
  const ModelParameters& P = m.params;
  const int prefix = c.prefix_len();
  const int n_text = static_cast<int>(tokens.size());
  const int L = prefix + n_text;
  const int d = c.embed_dim;
  const int dh = d / c.n_heads;

  auto gs = [&](Mat ModelParameters::* field) -> Mat* { return g ? &(g->*field) : nullptr; };
  auto dropout = [&](Tape::Id x) -> Tape::Id {
    if (drop == nullptr || c.dropout <= 0.0) return x;
    const Mat& v = tape.value(x);
    Mat mask(v.rows, v.cols);
    const double keep = 1.0 - c.dropout;
    for (double& e : mask.a) e = drop->next_double() < keep ? 1.0 / keep : 0.0;
    return tape.mul_const(x, mask);
  };

  std::vector<Tape::Id> parts;
  parts.push_back(tape.gather_rows(&P.user_table, gs(&ModelParameters::user_table), {user}));
  parts.push_back(tape.gather_rows(&P.item_table, gs(&ModelParameters::item_table), {item}));
  if (c.rating_mode == RatingMode::CEmb) {
    parts.push_back(
        tape.scale(tape.leaf(&P.rating_vec, gs(&ModelParameters::rating_vec)), input_rating));
  } else if (c.rating_mode == RatingMode::DEmb) {
    const int slot = corpus::round_rating(input_rating, c.max_rating);
    parts.push_back(
        tape.gather_rows(&P.rating_table, gs(&ModelParameters::rating_table), {slot}));
  }
  parts.push_back(tape.gather_rows(&P.word_table, gs(&ModelParameters::word_table), tokens));

  Tape::Id x = tape.concat_rows(parts);
  x = tape.scale(x, std::sqrt(static_cast<double>(d)));
  x = tape.add(x, tape.constant(positional_encoding(L, d)));
  x = dropout(x);

  for (int l = 0; l < c.n_layers; ++l) {
    const LayerParams& lp = P.layers[static_cast<size_t>(l)];
    auto gl = [&](Mat LayerParams::* field) -> Mat* {
      return g ? &(g->layers[static_cast<size_t>(l)].*field) : nullptr;
    };
    auto lin = [&](Tape::Id in, const Mat& w, Mat* gw, const Mat& b, Mat* gb) {
      return tape.add_rowvec(tape.matmul(in, tape.leaf(&w, gw)), tape.leaf(&b, gb));
    };

    // Pre-norm self-attention block.
    Tape::Id h = tape.layer_norm(x, tape.leaf(&lp.ln1_g, gl(&LayerParams::ln1_g)),
                                 tape.leaf(&lp.ln1_b, gl(&LayerParams::ln1_b)));
    Tape::Id q = lin(h, lp.wq, gl(&LayerParams::wq), lp.bq, gl(&LayerParams::bq));
    Tape::Id k = lin(h, lp.wk, gl(&LayerParams::wk), lp.bk, gl(&LayerParams::bk));
    Tape::Id v = lin(h, lp.wv, gl(&LayerParams::wv), lp.bv, gl(&LayerParams::bv));
    std::vector<Tape::Id> heads;
    for (int hd = 0; hd < c.n_heads; ++hd) {
      Tape::Id qh = tape.slice_cols(q, hd * dh, dh);
      Tape::Id kh = tape.slice_cols(k, hd * dh, dh);
      Tape::Id vh = tape.slice_cols(v, hd * dh, dh);
      Tape::Id scores = tape.scale(tape.matmul_nt(qh, kh), 1.0 / std::sqrt(static_cast<double>(dh)));
      Tape::Id probs = tape.attention_softmax(scores, prefix);
      heads.push_back(tape.matmul(probs, vh));
    }
    Tape::Id att = lin(tape.concat_cols(heads), lp.wo, gl(&LayerParams::wo), lp.bo,
                       gl(&LayerParams::bo));
    x = tape.add(x, dropout(att));

    // Pre-norm feed-forward block.
    Tape::Id h2 = tape.layer_norm(x, tape.leaf(&lp.ln2_g, gl(&LayerParams::ln2_g)),
                                  tape.leaf(&lp.ln2_b, gl(&LayerParams::ln2_b)));
    Tape::Id f = tape.relu(lin(h2, lp.ff1_w, gl(&LayerParams::ff1_w), lp.ff1_b,
                               gl(&LayerParams::ff1_b)));
    f = lin(f, lp.ff2_w, gl(&LayerParams::ff2_w), lp.ff2_b, gl(&LayerParams::ff2_b));
    x = tape.add(x, dropout(f));
  }

  GraphIds out;
  Tape::Id text_h = tape.slice_rows(x, prefix, n_text);
  out.word_logits = tape.add_rowvec(
      tape.matmul(text_h, tape.leaf(&P.out_w, gs(&ModelParameters::out_w))),
      tape.leaf(&P.out_b, gs(&ModelParameters::out_b)));
  Tape::Id item_h = tape.slice_rows(x, 1, 1);
  out.ctx_logits = tape.add_rowvec(
      tape.matmul(item_h, tape.leaf(&P.ctx_w, gs(&ModelParameters::ctx_w))),
      tape.leaf(&P.ctx_b, gs(&ModelParameters::ctx_b)));
  if (c.rating_mode == RatingMode::Subtask) {
    Tape::Id user_h = tape.slice_rows(x, 0, 1);
    Tape::Id z1 = tape.relu(tape.add_rowvec(
        tape.matmul(user_h, tape.leaf(&P.rh1_w, gs(&ModelParameters::rh1_w))),
        tape.leaf(&P.rh1_b, gs(&ModelParameters::rh1_b))));
    Tape::Id z2 = tape.relu(tape.add_rowvec(
        tape.matmul(z1, tape.leaf(&P.rh2_w, gs(&ModelParameters::rh2_w))),
        tape.leaf(&P.rh2_b, gs(&ModelParameters::rh2_b))));
    out.rating = tape.add_rowvec(
        tape.matmul(z2, tape.leaf(&P.rh3_w, gs(&ModelParameters::rh3_w))),
        tape.leaf(&P.rh3_b, gs(&ModelParameters::rh3_b)));
  }
  return out;
}

// Combined loss for one example; gradients land in `g` when non-null.
double example_loss(const Model& m, const Example& ex, ModelParameters* g, Rng* drop) {
  Tape tape;
  std::vector<int> tokens;
  tokens.reserve(ex.words.size() + 1);
  tokens.push_back(Vocab::kBos);
  tokens.insert(tokens.end(), ex.words.begin(), ex.words.end());
  std::vector<int> targets = ex.words;
  targets.push_back(Vocab::kEos);

  GraphIds ids = build_graph(tape, m, ex.user, ex.item, ex.input_rating, tokens, g, drop);
  std::vector<std::pair<Tape::Id, double>> terms;
  terms.emplace_back(tape.cross_entropy_rows(ids.word_logits, targets), m.cfg.lambda_e);
  if (m.cfg.lambda_c != 0.0 && !ex.words.empty()) {
    terms.emplace_back(tape.cross_entropy_bag(ids.ctx_logits, ex.words), m.cfg.lambda_c);
  }
  if (ids.rating >= 0 && m.cfg.lambda_r != 0.0) {
    terms.emplace_back(tape.squared_error(ids.rating, ex.target_rating), m.cfg.lambda_r);
  }
  Tape::Id loss = tape.weighted_sum(terms);
  const double value = tape.scalar(loss);
  if (g != nullptr) tape.backward(loss);
  return value;
}

void add_into(ModelParameters& dst, ModelParameters& src) {
  auto d = param_groups(dst);
  auto s = param_groups(src);
  for (size_t i = 0; i < d.size(); ++i) {
    double* out = d[i].second->a.data();
    const double* in = s[i].second->a.data();
    const size_t n = d[i].second->size();
    for (size_t j = 0; j < n; ++j) out[j] += in[j];
  }
}

}  // namespace

ForwardResult forward(const Model& m, int user, int item, double input_rating,
                      const std::vector<int>& token_prefix) {
  if (token_prefix.empty() || token_prefix.front() != Vocab::kBos)
    throw Error("forward: token prefix must start with <bos>");
  if (static_cast<int>(token_prefix.size()) > m.cfg.max_len + 1)
    throw Error("forward: token prefix longer than max_len");
  Tape tape;
  GraphIds ids = build_graph(tape, m, user, item, input_rating, token_prefix, nullptr, nullptr);
  ForwardResult r;
  r.word_logits = tape.value(ids.word_logits);
  r.ctx_logits = tape.value(ids.ctx_logits);
  if (ids.rating >= 0) r.rating_out = tape.scalar(ids.rating);
  return r;
}

double batch_loss(const Model& m, const std::vector<Example>& batch) {
  if (batch.empty()) return 0.0;
  return batch_loss_and_grads(m, batch, nullptr, std::nullopt, 8) /
         static_cast<double>(batch.size());
}

double batch_loss_and_grads(const Model& m, const std::vector<Example>& batch,
                            ModelParameters* grads, std::optional<uint64_t> dropout_seed,
                            int lanes) {
  if (batch.empty()) return 0.0;
  size_t n_lanes = static_cast<size_t>(std::max(1, lanes));
  n_lanes = std::min(n_lanes, batch.size());

  std::vector<double> lane_loss(n_lanes, 0.0);
  std::vector<ModelParameters> lane_grads;
  if (grads != nullptr) {
    lane_grads.reserve(n_lanes);
    for (size_t l = 0; l < n_lanes; ++l) lane_grads.push_back(zeros_like(m.params));
  }

  // Examples are assigned to lanes by index stride and each lane accumulates
  // into its own buffers, so the arithmetic (and hence the result, bitwise)
  // does not depend on how many threads execute the lanes.
  kernels::for_each_index(n_lanes, [&](size_t lane) {
    ModelParameters* lg = grads != nullptr ? &lane_grads[lane] : nullptr;
    for (size_t i = lane; i < batch.size(); i += n_lanes) {
      Rng drop_rng(0);
      Rng* drop = nullptr;
      if (dropout_seed.has_value()) {
        drop_rng = Rng(Rng::mix(*dropout_seed, static_cast<uint64_t>(i)));
        drop = &drop_rng;
      }
      lane_loss[lane] += example_loss(m, batch[i], lg, drop);
    }
  });

  double total = 0.0;
  for (double v : lane_loss) total += v;
  if (grads != nullptr) {
    for (size_t l = 0; l < n_lanes; ++l) add_into(*grads, lane_grads[l]);
  }
  return total;
}

std::string generate_explanation(const Model& m, const std::string& user_id,
                                 const std::string& item_id, double input_rating) {
  const int user = m.users.require(user_id);
  const int item = m.items.require(item_id);
  std::vector<int> tokens = {Vocab::kBos};
  std::vector<std::string> words;
  for (int step = 0; step < m.cfg.max_len; ++step) {
    const ForwardResult r = forward(m, user, item, input_rating, tokens);
    const double* logits = r.word_logits.row_ptr(r.word_logits.rows - 1);
    int best = -1;
    double best_v = -std::numeric_limits<double>::infinity();
    for (int w = 0; w < m.cfg.vocab_size; ++w) {
      if (w == Vocab::kPad || w == Vocab::kBos || w == Vocab::kUnk) continue;
      if (logits[w] > best_v) {
        best_v = logits[w];
        best = w;
      }
    }
    if (best == Vocab::kEos) break;
    words.push_back(m.vocab.words[static_cast<size_t>(best)]);
    tokens.push_back(best);
  }
  return text::join(words, " ");
}

double subtask_rating(const Model& m, const std::string& user_id, const std::string& item_id) {
  if (m.cfg.rating_mode != RatingMode::Subtask)
    throw ConfigError("subtask_rating: model has no rating head");
  const ForwardResult r =
      forward(m, m.users.require(user_id), m.items.require(item_id), 0.0, {Vocab::kBos});
  return std::clamp(r.rating_out, 1.0, static_cast<double>(m.cfg.max_rating));
}

// ---- checkpoints -----------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'S', 'E', 'N', 'T', 'R', 'E', 'C', '1'};

void put_u64(std::ostream& os, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw ParseError("checkpoint: truncated integer", "");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

void put_string(std::ostream& os, const std::string& s) {
  put_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& is) {
  const uint64_t n = get_u64(is);
  if (n > (1ull << 32)) throw ParseError("checkpoint: unreasonable string length", "");
  std::string s(static_cast<size_t>(n), '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) throw ParseError("checkpoint: truncated string", "");
  return s;
}

void put_mat(std::ostream& os, const std::string& name, const Mat& m) {
  static_assert(sizeof(double) == 8);
  put_string(os, name);
  put_u64(os, static_cast<uint64_t>(m.rows));
  put_u64(os, static_cast<uint64_t>(m.cols));
  for (double x : m.a) {
    uint64_t bits = 0;
    std::memcpy(&bits, &x, 8);
    put_u64(os, bits);
  }
}

void get_mat(std::istream& is, const std::string& want_name, Mat& m) {
  const std::string name = get_string(is);
  if (name != want_name)
    throw ParseError("checkpoint: expected tensor '" + want_name + "', found '" + name + "'", "");
  const auto rows = static_cast<int>(get_u64(is));
  const auto cols = static_cast<int>(get_u64(is));
  if (rows != m.rows || cols != m.cols)
    throw ParseError("checkpoint: tensor '" + name + "' has unexpected shape", "");
  for (double& x : m.a) {
    const uint64_t bits = get_u64(is);
    std::memcpy(&x, &bits, 8);
  }
}

void write_header(std::ostream& os, char kind, const nlohmann::json& meta) {
  os.write(kMagic, 8);
  os.put(kind);
  put_string(os, meta.dump());
}

nlohmann::json read_header(std::istream& is, char want_kind, const std::string& path) {
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw ParseError(path + ": not a sentrec checkpoint", "");
  const int kind = is.get();
  if (kind != want_kind)
    throw ParseError(path + ": checkpoint holds a different artifact kind", "");
  return nlohmann::json::parse(get_string(is));
}

}  // namespace

void save_model(const Model& m, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  nlohmann::json meta{
      {"n_layers", m.cfg.n_layers},
      {"n_heads", m.cfg.n_heads},
      {"embed_dim", m.cfg.embed_dim},
      {"ffn_dim", m.cfg.ffn_dim},
      {"dropout", m.cfg.dropout},
      {"max_len", m.cfg.max_len},
      {"vocab_size", m.cfg.vocab_size},
      {"n_users", m.cfg.n_users},
      {"n_items", m.cfg.n_items},
      {"max_rating", m.cfg.max_rating},
      {"rating_mode", rating_mode_name(m.cfg.rating_mode)},
      {"lambda_e", m.cfg.lambda_e},
      {"lambda_c", m.cfg.lambda_c},
      {"lambda_r", m.cfg.lambda_r},
      {"rating_head_hidden", m.cfg.rating_head_hidden},
      {"seed", m.cfg.seed},
      {"vocab", m.vocab.words},
      {"users", m.users.names},
      {"items", m.items.names},
  };
  write_header(os, 'G', meta);
  auto groups = param_groups(const_cast<ModelParameters&>(m.params));
  put_u64(os, groups.size());
  for (auto& [name, mat] : groups) put_mat(os, name, *mat);
  if (!os) throw IoError("failed while writing " + path);
}

Model load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path);
  const nlohmann::json meta = read_header(is, 'G', path);
  Model m;
  m.cfg.n_layers = meta.at("n_layers").get<int>();
  m.cfg.n_heads = meta.at("n_heads").get<int>();
  m.cfg.embed_dim = meta.at("embed_dim").get<int>();
  m.cfg.ffn_dim = meta.at("ffn_dim").get<int>();
  m.cfg.dropout = meta.at("dropout").get<double>();
  m.cfg.max_len = meta.at("max_len").get<int>();
  m.cfg.vocab_size = meta.at("vocab_size").get<int>();
  m.cfg.n_users = meta.at("n_users").get<int>();
  m.cfg.n_items = meta.at("n_items").get<int>();
  m.cfg.max_rating = meta.at("max_rating").get<int>();
  m.cfg.rating_mode = rating_mode_from_name(meta.at("rating_mode").get<std::string>());
  m.cfg.lambda_e = meta.at("lambda_e").get<double>();
  m.cfg.lambda_c = meta.at("lambda_c").get<double>();
  m.cfg.lambda_r = meta.at("lambda_r").get<double>();
  m.cfg.rating_head_hidden = meta.at("rating_head_hidden").get<int>();
  m.cfg.seed = meta.at("seed").get<uint64_t>();
  m.cfg.validate();

  m.vocab.words = meta.at("vocab").get<std::vector<std::string>>();
  if (static_cast<int>(m.vocab.words.size()) != m.cfg.vocab_size)
    throw ParseError(path + ": vocab list does not match vocab_size", "");
  for (size_t i = 0; i < m.vocab.words.size(); ++i)
    m.vocab.index[m.vocab.words[i]] = static_cast<int>(i);
  m.users = IdMap::build(meta.at("users").get<std::vector<std::string>>());
  m.items = IdMap::build(meta.at("items").get<std::vector<std::string>>());
  if (static_cast<int>(m.users.names.size()) != m.cfg.n_users ||
      static_cast<int>(m.items.names.size()) != m.cfg.n_items)
    throw ParseError(path + ": id maps do not match configured sizes", "");

  m.params = init_model(m.cfg);
  auto groups = param_groups(m.params);
  const uint64_t count = get_u64(is);
  if (count != groups.size()) throw ParseError(path + ": unexpected tensor count", "");
  for (auto& [name, mat] : groups) get_mat(is, name, *mat);
  return m;
}

std::vector<std::pair<std::string, Mat*>> predictor_groups(RatingPredictor& p) {
  return {
      {"user_table", &p.user_table}, {"item_table", &p.item_table},
      {"mlp1_w", &p.w1},             {"mlp1_b", &p.b1},
      {"mlp2_w", &p.w2},             {"mlp2_b", &p.b2},
      {"mlp3_w", &p.w3},             {"mlp3_b", &p.b3},
  };
}

RatingPredictor init_predictor(const PredictorConfig& cfg, const IdMap& users,
                               const IdMap& items) {
  if (cfg.embed_dim < 1 || cfg.hidden < 1 || cfg.max_rating < 1)
    throw ConfigError("predictor: dimensions must be positive");
  if (users.names.empty() || items.names.empty())
    throw ConfigError("predictor: need at least one user and item");
  RatingPredictor p;
  p.cfg = cfg;
  p.users = users;
  p.items = items;
  const int d = cfg.embed_dim;
  p.user_table = Mat(static_cast<int>(users.names.size()), d);
  p.item_table = Mat(static_cast<int>(items.names.size()), d);
  p.w1 = Mat(2 * d, cfg.hidden);
  p.b1 = Mat(1, cfg.hidden);
  p.w2 = Mat(cfg.hidden, cfg.hidden);
  p.b2 = Mat(1, cfg.hidden);
  p.w3 = Mat(cfg.hidden, 1);
  p.b3 = Mat(1, 1);
  Rng rng(cfg.seed);
  for (auto& [name, mat] : predictor_groups(p)) seed_group(name, *mat, rng);
  return p;
}

double predict_rating(const RatingPredictor& p, const std::string& user_id,
                      const std::string& item_id) {
  const int u = p.users.require(user_id);
  const int i = p.items.require(item_id);
  const int d = p.cfg.embed_dim;
  std::vector<double> x(static_cast<size_t>(2 * d));
  std::copy(p.user_table.row_ptr(u), p.user_table.row_ptr(u) + d, x.data());
  std::copy(p.item_table.row_ptr(i), p.item_table.row_ptr(i) + d, x.data() + d);

  auto apply = [](const std::vector<double>& in, const Mat& w, const Mat& b, bool relu_out) {
    std::vector<double> out(static_cast<size_t>(w.cols), 0.0);
    for (int r = 0; r < w.rows; ++r) {
      const double xi = in[static_cast<size_t>(r)];
      if (xi == 0.0) continue;
      const double* wr = w.row_ptr(r);
      for (int c = 0; c < w.cols; ++c) out[static_cast<size_t>(c)] += xi * wr[c];
    }
    for (int c = 0; c < w.cols; ++c) {
      out[static_cast<size_t>(c)] += b.a[static_cast<size_t>(c)];
      if (relu_out && out[static_cast<size_t>(c)] < 0.0) out[static_cast<size_t>(c)] = 0.0;
    }
    return out;
  };
  std::vector<double> z = apply(x, p.w1, p.b1, true);
  z = apply(z, p.w2, p.b2, true);
  z = apply(z, p.w3, p.b3, false);
  return std::clamp(z[0], 1.0, static_cast<double>(p.cfg.max_rating));
}

void save_predictor(const RatingPredictor& p, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  nlohmann::json meta{
      {"embed_dim", p.cfg.embed_dim},
      {"hidden", p.cfg.hidden},
      {"max_rating", p.cfg.max_rating},
      {"seed", p.cfg.seed},
      {"users", p.users.names},
      {"items", p.items.names},
  };
  write_header(os, 'R', meta);
  auto groups = predictor_groups(const_cast<RatingPredictor&>(p));
  put_u64(os, groups.size());
  for (auto& [name, mat] : groups) put_mat(os, name, *mat);
  if (!os) throw IoError("failed while writing " + path);
}

RatingPredictor load_predictor(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path);
  const nlohmann::json meta = read_header(is, 'R', path);
  PredictorConfig cfg;
  cfg.embed_dim = meta.at("embed_dim").get<int>();
  cfg.hidden = meta.at("hidden").get<int>();
  cfg.max_rating = meta.at("max_rating").get<int>();
  cfg.seed = meta.at("seed").get<uint64_t>();
  RatingPredictor p =
      init_predictor(cfg, IdMap::build(meta.at("users").get<std::vector<std::string>>()),
                     IdMap::build(meta.at("items").get<std::vector<std::string>>()));
  auto groups = predictor_groups(p);
  const uint64_t count = get_u64(is);
  if (count != groups.size()) throw ParseError(path + ": unexpected tensor count", "");
  for (auto& [name, mat] : groups) get_mat(is, name, *mat);
  return p;
}

}  // namespace sentrec::model
