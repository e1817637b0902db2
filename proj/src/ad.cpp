#include "sentrec/ad.hpp"

#include <algorithm>
#include <cmath>

#include "sentrec/errors.hpp"
#include "sentrec/kernels.hpp"

namespace sentrec::ad {

namespace {
void check(bool ok, const char* what) {
  if (!ok) throw Error(std::string("tape: ") + what);
}
}  // namespace

Tape::Id Tape::push(Node n) {
  const Mat& v = n.ext != nullptr ? *n.ext : n.storage;
  n.grad = Mat(v.rows, v.cols);
  nodes_.push_back(std::move(n));
  return static_cast<Id>(nodes_.size() - 1);
}

Tape::Id Tape::constant(Mat value) {
  Node n;
  n.storage = std::move(value);
  return push(std::move(n));
}

Tape::Id Tape::leaf(const Mat* value, Mat* grad_sink) {
  check(value != nullptr, "leaf: null value");
  Node n;
  n.ext = value;
  n.sink = grad_sink;
  n.back = [](Tape&, Node& self) {
    if (self.sink == nullptr) return;
    for (size_t i = 0; i < self.grad.size(); ++i) self.sink->a[i] += self.grad.a[i];
  };
  return push(std::move(n));
}

Tape::Id Tape::gather_rows(const Mat* table, Mat* grad_sink, std::vector<int> rows) {
  check(table != nullptr, "gather_rows: null table");
  Node n;
  n.storage = Mat(static_cast<int>(rows.size()), table->cols);
  for (size_t j = 0; j < rows.size(); ++j) {
    check(rows[j] >= 0 && rows[j] < table->rows, "gather_rows: row out of range");
    std::copy(table->row_ptr(rows[j]), table->row_ptr(rows[j]) + table->cols,
              n.storage.row_ptr(static_cast<int>(j)));
  }
  n.sink = grad_sink;
  n.gather = std::move(rows);
  n.back = [](Tape&, Node& self) {
    if (self.sink == nullptr) return;
    for (size_t j = 0; j < self.gather.size(); ++j) {
      double* dst = self.sink->row_ptr(self.gather[j]);
      const double* src = self.grad.row_ptr(static_cast<int>(j));
      for (int c = 0; c < self.grad.cols; ++c) dst[c] += src[c];
    }
  };
  return push(std::move(n));
}

Tape::Id Tape::matmul(Id a, Id b) {
  const Mat& A = value(a);
  const Mat& B = value(b);
  check(A.cols == B.rows, "matmul: inner dimensions differ");
  Node n;
  n.a = a;
  n.b = b;
  n.storage = Mat(A.rows, B.cols);
  kernels::mm(A.a.data(), B.a.data(), n.storage.a.data(), A.rows, A.cols, B.cols);
  n.back = [](Tape& t, Node& self) {
    const Mat& G = self.grad;
    const Mat& A2 = t.value(self.a);
    const Mat& B2 = t.value(self.b);
    Mat& gA = t.node(self.a).grad;
    Mat& gB = t.node(self.b).grad;
    // dA += G * B^T ; dB += A^T * G
    kernels::mm_nt(G.a.data(), B2.a.data(), gA.a.data(), G.rows, G.cols, B2.rows);
    kernels::mm_tn(A2.a.data(), G.a.data(), gB.a.data(), A2.rows, A2.cols, G.cols);
  };
  return push(std::move(n));
}

Tape::Id Tape::matmul_nt(Id a, Id b) {
  const Mat& A = value(a);
  const Mat& B = value(b);
  check(A.cols == B.cols, "matmul_nt: inner dimensions differ");
  Node n;
  n.a = a;
  n.b = b;
  n.storage = Mat(A.rows, B.rows);
  kernels::mm_nt(A.a.data(), B.a.data(), n.storage.a.data(), A.rows, A.cols, B.rows);
  n.back = [](Tape& t, Node& self) {
    const Mat& G = self.grad;  // [m, n]
    const Mat& A2 = t.value(self.a);  // [m, k]
    const Mat& B2 = t.value(self.b);  // [n, k]
    Mat& gA = t.node(self.a).grad;
    Mat& gB = t.node(self.b).grad;
    // dA += G * B ; dB += G^T * A
    kernels::mm(G.a.data(), B2.a.data(), gA.a.data(), G.rows, G.cols, B2.cols);
    kernels::mm_tn(G.a.data(), A2.a.data(), gB.a.data(), G.rows, G.cols, A2.cols);
  };
  return push(std::move(n));
}

Tape::Id Tape::add(Id a, Id b) {
  const Mat& A = value(a);
  const Mat& B = value(b);
  check(A.rows == B.rows && A.cols == B.cols, "add: shape mismatch");
  Node n;
  n.a = a;
  n.b = b;
  n.storage = A;
  for (size_t i = 0; i < B.size(); ++i) n.storage.a[i] += B.a[i];
  n.back = [](Tape& t, Node& self) {
    Mat& gA = t.node(self.a).grad;
    Mat& gB = t.node(self.b).grad;
    for (size_t i = 0; i < self.grad.size(); ++i) {
      gA.a[i] += self.grad.a[i];
      gB.a[i] += self.grad.a[i];
    }
  };
  return push(std::move(n));
}

Tape::Id Tape::add_rowvec(Id a, Id row_bias) {
  const Mat& A = value(a);
  const Mat& B = value(row_bias);
  check(B.rows == 1 && B.cols == A.cols, "add_rowvec: bias must be 1 x cols");
  Node n;
  n.a = a;
  n.b = row_bias;
  n.storage = A;
  for (int r = 0; r < A.rows; ++r) {
    double* dst = n.storage.row_ptr(r);
    for (int c = 0; c < A.cols; ++c) dst[c] += B.a[static_cast<size_t>(c)];
  }
  n.back = [](Tape& t, Node& self) {
    Mat& gA = t.node(self.a).grad;
    Mat& gB = t.node(self.b).grad;
    for (size_t i = 0; i < self.grad.size(); ++i) gA.a[i] += self.grad.a[i];
    for (int r = 0; r < self.grad.rows; ++r) {
      const double* src = self.grad.row_ptr(r);
      for (int c = 0; c < self.grad.cols; ++c) gB.a[static_cast<size_t>(c)] += src[c];
    }
  };
  return push(std::move(n));
}

Tape::Id Tape::scale(Id a, double s) {
  Node n;
  n.a = a;
  n.storage = value(a);
  for (double& x : n.storage.a) x *= s;
  n.back = [s](Tape& t, Node& self) {
    Mat& gA = t.node(self.a).grad;
    for (size_t i = 0; i < self.grad.size(); ++i) gA.a[i] += s * self.grad.a[i];
  };
  return push(std::move(n));
}

Tape::Id Tape::mul_const(Id a, const Mat& mask) {
  const Mat& A = value(a);
  check(A.rows == mask.rows && A.cols == mask.cols, "mul_const: shape mismatch");
  Node n;
  n.a = a;
  n.storage = A;
  for (size_t i = 0; i < mask.size(); ++i) n.storage.a[i] *= mask.a[i];
  n.back = [mask](Tape& t, Node& self) {
    Mat& gA = t.node(self.a).grad;
    for (size_t i = 0; i < self.grad.size(); ++i) gA.a[i] += mask.a[i] * self.grad.a[i];
  };
  return push(std::move(n));
}

Tape::Id Tape::relu(Id a) {
  Node n;
  n.a = a;
  n.storage = value(a);
  for (double& x : n.storage.a) x = x > 0.0 ? x : 0.0;
  n.back = [](Tape& t, Node& self) {
    const Mat& A = t.value(self.a);
    Mat& gA = t.node(self.a).grad;
    for (size_t i = 0; i < self.grad.size(); ++i) {
      if (A.a[i] > 0.0) gA.a[i] += self.grad.a[i];
    }
  };
  return push(std::move(n));
}

Tape::Id Tape::slice_rows(Id a, int r0, int count) {
  const Mat& A = value(a);
  check(r0 >= 0 && count >= 1 && r0 + count <= A.rows, "slice_rows: range out of bounds");
  Node n;
  n.a = a;
  n.storage = Mat(count, A.cols);
  std::copy(A.row_ptr(r0), A.row_ptr(r0) + static_cast<size_t>(count) * A.cols,
            n.storage.a.data());
  n.back = [r0](Tape& t, Node& self) {
    Mat& gA = t.node(self.a).grad;
    for (int r = 0; r < self.grad.rows; ++r) {
      const double* src = self.grad.row_ptr(r);
      double* dst = gA.row_ptr(r0 + r);
      for (int c = 0; c < self.grad.cols; ++c) dst[c] += src[c];
    }
  };
  return push(std::move(n));
}

Tape::Id Tape::slice_cols(Id a, int c0, int count) {
  const Mat& A = value(a);
  check(c0 >= 0 && count >= 1 && c0 + count <= A.cols, "slice_cols: range out of bounds");
  Node n;
  n.a = a;
  n.storage = Mat(A.rows, count);
  for (int r = 0; r < A.rows; ++r) {
    std::copy(A.row_ptr(r) + c0, A.row_ptr(r) + c0 + count, n.storage.row_ptr(r));
  }
  n.back = [c0](Tape& t, Node& self) {
    Mat& gA = t.node(self.a).grad;
    for (int r = 0; r < self.grad.rows; ++r) {
      const double* src = self.grad.row_ptr(r);
      double* dst = gA.row_ptr(r) + c0;
      for (int c = 0; c < self.grad.cols; ++c) dst[c] += src[c];
    }
  };
  return push(std::move(n));
}

Tape::Id Tape::concat_rows(const std::vector<Id>& parts) {
  check(!parts.empty(), "concat_rows: no parts");
  int rows = 0;
  const int cols = value(parts[0]).cols;
  for (Id p : parts) {
    check(value(p).cols == cols, "concat_rows: column mismatch");
    rows += value(p).rows;
  }
  Node n;
  n.storage = Mat(rows, cols);
  int at = 0;
  for (Id p : parts) {
    const Mat& P = value(p);
    std::copy(P.a.begin(), P.a.end(), n.storage.row_ptr(at));
    at += P.rows;
  }
  n.gather.assign(parts.begin(), parts.end());  // reuse as part list
  n.back = [](Tape& t, Node& self) {
    int r0 = 0;
    for (int pid : self.gather) {
      Mat& gP = t.node(pid).grad;
      for (int r = 0; r < gP.rows; ++r) {
        const double* src = self.grad.row_ptr(r0 + r);
        double* dst = gP.row_ptr(r);
        for (int c = 0; c < gP.cols; ++c) dst[c] += src[c];
      }
      r0 += gP.rows;
    }
  };
  return push(std::move(n));
}

Tape::Id Tape::concat_cols(const std::vector<Id>& parts) {
  check(!parts.empty(), "concat_cols: no parts");
  const int rows = value(parts[0]).rows;
  int cols = 0;
  for (Id p : parts) {
    check(value(p).rows == rows, "concat_cols: row mismatch");
    cols += value(p).cols;
  }
  Node n;
  n.storage = Mat(rows, cols);
  int at = 0;
  for (Id p : parts) {
    const Mat& P = value(p);
    for (int r = 0; r < rows; ++r) {
      std::copy(P.row_ptr(r), P.row_ptr(r) + P.cols, n.storage.row_ptr(r) + at);
    }
    at += P.cols;
  }
  n.gather.assign(parts.begin(), parts.end());
  n.back = [](Tape& t, Node& self) {
    int c0 = 0;
    for (int pid : self.gather) {
      Mat& gP = t.node(pid).grad;
      for (int r = 0; r < gP.rows; ++r) {
        const double* src = self.grad.row_ptr(r) + c0;
        double* dst = gP.row_ptr(r);
        for (int c = 0; c < gP.cols; ++c) dst[c] += src[c];
      }
      c0 += gP.cols;
    }
  };
  return push(std::move(n));
}

namespace {
inline bool attends(int q, int k, int prefix_len) {
  if (q < prefix_len) return k < prefix_len;
  return k < prefix_len || (k >= prefix_len && k <= q);
}
}  // namespace

Tape::Id Tape::attention_softmax(Id scores, int prefix_len) {
  const Mat& S = value(scores);
  check(S.rows == S.cols, "attention_softmax: scores must be square");
  check(prefix_len >= 1 && prefix_len <= S.rows, "attention_softmax: bad prefix length");
  const int L = S.rows;
  Node n;
  n.a = scores;
  n.storage = Mat(L, L);
  for (int q = 0; q < L; ++q) {
    double mx = -1e300;
    for (int k = 0; k < L; ++k) {
      if (attends(q, k, prefix_len)) mx = std::max(mx, S.at(q, k));
    }
    double z = 0.0;
    for (int k = 0; k < L; ++k) {
      if (attends(q, k, prefix_len)) {
        const double e = std::exp(S.at(q, k) - mx);
        n.storage.at(q, k) = e;
        z += e;
      }
    }
    const double inv = 1.0 / z;
    for (int k = 0; k < L; ++k) n.storage.at(q, k) *= inv;
  }
  n.back = [prefix_len](Tape& t, Node& self) {
    const Mat& P = self.storage;
    const Mat& G = self.grad;
    Mat& gS = t.node(self.a).grad;
    const int n_pos = P.rows;
    for (int q = 0; q < n_pos; ++q) {
      double dot = 0.0;
      for (int k = 0; k < n_pos; ++k) dot += P.at(q, k) * G.at(q, k);
      for (int k = 0; k < n_pos; ++k) {
        if (!attends(q, k, prefix_len)) continue;
        gS.at(q, k) += P.at(q, k) * (G.at(q, k) - dot);
      }
    }
  };
  return push(std::move(n));
}

Tape::Id Tape::layer_norm(Id x, Id gain, Id bias, double eps) {
  const Mat& X = value(x);
  const Mat& Gn = value(gain);
  const Mat& B = value(bias);
  check(Gn.rows == 1 && Gn.cols == X.cols, "layer_norm: gain must be 1 x cols");
  check(B.rows == 1 && B.cols == X.cols, "layer_norm: bias must be 1 x cols");
  Node n;
  n.a = x;
  n.b = gain;
  // bias id stashed in gather[0]
  n.gather = {bias};
  n.storage = Mat(X.rows, X.cols);

  Mat xhat(X.rows, X.cols);
  std::vector<double> inv_sigma(static_cast<size_t>(X.rows));
  const double dcols = static_cast<double>(X.cols);
  for (int r = 0; r < X.rows; ++r) {
    const double* xr = X.row_ptr(r);
    double mu = 0.0;
    for (int c = 0; c < X.cols; ++c) mu += xr[c];
    mu /= dcols;
    double var = 0.0;
    for (int c = 0; c < X.cols; ++c) {
      const double d = xr[c] - mu;
      var += d * d;
    }
    var /= dcols;
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_sigma[static_cast<size_t>(r)] = inv;
    double* hr = xhat.row_ptr(r);
    double* yr = n.storage.row_ptr(r);
    for (int c = 0; c < X.cols; ++c) {
      hr[c] = (xr[c] - mu) * inv;
      yr[c] = hr[c] * Gn.a[static_cast<size_t>(c)] + B.a[static_cast<size_t>(c)];
    }
  }

  n.back = [xhat = std::move(xhat), inv_sigma = std::move(inv_sigma)](Tape& t, Node& self) {
    const Mat& G = self.grad;
    const Mat& Gn2 = t.value(self.b);
    Mat& gX = t.node(self.a).grad;
    Mat& gGain = t.node(self.b).grad;
    Mat& gBias = t.node(self.gather[0]).grad;
    const int cols = G.cols;
    const double dcols = static_cast<double>(cols);
    std::vector<double> dxhat(static_cast<size_t>(cols));
    for (int r = 0; r < G.rows; ++r) {
      const double* gr = G.row_ptr(r);
      const double* hr = xhat.row_ptr(r);
      double mean_dx = 0.0, mean_dxh = 0.0;
      for (int c = 0; c < cols; ++c) {
        dxhat[static_cast<size_t>(c)] = gr[c] * Gn2.a[static_cast<size_t>(c)];
        mean_dx += dxhat[static_cast<size_t>(c)];
        mean_dxh += dxhat[static_cast<size_t>(c)] * hr[c];
        gGain.a[static_cast<size_t>(c)] += gr[c] * hr[c];
        gBias.a[static_cast<size_t>(c)] += gr[c];
      }
      mean_dx /= dcols;
      mean_dxh /= dcols;
      const double inv = inv_sigma[static_cast<size_t>(r)];
      double* gx = gX.row_ptr(r);
      for (int c = 0; c < cols; ++c) {
        gx[c] += inv * (dxhat[static_cast<size_t>(c)] - mean_dx - hr[c] * mean_dxh);
      }
    }
  };
  return push(std::move(n));
}

namespace {
// Row-wise softmax with max-shift; writes probabilities into `probs` and
// returns the row's log-sum-exp offset pieces needed for the loss.
void softmax_row(const double* z, int n, double* probs, double* logz_out) {
  double mx = z[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, z[i]);
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    probs[i] = std::exp(z[i] - mx);
    s += probs[i];
  }
  const double inv = 1.0 / s;
  for (int i = 0; i < n; ++i) probs[i] *= inv;
  *logz_out = mx + std::log(s);
}
}  // namespace

Tape::Id Tape::cross_entropy_rows(Id logits, std::vector<int> targets) {
  const Mat& Z = value(logits);
  check(static_cast<int>(targets.size()) == Z.rows, "cross_entropy_rows: one target per row");
  for (int t : targets) check(t >= 0 && t < Z.cols, "cross_entropy_rows: target out of range");
  Node n;
  n.a = logits;
  n.storage = Mat(1, 1);
  Mat probs(Z.rows, Z.cols);
  double loss = 0.0;
  for (int r = 0; r < Z.rows; ++r) {
    double logz = 0.0;
    softmax_row(Z.row_ptr(r), Z.cols, probs.row_ptr(r), &logz);
    loss += logz - Z.at(r, targets[static_cast<size_t>(r)]);
  }
  n.storage.a[0] = loss / static_cast<double>(Z.rows);
  n.back = [probs = std::move(probs), targets = std::move(targets)](Tape& t, Node& self) {
    const double g = self.grad.a[0] / static_cast<double>(probs.rows);
    Mat& gZ = t.node(self.a).grad;
    for (int r = 0; r < probs.rows; ++r) {
      const double* pr = probs.row_ptr(r);
      double* gz = gZ.row_ptr(r);
      for (int c = 0; c < probs.cols; ++c) gz[c] += g * pr[c];
      gz[targets[static_cast<size_t>(r)]] -= g;
    }
  };
  return push(std::move(n));
}

Tape::Id Tape::cross_entropy_bag(Id logits, std::vector<int> words) {
  const Mat& Z = value(logits);
  check(Z.rows == 1, "cross_entropy_bag: logits must be 1 x V");
  check(!words.empty(), "cross_entropy_bag: empty word bag");
  for (int w : words) check(w >= 0 && w < Z.cols, "cross_entropy_bag: word out of range");
  Node n;
  n.a = logits;
  n.storage = Mat(1, 1);
  Mat probs(1, Z.cols);
  double logz = 0.0;
  softmax_row(Z.row_ptr(0), Z.cols, probs.row_ptr(0), &logz);
  double loss = 0.0;
  for (int w : words) loss += logz - Z.at(0, w);
  n.storage.a[0] = loss / static_cast<double>(words.size());
  n.back = [probs = std::move(probs), words = std::move(words)](Tape& t, Node& self) {
    const double g = self.grad.a[0];
    const double inv_w = 1.0 / static_cast<double>(words.size());
    Mat& gZ = t.node(self.a).grad;
    for (int c = 0; c < probs.cols; ++c) gZ.a[static_cast<size_t>(c)] += g * probs.a[static_cast<size_t>(c)];
    for (int w : words) gZ.a[static_cast<size_t>(w)] -= g * inv_w;
  };
  return push(std::move(n));
}

Tape::Id Tape::squared_error(Id scalar, double target) {
  const Mat& X = value(scalar);
  check(X.rows == 1 && X.cols == 1, "squared_error: input must be scalar");
  Node n;
  n.a = scalar;
  n.storage = Mat(1, 1);
  const double diff = X.a[0] - target;
  n.storage.a[0] = diff * diff;
  n.back = [diff](Tape& t, Node& self) {
    t.node(self.a).grad.a[0] += self.grad.a[0] * 2.0 * diff;
  };
  return push(std::move(n));
}

Tape::Id Tape::mean_squared_error_col(Id col, std::vector<double> targets) {
  const Mat& X = value(col);
  check(X.cols == 1, "mean_squared_error_col: input must be m x 1");
  check(static_cast<int>(targets.size()) == X.rows, "mean_squared_error_col: one target per row");
  Node n;
  n.a = col;
  n.storage = Mat(1, 1);
  double s = 0.0;
  for (int r = 0; r < X.rows; ++r) {
    const double d = X.a[static_cast<size_t>(r)] - targets[static_cast<size_t>(r)];
    s += d * d;
  }
  n.storage.a[0] = s / static_cast<double>(X.rows);
  n.back = [targets = std::move(targets)](Tape& t, Node& self) {
    const Mat& X2 = t.value(self.a);
    Mat& gX = t.node(self.a).grad;
    const double g = self.grad.a[0] * 2.0 / static_cast<double>(X2.rows);
    for (int r = 0; r < X2.rows; ++r) {
      gX.a[static_cast<size_t>(r)] +=
          g * (X2.a[static_cast<size_t>(r)] - targets[static_cast<size_t>(r)]);
    }
  };
  return push(std::move(n));
}

Tape::Id Tape::weighted_sum(const std::vector<std::pair<Id, double>>& terms) {
  check(!terms.empty(), "weighted_sum: no terms");
  Node n;
  n.storage = Mat(1, 1);
  double s = 0.0;
  std::vector<std::pair<Id, double>> kept;
  for (const auto& [id, w] : terms) {
    check(value(id).rows == 1 && value(id).cols == 1, "weighted_sum: non-scalar term");
    s += w * scalar(id);
    kept.push_back({id, w});
  }
  n.storage.a[0] = s;
  n.back = [kept = std::move(kept)](Tape& t, Node& self) {
    for (const auto& [id, w] : kept) {
      t.node(id).grad.a[0] += w * self.grad.a[0];
    }
  };
  return push(std::move(n));
}

void Tape::backward(Id loss) {
  check(loss >= 0 && loss < static_cast<Id>(nodes_.size()), "backward: bad node");
  check(value(loss).rows == 1 && value(loss).cols == 1, "backward: loss must be scalar");
  node(loss).grad.a[0] = 1.0;
  for (Id i = loss; i >= 0; --i) {
    Node& n = node(i);
    if (n.back) n.back(*this, n);
  }
}

}  // namespace sentrec::ad
