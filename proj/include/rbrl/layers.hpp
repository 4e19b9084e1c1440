#pragma once

// Dense layers with hand-written reverse-mode gradients. Activations are
// row-major matrices: each row is one token (candidate rule) or batch item.
// Every layer caches what its backward pass needs during forward; forward and
// backward therefore have to be paired per item, which is how the trainers
// (and the finite-difference checks) drive them.

#include "rbrl/common.hpp"

#include <functional>
#include <string>
#include <vector>

namespace rbrl {

struct Param {
  std::string name;
  Mat w;
  Mat g;

  Param() = default;
  Param(std::string n, int rows, int cols) : name(std::move(n)), w(rows, cols), g(rows, cols) {
    w.setZero();
    g.setZero();
  }
  void zero_grad() { g.setZero(); }
};

using ParamVisitor = std::function<void(Param&)>;

// y = x * W^T + b, x: (n, in) -> y: (n, out).
class Linear {
 public:
  Linear() = default;
  // Kaiming-uniform fan-in init: U(-1/sqrt(in), 1/sqrt(in)) for both weight
  // and bias; output heads pass zero_bias to start with an unbiased readout.
  Linear(const std::string& name, int in, int out, Rng& rng, bool zero_bias = false);

  Mat forward(const Mat& x);
  Mat backward(const Mat& dy);
  void visit(const ParamVisitor& fn) {
    fn(w);
    fn(b);
  }

  Param w;  // (out, in)
  Param b;  // (1, out)

 private:
  Mat x_;  // cached input
};

// SiLU x * sigmoid(x), elementwise.
class Silu {
 public:
  Mat forward(const Mat& x);
  Mat backward(const Mat& dy);

 private:
  Mat x_;
};

// Row-wise layer normalization with learned scale and shift.
class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(const std::string& name, int dim);

  Mat forward(const Mat& x);
  Mat backward(const Mat& dy);
  void visit(const ParamVisitor& fn) {
    fn(gamma);
    fn(beta);
  }

  Param gamma;  // (1, dim)
  Param beta;   // (1, dim)
  static constexpr double kEps = 1e-5;

 private:
  Mat xhat_;
  Vec inv_std_;
};

// Inverted dropout; active only when forward is called with training=true.
class Dropout {
 public:
  explicit Dropout(double p = 0.0) : p_(p) {}
  Mat forward(const Mat& x, bool training, Rng& rng);
  Mat backward(const Mat& dy);
  double p() const { return p_; }

 private:
  double p_ = 0.0;
  Mat mask_;
};

// Row-wise softmax with max-subtraction; returns probabilities.
Mat softmax_rows(const Mat& logits);
// dL/dlogits given dL/dprobs and the cached probabilities.
Mat softmax_rows_backward(const Mat& probs, const Mat& dprobs);

// Multi-head scaled dot-product attention. Query/key/value projections and
// the output projection are all (dim, dim); dim must divide evenly by heads.
class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(const std::string& name, int dim, int n_heads, Rng& rng);

  // q_in: (n, dim), k_in: (m, dim), v_in: (m, dim) -> (n, dim).
  Mat forward(const Mat& q_in, const Mat& k_in, const Mat& v_in);
  // Returns gradients w.r.t. q_in, k_in, v_in. When the same tensor was
  // passed for several inputs the caller sums the returned pieces.
  struct InputGrads {
    Mat dq;
    Mat dk;
    Mat dv;
  };
  InputGrads backward(const Mat& d_out);
  void visit(const ParamVisitor& fn);

  Linear wq, wk, wv, wo;
  int dim() const { return dim_; }
  int heads() const { return n_heads_; }

 private:
  int dim_ = 0;
  int n_heads_ = 0;
  int dk_ = 0;
  Mat q_, k_, v_;                 // projected activations
  std::vector<Mat> attn_;         // per-head attention weights (n, m)
  Mat concat_;                    // concatenated head outputs (n, dim)
};

// Adam with bias correction; binds to a fixed parameter list at construction.
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<Param*> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);

  void step();
  void zero_grad();
  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }
  long long t() const { return t_; }

  // Serialization hooks (moments and step count).
  struct Slot {
    Mat m;
    Mat v;
  };
  std::vector<Slot>& slots() { return slots_; }
  void set_t(long long t) { t_ = t; }
  const std::vector<Param*>& params() const { return params_; }

 private:
  std::vector<Param*> params_;
  std::vector<Slot> slots_;
  double lr_ = 1e-3, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  long long t_ = 0;
};

}  // namespace rbrl
