#include "rbrl/layers.hpp"

#include <cmath>

namespace rbrl {

// ---------------------------------------------------------------------------
// Linear

Linear::Linear(const std::string& name, int in, int out, Rng& rng, bool zero_bias)
    : w(name + ".weight", out, in), b(name + ".bias", 1, out) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  for (int r = 0; r < out; ++r)
    for (int c = 0; c < in; ++c) w.w(r, c) = rng.uniform(-bound, bound);
  if (!zero_bias) {
    for (int c = 0; c < out; ++c) b.w(0, c) = rng.uniform(-bound, bound);
  }
}

Mat Linear::forward(const Mat& x) {
  x_ = x;
  Mat y = x * w.w.transpose();
  y.rowwise() += b.w.row(0);
  return y;
}

Mat Linear::backward(const Mat& dy) {
  w.g += dy.transpose() * x_;
  b.g.row(0) += dy.colwise().sum();
  return dy * w.w;
}

// ---------------------------------------------------------------------------
// SiLU

Mat Silu::forward(const Mat& x) {
  x_ = x;
  return x.unaryExpr([](double v) { return v / (1.0 + std::exp(-v)); });
}

Mat Silu::backward(const Mat& dy) {
  Mat dx = x_.unaryExpr([](double v) {
    double s = 1.0 / (1.0 + std::exp(-v));
    return s * (1.0 + v * (1.0 - s));
  });
  return dx.cwiseProduct(dy);
}

// ---------------------------------------------------------------------------
// LayerNorm

LayerNorm::LayerNorm(const std::string& name, int dim)
    : gamma(name + ".gamma", 1, dim), beta(name + ".beta", 1, dim) {
  gamma.w.setOnes();
  beta.w.setZero();
}

Mat LayerNorm::forward(const Mat& x) {
  const int n = static_cast<int>(x.rows());
  const int d = static_cast<int>(x.cols());
  xhat_.resize(n, d);
  inv_std_.resize(n);
  Mat y(n, d);
  for (int r = 0; r < n; ++r) {
    double mu = x.row(r).mean();
    double var = (x.row(r).array() - mu).square().mean();
    double inv = 1.0 / std::sqrt(var + kEps);
    inv_std_(r) = inv;
    xhat_.row(r) = (x.row(r).array() - mu) * inv;
    y.row(r) = xhat_.row(r).cwiseProduct(gamma.w.row(0)) + beta.w.row(0);
  }
  return y;
}

Mat LayerNorm::backward(const Mat& dy) {
  const int n = static_cast<int>(dy.rows());
  const int d = static_cast<int>(dy.cols());
  Mat dx(n, d);
  for (int r = 0; r < n; ++r) {
    gamma.g.row(0) += dy.row(r).cwiseProduct(xhat_.row(r));
    beta.g.row(0) += dy.row(r);
    Eigen::RowVectorXd dxhat = dy.row(r).cwiseProduct(gamma.w.row(0));
    double m1 = dxhat.mean();
    double m2 = dxhat.cwiseProduct(xhat_.row(r)).mean();
    dx.row(r) = inv_std_(r) * (dxhat.array() - m1 - xhat_.row(r).array() * m2);
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Dropout

Mat Dropout::forward(const Mat& x, bool training, Rng& rng) {
  if (!training || p_ <= 0.0) {
    mask_ = Mat::Ones(x.rows(), x.cols());
    return x;
  }
  const double keep = 1.0 - p_;
  mask_.resize(x.rows(), x.cols());
  for (int r = 0; r < x.rows(); ++r)
    for (int c = 0; c < x.cols(); ++c) mask_(r, c) = rng.uniform() < p_ ? 0.0 : 1.0 / keep;
  return x.cwiseProduct(mask_);
}

Mat Dropout::backward(const Mat& dy) { return dy.cwiseProduct(mask_); }

// ---------------------------------------------------------------------------
// Softmax

Mat softmax_rows(const Mat& logits) {
  Mat out(logits.rows(), logits.cols());
  for (int r = 0; r < logits.rows(); ++r) {
    double mx = logits.row(r).maxCoeff();
    Eigen::RowVectorXd e = (logits.row(r).array() - mx).exp();
    out.row(r) = e / e.sum();
  }
  return out;
}

Mat softmax_rows_backward(const Mat& probs, const Mat& dprobs) {
  Mat dx(probs.rows(), probs.cols());
  for (int r = 0; r < probs.rows(); ++r) {
    double dot = probs.row(r).cwiseProduct(dprobs.row(r)).sum();
    dx.row(r) = probs.row(r).array() * (dprobs.row(r).array() - dot);
  }
  return dx;
}

// ---------------------------------------------------------------------------
// MultiHeadAttention

MultiHeadAttention::MultiHeadAttention(const std::string& name, int dim, int n_heads, Rng& rng)
    : wq(name + ".wq", dim, dim, rng),
      wk(name + ".wk", dim, dim, rng),
      wv(name + ".wv", dim, dim, rng),
      wo(name + ".wo", dim, dim, rng),
      dim_(dim),
      n_heads_(n_heads),
      dk_(dim / n_heads) {
  if (dim % n_heads != 0) throw ConfigError("attention: dim must be divisible by heads");
}

Mat MultiHeadAttention::forward(const Mat& q_in, const Mat& k_in, const Mat& v_in) {
  q_ = wq.forward(q_in);
  k_ = wk.forward(k_in);
  v_ = wv.forward(v_in);
  const int n = static_cast<int>(q_.rows());
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk_));
  attn_.assign(n_heads_, Mat());
  concat_.resize(n, dim_);
  for (int h = 0; h < n_heads_; ++h) {
    auto qh = q_.middleCols(h * dk_, dk_);
    auto kh = k_.middleCols(h * dk_, dk_);
    auto vh = v_.middleCols(h * dk_, dk_);
    Mat scores = qh * kh.transpose() * scale;
    attn_[h] = softmax_rows(scores);
    concat_.middleCols(h * dk_, dk_) = attn_[h] * vh;
  }
  return wo.forward(concat_);
}

MultiHeadAttention::InputGrads MultiHeadAttention::backward(const Mat& d_out) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk_));
  Mat dconcat = wo.backward(d_out);
  Mat dq(q_.rows(), dim_), dk(k_.rows(), dim_), dv(v_.rows(), dim_);
  for (int h = 0; h < n_heads_; ++h) {
    auto qh = q_.middleCols(h * dk_, dk_);
    auto kh = k_.middleCols(h * dk_, dk_);
    auto vh = v_.middleCols(h * dk_, dk_);
    Mat doh = dconcat.middleCols(h * dk_, dk_);
    Mat da = doh * vh.transpose();
    dv.middleCols(h * dk_, dk_) = attn_[h].transpose() * doh;
    Mat ds = softmax_rows_backward(attn_[h], da);
    dq.middleCols(h * dk_, dk_) = ds * kh * scale;
    dk.middleCols(h * dk_, dk_) = ds.transpose() * qh * scale;
  }
  InputGrads g;
  g.dq = wq.backward(dq);
  g.dk = wk.backward(dk);
  g.dv = wv.backward(dv);
  return g;
}

void MultiHeadAttention::visit(const ParamVisitor& fn) {
  wq.visit(fn);
  wk.visit(fn);
  wv.visit(fn);
  wo.visit(fn);
}

// ---------------------------------------------------------------------------
// Adam

Adam::Adam(std::vector<Param*> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  slots_.reserve(params_.size());
  for (Param* p : params_) {
    Slot s;
    s.m = Mat::Zero(p->w.rows(), p->w.cols());
    s.v = Mat::Zero(p->w.rows(), p->w.cols());
    slots_.push_back(std::move(s));
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Param& p = *params_[i];
    Slot& s = slots_[i];
    s.m = beta1_ * s.m + (1.0 - beta1_) * p.g;
    s.v = beta2_ * s.v + (1.0 - beta2_) * p.g.cwiseProduct(p.g);
    Mat mhat = s.m / bc1;
    Mat vhat = s.v / bc2;
    p.w.array() -= lr_ * mhat.array() / (vhat.array().sqrt() + eps_);
  }
}

void Adam::zero_grad() {
  for (Param* p : params_) p->zero_grad();
}

}  // namespace rbrl
