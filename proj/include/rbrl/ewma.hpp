#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace rbrl {

// Bias-corrected exponentially weighted moving average with a half-life
// parameter: the weight on a sample decays by half every `half_life` steps.
class Ewma {
 public:
  explicit Ewma(double half_life) : alpha_(std::exp2(-1.0 / half_life)) {}

  double update(double x) {
    num_ = alpha_ * num_ + (1.0 - alpha_) * x;
    den_ = alpha_ * den_ + (1.0 - alpha_);
    return num_ / den_;
  }

  double value() const { return den_ > 0.0 ? num_ / den_ : 0.0; }
  double alpha() const { return alpha_; }
  bool empty() const { return den_ == 0.0; }

 private:
  double alpha_;
  double num_ = 0.0;
  double den_ = 0.0;
};

inline std::vector<double> ewma_smooth(const std::vector<double>& xs, double half_life) {
  Ewma e(half_life);
  std::vector<double> out;
  out.reserve(xs.size());
  for (double x : xs) out.push_back(e.update(x));
  return out;
}

}  // namespace rbrl
