#pragma once

// Central-difference gradient verification for any module exposing its
// parameter list. The caller first accumulates analytic gradients for a
// deterministic scalar loss, then hands over the same loss as a closure;
// each parameter entry is perturbed in place and restored.

#include "rbrl/layers.hpp"

#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace rbrl {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst_param;
  int worst_row = 0;
  int worst_col = 0;
  long long entries_checked = 0;
};

// rel_err = |a - f| / max(|a|, |f|, floor); the floor keeps true-zero
// gradients (e.g. projections cut off by a constant attention pattern) from
// dividing rounding noise by itself.
inline GradCheckResult grad_check(const std::vector<Param*>& params,
                                  const std::function<double()>& loss,
                                  double h = 1e-5,
                                  int max_entries_per_param = 0,
                                  double floor = 1e-6) {
  GradCheckResult res;
  for (Param* p : params) {
    const long long total = static_cast<long long>(p->w.rows()) * p->w.cols();
    long long stride = 1;
    if (max_entries_per_param > 0 && total > max_entries_per_param) {
      stride = (total + max_entries_per_param - 1) / max_entries_per_param;
    }
    for (long long idx = 0; idx < total; idx += stride) {
      int r = static_cast<int>(idx / p->w.cols());
      int c = static_cast<int>(idx % p->w.cols());
      double orig = p->w(r, c);
      p->w(r, c) = orig + h;
      double lp = loss();
      p->w(r, c) = orig - h;
      double lm = loss();
      p->w(r, c) = orig;
      double fd = (lp - lm) / (2.0 * h);
      double an = p->g(r, c);
      double rel = std::fabs(an - fd) / std::max({std::fabs(an), std::fabs(fd), floor});
      ++res.entries_checked;
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst_param = p->name;
        res.worst_row = r;
        res.worst_col = c;
      }
    }
  }
  return res;
}

}  // namespace rbrl
