#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "cgnn/errors.hpp"
#include "cgnn/tensor.hpp"

namespace cgnn {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_coord = 0;
  bool pass = false;
};

// Central-difference check of analytic gradients, run entirely in float64.
// f evaluates the scalar loss at the given inputs; analytic holds one gradient
// tensor per input (same shapes). Relative error uses a small floor so that
// near-zero coordinate pairs do not divide by zero.
template <class F>
GradCheckReport grad_check(F&& f, std::vector<Tensor<double>> inputs,
                           const std::vector<Tensor<double>>& analytic, double h = 1e-3,
                           double tol = 1e-3) {
  GradCheckReport rep;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    for (std::size_t i = 0; i < inputs[t].size(); ++i) {
      const double orig = inputs[t].v[i];
      inputs[t].v[i] = orig + h;
      const double fp = f(inputs);
      inputs[t].v[i] = orig - h;
      const double fm = f(inputs);
      inputs[t].v[i] = orig;
      if (!std::isfinite(fp) || !std::isfinite(fm))
        throw NumericError("grad_check: non-finite loss during perturbation");
      const double num = (fp - fm) / (2.0 * h);
      const double ana = analytic[t].v[i];
      if (!std::isfinite(ana)) throw NumericError("grad_check: non-finite analytic gradient");
      const double denom = std::max({std::fabs(num), std::fabs(ana), 1e-3});
      const double rel = std::fabs(num - ana) / denom;
      if (rel > rep.max_rel_error) {
        rep.max_rel_error = rel;
        rep.worst_input = t;
        rep.worst_coord = i;
      }
    }
  }
  rep.pass = rep.max_rel_error < tol;
  return rep;
}

}  // namespace cgnn
