// Smooth scalar test functionals f(rho) with analytic first and second
// directional derivatives, used to evaluate Markov generators and
// martingale residuals. On the compact state set polynomial functionals
// need no compact-support cutoff.
#pragma once

#include <string>
#include <utility>

#include "qsme/operator_set.hpp"
#include "qsme/types.hpp"

namespace qsme {

struct TestFunctional {
  enum class Kind { linear, quadratic, bilinear };

  Kind kind = Kind::linear;
  Observable b1;
  Observable b2;  // second factor of the bilinear form

  static TestFunctional linear(Observable b) {
    b.validate();
    return {Kind::linear, std::move(b), {}};
  }

  /// f(rho) = (tr[B rho])^2
  static TestFunctional quadratic(Observable b) {
    b.validate();
    return {Kind::quadratic, std::move(b), {}};
  }

  /// f(rho) = tr[B1 rho] tr[B2 rho]
  static TestFunctional bilinear(Observable b1, Observable b2) {
    b1.validate();
    b2.validate();
    return {Kind::bilinear, std::move(b1), std::move(b2)};
  }

  std::string describe() const {
    switch (kind) {
      case Kind::linear: return "tr[" + b1.label + " rho]";
      case Kind::quadratic: return "(tr[" + b1.label + " rho])^2";
      case Kind::bilinear:
        return "tr[" + b1.label + " rho] tr[" + b2.label + " rho]";
    }
    return "";
  }

  double value(const Mat& rho) const {
    switch (kind) {
      case Kind::linear: return re_trace_prod(b1.matrix, rho);
      case Kind::quadratic: {
        const double v = re_trace_prod(b1.matrix, rho);
        return v * v;
      }
      case Kind::bilinear:
        return re_trace_prod(b1.matrix, rho) * re_trace_prod(b2.matrix, rho);
    }
    return 0.0;
  }

  /// First directional derivative D f(rho)[x].
  double d1(const Mat& rho, const Mat& x) const {
    switch (kind) {
      case Kind::linear: return re_trace_prod(b1.matrix, x);
      case Kind::quadratic:
        return 2.0 * re_trace_prod(b1.matrix, rho) *
               re_trace_prod(b1.matrix, x);
      case Kind::bilinear:
        return re_trace_prod(b1.matrix, x) * re_trace_prod(b2.matrix, rho) +
               re_trace_prod(b1.matrix, rho) * re_trace_prod(b2.matrix, x);
    }
    return 0.0;
  }

  /// Second directional derivative D^2 f(rho)[x, y]; constant in rho for
  /// these polynomial kinds.
  double d2(const Mat& /*rho*/, const Mat& x, const Mat& y) const {
    switch (kind) {
      case Kind::linear: return 0.0;
      case Kind::quadratic:
        return 2.0 * re_trace_prod(b1.matrix, x) * re_trace_prod(b1.matrix, y);
      case Kind::bilinear:
        return re_trace_prod(b1.matrix, x) * re_trace_prod(b2.matrix, y) +
               re_trace_prod(b1.matrix, y) * re_trace_prod(b2.matrix, x);
    }
    return 0.0;
  }
};

/// A functional evaluated at a fixed earlier time; products of these weight
/// the martingale residual estimator.
struct WeightFunctional {
  TestFunctional functional;
  double time = 0.0;
};

}  // namespace qsme
