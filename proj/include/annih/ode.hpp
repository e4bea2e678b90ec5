#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "annih/errors.hpp"

namespace annih {

struct OdeControl {
  double rtol = 1e-8;
  double atol = 1e-12;   // per-component floor; 0 demands full relative resolution
  double h_init = 0.0;   // 0: span / 100
  long max_steps = 200'000'000;
};

// Dormand-Prince 5(4) with step rejection. The accept test bounds the local
// error per unit time: ||e||_scaled <= h, with scale_i = atol + rtol*|y_i|.
template <typename Rhs>
Eigen::VectorXd rk45_integrate(Rhs&& rhs, Eigen::VectorXd y, double t0, double t1,
                               const OdeControl& ctl = {}) {
  using Vec = Eigen::VectorXd;
  const double span = t1 - t0;
  if (span == 0.0) return y;
  if (span < 0.0) throw Error("rk45_integrate: t1 < t0");

  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  // Difference between the 5th- and embedded 4th-order weights.
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  const int n = static_cast<int>(y.size());
  Vec k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n), err(n);

  double t = t0;
  double h = ctl.h_init > 0 ? ctl.h_init : span / 100.0;
  h = std::min(h, span);
  rhs(y, k1);  // stays valid across rejected steps (first-same-as-last)

  for (long step = 0; step < ctl.max_steps; ++step) {
    if (t >= t1) return y;
    h = std::min(h, t1 - t);

    ytmp = y + h * (a21 * k1);
    rhs(ytmp, k2);
    ytmp = y + h * (a31 * k1 + a32 * k2);
    rhs(ytmp, k3);
    ytmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
    rhs(ytmp, k4);
    ytmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    rhs(ytmp, k5);
    ytmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    rhs(ytmp, k6);
    ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    rhs(ynew, k7);
    err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    // Weights use the pre-step magnitude: a component entered from exactly
    // zero this step has no relative scale yet, and its absolute error is
    // O(h^5), negligible against the size it later grows into.
    double scaled = 0.0;
    for (int i = 0; i < n; ++i) {
      const double scale = ctl.atol + ctl.rtol * std::abs(y[i]);
      if (scale > 0.0) scaled = std::max(scaled, std::abs(err[i]) / scale);
    }

    if (scaled <= h) {
      t += h;
      y.swap(ynew);
      k1 = k7;
      const double grow = scaled > 0 ? 0.9 * std::pow(h / scaled, 0.25) : 5.0;
      h *= std::clamp(grow, 0.2, 5.0);
    } else {
      const double shrink = 0.9 * std::pow(h / scaled, 0.25);
      h *= std::clamp(shrink, 0.1, 0.9);
      if (h < 1e-14 * span) throw StepSizeError("rk45_integrate: step size underflow");
    }
  }
  throw StepSizeError("rk45_integrate: step budget exhausted");
}

}  // namespace annih
