#pragma once

#include <cmath>
#include <limits>
#include <utility>

namespace fastreact::roots {

// Bisection down to `coarse_width`, then Newton polish kept inside the
// bracket. f(lo) and f(hi) must have opposite signs (or one of them is zero).
// Newton steps that leave the bracket fall back to bisection.
template <class Fn, class Dfn>
double bracketed(Fn&& f, Dfn&& df, double lo, double hi,
                 double coarse_width = 1e-6, double residual_tol = 1e-13,
                 int max_iter = 200) {
  double flo = f(lo);
  double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  const bool rising = flo < 0.0;

  int iter = 0;
  while (hi - lo > coarse_width && iter < max_iter) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm < 0.0) == rising) {
      lo = mid;
    } else {
      hi = mid;
    }
    ++iter;
  }

  double x = 0.5 * (lo + hi);
  for (; iter < max_iter; ++iter) {
    const double fx = f(x);
    if (std::abs(fx) <= residual_tol) return x;
    if ((fx < 0.0) == rising) {
      lo = x;
    } else {
      hi = x;
    }
    const double d = df(x);
    double next = (d != 0.0) ? x - fx / d : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == x || hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() *
                                      std::max(1.0, std::abs(x))) {
      return std::abs(f(next)) < std::abs(fx) ? next : x;
    }
    x = next;
  }
  return x;
}

// Pure bisection on the sign of f; used for locating sign changes of F',
// which may be discontinuous (piecewise-affine reaction functions).
template <class Fn>
double bisect_sign(Fn&& f, double lo, double hi, int max_iter = 200) {
  const bool lo_positive = f(lo) > 0.0;
  for (int i = 0; i < max_iter; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if ((f(mid) > 0.0) == lo_positive) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Golden-section search for the minimizer of a unimodal function on [lo, hi].
template <class Fn>
std::pair<double, double> golden_min(Fn&& f, double lo, double hi, double tol = 1e-12) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo;
  double b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  const double x = 0.5 * (a + b);
  return {x, f(x)};
}

}  // namespace fastreact::roots
