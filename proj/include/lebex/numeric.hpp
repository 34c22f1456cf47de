#ifndef LEBEX_NUMERIC_HPP
#define LEBEX_NUMERIC_HPP

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <limits>
#include <optional>
#include <string>

namespace lebex {

using Rational = boost::multiprecision::cpp_rational;

inline double to_double(const Rational& r) { return r.convert_to<double>(); }

inline Rational rational_pow2(int e) {
  // 2^e for possibly negative e
  Rational r = 1;
  if (e >= 0) {
    r = Rational(boost::multiprecision::cpp_int(1) << e);
  } else {
    r = Rational(1, boost::multiprecision::cpp_int(1) << (-e));
  }
  return r;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Numerical policy knobs shared across the engine. All tolerances are
/// fixed here rather than scattered through call sites.
struct Policy {
  double quad_abs_tol = 1e-9;       // adaptive quadrature target
  double divergence_cap = 1e12;     // partial values beyond this count as +inf
  int ladder_max_exp = 20;          // truncation levels 1,2,4,...,2^20
  double ladder_rel_tol = 1e-9;     // convergence: two deltas <= max(tol, tol*|v|)
  int ladder_grow_rungs = 6;        // monotone delta growth over this many rungs => diverging
  double gauge_rel_tol = 1e-8;
  double gauge_cap = 1.0995116e12;  // 2^40, upper bracket cap for the gauge search
  double tail_eps_zero = 1e-6;      // tends-to-zero verdict threshold
  double tail_delta_away = 1e-3;    // bounded-away verdict threshold
  double root_tol = 1e-10;          // shortfall bisection
  int kusuoka_n_max = 10000;        // countable Kusuoka family truncation
  int countable_sup_n_max = 10000;  // generic countable sup-family truncation
};

inline const Policy& default_policy() {
  static Policy p;
  return p;
}

/// Extended real with an optional exact rational witness (rational-mode paths).
struct ExtValue {
  double value = 0.0;
  std::optional<Rational> exact;

  bool is_finite() const { return std::isfinite(value); }
  static ExtValue infinite() { return {kInf, std::nullopt}; }
  static ExtValue of(double v) { return {v, std::nullopt}; }
  static ExtValue of_exact(const Rational& r) { return {to_double(r), r}; }
};

}  // namespace lebex

#endif
