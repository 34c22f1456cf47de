#include "lebex/functional.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "lebex/quadrature.hpp"

namespace lebex {
namespace {

constexpr double kE = 2.718281828459045235;

struct WeightedAtom {
  double prob;
  double value;
};

// Atom list including the pseudo-atom for a certified residual: the tail
// rule's constant (bounded continuations only) or 0 when the variable is
// implicitly zero past the modeled depth.
std::vector<WeightedAtom> atoms_of(const RandomVariable& x) {
  const auto& m = *x.model();
  std::vector<WeightedAtom> out;
  out.reserve(m.size() + 1);
  for (size_t i = 0; i < m.size(); ++i) out.push_back({m.atoms()[i].prob, x.values()[i]});
  if (m.residual() != 0) {
    double v = 0.0;
    if (x.tail_rule()) {
      if (x.tail_rule()->b != 0)
        throw std::invalid_argument("eval_bounded: unbounded tail continuation");
      v = to_double(x.tail_rule()->a);
    }
    out.push_back({to_double(m.residual()), v});
  }
  return out;
}

void require_bounded(const RandomVariable& x) {
  if (!x.bounds())
    throw std::invalid_argument("eval_bounded: unbounded variable (use the extension engine)");
}

// E[f(X)] over a quantile curve. Curves bounded above integrate in
// s = -log(1-u) space, where upper-tail mass far below double resolution in
// u (depth e^{-s} << 1e-16) remains visible; the remainder past the cap is
// closed with the flat top value. Unbounded curves keep the u-space path.
double expect_curve(const QuantileCurve& q, const std::function<double(double)>& f) {
  auto ub = q.upper_bound();
  if (!ub) {
    QuadResult r = integrate([&](double t) { return f(q.value(t)); }, 0.0, 1.0);
    return r.divergent ? kInf : r.value;
  }
  double fh = f(*ub);
  if (!std::isfinite(fh)) return kInf;  // the top carries positive mass on ladder rungs
  // Extend the range until the flat-top closure f(sup) e^{-s} is negligible
  // relative to what has been collected (exponentially shifted integrands can
  // be far smaller than f(sup), so no fixed cap works).
  // Depth cap: past s ~ 708 the weight e^{-s} is subnormal, and products with
  // it carry relative representation noise that no panel refinement can
  // resolve. Everything below the cap is integrated exactly; the remainder is
  // closed with the flat-top bound f(sup) e^{-s_end}, which is exact once the
  // curve has reached its supremum and an upper bound otherwise.
  const double s_max = 700.0;
  double total = 0.0, s_lo = 0.0;
  for (double s_end = 50.0;; s_end = std::min(2.0 * s_end, s_max)) {
    QuadResult r =
        integrate([&](double s) { return f(q.value_log(s)) * std::exp(-s); }, s_lo, s_end);
    if (r.divergent) return kInf;
    total += r.value;
    double closure = fh * std::exp(-s_end);
    if (q.value_log(s_end) >= *ub ||
        std::abs(closure) <= 1e-10 * (std::abs(total) + std::abs(closure)) + 1e-300 ||
        s_end >= s_max)
      return total + closure;
    s_lo = s_end;
  }
}

// E[f(X)] for bounded X in either representation.
double expect_fn(const RandomVariable& x, const std::function<double(double)>& f) {
  if (x.is_atomic()) {
    double s = 0.0;
    for (const auto& a : atoms_of(x)) s += a.prob * f(a.value);
    return s;
  }
  return expect_curve(*x.quantile(), f);
}

QuantilePtr to_curve(const RandomVariable& x) { return x.as_curve(); }

double entropic_eval(const RandomVariable& x) {
  if (x.is_atomic()) {
    auto atoms = atoms_of(x);
    double m = -kInf;
    for (const auto& a : atoms) m = std::max(m, a.value);
    double s = 0.0;
    for (const auto& a : atoms) s += a.prob * std::exp(a.value - m);
    return m + std::log(s);
  }
  double ub = x.bounds()->second;
  double m = expect_curve(*x.quantile(), [ub](double v) { return std::exp(v - ub); });
  return std::isinf(m) ? kInf : ub + std::log(m);
}

double distortion_eval(const DistortionMeasure& mu, const QuantileCurve& q) {
  double s = 0.0;
  for (auto [t, w] : mu.atoms) s += w * q.tail_avg_log(-std::log(t));
  return s;
}

// One member of the countable two-band Kusuoka family, integrated in
// s = -log t space so the deep band (n up to 10^4) never underflows:
//   value_n = (1-1/n) e/(e-1) int_0^1 v(s)e^{-s} ds
//           + 1/(n(e-1))   int_{n-1}^n v(s)e^{n-s} ds.
double kusuoka_band_member(const QuantileCurve& q, long n) {
  auto v = [&](double s) { return q.tail_avg_log(s); };
  QuadResult i1 = integrate([&](double s) { return v(s) * std::exp(-s); }, 0.0, 1.0);
  QuadResult i2 = integrate(
      [&](double s) { return v(s) * std::exp(static_cast<double>(n) - s); },
      static_cast<double>(n - 1), static_cast<double>(n));
  if (i1.divergent || i2.divergent) return kInf;
  double nn = static_cast<double>(n);
  return (1.0 - 1.0 / nn) * (kE / (kE - 1.0)) * i1.value + i2.value / (nn * (kE - 1.0));
}

// sup over the countable band family: geometric n-grid up to n_max, plus an
// affine-in-1/n extrapolation of the last rungs when three of them are
// collinear (the truncated sup undershoots the countable one by O(1/n_max)).
double kusuoka_band_sup(const QuantileCurve& q, int n_max) {
  // dense low range: tail-truncated variables peak at small finite n (the
  // deep band must clear the truncation threshold by exactly one unit)
  std::vector<long> ns;
  for (long n = 1; n <= std::min<long>(64, n_max); ++n) ns.push_back(n);
  for (long n = 128; n <= n_max; n *= 2) ns.push_back(n);
  if (ns.back() != n_max) ns.push_back(n_max);
  double best = -kInf;
  std::vector<std::pair<long, double>> tail3;
  for (long n : ns) {
    double v = kusuoka_band_member(q, n);
    if (std::isnan(v)) return v;
    if (std::isinf(v)) return v;
    best = std::max(best, v);
    tail3.emplace_back(n, v);
    if (tail3.size() > 3) tail3.erase(tail3.begin());
  }
  if (tail3.size() == 3) {
    auto [n0, v0] = tail3[0];
    auto [n1, v1] = tail3[1];
    auto [n2, v2] = tail3[2];
    double a = (n2 * v2 - n1 * v1) / static_cast<double>(n2 - n1);  // limit if affine in 1/n
    double b = (a - v2) * n2;
    if (std::abs((a - b / n0) - v0) <= 1e-6 * (1.0 + std::abs(a)))
      best = std::max(best, a);
  }
  return best;
}

double min_beta(const std::vector<double>& betas) {
  double m = kInf;
  for (double b : betas) m = std::min(m, b);
  return m;
}

// ---------------------------------------------------------------------------
// shortfall machinery

double scenario_expect_loss(const LossFunction& l, const RandomVariable& x, double shift,
                            const DensityRV* p) {
  if (!x.is_atomic())
    return expect_curve(*x.quantile(), [&](double v) { return l.l(v - shift); });
  if (p) {
    double s = 0.0;
    for (size_t i = 0; i < x.values().size(); ++i)
      s += x.model()->atoms()[i].prob * p->values[i] * l.l(x.values()[i] - shift);
    return s;
  }
  double s = 0.0;
  for (const auto& a : atoms_of(x)) s += a.prob * l.l(a.value - shift);
  return s;
}

double shortfall_root(const std::function<double(double)>& excess_loss,
                      std::pair<double, double> bounds) {
  // excess_loss(x) = sup_P E_P[l(X-x)] - l(0), nonincreasing in x
  double lo = bounds.first - 1.0, hi = bounds.second + 1.0;
  for (int i = 0; i < 90 && excess_loss(lo) < 0; ++i) lo -= std::max(1.0, hi - lo);
  for (int i = 0; i < 90 && excess_loss(hi) > 0; ++i) hi += std::max(1.0, hi - lo);
  for (int i = 0; i < 200 && hi - lo > default_policy().root_tol; ++i) {
    double mid = 0.5 * (lo + hi);
    (excess_loss(mid) > 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// (1/lambda)(l(0) + E[l*(lambda Z ratio)]) minimized over lambda > 0:
// coarse scan on log lambda, golden-section refinement around the best cell.
double shortfall_conj_lambda_min(const std::function<double(double)>& g_of_loglam) {
  double best_u = 0.0, best_v = kInf;
  for (double u = -30.0; u <= 30.0; u += 1.0) {
    double v = g_of_loglam(u);
    if (v < best_v) {
      best_v = v;
      best_u = u;
    }
  }
  if (!std::isfinite(best_v)) return kInf;
  double a = best_u - 1.0, b = best_u + 1.0;
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - gr * (b - a), d = a + gr * (b - a);
  double fc = g_of_loglam(c), fd = g_of_loglam(d);
  for (int i = 0; i < 80; ++i) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = g_of_loglam(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = g_of_loglam(d);
    }
  }
  return std::min({best_v, fc, fd});
}

}  // namespace

// ---------------------------------------------------------------------------
// free evaluators

double avar(double lambda, const RandomVariable& x) {
  if (!(lambda > 0 && lambda <= 1)) throw std::invalid_argument("avar: level outside (0,1]");
  return to_curve(x)->tail_avg_log(-std::log(lambda));
}

double shortfall_eval(const LossFunction& l, const RandomVariable& x) {
  require_bounded(x);
  double l0 = l.l(0.0);
  return shortfall_root(
      [&](double s) { return scenario_expect_loss(l, x, s, nullptr) - l0; }, *x.bounds());
}

double robust_shortfall_eval(const LossFunction& l, const std::vector<DensityRV>& scenarios,
                             const RandomVariable& x) {
  if (scenarios.empty()) throw std::invalid_argument("robust shortfall: empty scenario set");
  require_bounded(x);
  if (!x.is_atomic())
    throw std::invalid_argument("robust shortfall: scenario families need atomic form");
  double l0 = l.l(0.0);
  auto worst = [&](double s) {
    double m = -kInf;
    for (const auto& p : scenarios)
      m = std::max(m, scenario_expect_loss(l, x, s, &p));
    return m - l0;
  };
  return shortfall_root(worst, *x.bounds());
}

std::pair<Rational, bool> dyadic_family_sup(const RandomVariable& x) {
  if (!x.is_atomic() || !x.has_exact() || !x.model()->dyadic_tail())
    throw std::invalid_argument("dyadic family sup: exact dyadic-model variable required");
  long d = static_cast<long>(x.model()->size());
  Rational x1 = x.exact_at(1);
  Rational best = x1;  // n = 1 member
  bool attained = true;
  for (long n = 2; n <= d; ++n) {
    Rational f = (1 - Rational(1, n)) * x1 + x.exact_at(n) / n;
    if (f > best) best = f;
  }
  if (x.tail_rule()) {
    const auto& tr = *x.tail_rule();
    // f(n) = x1 + b + (a - x1)/n for n > d: monotone, limit x1 + b
    Rational first = x1 + tr.b + (tr.a - x1) / (d + 1);
    Rational limit = x1 + tr.b;
    if (first > best) best = first;
    if (limit > best) {
      best = limit;
      attained = (tr.a == x1);  // only then is the limit value hit at finite n
    }
  }
  return {best, attained};
}

// ---------------------------------------------------------------------------
// Functional

Functional::Functional(Variant v) : spec_(std::move(v)) {
  struct Init {
    Functional& f;
    void operator()(const EntropicSpec&) {
      f.name_ = "entropic";
      f.cash_invariant_ = f.law_invariant_ = true;
    }
    void operator()(const AVaRSpec& s) {
      if (!(s.lambda > 0 && s.lambda <= 1))
        throw std::invalid_argument("avar: level outside (0,1]");
      f.name_ = "avar";
      f.cash_invariant_ = f.coherent_ = f.law_invariant_ = true;
    }
    void operator()(const DistortionSpec& s) {
      double sum = 0;
      for (auto [t, w] : s.mu.atoms) {
        if (!(t > 0 && t <= 1 && w > 0))
          throw std::invalid_argument("distortion: atoms must lie in (0,1] with w > 0");
        sum += w;
      }
      if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("distortion: mu must be a probability measure");
      f.name_ = "distortion";
      f.cash_invariant_ = f.coherent_ = f.law_invariant_ = true;
    }
    void operator()(const KusuokaSpec& s) {
      if (!s.countable_bands) {
        if (s.members.empty()) throw std::invalid_argument("kusuoka: empty family");
        std::vector<double> betas;
        for (const auto& [mu, b] : s.members) {
          (void)mu;
          if (b < 0) throw std::invalid_argument("kusuoka: penalties must be >= 0");
          betas.push_back(b);
        }
        if (std::abs(min_beta(betas)) > 1e-12)
          throw std::invalid_argument("kusuoka: inf beta = 0 required for phi0(0)=0");
        f.coherent_ = min_beta(betas) == 0 &&
                      std::all_of(betas.begin(), betas.end(), [](double b) { return b == 0; });
      } else {
        f.coherent_ = true;  // beta = 0 throughout the band family
      }
      f.name_ = "kusuoka";
      f.cash_invariant_ = f.law_invariant_ = true;
    }
    void operator()(const ShortfallSpec&) {
      f.name_ = "shortfall";
      f.cash_invariant_ = true;
    }
    void operator()(const RobustShortfallSpec& s) {
      if (s.scenarios.empty()) throw std::invalid_argument("robust shortfall: empty family");
      f.name_ = "robust_shortfall";
      f.cash_invariant_ = true;
    }
    void operator()(const ModularSpec&) { f.name_ = "modular"; }
    void operator()(const SupMeasuresSpec& s) {
      if (!s.dyadic_family && s.members.empty())
        throw std::invalid_argument("sup-measures: empty family");
      bool all_prob = true, all_zero_beta = true;
      std::vector<double> betas;
      for (const auto& [q, b] : s.members) {
        all_prob = all_prob && q.is_probability;
        all_zero_beta = all_zero_beta && b == 0;
        if (b < 0) throw std::invalid_argument("sup-measures: penalties must be >= 0");
        betas.push_back(b);
      }
      if (!s.members.empty() && std::abs(min_beta(betas)) > 1e-12)
        throw std::invalid_argument("sup-measures: inf beta = 0 required for phi0(0)=0");
      if (s.dyadic_family && !s.model)
        throw std::invalid_argument("sup-measures: dyadic family needs its model");
      f.name_ = "sup_measures";
      f.cash_invariant_ = s.dyadic_family || all_prob;
      f.coherent_ = s.dyadic_family || all_zero_beta;
    }
    void operator()(const PositiveLinearSpec& s) {
      f.name_ = "positive_linear";
      f.cash_invariant_ = std::abs(s.nu.expectation_of() - 1.0) <= 1e-12;
      f.coherent_ = true;
    }
  };
  std::visit(Init{*this}, spec_);
  shift_ = 0.0;  // phi0(0) = 0 holds by construction for every variant
}

ExtValue Functional::eval_bounded(const RandomVariable& x) const {
  require_bounded(x);
  struct Eval {
    const Functional& f;
    const RandomVariable& x;
    ExtValue operator()(const EntropicSpec&) { return ExtValue::of(entropic_eval(x)); }
    ExtValue operator()(const AVaRSpec& s) { return ExtValue::of(avar(s.lambda, x)); }
    ExtValue operator()(const DistortionSpec& s) {
      return ExtValue::of(distortion_eval(s.mu, *to_curve(x)));
    }
    ExtValue operator()(const KusuokaSpec& s) {
      auto q = to_curve(x);
      if (s.countable_bands) return ExtValue::of(kusuoka_band_sup(*q, s.n_max));
      double best = -kInf;
      for (const auto& [mu, beta] : s.members)
        best = std::max(best, distortion_eval(mu, *q) - beta);
      return ExtValue::of(best);
    }
    ExtValue operator()(const ShortfallSpec& s) {
      return ExtValue::of(shortfall_eval(s.loss, x));
    }
    ExtValue operator()(const RobustShortfallSpec& s) {
      return ExtValue::of(robust_shortfall_eval(s.loss, s.scenarios, x));
    }
    ExtValue operator()(const ModularSpec& s) {
      const auto& phi = s.young.phi;
      return ExtValue::of(expect_fn(x, [&](double v) { return phi(std::max(v, 0.0)); }));
    }
    ExtValue operator()(const SupMeasuresSpec& s) {
      if (!x.is_atomic())
        throw std::invalid_argument("sup-measures: atomic representation required");
      if (s.dyadic_family) {
        auto [v, attained] = dyadic_family_sup(x);
        (void)attained;
        return ExtValue::of_exact(v);
      }
      double best = -kInf;
      for (const auto& [q, beta] : s.members) {
        auto e = expectation(x, &q);
        best = std::max(best, e.value - beta);
      }
      return ExtValue::of(best);
    }
    ExtValue operator()(const PositiveLinearSpec& s) { return expectation(x, &s.nu); }
  };
  return std::visit(Eval{*this, x}, spec_);
}

ConjugateValue Functional::conjugate(const DensityRV& z) const {
  struct Conj {
    const Functional& f;
    const DensityRV& z;

    bool mean_one() const { return std::abs(z.expectation_of() - 1.0) <= 1e-9; }

    ConjugateValue operator()(const EntropicSpec&) {
      if (!mean_one()) return {ExtValue::infinite(), false};
      double s = 0.0;
      for (size_t i = 0; i < z.values.size(); ++i) {
        double v = z.values[i];
        if (v > 0) s += z.model->atoms()[i].prob * v * std::log(v);
      }
      return {ExtValue::of(s), false};
    }
    ConjugateValue operator()(const AVaRSpec& s) {
      if (!mean_one()) return {ExtValue::infinite(), false};
      double cap = 1.0 / s.lambda + 1e-9;
      for (double v : z.values)
        if (v > cap) return {ExtValue::infinite(), false};
      return {ExtValue::of(0.0), false};
    }
    ConjugateValue operator()(const DistortionSpec&) { return f.generic_conjugate(z); }
    ConjugateValue operator()(const KusuokaSpec&) { return f.generic_conjugate(z); }
    ConjugateValue operator()(const ShortfallSpec& s) {
      if (!mean_one()) return {ExtValue::infinite(), false};
      double l0 = s.loss.l(0.0);
      auto g = [&](double u) {
        double lam = std::exp(u), acc = 0.0;
        for (size_t i = 0; i < z.values.size(); ++i) {
          double c = s.loss.conj(lam * z.values[i]);
          if (!std::isfinite(c)) return kInf;
          acc += z.model->atoms()[i].prob * c;
        }
        return (l0 + acc) / lam;
      };
      return {ExtValue::of(shortfall_conj_lambda_min(g)), false};
    }
    ConjugateValue operator()(const RobustShortfallSpec& s) {
      if (!mean_one()) return {ExtValue::infinite(), false};
      double l0 = s.loss.l(0.0);
      double best = kInf;
      for (const auto& p : s.scenarios) {
        auto g = [&](double u) {
          double lam = std::exp(u), acc = 0.0;
          for (size_t i = 0; i < z.values.size(); ++i) {
            double num = z.values[i];
            double den = p.values[i];
            double ratio;
            if (den == 0) {
              if (num * z.model->atoms()[i].prob == 0) continue;  // no Z-mass here
              return kInf;  // l*(inf) = inf convention
            }
            ratio = num / den;
            double c = s.loss.conj(lam * ratio);
            if (!std::isfinite(c)) return kInf;
            acc += z.model->atoms()[i].prob * den * c;
          }
          return (l0 + acc) / lam;
        };
        best = std::min(best, shortfall_conj_lambda_min(g));
      }
      return {ExtValue::of(best), false};
    }
    ConjugateValue operator()(const ModularSpec& s) {
      if (!s.young.conj) return f.generic_conjugate(z);
      double acc = 0.0;
      for (size_t i = 0; i < z.values.size(); ++i) {
        double c = s.young.conj(z.values[i]);
        if (!std::isfinite(c)) return {ExtValue::infinite(), false};
        acc += z.model->atoms()[i].prob * c;
      }
      return {ExtValue::of(acc), false};
    }
    ConjugateValue operator()(const SupMeasuresSpec& s) {
      if (s.dyadic_family) return f.dyadic_hull_membership(z);
      return f.hull_membership_numeric(z, s);
    }
    ConjugateValue operator()(const PositiveLinearSpec& s) {
      for (size_t i = 0; i < z.values.size(); ++i)
        if (std::abs(z.values[i] - s.nu.values[i]) > 1e-10)
          return {ExtValue::infinite(), false};
      return {ExtValue::of(0.0), false};
    }
  };
  for (double v : z.values)
    if (!(v >= 0)) throw std::invalid_argument("conjugate: Z must be nonnegative");
  return std::visit(Conj{*this, z}, spec_);
}

// Membership of Z in the closed convex hull of the dyadic duals R_n: the
// weight on R_n (n >= 2) is pinned by coordinate n (w_n = n Z(n) 2^{-n}),
// w_1 then follows from coordinate 1; membership iff w_1 >= 0 and the
// weights sum to exactly 1.
ConjugateValue Functional::dyadic_hull_membership(const DensityRV& z) const {
  if (z.exact.empty())
    throw std::invalid_argument("dyadic conjugate: exact dual weights required");
  long d = static_cast<long>(z.model->size());
  Rational sum_w = 0, coord1 = 0;
  for (long k = 2; k <= d; ++k) {
    Rational w = Rational(k) * z.exact[k - 1] / rational_pow2(static_cast<int>(k));
    sum_w += w;
    coord1 += w * 2 * (1 - Rational(1, k));
  }
  // 2 w_1 + coord1 = Z(1)
  Rational w1 = (z.exact[0] - coord1) / 2;
  if (w1 < 0 || w1 + sum_w != 1) return {ExtValue::infinite(), false};
  return {ExtValue::of_exact(Rational(0)), false};
}

// Frank-Wolfe projection of Z onto the hull of an explicit finite family
// under the L2(P) norm; reports the indicator with a tolerance.
ConjugateValue Functional::hull_membership_numeric(const DensityRV& z,
                                                  const SupMeasuresSpec& s) const {
  size_t n = s.members.size(), dim = z.values.size();
  std::vector<double> w(n, 1.0 / n), cur(dim, 0.0);
  auto recompute = [&] {
    std::fill(cur.begin(), cur.end(), 0.0);
    for (size_t j = 0; j < n; ++j)
      for (size_t i = 0; i < dim; ++i) cur[i] += w[j] * s.members[j].first.values[i];
  };
  auto grad_dot = [&](const std::vector<double>& q) {
    double g = 0.0;
    for (size_t i = 0; i < dim; ++i)
      g += z.model->atoms()[i].prob * (cur[i] - z.values[i]) * q[i];
    return g;
  };
  recompute();
  // away-step Frank-Wolfe with exact line search (the objective is
  // quadratic, so the step length closes in closed form)
  for (int it = 0; it < 20000; ++it) {
    size_t fw = 0, away = 0;
    double g_fw = kInf, g_away = -kInf;
    for (size_t j = 0; j < n; ++j) {
      double g = grad_dot(s.members[j].first.values);
      if (g < g_fw) {
        g_fw = g;
        fw = j;
      }
      if (w[j] > 0 && g > g_away) {
        g_away = g;
        away = j;
      }
    }
    double g_cur = grad_dot(cur);
    if (g_cur - g_fw < 1e-16) break;  // FW gap closed
    bool use_away = (g_away - g_cur) > (g_cur - g_fw) && w[away] < 1.0;
    std::vector<double> dir(dim);
    double gmax;
    if (use_away) {
      for (size_t i = 0; i < dim; ++i) dir[i] = cur[i] - s.members[away].first.values[i];
      gmax = w[away] / (1.0 - w[away]);
    } else {
      for (size_t i = 0; i < dim; ++i) dir[i] = s.members[fw].first.values[i] - cur[i];
      gmax = 1.0;
    }
    double num = -grad_dot(dir), den = 0.0;
    for (size_t i = 0; i < dim; ++i) den += z.model->atoms()[i].prob * dir[i] * dir[i];
    if (den <= 0) break;
    double step = std::clamp(num / den, 0.0, gmax);
    if (step <= 0) break;
    if (use_away) {
      for (size_t j = 0; j < n; ++j) w[j] *= (1.0 + step);
      w[away] -= step;
    } else {
      for (size_t j = 0; j < n; ++j) w[j] *= (1.0 - step);
      w[fw] += step;
    }
    for (auto& wj : w) wj = std::max(wj, 0.0);
    recompute();
  }
  double resid = 0.0, beta_mix = 0.0;
  for (size_t i = 0; i < dim; ++i)
    resid += z.model->atoms()[i].prob * (cur[i] - z.values[i]) * (cur[i] - z.values[i]);
  for (size_t j = 0; j < n; ++j) beta_mix += w[j] * s.members[j].second;
  if (std::sqrt(resid) <= 1e-8) return {ExtValue::of(beta_mix), true};
  return {ExtValue::infinite(), true};  // non-membership at solver tolerance
}

// Generic fallback: coordinate-ascent maximization of E[XZ] - phi0(X) over
// the box [-B, B]^atoms; an honest lower bound on the true conjugate.
ConjugateValue Functional::generic_conjugate(const DensityRV& z) const {
  const double B = 1e3;
  const auto& model = z.model;
  std::vector<double> x(model->size(), 0.0);
  auto objective = [&] {
    RandomVariable rx(model, x);
    double exz = expectation(rx, &z).value;
    return exz - eval_bounded(rx).value;
  };
  double cur = objective();
  for (int sweep = 0; sweep < 30; ++sweep) {
    double improved = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
      double lo = -B, hi = B;
      for (int it = 0; it < 60; ++it) {
        double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
        double save = x[i];
        x[i] = m1;
        double f1 = objective();
        x[i] = m2;
        double f2 = objective();
        x[i] = save;
        if (f1 < f2)
          lo = m1;
        else
          hi = m2;
      }
      double save = x[i];
      x[i] = 0.5 * (lo + hi);
      double f = objective();
      if (f > cur) {
        improved += f - cur;
        cur = f;
      } else {
        x[i] = save;
      }
    }
    if (improved < 1e-12) break;
  }
  return {ExtValue::of(std::max(cur, 0.0)), true};
}

std::vector<DensityRV> Functional::dual_level_sample(double c, int k, uint64_t seed,
                                                     const ModelPtr& model) const {
  if (c < 0) throw std::invalid_argument("dual_level_sample: level must be >= 0");
  std::mt19937_64 rng(seed);
  auto unit = [&] { return (rng() >> 11) * 0x1.0p-53; };
  std::vector<DensityRV> out;
  auto admit = [&](auto&& make_z) {
    try {
      DensityRV z = make_z();
      auto cv = conjugate(z);
      if (cv.value.value <= c + 1e-9) {
        out.push_back(std::move(z));
        return true;
      }
    } catch (const std::invalid_argument&) {
      // construction tolerance miss counts as a rejection
    }
    return false;
  };

  // Z = 1 belongs to every normalized level set with phi0*(1) = 0
  admit([&] {
    std::vector<double> ones(model->size(), 1.0);
    return DensityRV::from_values(model, ones, std::abs(1.0 - to_double(model->residual())) <= 1e-15);
  });

  // the level set of a positive linear functional is the single point nu
  if (const auto* pl = std::get_if<PositiveLinearSpec>(&spec_)) {
    if (out.empty()) admit([&] { return pl->nu; });
    return out;
  }

  const bool dyadic = std::holds_alternative<SupMeasuresSpec>(spec_) &&
                      std::get<SupMeasuresSpec>(spec_).dyadic_family;
  int budget = 400 * k;
  while (static_cast<int>(out.size()) < k && budget-- > 0) {
    if (dyadic) {
      long span = std::min<long>(static_cast<long>(model->size()), 12);
      std::vector<long> ws(span);
      long tot = 0;
      for (auto& w : ws) tot += (w = 1 + static_cast<long>(rng() % 8));
      std::vector<Rational> zv(model->size(), Rational(0));
      for (long n = 1; n <= span; ++n) {
        Rational wn(ws[n - 1], tot);
        auto rn = dyadic_dual_density(model, n);
        for (size_t i = 0; i < zv.size(); ++i) zv[i] += wn * rn.exact[i];
      }
      admit([&] { return DensityRV::from_exact(model, std::move(zv), true); });
      continue;
    }
    if (std::holds_alternative<EntropicSpec>(spec_)) {
      std::vector<double> y(model->size());
      for (auto& v : y) v = 2.0 * unit() - 1.0;
      double theta = 1.0;
      for (int halving = 0; halving < 40; ++halving, theta *= 0.5) {
        double m = 0.0;
        for (size_t i = 0; i < y.size(); ++i)
          m += model->atoms()[i].prob * std::exp(theta * y[i]);
        std::vector<double> zv(y.size());
        for (size_t i = 0; i < y.size(); ++i) zv[i] = std::exp(theta * y[i]) / m;
        if (admit([&] { return DensityRV::from_values(model, zv, true); })) break;
      }
      continue;
    }
    if (const auto* av = std::get_if<AVaRSpec>(&spec_)) {
      std::vector<double> zv(model->size());
      for (auto& v : zv) v = unit() * unit();
      double cap = 1.0 / av->lambda;
      for (int pass = 0; pass < 60; ++pass) {
        double mean = 0.0;
        for (size_t i = 0; i < zv.size(); ++i) mean += model->atoms()[i].prob * zv[i];
        if (mean <= 0) break;
        for (auto& v : zv) v /= mean;
        bool ok = true;
        for (auto& v : zv)
          if (v > cap) {
            v = cap;
            ok = false;
          }
        if (ok) break;
      }
      admit([&] { return DensityRV::from_values(model, zv, true); });
      continue;
    }
    // generic rejection from random normalized densities
    std::vector<double> zv(model->size());
    for (auto& v : zv) v = 0.05 + unit();
    if (cash_invariant_) {
      double mean = 0.0;
      for (size_t i = 0; i < zv.size(); ++i) mean += model->atoms()[i].prob * zv[i];
      for (auto& v : zv) v /= mean;
    }
    admit([&] { return DensityRV::from_values(model, zv, cash_invariant_); });
  }
  return out;
}

nlohmann::json Functional::to_json() const {
  struct Ser {
    nlohmann::json operator()(const EntropicSpec&) { return {{"variant", "entropic"}}; }
    nlohmann::json operator()(const AVaRSpec& s) {
      return {{"variant", "avar"}, {"lambda", s.lambda}};
    }
    nlohmann::json operator()(const DistortionSpec& s) {
      nlohmann::json mu = nlohmann::json::array();
      for (auto [t, w] : s.mu.atoms) mu.push_back({{"t", t}, {"w", w}});
      return {{"variant", "distortion"}, {"mu", mu}};
    }
    nlohmann::json operator()(const KusuokaSpec& s) {
      if (s.countable_bands)
        return {{"variant", "kusuoka"}, {"family", "countable_bands"}, {"n_max", s.n_max}};
      nlohmann::json members = nlohmann::json::array();
      for (const auto& [mu, b] : s.members) {
        nlohmann::json jm = nlohmann::json::array();
        for (auto [t, w] : mu.atoms) jm.push_back({{"t", t}, {"w", w}});
        members.push_back({{"mu", jm}, {"beta", b}});
      }
      return {{"variant", "kusuoka"}, {"members", members}};
    }
    nlohmann::json operator()(const ShortfallSpec& s) {
      return {{"variant", "shortfall"}, {"loss", s.loss.descriptor}};
    }
    nlohmann::json operator()(const RobustShortfallSpec& s) {
      nlohmann::json ps = nlohmann::json::array();
      for (const auto& p : s.scenarios) ps.push_back(p.values);
      return {{"variant", "robust_shortfall"}, {"loss", s.loss.descriptor},
              {"scenarios", ps}};
    }
    nlohmann::json operator()(const ModularSpec& s) {
      return {{"variant", "modular"}, {"young", s.young.descriptor}};
    }
    nlohmann::json operator()(const SupMeasuresSpec& s) {
      if (s.dyadic_family) return {{"variant", "sup_measures"}, {"family", "dyadic"}};
      nlohmann::json ms = nlohmann::json::array();
      for (const auto& [q, b] : s.members) ms.push_back({{"z", q.values}, {"beta", b}});
      return {{"variant", "sup_measures"}, {"members", ms}};
    }
    nlohmann::json operator()(const PositiveLinearSpec& s) {
      return {{"variant", "positive_linear"}, {"nu", s.nu.values}};
    }
  };
  return std::visit(Ser{}, spec_);
}

Functional Functional::from_json(const nlohmann::json& j, const ModelPtr& model) {
  std::string v = j.at("variant");
  if (v == "entropic") return Functional(EntropicSpec{});
  if (v == "avar") return Functional(AVaRSpec{j.at("lambda")});
  if (v == "distortion") {
    DistortionSpec s;
    for (const auto& a : j.at("mu")) s.mu.atoms.emplace_back(a.at("t"), a.at("w"));
    return Functional(std::move(s));
  }
  if (v == "kusuoka") {
    KusuokaSpec s;
    if (j.value("family", "") == "countable_bands") {
      s.countable_bands = true;
      s.n_max = j.value("n_max", default_policy().kusuoka_n_max);
    } else {
      for (const auto& m : j.at("members")) {
        DistortionMeasure mu;
        for (const auto& a : m.at("mu")) mu.atoms.emplace_back(a.at("t"), a.at("w"));
        s.members.emplace_back(std::move(mu), m.value("beta", 0.0));
      }
    }
    return Functional(std::move(s));
  }
  if (v == "shortfall") return Functional(ShortfallSpec{loss_from_json(j.at("loss"))});
  if (v == "robust_shortfall") {
    RobustShortfallSpec s{loss_from_json(j.at("loss")), {}};
    for (const auto& p : j.at("scenarios"))
      s.scenarios.push_back(
          DensityRV::from_values(model, p.get<std::vector<double>>(), true));
    return Functional(std::move(s));
  }
  if (v == "modular") return Functional(ModularSpec{young_from_json(j.at("young"))});
  if (v == "sup_measures") {
    SupMeasuresSpec s;
    if (j.value("family", "") == "dyadic") {
      s.dyadic_family = true;
      s.model = model;
    } else {
      for (const auto& m : j.at("members"))
        s.members.emplace_back(
            DensityRV::from_values(model, m.at("z").get<std::vector<double>>(), true),
            m.value("beta", 0.0));
    }
    return Functional(std::move(s));
  }
  if (v == "positive_linear")
    return Functional(
        PositiveLinearSpec{DensityRV::from_values(model, j.at("nu").get<std::vector<double>>(), false)});
  throw std::invalid_argument("unknown functional variant '" + v + "'");
}

}  // namespace lebex
