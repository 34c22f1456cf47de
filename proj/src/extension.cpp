#include "lebex/extension.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace lebex {

// Truncation ladder over levels 1, 2, 4, ..., 2^max_exp with the three-way
// verdict policy: converged on two consecutive small deltas, diverging past
// the cap (or on six monotonically growing deltas), inconclusive otherwise.
LimitResult ladder_limit(const std::function<double(double)>& fn, const Policy& pol) {
  LimitResult r;
  double prev = 0.0, prev_delta = -1.0;
  int growing = 0;
  for (int e = 0; e <= pol.ladder_max_exp; ++e) {
    double level = std::ldexp(1.0, e);
    double v = fn(level);
    r.ladder.emplace_back(level, v);
    if (!std::isfinite(v) || std::abs(v) > pol.divergence_cap) {
      r.value = kInf;
      r.status = LimitStatus::Diverging;
      return r;
    }
    if (e > 0) {
      double delta = std::abs(v - prev);
      double tol = std::max(pol.ladder_rel_tol, pol.ladder_rel_tol * std::abs(v));
      if (prev_delta >= 0 && delta <= tol && prev_delta <= tol) {
        r.value = v;
        r.status = LimitStatus::Converged;
        r.est_error = delta + prev_delta;
        return r;
      }
      growing = (prev_delta >= 0 && delta > prev_delta) ? growing + 1 : 0;
      prev_delta = delta;
    }
    prev = v;
  }
  // Growth that is still accelerating when the ladder runs out is divergence;
  // a ramp that merely lags the variable's scale plateaus before the top rung.
  if (growing >= pol.ladder_grow_rungs) {
    r.value = kInf;
    r.status = LimitStatus::Diverging;
    return r;
  }
  r.value = prev;
  r.status = LimitStatus::Inconclusive;
  r.est_error = prev_delta >= 0 ? prev_delta : 0.0;
  return r;
}

namespace {

bool is_zero_variable(const RandomVariable& x) {
  if (x.is_atomic()) {
    for (double v : x.values())
      if (v != 0) return false;
    if (x.tail_rule() && (x.tail_rule()->a != 0 || x.tail_rule()->b != 0)) return false;
    return true;
  }
  auto b = x.bounds();
  return b && b->first == 0 && b->second == 0;
}

RandomVariable abs_of(const RandomVariable& x) {
  if (x.nonnegative()) return x;
  if (!x.is_atomic())
    throw std::invalid_argument("abs: signed quantile curves are not supported; "
                                "pass |X| directly");
  if (x.has_exact()) {
    std::vector<Rational> out;
    for (const auto& v : x.exact_values()) out.push_back(v < 0 ? -v : v);
    std::optional<IndexTailRule> tail = x.tail_rule();
    if (tail) {
      if (tail->b == 0)
        tail = IndexTailRule{tail->a < 0 ? -tail->a : tail->a, 0};
      else if (tail->b < 0 || tail->a + tail->b * (long)(x.values().size() + 1) < 0)
        throw std::invalid_argument("abs: sign change inside the tail rule");
    }
    return RandomVariable(x.model(), std::move(out), tail);
  }
  std::vector<double> out;
  for (double v : x.values()) out.push_back(std::abs(v));
  return RandomVariable(x.model(), std::move(out));
}

bool dyadic_exact_path(const Functional& f, const RandomVariable& x) {
  const auto* s = std::get_if<SupMeasuresSpec>(&f.spec());
  return s && s->dyadic_family && x.is_atomic() && x.has_exact();
}

}  // namespace

std::string to_string(LimitStatus s) {
  switch (s) {
    case LimitStatus::Converged: return "converged";
    case LimitStatus::Diverging: return "diverging";
    default: return "inconclusive";
  }
}

std::string to_string(TailVerdict v) {
  switch (v) {
    case TailVerdict::TendsToZero: return "tends-to-zero";
    case TailVerdict::BoundedAway: return "bounded-away";
    case TailVerdict::Diverges: return "diverges";
    default: return "inconclusive";
  }
}

nlohmann::json LimitResult::to_json() const {
  nlohmann::json ladder_j = nlohmann::json::array();
  for (auto [lvl, v] : ladder) ladder_j.push_back({{"level", lvl}, {"value", v}});
  nlohmann::json out = {{"value", value},
                        {"status", to_string(status)},
                        {"est_error", est_error},
                        {"certified", certified},
                        {"ladder", ladder_j}};
  if (exact) out["exact"] = exact->str();
  return out;
}

nlohmann::json TailProfile::to_json() const {
  nlohmann::json es = nlohmann::json::array();
  for (const auto& e : entries)
    es.push_back({{"alpha", e.alpha}, {"N", e.threshold}, {"limit", e.limit.to_json()}});
  nlohmann::json vs = nlohmann::json::array();
  for (auto [a, v] : verdicts) vs.push_back({{"alpha", a}, {"verdict", to_string(v)}});
  return {{"entries", es}, {"verdicts", vs}};
}

std::string TailProfile::to_csv() const {
  std::ostringstream os;
  os << "alpha,N,value,status,est_error\n";
  os.precision(17);
  for (const auto& e : entries)
    os << e.alpha << ',' << e.threshold << ',' << e.limit.value << ','
       << to_string(e.limit.status) << ',' << e.limit.est_error << '\n';
  return os.str();
}

RandomVariable scale_abs(const RandomVariable& x, double alpha) {
  if (!(alpha >= 0)) throw std::invalid_argument("scale_abs: alpha must be >= 0");
  RandomVariable ax = abs_of(x);
  if (!ax.is_atomic())
    return RandomVariable::from_trusted_curve(affine_quantile(alpha, 0.0, ax.quantile()));
  if (ax.has_exact()) {
    Rational ra(alpha);
    std::vector<Rational> out;
    for (const auto& v : ax.exact_values()) out.push_back(ra * v);
    std::optional<IndexTailRule> tail = ax.tail_rule();
    if (tail) tail = IndexTailRule{ra * tail->a, ra * tail->b};
    return RandomVariable(ax.model(), std::move(out), tail);
  }
  std::vector<double> out;
  for (double v : ax.values()) out.push_back(alpha * v);
  return RandomVariable(ax.model(), std::move(out));
}

LimitResult hat_eval_nonneg(const Functional& f, const RandomVariable& x, const Policy& pol) {
  if (!x.nonnegative()) throw std::invalid_argument("hat_eval_nonneg: X must be >= 0");
  if (dyadic_exact_path(f, x)) {
    auto [sup, attained] = dyadic_family_sup(x);
    (void)attained;
    LimitResult r;
    r.value = to_double(sup);
    r.exact = sup;
    r.status = LimitStatus::Converged;
    r.certified = true;
    return r;
  }
  return ladder_limit(
      [&](double n) { return f.eval_bounded(clamp(x, 0.0, n)).value; }, pol);
}

HatResult hat_eval(const Functional& f, const RandomVariable& x, const Policy& pol) {
  HatResult out;
  if (x.bounds()) {
    double v = f.eval_bounded(x).value;
    out.primary.value = v;
    out.primary.status = LimitStatus::Converged;
    out.primary.ladder = {{0.0, v}};
    out.other_order_value = v;
    return out;
  }
  if (x.nonnegative()) {
    out.primary = hat_eval_nonneg(f, x, pol);
    out.other_order_value = out.primary.value;
    return out;
  }
  auto eval_box = [&](double m, double n) {
    return f.eval_bounded(clamp(x, -m, n)).value;
  };
  // m-outer: phi-hat = lim_m lim_n
  out.primary = ladder_limit(
      [&](double m) {
        return ladder_limit([&](double n) { return eval_box(m, n); }, pol).value;
      },
      pol);
  // n-outer order for the interchange check
  LimitResult other = ladder_limit(
      [&](double n) {
        return ladder_limit([&](double m) { return eval_box(m, n); }, pol).value;
      },
      pol);
  out.other_order_value = other.value;
  double a = out.primary.value, b = other.value;
  if (std::isinf(a) != std::isinf(b))
    out.order_mismatch = true;
  else if (std::isfinite(a) && std::abs(a - b) > 1e-6 * (1.0 + std::abs(a)))
    out.order_mismatch = true;
  return out;
}

LimitResult tail_functional(const Functional& f, const RandomVariable& x, double alpha,
                            double threshold, const Policy& pol) {
  if (!(alpha > 0) || !(threshold >= 0))
    throw std::invalid_argument("tail_functional: need alpha > 0, N >= 0");
  RandomVariable tail = truncate_tail(abs_of(x), threshold);
  return hat_eval_nonneg(f, scale_abs(tail, alpha), pol);
}

namespace {

// Aitken delta-squared limit of the last three entries (the tail sequences
// decay geometrically in N for every closed-form family in the catalog).
std::optional<double> aitken_limit(const std::vector<double>& v) {
  size_t n = v.size();
  if (n < 3) return std::nullopt;
  double d1 = v[n - 2] - v[n - 3], d2 = v[n - 1] - v[n - 2];
  if (d1 == d2) return std::nullopt;
  double ratio = d1 != 0 ? d2 / d1 : 0.0;
  if (!(ratio >= -0.1 && ratio < 0.95)) return std::nullopt;  // not geometric decay
  return v[n - 1] - d2 * d2 / (d2 - d1);
}

TailVerdict tail_verdict(const std::vector<const LimitResult*>& seq, const Policy& pol) {
  std::vector<double> vals;
  for (const auto* r : seq) {
    if (r->status == LimitStatus::Diverging) return TailVerdict::Diverges;
    vals.push_back(r->value);
  }
  if (vals.empty()) return TailVerdict::Inconclusive;
  double last = vals.back();
  std::optional<double> lim = aitken_limit(vals);
  double floor_est = lim.value_or(last);
  if (last <= pol.tail_eps_zero || (lim && *lim <= pol.tail_eps_zero && *lim >= -pol.tail_eps_zero))
    return TailVerdict::TendsToZero;
  if (vals.size() >= 2) {
    double prev = vals[vals.size() - 2];
    bool flat = std::abs(last - prev) <= 1e-6 * (1.0 + std::abs(last));
    if (last >= pol.tail_delta_away && prev >= pol.tail_delta_away &&
        (flat || (lim && floor_est >= pol.tail_delta_away)))
      return TailVerdict::BoundedAway;
  }
  return TailVerdict::Inconclusive;
}

}  // namespace

TailProfile tail_profile(const Functional& f, const RandomVariable& x,
                         const std::vector<double>& alphas,
                         const std::vector<double>& thresholds, const Policy& pol) {
  if (alphas.empty() || thresholds.empty())
    throw std::invalid_argument("tail_profile: grids must be nonempty");
  TailProfile prof;
  for (double a : alphas) {
    std::vector<const LimitResult*> seq;
    for (double n : thresholds)
      prof.entries.push_back({a, n, tail_functional(f, x, a, n, pol)});
    for (size_t i = prof.entries.size() - thresholds.size(); i < prof.entries.size(); ++i)
      seq.push_back(&prof.entries[i].limit);
    prof.verdicts.emplace_back(a, tail_verdict(seq, pol));
  }
  return prof;
}

double gauge_norm(const Functional& f, const RandomVariable& x, const Policy& pol) {
  if (is_zero_variable(x)) return 0.0;
  auto fits = [&](double lam) {
    LimitResult r = hat_eval_nonneg(f, scale_abs(x, 1.0 / lam), pol);
    return r.status != LimitStatus::Diverging && r.value <= 1.0 + 1e-12;
  };
  double lo = std::ldexp(1.0, -20), hi = 1.0;
  if (fits(lo)) {
    hi = lo;
    lo = 0.0;
  } else {
    while (!fits(hi)) {
      lo = hi;
      hi *= 2.0;
      if (hi > pol.gauge_cap) return kInf;
    }
  }
  while (hi - lo > pol.gauge_rel_tol * hi) {
    double mid = 0.5 * (lo + hi);
    (fits(mid) ? hi : lo) = mid;
  }
  return hi;
}

double young_gap(const Functional& f, const RandomVariable& x, const DensityRV& z,
                 double alpha, const Policy& pol) {
  RandomVariable ax = scale_abs(x, alpha);
  LimitResult hat = hat_eval_nonneg(f, ax, pol);
  if (hat.status == LimitStatus::Diverging) return kInf;
  double conj = f.conjugate(z).value.value;
  if (std::isinf(conj)) return kInf;
  double pairing = expectation(ax, &z).value;
  return hat.value + conj - pairing;
}

bool embedding_check(const Functional& f, const RandomVariable& x, const DensityRV& z,
                     const Policy& pol) {
  double norm = gauge_norm(f, x, pol);
  if (std::isinf(norm)) throw std::invalid_argument("embedding_check: gauge norm infinite");
  double conj = f.conjugate(z).value.value;
  double pairing = expectation(abs_of(x), &z).value;
  return pairing <= (1.0 + conj) * norm + 1e-8;
}

SupportReport maximal_support(const Functional& f, const ModelPtr& model, int samples,
                              uint64_t seed) {
  SupportReport rep;
  auto zs = f.dual_level_sample(1.0, samples, seed, model);
  size_t dim = model->size();
  // greedy order: each pick maximizes the number of newly charged atoms
  std::vector<bool> used(zs.size(), false), covered(dim, false);
  std::vector<size_t> order;
  for (size_t round = 0; round < zs.size(); ++round) {
    size_t best = zs.size();
    int best_gain = -1;
    for (size_t j = 0; j < zs.size(); ++j) {
      if (used[j]) continue;
      int gain = 0;
      for (size_t i = 0; i < dim; ++i)
        if (!covered[i] && zs[j].values[i] > 1e-12) ++gain;
      if (gain > best_gain) {
        best_gain = gain;
        best = j;
      }
    }
    if (best == zs.size()) break;
    used[best] = true;
    order.push_back(best);
    for (size_t i = 0; i < dim; ++i)
      if (zs[best].values[i] > 1e-12) covered[i] = true;
  }
  std::vector<double> zhat(dim, 0.0);
  double weight_left = 1.0;
  for (size_t r = 0; r < order.size(); ++r) {
    double w = (r + 1 == order.size()) ? weight_left : std::ldexp(1.0, -(int)(r + 1));
    weight_left -= w;
    for (size_t i = 0; i < dim; ++i) zhat[i] += w * zs[order[r]].values[i];
  }
  bool all_prob = !zs.empty();
  for (const auto& z : zs) all_prob = all_prob && z.is_probability;
  try {
    rep.zhat = DensityRV::from_values(model, zhat, all_prob);
  } catch (const std::invalid_argument&) {
    rep.zhat = DensityRV::from_values(model, zhat, false);
  }
  for (size_t i = 0; i < dim; ++i)
    if (zhat[i] > 1e-12) rep.support.push_back(i);
  rep.sensitive = rep.support.size() == dim;
  rep.inconclusive = zs.empty() || (static_cast<int>(zs.size()) < samples && !rep.sensitive);
  for (size_t i = 0; i < dim; ++i) {
    for (double eps : {1.0, 10.0, 100.0}) {
      std::vector<double> ind(dim, 0.0);
      ind[i] = eps;
      rep.witnesses.emplace_back(i, eps,
                                 f.eval_bounded(RandomVariable(model, ind)).value);
    }
  }
  return rep;
}

}  // namespace lebex
