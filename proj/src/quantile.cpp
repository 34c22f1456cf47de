#include "lebex/quantile.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "lebex/quadrature.hpp"

namespace lebex {

namespace {
const double kNaN = std::numeric_limits<double>::quiet_NaN();
}

// ---------------------------------------------------------------------------
// base-class fallbacks

double QuantileCurve::tail_avg_log(double s) const {
  // Generic path: only usable while t = e^{-s} is comfortably representable.
  // v(s) = integral_0^1 q(1 - t w) dw after the substitution u = t w.
  const double t = std::exp(-s);
  if (!(t > 1e-12)) return kNaN;
  QuadResult r = integrate([this, t](double w) { return value(1.0 - t * w); }, 0.0, 1.0);
  if (r.divergent) return kInf;
  return r.value;
}

double QuantileCurve::value_log(double s) const {
  if (s < 36.0) return value(-std::expm1(-s));
  if (auto ub = upper_bound()) return *ub;  // inside the flat top (if any)
  return kNaN;
}

double QuantileCurve::tail_prob_log(double level) const {
  const double t_lo = 1e-15, t_hi = 1.0 - 1e-15;
  if (upper_bound() && *upper_bound() <= level) return kInf;
  if (value(t_hi) <= level) return kInf;
  if (value(t_lo) > level) return 0.0;
  double a = t_lo, b = t_hi;  // value(a) <= level < value(b)
  for (int it = 0; it < 200 && b - a > 1e-17; ++it) {
    double mid = 0.5 * (a + b);
    (value(mid) > level ? b : a) = mid;
  }
  double p = 1.0 - 0.5 * (a + b);
  return -std::log(p);
}

// ---------------------------------------------------------------------------
// closed-form families

namespace {

class ConstantQ final : public QuantileCurve {
 public:
  explicit ConstantQ(double c) : c_(c) {}
  double value(double) const override { return c_; }
  double tail_avg_log(double) const override { return c_; }
  double tail_prob_log(double level) const override { return level < c_ ? 0.0 : kInf; }
  std::optional<double> upper_bound() const override { return c_; }
  std::optional<double> lower_bound() const override { return c_; }
  bool analytic_tail() const override { return true; }
  nlohmann::json descriptor() const override {
    return {{"family", "constant"}, {"c", c_}};
  }

 private:
  double c_;
};

// q(t) = -log(1-t)/rate: Exp(rate) distribution.
class ExponentialQ final : public QuantileCurve {
 public:
  explicit ExponentialQ(double rate) : rate_(rate) {
    if (!(rate > 0)) throw std::invalid_argument("exponential quantile: rate must be > 0");
  }
  double value(double t) const override {
    if (t >= 1.0) return kInf;
    return -std::log1p(-t) / rate_;
  }
  double value_log(double s) const override { return s / rate_; }
  // mean of the top e^{-s} tail: (1+s)/rate, valid at every depth
  double tail_avg_log(double s) const override { return (1.0 + s) / rate_; }
  double tail_prob_log(double level) const override {
    return level <= 0 ? 0.0 : rate_ * level;
  }
  std::optional<double> lower_bound() const override { return 0.0; }
  bool analytic_tail() const override { return true; }
  nlohmann::json descriptor() const override {
    return {{"family", "exponential"}, {"rate", rate_}};
  }

 private:
  double rate_;
};

// q(t) = (1-t)^{-1/a} - 1: Pareto tail index a; tail means finite iff a > 1.
class ParetoQ final : public QuantileCurve {
 public:
  explicit ParetoQ(double a) : a_(a) {
    if (!(a > 0)) throw std::invalid_argument("pareto quantile: index must be > 0");
  }
  double value(double t) const override {
    if (t >= 1.0) return kInf;
    return std::expm1(-std::log1p(-t) / a_);
  }
  double value_log(double s) const override { return std::expm1(s / a_); }
  double tail_avg_log(double s) const override {
    if (a_ <= 1.0) return kInf;
    return a_ / (a_ - 1.0) * std::exp(s / a_) - 1.0;
  }
  double tail_prob_log(double level) const override {
    return level <= 0 ? 0.0 : a_ * std::log1p(level);
  }
  std::optional<double> lower_bound() const override { return 0.0; }
  bool analytic_tail() const override { return true; }
  nlohmann::json descriptor() const override {
    return {{"family", "pareto"}, {"a", a_}};
  }

 private:
  double a_;
};

class TableQ final : public QuantileCurve {
 public:
  TableQ(std::vector<double> values, std::vector<double> probs)
      : values_(std::move(values)), probs_(std::move(probs)) {
    if (values_.empty() || values_.size() != probs_.size())
      throw std::invalid_argument("table quantile: values/probs size mismatch");
    double sum = 0.0;
    for (size_t i = 0; i < values_.size(); ++i) {
      if (!(probs_[i] > 0)) throw std::invalid_argument("table quantile: probs must be > 0");
      if (i && values_[i] < values_[i - 1])
        throw std::invalid_argument("table quantile: values must be nondecreasing");
      sum += probs_[i];
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw std::invalid_argument("table quantile: probs must sum to 1");
    cum_.resize(values_.size());
    double c = 0.0;
    for (size_t i = 0; i < probs_.size(); ++i) cum_[i] = (c += probs_[i] / sum);
    cum_.back() = 1.0;
  }

  double value(double t) const override {
    size_t i = std::upper_bound(cum_.begin(), cum_.end(), t) - cum_.begin();
    if (i >= values_.size()) i = values_.size() - 1;
    return values_[i];
  }

  double tail_avg_log(double s) const override {
    double t = std::exp(-s);
    if (t == 0.0) return values_.back();  // window inside the top atom
    double rem = t, acc = 0.0;
    for (size_t i = values_.size(); i-- > 0;) {
      double m = cum_[i] - (i ? cum_[i - 1] : 0.0);
      if (rem <= m) return (acc + rem * values_[i]) / t;
      acc += m * values_[i];
      rem -= m;
    }
    return acc / t;
  }

  double tail_prob_log(double level) const override {
    double p = 0.0;  // summed from the top for accuracy on thin tails
    for (size_t i = values_.size(); i-- > 0 && values_[i] > level;)
      p += cum_[i] - (i ? cum_[i - 1] : 0.0);
    return p > 0 ? -std::log(p) : kInf;
  }

  std::optional<double> upper_bound() const override { return values_.back(); }
  std::optional<double> lower_bound() const override { return values_.front(); }
  bool analytic_tail() const override { return true; }
  nlohmann::json descriptor() const override {
    return {{"family", "table"}, {"values", values_}, {"probs", probs_}};
  }

 private:
  std::vector<double> values_, probs_, cum_;
};

// Linear interpolation through interior knots, constant extension to 0 and 1.
class PiecewiseLinearQ final : public QuantileCurve {
 public:
  PiecewiseLinearQ(std::vector<double> ts, std::vector<double> vs)
      : ts_(std::move(ts)), vs_(std::move(vs)) {
    if (ts_.empty() || ts_.size() != vs_.size())
      throw std::invalid_argument("piecewise linear quantile: knot size mismatch");
    for (size_t i = 0; i < ts_.size(); ++i) {
      if (!(ts_[i] > 0 && ts_[i] < 1))
        throw std::invalid_argument("piecewise linear quantile: knots must lie in (0,1)");
      if (i && !(ts_[i] > ts_[i - 1] && vs_[i] >= vs_[i - 1]))
        throw std::invalid_argument("piecewise linear quantile: knots must be increasing");
    }
  }

  double value(double t) const override {
    if (t <= ts_.front()) return vs_.front();
    if (t >= ts_.back()) return vs_.back();
    size_t i = std::upper_bound(ts_.begin(), ts_.end(), t) - ts_.begin();
    double w = (t - ts_[i - 1]) / (ts_[i] - ts_[i - 1]);
    return vs_[i - 1] + w * (vs_[i] - vs_[i - 1]);
  }

  double tail_avg_log(double s) const override {
    double t = std::exp(-s);
    if (t <= 1.0 - ts_.back()) return vs_.back();  // window inside the flat top
    // exact trapezoid integral of q over (1-t, 1)
    double x = 1.0 - t;
    double acc = (1.0 - ts_.back()) * vs_.back();
    for (size_t i = ts_.size(); i-- > 1;) {
      double a = ts_[i - 1], b = ts_[i];
      if (x >= b) break;
      double lo = std::max(x, a);
      acc += (b - lo) * 0.5 * (value(lo) + vs_[i]);
    }
    if (x < ts_.front()) acc += (ts_.front() - x) * vs_.front();
    return acc / t;
  }

  double tail_prob_log(double level) const override {
    if (level >= vs_.back()) return kInf;
    if (level < vs_.front()) return 0.0;
    // rightmost t with q(t) <= level
    size_t i = std::upper_bound(vs_.begin(), vs_.end(), level) - vs_.begin();
    // vs_[i-1] <= level < vs_[i]; i >= 1 guaranteed by the bound checks
    double t = ts_[i - 1] +
               (level - vs_[i - 1]) / (vs_[i] - vs_[i - 1]) * (ts_[i] - ts_[i - 1]);
    return -std::log1p(-t);
  }

  std::optional<double> upper_bound() const override { return vs_.back(); }
  std::optional<double> lower_bound() const override { return vs_.front(); }
  bool analytic_tail() const override { return true; }
  nlohmann::json descriptor() const override {
    return {{"family", "piecewise_linear"}, {"t", ts_}, {"v", vs_}};
  }

 private:
  std::vector<double> ts_, vs_;
};

// ---------------------------------------------------------------------------
// transforms

class AffineQ final : public QuantileCurve {
 public:
  AffineQ(double scale, double shift, QuantilePtr base)
      : scale_(scale), shift_(shift), base_(std::move(base)) {
    if (!(scale >= 0)) throw std::invalid_argument("affine quantile: scale must be >= 0");
  }
  double value(double t) const override {
    return scale_ == 0 ? shift_ : scale_ * base_->value(t) + shift_;
  }
  double value_log(double s) const override {
    return scale_ == 0 ? shift_ : scale_ * base_->value_log(s) + shift_;
  }
  double tail_avg_log(double s) const override {
    if (scale_ == 0) return shift_;
    double v = base_->tail_avg_log(s);
    return scale_ * v + shift_;
  }
  double tail_prob_log(double level) const override {
    if (scale_ == 0) return level < shift_ ? 0.0 : kInf;
    return base_->tail_prob_log((level - shift_) / scale_);
  }
  std::optional<double> upper_bound() const override { return map(base_->upper_bound()); }
  std::optional<double> lower_bound() const override { return map(base_->lower_bound()); }
  bool analytic_tail() const override { return scale_ == 0 || base_->analytic_tail(); }
  nlohmann::json descriptor() const override {
    return {{"transform", "affine"}, {"scale", scale_}, {"shift", shift_},
            {"base", base_->descriptor()}};
  }

 private:
  std::optional<double> map(std::optional<double> b) const {
    if (scale_ == 0) return shift_;
    if (!b) return std::nullopt;
    return scale_ * *b + shift_;
  }
  double scale_, shift_;
  QuantilePtr base_;
};

class ClampQ final : public QuantileCurve {
 public:
  ClampQ(double lo, double hi, QuantilePtr base) : lo_(lo), hi_(hi), base_(std::move(base)) {
    if (!(lo <= hi)) throw std::invalid_argument("clamp quantile: lo > hi");
    s_hi_ = std::isinf(hi_) ? kInf : base_->tail_prob_log(hi_);
    s_lo_ = std::isinf(lo_) ? 0.0 : base_->tail_prob_log(lo_);
  }

  double value(double t) const override {
    return std::min(hi_, std::max(lo_, base_->value(t)));
  }

  double value_log(double s) const override {
    if (s >= s_hi_) return hi_;
    return std::min(hi_, std::max(lo_, base_->value_log(s)));
  }

  // Split the top-e^{-s} window into the hi-saturated part (mass e^{-s_hi}),
  // the untouched middle, and the lo-saturated part; each piece averages in
  // closed form given the base curve's tail averages at s, s_lo, s_hi.
  double tail_avg_log(double s) const override {
    if (s >= s_hi_) return hi_;
    double r_hi = s_hi_ == kInf ? 0.0 : std::exp(s - s_hi_);
    double r_lo = s >= s_lo_ ? 1.0 : std::exp(s - s_lo_);
    double b_hi = r_hi > 0 ? base_->tail_avg_log(s_hi_) : 0.0;
    double b_mid = base_->tail_avg_log(std::max(s, s_lo_));
    if (std::isinf(b_mid) || (r_hi > 0 && std::isinf(b_hi))) {
      // base tail mean diverges; the clamp keeps ours finite iff hi is finite,
      // but then the pieces cannot be differenced -- integrate the clamped
      // values directly (bounded integrand, works while t is representable)
      if (std::isinf(hi_)) return kInf;
      return QuantileCurve::tail_avg_log(s);
    }
    if (std::isnan(b_hi) || std::isnan(b_mid)) return QuantileCurve::tail_avg_log(s);
    double out = r_hi * (hi_ - b_hi) + r_lo * b_mid;
    if (r_lo < 1.0) out += lo_ * (1.0 - r_lo);
    return out;
  }

  double tail_prob_log(double level) const override {
    if (level >= hi_) return kInf;
    if (level < lo_) return 0.0;
    return base_->tail_prob_log(level);
  }

  std::optional<double> upper_bound() const override {
    auto b = base_->upper_bound();
    if (std::isinf(hi_)) return b;
    return b ? std::min(hi_, *b) : hi_;
  }
  std::optional<double> lower_bound() const override {
    auto b = base_->lower_bound();
    if (std::isinf(lo_)) return b;
    return b ? std::max(lo_, *b) : lo_;
  }
  bool analytic_tail() const override { return base_->analytic_tail(); }
  nlohmann::json descriptor() const override {
    return {{"transform", "clamp"}, {"lo", lo_}, {"hi", hi_}, {"base", base_->descriptor()}};
  }

 private:
  double lo_, hi_, s_hi_, s_lo_;
  QuantilePtr base_;
};

class TailTruncQ final : public QuantileCurve {
 public:
  TailTruncQ(double threshold, QuantilePtr base) : n_(threshold), base_(std::move(base)) {
    if (!(n_ >= 0)) throw std::invalid_argument("tail truncation: threshold must be >= 0");
    auto lb = base_->lower_bound();
    if (lb && *lb < 0)
      throw std::invalid_argument("tail truncation: base curve must be nonnegative");
    s_n_ = base_->tail_prob_log(n_);
  }

  double value(double t) const override {
    double v = base_->value(t);
    return v > n_ ? v : 0.0;
  }

  double value_log(double s) const override {
    double v = base_->value_log(s);
    return v > n_ ? v : 0.0;
  }

  double tail_avg_log(double s) const override {
    if (s >= s_n_) return base_->tail_avg_log(s);
    if (s_n_ == kInf) return 0.0;
    double b = base_->tail_avg_log(s_n_);
    if (std::isnan(b)) return QuantileCurve::tail_avg_log(s);
    return std::exp(s - s_n_) * b;
  }

  double tail_prob_log(double level) const override {
    if (level < 0) return 0.0;
    if (level < n_) return s_n_;
    return base_->tail_prob_log(level);
  }

  std::optional<double> upper_bound() const override { return base_->upper_bound(); }
  std::optional<double> lower_bound() const override { return 0.0; }
  bool analytic_tail() const override { return base_->analytic_tail(); }
  nlohmann::json descriptor() const override {
    return {{"transform", "tail_truncate"}, {"threshold", n_}, {"base", base_->descriptor()}};
  }

 private:
  double n_, s_n_;
  QuantilePtr base_;
};

}  // namespace

// ---------------------------------------------------------------------------
// factories

QuantilePtr make_constant_quantile(double c) { return std::make_shared<ConstantQ>(c); }
QuantilePtr make_exponential_quantile(double rate) {
  return std::make_shared<ExponentialQ>(rate);
}
QuantilePtr make_pareto_quantile(double a) { return std::make_shared<ParetoQ>(a); }
QuantilePtr make_table_quantile(std::vector<double> values, std::vector<double> probs) {
  return std::make_shared<TableQ>(std::move(values), std::move(probs));
}
QuantilePtr make_piecewise_linear_quantile(std::vector<double> knots_t,
                                           std::vector<double> knots_v) {
  return std::make_shared<PiecewiseLinearQ>(std::move(knots_t), std::move(knots_v));
}
QuantilePtr affine_quantile(double scale, double shift, QuantilePtr base) {
  return std::make_shared<AffineQ>(scale, shift, std::move(base));
}
QuantilePtr clamp_quantile(double lo, double hi, QuantilePtr base) {
  return std::make_shared<ClampQ>(lo, hi, std::move(base));
}
QuantilePtr tail_truncate_quantile(double threshold, QuantilePtr base) {
  return std::make_shared<TailTruncQ>(threshold, std::move(base));
}

bool is_nondecreasing_on_grid(const QuantileCurve& q, int n) {
  double prev = -kInf;
  for (int i = 0; i < n; ++i) {
    double t = (i + 0.5) / n;
    double v = q.value(t);
    if (std::isnan(v)) return false;
    if (v < prev - 1e-12 * (1.0 + std::abs(prev))) return false;
    prev = v;
  }
  return true;
}

double quantile_mean(const QuantileCurve& q) { return q.tail_avg_log(0.0); }

QuantilePtr quantile_from_json(const nlohmann::json& j) {
  if (j.contains("transform")) {
    std::string tr = j.at("transform");
    QuantilePtr base = quantile_from_json(j.at("base"));
    if (tr == "affine")
      return affine_quantile(j.value("scale", 1.0), j.value("shift", 0.0), base);
    if (tr == "clamp") return clamp_quantile(j.value("lo", -kInf), j.value("hi", kInf), base);
    if (tr == "tail_truncate") return tail_truncate_quantile(j.at("threshold"), base);
    throw std::invalid_argument("unknown quantile transform: " + tr);
  }
  std::string fam = j.at("family");
  if (fam == "constant") return make_constant_quantile(j.at("c"));
  if (fam == "exponential") return make_exponential_quantile(j.at("rate"));
  if (fam == "pareto") return make_pareto_quantile(j.at("a"));
  if (fam == "table")
    return make_table_quantile(j.at("values").get<std::vector<double>>(),
                               j.at("probs").get<std::vector<double>>());
  if (fam == "piecewise_linear")
    return make_piecewise_linear_quantile(j.at("t").get<std::vector<double>>(),
                                          j.at("v").get<std::vector<double>>());
  throw std::invalid_argument("unknown quantile family: " + fam);
}

}  // namespace lebex
