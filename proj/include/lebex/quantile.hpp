#ifndef LEBEX_QUANTILE_HPP
#define LEBEX_QUANTILE_HPP

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lebex/numeric.hpp"

namespace lebex {

/// A quantile function q on (0,1), nondecreasing and left-continuous.
///
/// Besides pointwise evaluation, curves expose the average of the upper
/// tail in log scale:
///
///     tail_avg_log(s) = e^s * integral_0^{e^-s} q(1-u) du
///
/// i.e. the mean of the top e^{-s} fraction of the distribution. Keeping s
/// (not t = e^{-s}) as the argument lets spectral evaluations reach levels
/// like e^{-10^4} that underflow double. Closed-form families override it;
/// the default falls back to adaptive quadrature where t is representable.
class QuantileCurve {
 public:
  virtual ~QuantileCurve() = default;

  virtual double value(double t) const = 0;

  /// q(1 - e^{-s}): pointwise value at tail depth e^{-s}. Usable at depths
  /// where t = 1 - e^{-s} rounds to 1; closed-form families override it, the
  /// default falls back to value() while t is representable and to the upper
  /// bound (if any) beyond, NaN otherwise.
  virtual double value_log(double s) const;

  /// Mean of the top e^{-s} tail; +inf when that tail mean diverges, NaN
  /// when the curve cannot produce it at this depth (no closed form and t
  /// underflows).
  virtual double tail_avg_log(double s) const;

  /// -log P(X > level). 0 when the whole mass exceeds level, +inf when none.
  virtual double tail_prob_log(double level) const;

  virtual std::optional<double> upper_bound() const { return std::nullopt; }
  virtual std::optional<double> lower_bound() const { return std::nullopt; }

  /// True when tail_avg_log is closed-form at every depth (certifying paths).
  virtual bool analytic_tail() const { return false; }

  virtual nlohmann::json descriptor() const = 0;
};

using QuantilePtr = std::shared_ptr<const QuantileCurve>;

QuantilePtr make_constant_quantile(double c);
QuantilePtr make_exponential_quantile(double rate);
/// Pareto with q(t) = (1-t)^{-1/a} - 1; finite mean iff a > 1.
QuantilePtr make_pareto_quantile(double a);
/// Step function: q(t) = values[i] on [cum[i-1], cum[i]); values nondecreasing.
QuantilePtr make_table_quantile(std::vector<double> values, std::vector<double> probs);
/// Piecewise-linear through knots (t_i, v_i), 0 < t_1 < ... < t_k < 1.
QuantilePtr make_piecewise_linear_quantile(std::vector<double> knots_t,
                                           std::vector<double> knots_v);

QuantilePtr affine_quantile(double scale, double shift, QuantilePtr base);
QuantilePtr clamp_quantile(double lo, double hi, QuantilePtr base);
/// q * 1{q > N}; base must be nonnegative.
QuantilePtr tail_truncate_quantile(double threshold, QuantilePtr base);

/// Grid check of the nondecreasing invariant (>= n sample points).
bool is_nondecreasing_on_grid(const QuantileCurve& q, int n = 1024);

/// E[X] = tail_avg_log(0); +inf / -inf / NaN passed through.
double quantile_mean(const QuantileCurve& q);

QuantilePtr quantile_from_json(const nlohmann::json& j);

}  // namespace lebex

#endif
