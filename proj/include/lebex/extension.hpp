#ifndef LEBEX_EXTENSION_HPP
#define LEBEX_EXTENSION_HPP

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lebex/functional.hpp"

namespace lebex {

enum class LimitStatus { Converged, Diverging, Inconclusive };
std::string to_string(LimitStatus s);

/// Outcome of a truncation-ladder limit. `certified` marks closed-form
/// (exact) evaluation paths that bypass the ladder.
struct LimitResult {
  double value = 0.0;
  std::optional<Rational> exact;
  LimitStatus status = LimitStatus::Inconclusive;
  std::vector<std::pair<double, double>> ladder;  // (level, partial value)
  double est_error = 0.0;
  bool certified = false;

  nlohmann::json to_json() const;
};

enum class TailVerdict { TendsToZero, BoundedAway, Diverges, Inconclusive };
std::string to_string(TailVerdict v);

/// Grid of phi-hat(alpha |X| 1{|X|>N}) values: the raw evidence for
/// heart-membership classification.
struct TailProfile {
  struct Entry {
    double alpha, threshold;
    LimitResult limit;
  };
  std::vector<Entry> entries;
  std::vector<std::pair<double, TailVerdict>> verdicts;  // one per alpha

  nlohmann::json to_json() const;
  std::string to_csv() const;  // alpha,N,value,status,est_error
};

struct SupportReport {
  DensityRV zhat;
  std::vector<size_t> support;  // atom indices with zhat > 0
  bool sensitive = false;
  bool inconclusive = false;  // sampler exhausted: support is a lower bound
  // (atom, epsilon, phi0(eps 1_atom)) witnesses
  std::vector<std::tuple<size_t, double, double>> witnesses;
};

/// Generic truncation-ladder limit of fn over levels 1, 2, ..., 2^max with
/// the three-way verdict policy.
LimitResult ladder_limit(const std::function<double(double)>& fn,
                         const Policy& pol = default_policy());

/// phi-hat(X) = lim_n phi0(X ^ n) for X >= 0 (monotone ladder; exact
/// closed form on the dyadic sup-measures path).
LimitResult hat_eval_nonneg(const Functional& f, const RandomVariable& x,
                            const Policy& pol = default_policy());

/// Double truncation limit lim_m lim_n phi0((X v -m) ^ n), both iteration
/// orders; order_mismatch certifies failure of the interchange.
struct HatResult {
  LimitResult primary;       // m-outer order
  double other_order_value;  // n-outer order
  bool order_mismatch = false;
};
HatResult hat_eval(const Functional& f, const RandomVariable& x,
                   const Policy& pol = default_policy());

/// phi-hat(alpha |X| 1{|X|>N}).
LimitResult tail_functional(const Functional& f, const RandomVariable& x, double alpha,
                            double threshold, const Policy& pol = default_policy());

TailProfile tail_profile(const Functional& f, const RandomVariable& x,
                         const std::vector<double>& alphas, const std::vector<double>& thresholds,
                         const Policy& pol = default_policy());

/// Luxemburg gauge inf{lambda > 0 : phi-hat(|X|/lambda) <= 1}.
double gauge_norm(const Functional& f, const RandomVariable& x,
                  const Policy& pol = default_policy());

/// phi-hat(alpha|X|) + phi0*(Z) - E[alpha|X| Z]  (>= 0 up to tolerance).
double young_gap(const Functional& f, const RandomVariable& x, const DensityRV& z,
                 double alpha, const Policy& pol = default_policy());

/// E[|X| Z] <= (1 + phi0*(Z)) ||X|| within 1e-8 slack.
bool embedding_check(const Functional& f, const RandomVariable& x, const DensityRV& z,
                     const Policy& pol = default_policy());

SupportReport maximal_support(const Functional& f, const ModelPtr& model, int samples,
                              uint64_t seed);

/// alpha |X| (atomic or nonnegative quantile; signed quantile rejected).
RandomVariable scale_abs(const RandomVariable& x, double alpha);

}  // namespace lebex

#endif
