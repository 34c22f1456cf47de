#ifndef LEBEX_MODEL_HPP
#define LEBEX_MODEL_HPP

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lebex/numeric.hpp"
#include "lebex/quantile.hpp"

namespace lebex {

enum class ArithmeticMode { Float, Rational };

/// Finite atomic probability model, optionally a certified truncation of a
/// countable one. `residual` is the unmodeled tail weight (0 for genuinely
/// finite models); `dyadic_tail` marks the countable model with
/// P({k}) = 2^{-k}, whose tail sums close in rational arithmetic.
class AtomicModel {
 public:
  struct Atom {
    std::string label;
    double prob = 0.0;
    Rational prob_exact;  // meaningful in rational mode
  };

  static std::shared_ptr<const AtomicModel> from_probs(
      std::vector<std::pair<std::string, double>> atoms);
  static std::shared_ptr<const AtomicModel> from_exact(
      std::vector<std::pair<std::string, Rational>> atoms);
  static std::shared_ptr<const AtomicModel> uniform(int n);
  /// P({k}) = 2^{-k} for k = 1..depth, residual 2^{-depth}.
  static std::shared_ptr<const AtomicModel> dyadic(int depth);

  const std::vector<Atom>& atoms() const { return atoms_; }
  size_t size() const { return atoms_.size(); }
  ArithmeticMode mode() const { return mode_; }
  const Rational& residual() const { return residual_; }
  bool dyadic_tail() const { return dyadic_tail_; }

  nlohmann::json to_json() const;
  static std::shared_ptr<const AtomicModel> from_json(const nlohmann::json& j);

 private:
  AtomicModel() = default;
  std::vector<Atom> atoms_;
  ArithmeticMode mode_ = ArithmeticMode::Float;
  Rational residual_ = 0;
  bool dyadic_tail_ = false;
};

using ModelPtr = std::shared_ptr<const AtomicModel>;

/// Closed-form continuation of an atomic variable beyond the modeled depth of
/// a countable model: value at index k (1-based) is a + b*k for k > depth.
struct IndexTailRule {
  Rational a = 0, b = 0;
};

/// Random variable: either atom-aligned values on an AtomicModel or a
/// quantile curve (law-invariant work). Immutable.
class RandomVariable {
 public:
  RandomVariable(ModelPtr model, std::vector<double> values);
  RandomVariable(ModelPtr model, std::vector<Rational> values,
                 std::optional<IndexTailRule> tail = std::nullopt);
  explicit RandomVariable(QuantilePtr q);

  /// Wraps a curve produced by a monotone-preserving combinator (clamp,
  /// affine with nonnegative scale, tail cut of a validated curve), skipping
  /// the input-boundary grid check.
  static RandomVariable from_trusted_curve(QuantilePtr q);

  bool is_atomic() const { return model_ != nullptr; }
  const ModelPtr& model() const { return model_; }
  const std::vector<double>& values() const { return values_; }
  bool has_exact() const { return !exact_.empty(); }
  const std::vector<Rational>& exact_values() const { return exact_; }
  const std::optional<IndexTailRule>& tail_rule() const { return tail_; }
  const QuantilePtr& quantile() const { return quantile_; }

  /// Curve form of this variable: the own curve in quantile mode, otherwise
  /// the sorted atomic law, derived once and cached.
  const QuantilePtr& as_curve() const;

  /// Value at 1-based atom index, following the tail rule past the modeled
  /// depth (exact form requires rational values).
  Rational exact_at(long k) const;
  double at(long k) const;

  bool nonnegative() const;
  /// [min, max] over atoms / curve bounds when available.
  std::optional<std::pair<double, double>> bounds() const;

  nlohmann::json to_json() const;
  static RandomVariable from_json(const nlohmann::json& j, const ModelPtr& model);

 private:
  RandomVariable() = default;

  ModelPtr model_;
  std::vector<double> values_;
  std::vector<Rational> exact_;
  std::optional<IndexTailRule> tail_;
  QuantilePtr quantile_;
  mutable QuantilePtr sorted_cache_;
};

/// Nonnegative atom-aligned dual weight Z; probability densities (E[Z]=1)
/// are the dual variables of cash-invariant functionals.
struct DensityRV {
  ModelPtr model;
  std::vector<double> values;
  std::vector<Rational> exact;  // empty in float mode
  bool is_probability = false;

  static DensityRV from_values(ModelPtr m, std::vector<double> v, bool probability);
  static DensityRV from_exact(ModelPtr m, std::vector<Rational> v, bool probability);
  double expectation_of() const;  // E[Z]
};

/// dQ_n/dP on the dyadic model: Q_n({1}) = 1-1/n, Q_n({n}) = 1/n (n >= 1;
/// Q_1 = delta_1). Requires n <= modeled depth.
DensityRV dyadic_dual_density(const ModelPtr& m, long n);

// ----- operators ------------------------------------------------------------

RandomVariable quantile_of_atomic(const RandomVariable& x);
/// X * 1{X > N}; rejects signed X.
RandomVariable truncate_tail(const RandomVariable& x, double threshold);
/// (X v m) ^ n.
RandomVariable clamp(const RandomVariable& x, double m, double n);
/// E[XZ] (Z defaults to 1). Exact when everything involved is rational; the
/// dyadic tail rule is summed in closed form. Quantile mode integrates the
/// curve and reports +inf on divergence.
ExtValue expectation(const RandomVariable& x, const DensityRV* z = nullptr);

}  // namespace lebex

#endif
