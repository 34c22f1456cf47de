#ifndef LEBEX_FUNCTIONAL_HPP
#define LEBEX_FUNCTIONAL_HPP

#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "lebex/loss.hpp"
#include "lebex/model.hpp"

namespace lebex {

/// Discrete probability measure on (0,1]: atoms (t_i, w_i).
struct DistortionMeasure {
  std::vector<std::pair<double, double>> atoms;  // t in (0,1], weight > 0, sum 1
};

/// Conjugate value plus evidence grade: closed-form results certify, the
/// generic fallback only bounds from below (the sup runs over a box).
struct ConjugateValue {
  ExtValue value;
  bool lower_bound_only = false;
};

struct EntropicSpec {};

struct AVaRSpec {
  double lambda;  // in (0,1]
};

struct DistortionSpec {
  DistortionMeasure mu;
};

/// sup_n ( integral AV@R_t(X) mu_n(dt) - beta_n ). Either an explicit finite
/// family or the countable two-band family
///   mu_n = (1-1/n) e/(e-1) Leb|(1/e,1] + (1/n) e^n/(e-1) Leb|(e^-n, e^{-n+1}],
/// beta_n = 0, truncated at n_max with extrapolation evidence.
struct KusuokaSpec {
  std::vector<std::pair<DistortionMeasure, double>> members;  // (mu_n, beta_n)
  bool countable_bands = false;
  int n_max = default_policy().kusuoka_n_max;
};

struct ShortfallSpec {
  LossFunction loss;
};

struct RobustShortfallSpec {
  LossFunction loss;
  std::vector<DensityRV> scenarios;  // nonempty, probability densities
};

struct ModularSpec {
  YoungFunction young;
};

/// sup_n (E_{Q_n}[X] - beta_n). Either an explicit finite family or the
/// countable dyadic family Q_n({1}) = 1-1/n, Q_n({n}) = 1/n, beta_n = 0,
/// whose supremum closes exactly for variables with an affine tail rule.
struct SupMeasuresSpec {
  std::vector<std::pair<DensityRV, double>> members;
  bool dyadic_family = false;
  ModelPtr model;  // required for the dyadic family
};

struct PositiveLinearSpec {
  DensityRV nu;
};

class Functional {
 public:
  using Variant = std::variant<EntropicSpec, AVaRSpec, DistortionSpec, KusuokaSpec,
                               ShortfallSpec, RobustShortfallSpec, ModularSpec,
                               SupMeasuresSpec, PositiveLinearSpec>;

  explicit Functional(Variant v);

  const Variant& spec() const { return spec_; }
  const std::string& name() const { return name_; }
  bool cash_invariant() const { return cash_invariant_; }
  bool coherent() const { return coherent_; }
  bool law_invariant() const { return law_invariant_; }
  /// Normalization shift subtracted so that phi0(0) = 0 (zero for every
  /// shipped variant; stored for audit).
  double normalization_shift() const { return shift_; }

  /// phi0 on a bounded variable. Law-invariant variants accept quantile
  /// form; measure-family variants require atomic form on their model.
  ExtValue eval_bounded(const RandomVariable& x) const;

  /// phi0*(Z) = sup_{X bounded} E[XZ] - phi0(X).
  ConjugateValue conjugate(const DensityRV& z) const;

  /// Up to k densities with conjugate <= c + 1e-9; deterministic in seed.
  std::vector<DensityRV> dual_level_sample(double c, int k, uint64_t seed,
                                           const ModelPtr& model) const;

  nlohmann::json to_json() const;
  static Functional from_json(const nlohmann::json& j, const ModelPtr& model);

 private:
  ConjugateValue generic_conjugate(const DensityRV& z) const;
  ConjugateValue dyadic_hull_membership(const DensityRV& z) const;
  ConjugateValue hull_membership_numeric(const DensityRV& z, const SupMeasuresSpec& s) const;

  Variant spec_;
  std::string name_;
  bool cash_invariant_ = false, coherent_ = false, law_invariant_ = false;
  double shift_ = 0.0;
};

/// AV@R_lambda of a quantile-form variable (atomic input converted first).
double avar(double lambda, const RandomVariable& x);

/// Root of x -> E[l(X - x)] - l(0) by bracket expansion + bisection.
double shortfall_eval(const LossFunction& l, const RandomVariable& x);
double robust_shortfall_eval(const LossFunction& l, const std::vector<DensityRV>& scenarios,
                             const RandomVariable& x);

/// The Ex. 3.3-style countable sup over the dyadic dual family, exact for
/// variables carrying an affine tail rule. Returns (sup, attained).
std::pair<Rational, bool> dyadic_family_sup(const RandomVariable& x);

}  // namespace lebex

#endif
