#include "lebex/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

namespace lebex {

namespace {

Rational rational_from_json(const nlohmann::json& j) {
  if (j.is_string()) return Rational(j.get<std::string>());
  return Rational(j.get<double>());  // exact binary-to-rational conversion
}

void check_labels_unique(const std::vector<AtomicModel::Atom>& atoms) {
  std::set<std::string> seen;
  for (const auto& a : atoms)
    if (!seen.insert(a.label).second)
      throw std::invalid_argument("model: duplicate atom label '" + a.label + "'");
}

}  // namespace

// ---------------------------------------------------------------------------
// AtomicModel

ModelPtr AtomicModel::from_probs(std::vector<std::pair<std::string, double>> atoms) {
  auto m = std::shared_ptr<AtomicModel>(new AtomicModel);
  m->mode_ = ArithmeticMode::Float;
  double sum = 0.0;
  for (auto& [label, p] : atoms) {
    if (!(p > 0)) throw std::invalid_argument("model: atom prob must be > 0");
    m->atoms_.push_back({label, p, Rational(0)});
    sum += p;
  }
  if (m->atoms_.empty() || std::abs(sum - 1.0) > 1e-12)
    throw std::invalid_argument("model: probs must sum to 1");
  check_labels_unique(m->atoms_);
  return m;
}

ModelPtr AtomicModel::from_exact(std::vector<std::pair<std::string, Rational>> atoms) {
  auto m = std::shared_ptr<AtomicModel>(new AtomicModel);
  m->mode_ = ArithmeticMode::Rational;
  Rational sum = 0;
  for (auto& [label, p] : atoms) {
    if (!(p > 0)) throw std::invalid_argument("model: atom prob must be > 0");
    m->atoms_.push_back({label, to_double(p), p});
    sum += p;
  }
  if (m->atoms_.empty() || sum != 1)
    throw std::invalid_argument("model: probs must sum to 1 exactly in rational mode");
  check_labels_unique(m->atoms_);
  return m;
}

ModelPtr AtomicModel::uniform(int n) {
  if (n <= 0) throw std::invalid_argument("model: uniform size must be positive");
  std::vector<std::pair<std::string, Rational>> atoms;
  for (int i = 1; i <= n; ++i) atoms.emplace_back("w" + std::to_string(i), Rational(1, n));
  return from_exact(std::move(atoms));
}

ModelPtr AtomicModel::dyadic(int depth) {
  if (depth <= 0) throw std::invalid_argument("model: dyadic depth must be positive");
  auto m = std::shared_ptr<AtomicModel>(new AtomicModel);
  m->mode_ = ArithmeticMode::Rational;
  for (int k = 1; k <= depth; ++k) {
    Rational p = rational_pow2(-k);
    m->atoms_.push_back({std::to_string(k), to_double(p), p});
  }
  m->residual_ = rational_pow2(-depth);
  m->dyadic_tail_ = true;
  return m;
}

nlohmann::json AtomicModel::to_json() const {
  nlohmann::json atoms = nlohmann::json::array();
  for (const auto& a : atoms_) {
    nlohmann::json ja = {{"label", a.label}};
    if (mode_ == ArithmeticMode::Rational)
      ja["prob"] = a.prob_exact.str();
    else
      ja["prob"] = a.prob;
    atoms.push_back(ja);
  }
  nlohmann::json out = {{"atoms", atoms},
                        {"mode", mode_ == ArithmeticMode::Rational ? "rational" : "float"}};
  if (dyadic_tail_) out["dyadic_depth"] = static_cast<long>(atoms_.size());
  return out;
}

ModelPtr AtomicModel::from_json(const nlohmann::json& j) {
  if (j.contains("dyadic_depth")) return dyadic(j.at("dyadic_depth").get<int>());
  std::string mode = j.value("mode", "float");
  if (mode == "rational") {
    std::vector<std::pair<std::string, Rational>> atoms;
    for (const auto& a : j.at("atoms"))
      atoms.emplace_back(a.at("label").get<std::string>(), rational_from_json(a.at("prob")));
    return from_exact(std::move(atoms));
  }
  std::vector<std::pair<std::string, double>> atoms;
  for (const auto& a : j.at("atoms"))
    atoms.emplace_back(a.at("label").get<std::string>(), a.at("prob").get<double>());
  return from_probs(std::move(atoms));
}

// ---------------------------------------------------------------------------
// RandomVariable

RandomVariable::RandomVariable(ModelPtr model, std::vector<double> values)
    : model_(std::move(model)), values_(std::move(values)) {
  if (!model_ || values_.size() != model_->size())
    throw std::invalid_argument("rv: values must align with the model's atoms");
}

RandomVariable::RandomVariable(ModelPtr model, std::vector<Rational> values,
                               std::optional<IndexTailRule> tail)
    : model_(std::move(model)), exact_(std::move(values)), tail_(std::move(tail)) {
  if (!model_ || exact_.size() != model_->size())
    throw std::invalid_argument("rv: values must align with the model's atoms");
  if (tail_ && !model_->dyadic_tail())
    throw std::invalid_argument("rv: index tail rule requires the dyadic countable model");
  values_.reserve(exact_.size());
  for (const auto& r : exact_) values_.push_back(to_double(r));
}

RandomVariable::RandomVariable(QuantilePtr q) : quantile_(std::move(q)) {
  if (!quantile_) throw std::invalid_argument("rv: null quantile curve");
  if (!is_nondecreasing_on_grid(*quantile_))
    throw std::invalid_argument("rv: quantile curve fails the monotone grid check");
}

RandomVariable RandomVariable::from_trusted_curve(QuantilePtr q) {
  if (!q) throw std::invalid_argument("rv: null quantile curve");
  RandomVariable r;
  r.quantile_ = std::move(q);
  return r;
}

Rational RandomVariable::exact_at(long k) const {
  if (k < 1) throw std::out_of_range("rv: atom index must be >= 1");
  if (static_cast<size_t>(k) <= exact_.size()) return exact_[k - 1];
  if (tail_ && static_cast<size_t>(k) > values_.size()) return tail_->a + tail_->b * k;
  throw std::out_of_range("rv: no exact value at this index");
}

double RandomVariable::at(long k) const {
  if (k < 1) throw std::out_of_range("rv: atom index must be >= 1");
  if (static_cast<size_t>(k) <= values_.size()) return values_[k - 1];
  if (tail_) return to_double(tail_->a + tail_->b * k);
  throw std::out_of_range("rv: no value past the modeled depth");
}

bool RandomVariable::nonnegative() const {
  if (is_atomic()) {
    for (double v : values_)
      if (v < 0) return false;
    if (tail_ && (tail_->b < 0 || tail_->a + tail_->b * (long)(values_.size() + 1) < 0))
      return false;
    return true;
  }
  auto lb = quantile_->lower_bound();
  if (lb) return *lb >= 0;
  return quantile_->value(1e-12) >= 0;
}

std::optional<std::pair<double, double>> RandomVariable::bounds() const {
  if (is_atomic()) {
    if (values_.empty()) return std::nullopt;
    auto [mn, mx] = std::minmax_element(values_.begin(), values_.end());
    double lo = *mn, hi = *mx;
    if (tail_) {
      if (tail_->b != 0) return std::nullopt;  // unbounded continuation
      double a = to_double(tail_->a);
      lo = std::min(lo, a);
      hi = std::max(hi, a);
    }
    return std::make_pair(lo, hi);
  }
  auto lb = quantile_->lower_bound(), ub = quantile_->upper_bound();
  if (lb && ub) return std::make_pair(*lb, *ub);
  return std::nullopt;
}

nlohmann::json RandomVariable::to_json() const {
  if (is_atomic()) {
    nlohmann::json out = {{"kind", "atomic"}};
    if (has_exact()) {
      std::vector<std::string> vs;
      for (const auto& r : exact_) vs.push_back(r.str());
      out["values"] = vs;
    } else {
      out["values"] = values_;
    }
    if (tail_) out["tail_rule"] = {{"a", tail_->a.str()}, {"b", tail_->b.str()}};
    return out;
  }
  nlohmann::json out = quantile_->descriptor();
  out["kind"] = "quantile";
  return out;
}

RandomVariable RandomVariable::from_json(const nlohmann::json& j, const ModelPtr& model) {
  std::string kind = j.at("kind");
  if (kind == "quantile") {
    nlohmann::json q = j;
    q.erase("kind");
    return RandomVariable(quantile_from_json(q));
  }
  if (kind != "atomic") throw std::invalid_argument("rv: unknown kind '" + kind + "'");
  if (!model) throw std::invalid_argument("rv: atomic variable needs a model");
  const auto& vals = j.at("values");
  bool exact = model->mode() == ArithmeticMode::Rational;
  for (const auto& v : vals)
    if (v.is_string()) exact = true;
  if (exact) {
    std::vector<Rational> xs;
    for (const auto& v : vals) xs.push_back(rational_from_json(v));
    std::optional<IndexTailRule> tail;
    if (j.contains("tail_rule"))
      tail = IndexTailRule{rational_from_json(j.at("tail_rule").at("a")),
                           rational_from_json(j.at("tail_rule").at("b"))};
    return RandomVariable(model, std::move(xs), tail);
  }
  return RandomVariable(model, vals.get<std::vector<double>>());
}

// ---------------------------------------------------------------------------
// DensityRV

DensityRV DensityRV::from_values(ModelPtr m, std::vector<double> v, bool probability) {
  if (!m || v.size() != m->size()) throw std::invalid_argument("density: misaligned values");
  DensityRV z;
  z.model = std::move(m);
  z.values = std::move(v);
  z.is_probability = probability;
  for (double x : z.values)
    if (!(x >= 0)) throw std::invalid_argument("density: weights must be >= 0");
  if (probability && std::abs(z.expectation_of() - 1.0) > 1e-9)
    throw std::invalid_argument("density: E[Z] must equal 1 for a probability density");
  return z;
}

DensityRV DensityRV::from_exact(ModelPtr m, std::vector<Rational> v, bool probability) {
  if (!m || v.size() != m->size()) throw std::invalid_argument("density: misaligned values");
  DensityRV z;
  z.model = std::move(m);
  z.exact = std::move(v);
  z.is_probability = probability;
  Rational ez = 0;
  for (size_t i = 0; i < z.exact.size(); ++i) {
    if (z.exact[i] < 0) throw std::invalid_argument("density: weights must be >= 0");
    z.values.push_back(to_double(z.exact[i]));
    ez += z.exact[i] * z.model->atoms()[i].prob_exact;
  }
  if (probability && ez != 1)
    throw std::invalid_argument("density: E[Z] must equal 1 exactly in rational mode");
  return z;
}

double DensityRV::expectation_of() const {
  double s = 0.0;
  for (size_t i = 0; i < values.size(); ++i) s += model->atoms()[i].prob * values[i];
  return s;
}

DensityRV dyadic_dual_density(const ModelPtr& m, long n) {
  if (!m || !m->dyadic_tail())
    throw std::invalid_argument("dual density: requires the dyadic model");
  if (n < 1 || static_cast<size_t>(n) > m->size())
    throw std::invalid_argument("dual density: index outside the modeled depth");
  std::vector<Rational> z(m->size(), Rational(0));
  if (n == 1) {
    z[0] = 2;  // Q_1 = point mass at atom 1
  } else {
    z[0] = Rational(2) * (1 - Rational(1, n));           // (1-1/n) / 2^{-1}
    z[n - 1] = rational_pow2(static_cast<int>(n)) / n;   // (1/n) / 2^{-n}
  }
  return DensityRV::from_exact(m, std::move(z), true);
}

// ---------------------------------------------------------------------------
// operators

const QuantilePtr& RandomVariable::as_curve() const {
  if (quantile_) return quantile_;
  if (!sorted_cache_) sorted_cache_ = quantile_of_atomic(*this).quantile();
  return sorted_cache_;
}

RandomVariable quantile_of_atomic(const RandomVariable& x) {
  if (!x.is_atomic()) throw std::invalid_argument("quantile_of_atomic: atomic input required");
  const auto& model = *x.model();
  std::map<double, double> law;  // value -> prob
  for (size_t i = 0; i < model.size(); ++i) law[x.values()[i]] += model.atoms()[i].prob;
  // a certified residual (countable truncation) is folded into the top step
  if (model.residual() != 0 && !law.empty()) law.rbegin()->second += to_double(model.residual());
  std::vector<double> values, probs;
  for (auto& [v, p] : law) {
    values.push_back(v);
    probs.push_back(p);
  }
  return RandomVariable::from_trusted_curve(make_table_quantile(std::move(values), std::move(probs)));
}

RandomVariable truncate_tail(const RandomVariable& x, double threshold) {
  if (!x.nonnegative())
    throw std::invalid_argument("truncate_tail: input must be nonnegative (pass |X|)");
  if (!x.is_atomic())
    return RandomVariable::from_trusted_curve(tail_truncate_quantile(threshold, x.quantile()));
  if (x.has_exact()) {
    Rational thr(threshold);
    std::vector<Rational> out;
    for (const auto& v : x.exact_values()) out.push_back(v > thr ? v : Rational(0));
    std::optional<IndexTailRule> tail = x.tail_rule();
    if (tail) {
      long first = static_cast<long>(x.values().size()) + 1;
      if (tail->b == 0) {
        if (!(tail->a > thr)) tail = IndexTailRule{0, 0};
      } else if (!(tail->b > 0 && tail->a + tail->b * first > thr)) {
        throw std::invalid_argument(
            "truncate_tail: threshold cuts inside the tail rule; model a deeper truncation");
      }
    }
    return RandomVariable(x.model(), std::move(out), tail);
  }
  std::vector<double> out;
  for (double v : x.values()) out.push_back(v > threshold ? v : 0.0);
  return RandomVariable(x.model(), std::move(out));
}

RandomVariable clamp(const RandomVariable& x, double m, double n) {
  if (!(m <= n)) throw std::invalid_argument("clamp: lower level exceeds upper level");
  if (!x.is_atomic()) return RandomVariable::from_trusted_curve(clamp_quantile(m, n, x.quantile()));
  if (x.has_exact()) {
    Rational lo(m), hi(n);
    std::vector<Rational> out;
    for (const auto& v : x.exact_values()) out.push_back(std::min(hi, std::max(lo, v)));
    std::optional<IndexTailRule> tail = x.tail_rule();
    if (tail) {
      long first = static_cast<long>(x.values().size()) + 1;
      Rational v0 = tail->a + tail->b * first;
      if (tail->b == 0) {
        tail = IndexTailRule{std::min(hi, std::max(lo, tail->a)), 0};
      } else if (tail->b > 0 && v0 >= hi) {
        tail = IndexTailRule{hi, 0};  // whole continuation saturates at the cap
      } else if (tail->b > 0 && v0 >= lo) {
        throw std::invalid_argument(
            "clamp: upper level cuts inside the tail rule; model a deeper truncation");
      } else {
        throw std::invalid_argument("clamp: tail rule crosses both levels");
      }
    }
    return RandomVariable(x.model(), std::move(out), tail);
  }
  std::vector<double> out;
  for (double v : x.values()) out.push_back(std::min(n, std::max(m, v)));
  return RandomVariable(x.model(), std::move(out));
}

ExtValue expectation(const RandomVariable& x, const DensityRV* z) {
  if (!x.is_atomic()) {
    if (z) throw std::invalid_argument("expectation: densities require atomic variables");
    return ExtValue::of(quantile_mean(*x.quantile()));
  }
  const auto& model = *x.model();
  if (z && (!z->model || z->model->size() != model.size()))
    throw std::invalid_argument("expectation: misaligned density");
  bool exact = model.mode() == ArithmeticMode::Rational && x.has_exact() &&
               (!z || !z->exact.empty());
  if (exact) {
    Rational s = 0;
    for (size_t i = 0; i < model.size(); ++i) {
      Rational term = model.atoms()[i].prob_exact * x.exact_values()[i];
      if (z) term *= z->exact[i];
      s += term;
    }
    // closed-form dyadic tail: sum_{k>D} (a+bk) 2^{-k} = (a + b(D+2)) 2^{-D};
    // densities vanish past the modeled depth by construction
    if (!z && x.tail_rule() && model.dyadic_tail()) {
      long d = static_cast<long>(model.size());
      s += (x.tail_rule()->a + x.tail_rule()->b * (d + 2)) * rational_pow2(-(int)d);
    }
    return ExtValue::of_exact(s);
  }
  double s = 0.0;
  for (size_t i = 0; i < model.size(); ++i) {
    double term = model.atoms()[i].prob * x.values()[i];
    if (z) term *= z->values[i];
    s += term;
  }
  if (!z && x.tail_rule() && model.dyadic_tail()) {
    long d = static_cast<long>(model.size());
    s += to_double((x.tail_rule()->a + x.tail_rule()->b * (d + 2)) * rational_pow2(-(int)d));
  }
  return ExtValue::of(s);
}

}  // namespace lebex
