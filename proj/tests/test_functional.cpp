#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "lebex/functional.hpp"

using namespace lebex;

namespace {

ModelPtr two_atoms() { return AtomicModel::from_probs({{"a", 0.5}, {"b", 0.5}}); }

RandomVariable dyadic_identity(const ModelPtr& m) {
  std::vector<Rational> xs;
  for (size_t k = 1; k <= m->size(); ++k) xs.push_back(Rational(static_cast<long>(k)));
  return RandomVariable(m, std::move(xs), IndexTailRule{0, 1});
}

std::vector<double> random_simplex_free(std::mt19937& rng, int n, double lo, double hi) {
  std::vector<double> v(n);
  for (auto& x : v) x = lo + (hi - lo) * std::generate_canonical<double, 53>(rng);
  return v;
}

}  // namespace

TEST_CASE("entropic: zero and constants") {
  Functional f{EntropicSpec{}};
  auto m = two_atoms();
  CHECK(f.eval_bounded(RandomVariable(m, std::vector<double>{0.0, 0.0})).value ==
        doctest::Approx(0.0));
  CHECK(f.eval_bounded(RandomVariable(m, std::vector<double>{2.5, 2.5})).value ==
        doctest::Approx(2.5));
  CHECK(f.cash_invariant());
  CHECK(!f.coherent());
}

TEST_CASE("avar evaluations") {
  // constant curve
  CHECK(avar(0.3, RandomVariable(make_constant_quantile(4.0))) == doctest::Approx(4.0));
  // exp(1), lambda = 1 -> mean 1
  RandomVariable e(make_exponential_quantile(1.0));
  CHECK(avar(1.0, e) == doctest::Approx(1.0).epsilon(1e-9));
  // exp(1) clamped high, lambda = 0.5 -> 1 - log 0.5
  Functional f{AVaRSpec{0.5}};
  auto xc = clamp(e, 0.0, 2000.0);
  CHECK(f.eval_bounded(xc).value == doctest::Approx(1.0 - std::log(0.5)).epsilon(1e-6));
  // two atoms (0.5,1),(0.5,3), lambda = 0.75 -> 7/3
  auto m = two_atoms();
  CHECK(avar(0.75, RandomVariable(m, std::vector<double>{1.0, 3.0})) ==
        doctest::Approx(7.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("distortion: convex mix of AV@R levels") {
  DistortionSpec s;
  s.mu.atoms = {{0.5, 0.6}, {1.0, 0.4}};
  Functional f{std::move(s)};
  auto m = two_atoms();
  RandomVariable x(m, std::vector<double>{1.0, 3.0});
  double v_half = avar(0.5, x), v_one = avar(1.0, x);
  CHECK(f.eval_bounded(x).value == doctest::Approx(0.6 * v_half + 0.4 * v_one));
}

TEST_CASE("shortfall: exp loss reproduces the entropic value") {
  auto m = two_atoms();
  RandomVariable x(m, std::vector<double>{0.0, std::log(3.0)});
  CHECK(shortfall_eval(exp_loss(), x) == doctest::Approx(std::log(2.0)).epsilon(1e-8));
  // constants are fixed points
  CHECK(shortfall_eval(exp_loss(), RandomVariable(m, std::vector<double>{1.2, 1.2})) ==
        doctest::Approx(1.2).epsilon(1e-9));
}

TEST_CASE("shortfall: quad-plus-linear loss matches a grid-scan oracle") {
  auto l = quad_plus_linear_loss();
  auto m = two_atoms();
  RandomVariable x(m, std::vector<double>{-1.0, 2.0});
  double root = shortfall_eval(l, x);
  // scan for the smallest x with E[l(X-x)] <= l(0)
  double l0 = l.l(0.0), oracle = kInf;
  for (double s = -3.0; s <= 3.0; s += 1e-6) {
    if (0.5 * l.l(-1.0 - s) + 0.5 * l.l(2.0 - s) <= l0) {
      oracle = s;
      break;
    }
  }
  CHECK(root == doctest::Approx(oracle).epsilon(1e-5));
}

TEST_CASE("robust shortfall: singleton family and grid oracle") {
  auto m = two_atoms();
  auto l = exp_loss();
  RandomVariable x(m, std::vector<double>{-0.5, 1.5});
  std::vector<DensityRV> singleton = {
      DensityRV::from_values(m, std::vector<double>{1.0, 1.0}, true)};
  CHECK(robust_shortfall_eval(l, singleton, x) ==
        doctest::Approx(shortfall_eval(l, x)).epsilon(1e-9));
  CHECK(robust_shortfall_eval(l, singleton,
                              RandomVariable(m, std::vector<double>{0.7, 0.7})) ==
        doctest::Approx(0.7).epsilon(1e-9));

  std::vector<DensityRV> two = {
      DensityRV::from_values(m, std::vector<double>{1.6, 0.4}, true),
      DensityRV::from_values(m, std::vector<double>{0.2, 1.8}, true)};
  double root = robust_shortfall_eval(l, two, x);
  double l0 = l.l(0.0), oracle = kInf;
  for (double s = -3.0; s <= 3.0; s += 1e-6) {
    double worst = std::max(0.8 * l.l(-0.5 - s) + 0.2 * l.l(1.5 - s),
                            0.1 * l.l(-0.5 - s) + 0.9 * l.l(1.5 - s));
    if (worst <= l0) {
      oracle = s;
      break;
    }
  }
  CHECK(root == doctest::Approx(oracle).epsilon(1e-5));
}

TEST_CASE("sup-measures over the dyadic family: exact suprema") {
  auto m = AtomicModel::dyadic(40);
  auto x = dyadic_identity(m);
  auto [sup, attained] = dyadic_family_sup(x);
  CHECK(sup == 2);
  CHECK(!attained);

  // clamped at c: members 2 - 1/n peak at n = c, attained
  auto xc = clamp(x, 0.0, 8.0);
  auto [sup_c, attained_c] = dyadic_family_sup(xc);
  CHECK(sup_c == 2 - Rational(1, 8));
  CHECK(attained_c);

  SupMeasuresSpec s;
  s.dyadic_family = true;
  s.model = m;
  Functional f{std::move(s)};
  auto v = f.eval_bounded(xc);
  REQUIRE(v.exact.has_value());
  CHECK(*v.exact == 2 - Rational(1, 8));
  CHECK(f.coherent());
  CHECK(f.cash_invariant());
}

TEST_CASE("conjugates: entropic") {
  Functional f{EntropicSpec{}};
  auto m = two_atoms();
  CHECK(f.conjugate(DensityRV::from_values(m, {1.0, 1.0}, true)).value.value ==
        doctest::Approx(0.0));
  CHECK(f.conjugate(DensityRV::from_values(m, {2.0, 0.0}, true)).value.value ==
        doctest::Approx(std::log(2.0)).epsilon(1e-10));
  // E[Z] != 1 -> +inf
  CHECK(f.conjugate(DensityRV::from_values(m, {2.0, 1.0}, false)).value.value == kInf);
}

TEST_CASE("conjugates: avar indicator of the capped set") {
  Functional f{AVaRSpec{0.5}};
  auto m = two_atoms();
  CHECK(f.conjugate(DensityRV::from_values(m, {1.0, 1.0}, true)).value.value == 0.0);
  CHECK(f.conjugate(DensityRV::from_values(m, {1.99, 0.01}, true)).value.value == 0.0);
  CHECK(f.conjugate(DensityRV::from_values(m, {2.01, 0.0}, false)).value.value == kInf);
}

TEST_CASE("conjugates: shortfall with exp loss equals relative entropy") {
  Functional ent{EntropicSpec{}};
  Functional sf{ShortfallSpec{exp_loss()}};
  std::mt19937 rng(4242);
  auto m = AtomicModel::uniform(5);
  for (int trial = 0; trial < 25; ++trial) {
    auto raw = random_simplex_free(rng, 5, 0.05, 2.0);
    double mean = 0;
    for (double v : raw) mean += v / 5.0;
    for (auto& v : raw) v /= mean;
    auto z = DensityRV::from_values(m, raw, true);
    double expect = ent.conjugate(z).value.value;
    CHECK(sf.conjugate(z).value.value == doctest::Approx(expect).epsilon(1e-6));
  }
}

TEST_CASE("conjugates: modular exp Young function") {
  Functional f{ModularSpec{exp_young()}};
  auto m = two_atoms();
  // E[Phi*(Z)] with Phi*(y) = y log y - y + 1 above 1, 0 below
  auto z = DensityRV::from_values(m, {3.0, 0.5}, false);
  double expect = 0.5 * (3.0 * std::log(3.0) - 3.0 + 1.0) + 0.5 * 0.0;
  CHECK(f.conjugate(z).value.value == doctest::Approx(expect).epsilon(1e-12));
  CHECK(!f.cash_invariant());
}

TEST_CASE("conjugates: dyadic hull membership is exact") {
  auto m = AtomicModel::dyadic(30);
  SupMeasuresSpec s;
  s.dyadic_family = true;
  s.model = m;
  Functional f{std::move(s)};

  for (long n : {1L, 2L, 5L, 12L}) {
    auto z = dyadic_dual_density(m, n);
    CHECK(f.conjugate(z).value.value == 0.0);
  }
  // strict convex combination
  auto r2 = dyadic_dual_density(m, 2), r3 = dyadic_dual_density(m, 3);
  std::vector<Rational> mix(m->size());
  for (size_t i = 0; i < mix.size(); ++i)
    mix[i] = (r2.exact[i] + r3.exact[i]) / 2;
  CHECK(f.conjugate(DensityRV::from_exact(m, std::move(mix), true)).value.value == 0.0);
  // near-uniform Z (residual mass folded onto the deepest atom) lies outside
  // the hull: its pinned R-weights sum past 1
  std::vector<Rational> ones(m->size(), Rational(1));
  ones.back() = 2;
  CHECK(f.conjugate(DensityRV::from_exact(m, std::move(ones), true)).value.value == kInf);
}

TEST_CASE("conjugate: explicit sup-measures family via hull projection") {
  auto m = AtomicModel::uniform(3);
  SupMeasuresSpec s;
  s.members = {{DensityRV::from_values(m, {1.5, 0.9, 0.6}, true), 0.0},
               {DensityRV::from_values(m, {0.3, 1.2, 1.5}, true), 0.0}};
  Functional f{std::move(s)};
  // midpoint of the two members is inside the hull
  auto mid = DensityRV::from_values(m, {0.9, 1.05, 1.05}, true);
  CHECK(f.conjugate(mid).value.value == doctest::Approx(0.0));
  auto outside = DensityRV::from_values(m, {3.0, 0.0, 0.0}, false);
  CHECK(f.conjugate(outside).value.value == kInf);
}

TEST_CASE("positive linear functional") {
  auto m = two_atoms();
  auto nu = DensityRV::from_values(m, {0.5, 1.0}, false);
  Functional f{PositiveLinearSpec{nu}};
  RandomVariable x(m, std::vector<double>{2.0, 4.0});
  CHECK(f.eval_bounded(x).value == doctest::Approx(0.5 * 0.5 * 2.0 + 0.5 * 1.0 * 4.0));
  CHECK(f.conjugate(nu).value.value == 0.0);
  CHECK(f.conjugate(DensityRV::from_values(m, {1.0, 1.0}, true)).value.value == kInf);
}

TEST_CASE("dual level samples verify their own level") {
  auto m = AtomicModel::uniform(4);
  Functional f{AVaRSpec{0.5}};
  auto zs = f.dual_level_sample(0.0, 8, 77, m);
  CHECK(zs.size() == 8);
  for (const auto& z : zs) {
    for (double v : z.values) CHECK(v <= 2.0 + 1e-9);
    CHECK(f.conjugate(z).value.value <= 1e-9);
  }

  Functional ent{EntropicSpec{}};
  auto zs2 = ent.dual_level_sample(0.5, 6, 99, m);
  CHECK(zs2.size() == 6);
  for (const auto& z : zs2) CHECK(ent.conjugate(z).value.value <= 0.5 + 1e-9);
  // determinism
  auto zs3 = ent.dual_level_sample(0.5, 6, 99, m);
  for (size_t i = 0; i < zs2.size(); ++i) CHECK(zs2[i].values == zs3[i].values);

  auto md = AtomicModel::dyadic(20);
  SupMeasuresSpec s;
  s.dyadic_family = true;
  s.model = md;
  Functional dy{std::move(s)};
  auto zs4 = dy.dual_level_sample(0.0, 5, 5, md);
  CHECK(zs4.size() == 5);
  for (const auto& z : zs4) CHECK(dy.conjugate(z).value.value == 0.0);
}

TEST_CASE("young inequality spot audit across variants") {
  std::mt19937 rng(314159);
  auto m = AtomicModel::uniform(4);
  std::vector<Functional> fs;
  fs.emplace_back(EntropicSpec{});
  fs.emplace_back(AVaRSpec{0.25});
  fs.emplace_back(ShortfallSpec{linexp_loss()});
  fs.emplace_back(ModularSpec{exp_young()});
  for (auto& f : fs) {
    for (int trial = 0; trial < 40; ++trial) {
      auto xv = random_simplex_free(rng, 4, -2.0, 2.0);
      RandomVariable x(m, xv);
      auto zs = f.dual_level_sample(1.0, 3, 1000 + trial, m);
      for (const auto& z : zs) {
        double lhs = expectation(x, &z).value;
        double rhs = f.eval_bounded(x).value + f.conjugate(z).value.value;
        CHECK(lhs <= rhs + 1e-9);
      }
    }
  }
}

TEST_CASE("functional json round trip") {
  auto m = two_atoms();
  Functional f{AVaRSpec{0.25}};
  auto f2 = Functional::from_json(f.to_json(), m);
  RandomVariable x(m, std::vector<double>{1.0, 3.0});
  CHECK(f2.eval_bounded(x).value == doctest::Approx(f.eval_bounded(x).value));

  Functional sf{ShortfallSpec{power_loss(2.0)}};
  auto sf2 = Functional::from_json(sf.to_json(), m);
  CHECK(sf2.eval_bounded(x).value == doctest::Approx(sf.eval_bounded(x).value));
}
