#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lebex/membership.hpp"

using namespace lebex;

namespace {

const double kE = std::exp(1.0);

Functional entropic() { return Functional(EntropicSpec{}); }

Functional dyadic_sup(const ModelPtr& m) {
  SupMeasuresSpec s;
  s.dyadic_family = true;
  s.model = m;
  return Functional(s);
}

Functional kusuoka_bands() {
  KusuokaSpec s;
  s.countable_bands = true;
  return Functional(s);
}

Functional modular_exp() { return Functional{ModularSpec{exp_young()}}; }

RandomVariable dyadic_identity(const ModelPtr& m) {
  std::vector<Rational> v;
  for (size_t k = 1; k <= m->size(); ++k) v.push_back(Rational(k));
  return RandomVariable(m, std::move(v), IndexTailRule{0, 1});
}

}  // namespace

TEST_CASE("bounded variables sit in the heart, with certificate") {
  auto m = AtomicModel::uniform(3);
  RandomVariable x(m, std::vector<double>{-1.0, 0.5, 2.0});
  auto v = classify(entropic(), x);
  CHECK(v.cls == MemberClass::In_Mu);
  CHECK(v.certifying);
}

TEST_CASE("dyadic identity variable is finite but outside the heart") {
  auto m = AtomicModel::dyadic(12);
  auto f = dyadic_sup(m);
  auto v = classify(f, dyadic_identity(m));
  CHECK(v.cls == MemberClass::In_M_not_Mu);
  CHECK(v.certifying);  // exact rational path end to end
  // every scaling stays finite ...
  for (const auto& [alpha, lim] : v.finiteness) {
    (void)alpha;
    CHECK(lim.status == LimitStatus::Converged);
    CHECK(lim.certified);
  }
  // ... yet the scaled tails never vanish
  bool away = false;
  for (auto [alpha, verdict] : v.tail.verdicts) {
    (void)alpha;
    if (verdict == TailVerdict::BoundedAway) away = true;
    CHECK(verdict != TailVerdict::TendsToZero);
  }
  CHECK(away);
}

TEST_CASE("band-family spectral sup: exponential is finite but outside the heart") {
  auto f = kusuoka_bands();
  RandomVariable x(make_exponential_quantile(1.0));
  auto v = classify(f, x);
  CHECK(v.cls == MemberClass::In_M_not_Mu);
  for (const auto& [alpha, lim] : v.finiteness) {
    (void)alpha;
    CHECK(lim.status == LimitStatus::Converged);
  }
}

TEST_CASE("modular functional splits finiteness from solidity") {
  // X = exp(1)/2 under the exponential Young function: E[e^{alpha X}] is
  // finite iff alpha < 2, so small scalings converge and large ones blow up.
  auto f = modular_exp();
  RandomVariable x(affine_quantile(0.5, 0.0, make_exponential_quantile(1.0)));
  auto v = classify(f, x);
  CHECK(v.cls == MemberClass::In_L_not_M);
  bool some_finite = false, some_infinite = false;
  for (const auto& [alpha, lim] : v.finiteness) {
    if (lim.status == LimitStatus::Converged && alpha < 2.0) some_finite = true;
    if (lim.status == LimitStatus::Diverging && alpha >= 2.0) some_infinite = true;
  }
  CHECK(some_finite);
  CHECK(some_infinite);
}

TEST_CASE("infinite-mean variable leaves the finiteness space entirely") {
  Functional f{AVaRSpec{0.5}};
  RandomVariable x(make_pareto_quantile(0.5));  // infinite mean
  auto v = classify(f, x);
  CHECK(v.cls == MemberClass::Not_in_L);
}

TEST_CASE("uniform-integrability curve stays on its floor for the dyadic family") {
  auto m = AtomicModel::dyadic(12);
  auto f = dyadic_sup(m);
  auto curve = ui_diagnostic(f, dyadic_identity(m), 0.0, 64, 17);
  REQUIRE(!curve.points.empty());
  CHECK_FALSE(curve.upper_bound_only);
  // every extreme measure past the event threshold charges the tail fully:
  // the sampled sup never drops below ~1 even as the event probability -> 0
  double floor = kInf;
  double min_prob = 1.0;
  for (const auto& p : curve.points) {
    floor = std::min(floor, p.value);
    min_prob = std::min(min_prob, p.prob);
  }
  CHECK(floor >= 0.99);
  CHECK(min_prob <= 1e-3);
}

TEST_CASE("uniform-integrability curve decays for a light tail") {
  Functional f{AVaRSpec{0.5}};
  RandomVariable x(make_exponential_quantile(1.0));
  auto curve = ui_diagnostic(f, x, 1.0, 64, 17);
  REQUIRE(curve.points.size() >= 2);
  CHECK(curve.upper_bound_only);
  CHECK(curve.points.back().value <= 1e-2 * std::max(1.0, curve.points.front().value));
}

TEST_CASE("dual attainment: entropic tilt closes the duality gap") {
  auto m = AtomicModel::uniform(4);
  RandomVariable x(m, std::vector<double>{0.0, 1.0, 2.0, 3.0});
  auto r = attainment_check(entropic(), x, 90, 7);
  CHECK(r.attained);
  CHECK(r.best <= r.hat + 1e-9);
  CHECK(r.best == doctest::Approx(r.hat).epsilon(1e-8));
}

TEST_CASE("dual attainment: tail-average functional attains exactly") {
  auto m = AtomicModel::uniform(2);
  Functional f{AVaRSpec{0.5}};
  RandomVariable x(m, std::vector<double>{1.0, 3.0});
  auto r = attainment_check(f, x, 60, 7);
  CHECK(r.attained);
  CHECK(r.best == doctest::Approx(3.0).epsilon(1e-9));  // AV@R_{1/2} = mean of top half
}

TEST_CASE("dual attainment fails with the exact gap on the dyadic family") {
  auto m = AtomicModel::dyadic(12);
  auto f = dyadic_sup(m);
  auto r = attainment_check(f, dyadic_identity(m), 90, 7);
  CHECK(r.hat == doctest::Approx(2.0).epsilon(1e-12));
  CHECK_FALSE(r.attained);
  CHECK(r.best <= r.hat + 1e-9);
  // best member is E_{Q_depth}[X] = 2 - 1/depth: a gap of exactly 1/12
  CHECK(r.hat - r.best == doctest::Approx(1.0 / 12.0).epsilon(1e-9));
}

TEST_CASE("dual attainment stays an honest lower bound for the band family") {
  auto f = kusuoka_bands();
  RandomVariable x(make_exponential_quantile(1.0));
  auto r = attainment_check(f, x, 30, 7);
  CHECK(r.best <= r.hat + 1e-9);
  CHECK_FALSE(r.attained);  // the countable sup is approached, never attained
  CHECK(r.hat - r.best >= 1e-5);
}

TEST_CASE("continuity probes pass on a bounded variable") {
  auto m = AtomicModel::uniform(3);
  RandomVariable x(m, std::vector<double>{0.5, 1.0, 1.5});
  for (const auto& p : lebesgue_probe(entropic(), x)) CHECK(p.pass);
}

TEST_CASE("continuity probes pass for the light-tailed quantile variable") {
  Functional f{AVaRSpec{0.5}};
  RandomVariable x(make_exponential_quantile(1.0));
  for (const auto& p : lebesgue_probe(f, x)) CHECK(p.pass);
}

TEST_CASE("continuity probes flag the dyadic tail") {
  auto m = AtomicModel::dyadic(12);
  auto f = dyadic_sup(m);
  auto probes = lebesgue_probe(f, dyadic_identity(m));
  bool tail_failed = false;
  for (const auto& p : probes)
    if (p.tag.rfind("tail", 0) == 0 && !p.pass) {
      tail_failed = true;
      // the scaled tail value freezes at alpha instead of vanishing
      CHECK(p.limit == doctest::Approx(1.0).epsilon(1e-9));
    }
  CHECK(tail_failed);
}

TEST_CASE("continuity probes flag the supercritical modular scaling") {
  auto f = modular_exp();
  RandomVariable x(affine_quantile(0.5, 0.0, make_exponential_quantile(1.0)));
  auto probes = lebesgue_probe(f, x, {4.0});
  bool tail_failed = false;
  for (const auto& p : probes)
    if (p.tag.rfind("tail", 0) == 0 && !p.pass) tail_failed = true;
  CHECK(tail_failed);
}

TEST_CASE("truncation orders interchange on well-behaved variables") {
  auto m = AtomicModel::uniform(2);
  RandomVariable b(m, std::vector<double>{-1.0, 2.0});
  CHECK(truncation_interchange_check(entropic(), b));
  RandomVariable x(affine_quantile(1.0, -1.0, make_exponential_quantile(2.0)));
  CHECK(truncation_interchange_check(entropic(), x));
}

TEST_CASE("four-condition cross-check stays internally consistent") {
  auto m = AtomicModel::uniform(3);
  RandomVariable bounded(m, std::vector<double>{0.0, 1.0, 2.0});

  SUBCASE("entropic suite: all conditions hold together") {
    std::vector<std::pair<std::string, RandomVariable>> suite{
        {"bounded", bounded},
        {"light tail", RandomVariable(make_exponential_quantile(2.0))}};
    auto rep = jst_crosscheck(entropic(), suite, 90, 7);
    CHECK(rep.all_consistent);
    for (const auto& row : rep.rows)
      for (auto c : row.cond) CHECK(c != CondStatus::Fail);
  }

  SUBCASE("dyadic suite: all conditions fail together") {
    auto md = AtomicModel::dyadic(12);
    auto f = dyadic_sup(md);
    std::vector<std::pair<std::string, RandomVariable>> suite{
        {"identity", dyadic_identity(md)}};
    auto rep = jst_crosscheck(f, suite, 90, 7);
    CHECK(rep.all_consistent);
    REQUIRE(rep.rows.size() == 1);
    bool some_fail = false;
    for (auto c : rep.rows[0].cond) {
      CHECK(c != CondStatus::Pass);
      if (c == CondStatus::Fail) some_fail = true;
    }
    CHECK(some_fail);
  }

  SUBCASE("tail-average suite: conditions hold for an integrable tail") {
    Functional f{AVaRSpec{0.5}};
    std::vector<std::pair<std::string, RandomVariable>> suite{
        {"bounded", bounded}, {"exp tail", RandomVariable(make_exponential_quantile(1.0))}};
    auto rep = jst_crosscheck(f, suite, 90, 7);
    CHECK(rep.all_consistent);
    for (const auto& row : rep.rows)
      for (auto c : row.cond) CHECK(c != CondStatus::Fail);
  }
}

TEST_CASE("diagnostic bundle serializes with a stable schema") {
  auto m = AtomicModel::uniform(3);
  RandomVariable x(m, std::vector<double>{0.0, 1.0, 2.0});
  auto rep = diagnose(entropic(), x, 1.0, 30, 7);
  auto j = rep.to_json();
  CHECK(j.at("schema_version") == 1);
  CHECK(j.contains("ui"));
  CHECK(j.contains("attainment"));
  CHECK(j.contains("probes"));
  CHECK(j.at("verdict").at("class") == "In_Mu");
}
