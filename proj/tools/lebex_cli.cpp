// Command-line front end: one verb per engine operation plus a one-shot
// reproduction suite over the catalog's reference worked examples.
//
// Exit codes: 0 success, 1 internal error, 2 config error, 3 divergence in
// strict mode, 4 reproduction failure.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lebex/membership.hpp"

using namespace lebex;
using nlohmann::json;

namespace {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct StrictDivergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

json policy_json(const Policy& p) {
  return {{"quad_abs_tol", p.quad_abs_tol},
          {"divergence_cap", p.divergence_cap},
          {"ladder_max_exp", p.ladder_max_exp},
          {"ladder_rel_tol", p.ladder_rel_tol},
          {"gauge_rel_tol", p.gauge_rel_tol},
          {"tail_eps_zero", p.tail_eps_zero},
          {"tail_delta_away", p.tail_delta_away},
          {"root_tol", p.root_tol},
          {"kusuoka_n_max", p.kusuoka_n_max}};
}

Policy policy_from(const json& cfg) {
  Policy p = default_policy();
  if (!cfg.contains("policy")) return p;
  const json& j = cfg.at("policy");
  p.quad_abs_tol = j.value("quad_abs_tol", p.quad_abs_tol);
  p.divergence_cap = j.value("divergence_cap", p.divergence_cap);
  p.ladder_max_exp = j.value("ladder_max_exp", p.ladder_max_exp);
  p.ladder_rel_tol = j.value("ladder_rel_tol", p.ladder_rel_tol);
  p.gauge_rel_tol = j.value("gauge_rel_tol", p.gauge_rel_tol);
  p.tail_eps_zero = j.value("tail_eps_zero", p.tail_eps_zero);
  p.tail_delta_away = j.value("tail_delta_away", p.tail_delta_away);
  p.root_tol = j.value("root_tol", p.root_tol);
  p.kusuoka_n_max = j.value("kusuoka_n_max", p.kusuoka_n_max);
  if (!(p.quad_abs_tol > 0 && p.ladder_rel_tol > 0 && p.gauge_rel_tol > 0 && p.root_tol > 0))
    throw ConfigError("policy tolerances must be positive");
  return p;
}

struct Session {
  json cfg;
  Policy pol;
  ModelPtr model;  // may be null (quantile-only work)
  uint64_t seed = 1;
  bool strict = false;
  std::string format = "text";
  std::string out;
};

Session open_session(const std::string& config_path, bool need_config) {
  Session s;
  if (config_path.empty()) {
    if (need_config) throw ConfigError("this subcommand requires --config");
    s.pol = default_policy();
    return s;
  }
  std::ifstream in(config_path);
  if (!in) throw ConfigError("cannot open config file '" + config_path + "'");
  try {
    in >> s.cfg;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    s.pol = policy_from(s.cfg);
    if (s.cfg.contains("model")) s.model = AtomicModel::from_json(s.cfg.at("model"));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return s;
}

Functional functional_of(const Session& s) {
  if (!s.cfg.contains("functional")) throw ConfigError("config: missing 'functional'");
  try {
    return Functional::from_json(s.cfg.at("functional"), s.model);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config.functional: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config.functional: ") + e.what());
  }
}

RandomVariable variable_of(const Session& s) {
  if (!s.cfg.contains("variable")) throw ConfigError("config: missing 'variable'");
  try {
    return RandomVariable::from_json(s.cfg.at("variable"), s.model);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config.variable: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config.variable: ") + e.what());
  }
}

void emit(const Session& s, const std::string& text) {
  if (s.out.empty()) {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
    return;
  }
  std::ofstream f(s.out);
  if (!f) throw ConfigError("cannot open output file '" + s.out + "'");
  f << text;
  if (!text.empty() && text.back() != '\n') f << '\n';
}

void check_strict(const Session& s, bool diverged) {
  if (s.strict && diverged) throw StrictDivergence("divergent limit under --strict");
}

// ---------------------------------------------------------------------------
// subcommands

int cmd_eval(const Session& s) {
  auto f = functional_of(s);
  auto x = variable_of(s);
  HatResult h = hat_eval(f, x, s.pol);
  json rep = {{"command", "eval"},
              {"functional", f.name()},
              {"limit", h.primary.to_json()},
              {"other_order_value", h.other_order_value},
              {"order_mismatch", h.order_mismatch},
              {"policy", policy_json(s.pol)}};
  if (s.format == "json") {
    emit(s, rep.dump(2));
  } else if (s.format == "csv") {
    std::ostringstream os;
    os << "value,status,est_error\n"
       << fmt(h.primary.value) << ',' << to_string(h.primary.status) << ','
       << fmt(h.primary.est_error) << '\n';
    emit(s, os.str());
  } else {
    std::ostringstream os;
    os << "eval[" << f.name() << "] = " << fmt(h.primary.value) << "  ("
       << to_string(h.primary.status) << ", est_error " << fmt(h.primary.est_error)
       << (h.primary.certified ? ", certified" : "")
       << (h.order_mismatch ? ", ORDER MISMATCH" : "") << ")\n";
    emit(s, os.str());
  }
  check_strict(s, h.primary.status == LimitStatus::Diverging || h.order_mismatch);
  return 0;
}

int cmd_norm(const Session& s) {
  auto f = functional_of(s);
  auto x = variable_of(s);
  double g = gauge_norm(f, x, s.pol);
  json rep = {{"command", "norm"},
              {"functional", f.name()},
              {"gauge", g},
              {"policy", policy_json(s.pol)}};
  if (s.format == "json")
    emit(s, rep.dump(2));
  else if (s.format == "csv")
    emit(s, "value,status,est_error\n" + fmt(g) + ',' +
                (std::isinf(g) ? std::string("diverging") : std::string("converged")) + ',' +
                fmt(g * s.pol.gauge_rel_tol) + '\n');
  else
    emit(s, "gauge[" + f.name() + "] = " + fmt(g) + "\n");
  check_strict(s, std::isinf(g));
  return 0;
}

int cmd_tail(const Session& s) {
  auto f = functional_of(s);
  auto x = variable_of(s);
  std::vector<double> alphas = s.cfg.value("alphas", std::vector<double>{0.125, 1.0, 8.0});
  std::vector<double> thresholds =
      s.cfg.value("thresholds", std::vector<double>{2.0, 4.0, 8.0, 16.0});
  if (alphas.empty() || thresholds.empty())
    throw ConfigError("config: alphas/thresholds must be nonempty");
  TailProfile prof = tail_profile(f, x, alphas, thresholds, s.pol);
  bool diverged = false;
  for (const auto& e : prof.entries)
    diverged = diverged || e.limit.status == LimitStatus::Diverging;
  if (s.format == "json") {
    json rep = {{"command", "tail"},
                {"functional", f.name()},
                {"profile", prof.to_json()},
                {"policy", policy_json(s.pol)}};
    emit(s, rep.dump(2));
  } else if (s.format == "csv") {
    emit(s, prof.to_csv());
  } else {
    std::ostringstream os;
    for (auto [a, v] : prof.verdicts)
      os << "alpha " << fmt(a) << ": " << to_string(v) << '\n';
    emit(s, os.str());
  }
  check_strict(s, diverged);
  return 0;
}

int cmd_classify(const Session& s) {
  auto f = functional_of(s);
  auto x = variable_of(s);
  MembershipVerdict v = classify(f, x, s.pol);
  bool diverged = false;
  for (const auto& [a, r] : v.finiteness) {
    (void)a;
    diverged = diverged || r.status == LimitStatus::Diverging;
  }
  if (s.format == "json") {
    json rep = {{"command", "classify"},
                {"functional", f.name()},
                {"verdict", v.to_json()},
                {"policy", policy_json(s.pol)}};
    emit(s, rep.dump(2));
  } else if (s.format == "csv") {
    emit(s, "# class=" + to_string(v.cls) +
                " certifying=" + (v.certifying ? "true" : "false") + '\n' + v.tail.to_csv());
  } else {
    emit(s, "class: " + to_string(v.cls) + (v.certifying ? "  (certified)" : "") + '\n');
  }
  // In_L_not_M legitimately contains divergent scalings; strict mode only
  // trips when the verdict itself could not be settled.
  check_strict(s, v.cls == MemberClass::Inconclusive);
  return 0;
}

int cmd_diagnose(const Session& s) {
  auto f = functional_of(s);
  auto x = variable_of(s);
  double c = s.cfg.value("level", 1.0);
  int budget = s.cfg.value("budget", 64);
  if (c < 0 || budget <= 0) throw ConfigError("config: level >= 0 and budget > 0 required");
  DiagnosticReport rep = diagnose(f, x, c, budget, s.seed, s.pol);
  if (s.format == "json") {
    json j = rep.to_json();
    j["command"] = "diagnose";
    j["policy"] = policy_json(s.pol);
    emit(s, j.dump(2));
  } else if (s.format == "csv") {
    std::ostringstream os;
    os << "tag,limit,target,pass\n";
    for (const auto& p : rep.probes)
      os << p.tag << ',' << fmt(p.limit) << ',' << fmt(p.target) << ','
         << (p.pass ? "true" : "false") << '\n';
    emit(s, os.str());
  } else {
    std::ostringstream os;
    os << "class: " << to_string(rep.verdict.cls) << '\n'
       << "attainment: best " << fmt(rep.attainment.best) << " vs hat "
       << fmt(rep.attainment.hat) << (rep.attainment.attained ? " (attained)" : " (gap)")
       << '\n';
    for (const auto& p : rep.probes)
      os << "probe " << p.tag << ": " << (p.pass ? "pass" : "FAIL") << " (limit "
         << fmt(p.limit) << ", target " << fmt(p.target) << ")\n";
    emit(s, os.str());
  }
  check_strict(s, rep.verdict.cls == MemberClass::Inconclusive);
  return 0;
}

int cmd_support(const Session& s) {
  if (!s.model) throw ConfigError("support: config must provide an atomic model");
  auto f = functional_of(s);
  int samples = s.cfg.value("samples", 64);
  if (samples <= 0) throw ConfigError("config: samples > 0 required");
  SupportReport rep = maximal_support(f, s.model, samples, s.seed);
  json j = {{"command", "support"},
            {"functional", f.name()},
            {"sensitive", rep.sensitive},
            {"inconclusive", rep.inconclusive},
            {"support", rep.support},
            {"zhat", rep.zhat.values},
            {"policy", policy_json(s.pol)}};
  if (s.format == "json") {
    emit(s, j.dump(2));
  } else if (s.format == "csv") {
    std::ostringstream os;
    os << "atom,epsilon,value\n";
    for (auto [atom, eps, val] : rep.witnesses)
      os << atom << ',' << fmt(eps) << ',' << fmt(val) << '\n';
    emit(s, os.str());
  } else {
    std::ostringstream os;
    os << "sensitive: " << (rep.sensitive ? "yes" : "no") << "\nsupport atoms:";
    for (size_t i : rep.support) os << ' ' << i;
    os << '\n';
    emit(s, os.str());
  }
  return 0;
}

// ---------------------------------------------------------------------------
// reproduction suite

struct ReproCase {
  std::string id;
  std::string expected_sym;
  double expected;
  double tol;
  std::function<double()> run;
};

struct ReproRecord {
  std::string id;
  std::string expected_sym;
  double expected = 0, computed = 0, abs_err = 0, rel_err = 0, runtime_s = 0, tol = 0;
  bool pass = false;
};

std::vector<ReproCase> repro_cases(uint64_t seed) {
  const double e = std::exp(1.0);
  std::vector<ReproCase> cs;

  auto dyadic_model = AtomicModel::dyadic(128);
  auto identity = [dyadic_model]() {
    std::vector<Rational> v;
    for (size_t k = 1; k <= dyadic_model->size(); ++k) v.push_back(Rational(k));
    return RandomVariable(dyadic_model, std::move(v), IndexTailRule{0, 1});
  };

  for (long n : {2L, 5L, 100L}) {
    cs.push_back({"ex3.3-mean-n" + std::to_string(n), "2 - 1/n", 2.0 - 1.0 / double(n), 1e-12,
                  [=]() {
                    auto z = dyadic_dual_density(dyadic_model, n);
                    return to_double(*expectation(identity(), &z).exact);
                  }});
  }
  cs.push_back({"ex3.3-sup", "2", 2.0, 1e-12, [=]() {
                  SupMeasuresSpec sp;
                  sp.dyadic_family = true;
                  sp.model = dyadic_model;
                  return hat_eval_nonneg(Functional(sp), identity()).value;
                }});

  for (double lam : {0.01, 0.1, 0.5, 1.0}) {
    cs.push_back({"ex6.5-vhat-lam" + fmt(lam), "1 - log(lambda)", 1.0 - std::log(lam), 1e-6,
                  [=]() {
                    return avar(lam, RandomVariable(make_exponential_quantile(1.0)));
                  }});
  }
  cs.push_back({"ex6.5-value", "4 - e/(e-1)", 4.0 - e / (e - 1.0), 1e-4, []() {
                  KusuokaSpec sp;
                  sp.countable_bands = true;
                  return hat_eval_nonneg(Functional(sp),
                                         RandomVariable(make_exponential_quantile(1.0)))
                      .value;
                }});
  for (int n = 1; n <= 10; ++n) {
    char id[32];
    std::snprintf(id, sizeof id, "ex6.5-tail-N%02d", n);
    cs.push_back({id, "1 + e/(e-1) e^{-N}(1+N)",
                  1.0 + e / (e - 1.0) * std::exp(-n) * (1.0 + n), 1e-4, [n]() {
                    KusuokaSpec sp;
                    sp.countable_bands = true;
                    return tail_functional(Functional(sp),
                                           RandomVariable(make_exponential_quantile(1.0)), 1.0,
                                           n)
                        .value;
                  }});
  }

  cs.push_back({"shortfall-exp-equals-entropic", "0 (sup gap over 50 random X)", 0.0, 1e-6,
                [seed]() {
                  std::mt19937_64 rng(seed);
                  Functional ent{EntropicSpec{}};
                  Functional sf{ShortfallSpec{exp_loss()}};
                  double worst = 0.0;
                  for (int t = 0; t < 50; ++t) {
                    int sz = 2 + int(rng() % 63);
                    auto m = AtomicModel::uniform(sz);
                    std::uniform_real_distribution<double> u(-2.0, 2.0);
                    std::vector<double> v(sz);
                    for (double& vi : v) vi = u(rng);
                    RandomVariable x(m, v);
                    worst = std::max(worst, std::abs(ent.eval_bounded(x).value -
                                                     sf.eval_bounded(x).value));
                  }
                  return worst;
                }});
  return cs;
}

int thread_budget(size_t n) {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("LEBEX_THREADS")) {
    long v = std::strtol(env, nullptr, 10);
    if (v >= 1) hw = std::min<unsigned>(hw, unsigned(v));
  }
  return int(std::min<size_t>(hw, n));
}

int cmd_reproduce(const Session& s) {
  auto cases = repro_cases(s.seed);
  std::vector<ReproRecord> recs(cases.size());
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (size_t i = next.fetch_add(1); i < cases.size(); i = next.fetch_add(1)) {
      const auto& c = cases[i];
      auto t0 = std::chrono::steady_clock::now();
      ReproRecord r;
      r.id = c.id;
      r.expected_sym = c.expected_sym;
      r.expected = c.expected;
      r.tol = c.tol;
      r.computed = c.run();
      r.abs_err = std::abs(r.computed - c.expected);
      r.rel_err = r.abs_err / std::max(1.0, std::abs(c.expected));
      r.pass = r.abs_err <= c.tol;
      r.runtime_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      recs[i] = std::move(r);
    }
  };
  int nt = thread_budget(cases.size());
  std::vector<std::thread> pool;
  for (int t = 1; t < nt; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  bool all_pass = true;
  std::ostringstream csv, txt;
  // runtime stays out of the CSV: identical config + seed must produce
  // byte-identical output
  csv << "case,expected,computed,abs_err,rel_err,status\n";
  for (const auto& r : recs) {
    all_pass = all_pass && r.pass;
    csv << r.id << ',' << fmt(r.expected) << ',' << fmt(r.computed) << ',' << fmt(r.abs_err)
        << ',' << fmt(r.rel_err) << ',' << (r.pass ? "pass" : "mismatch") << '\n';
    txt << (r.pass ? "  ok   " : " MISMATCH ") << r.id << ": computed " << fmt(r.computed)
        << " vs " << r.expected_sym << " = " << fmt(r.expected) << " (|err| "
        << fmt(r.abs_err) << ", tol " << fmt(r.tol) << ")\n";
  }
  if (s.format == "json") {
    json rows = json::array();
    for (const auto& r : recs)
      rows.push_back({{"case", r.id},
                      {"expected_sym", r.expected_sym},
                      {"expected", r.expected},
                      {"computed", r.computed},
                      {"abs_err", r.abs_err},
                      {"rel_err", r.rel_err},
                      {"pass", r.pass},
                      {"runtime_s", r.runtime_s}});
    emit(s, json{{"command", "reproduce-paper"},
                 {"records", rows},
                 {"all_pass", all_pass},
                 {"policy", policy_json(s.pol)}}
                .dump(2));
  } else if (s.format == "csv") {
    emit(s, csv.str());
  } else {
    txt << (all_pass ? "all cases pass\n" : "some cases mismatch the stated reference values\n");
    emit(s, txt.str());
  }
  return all_pass ? 0 : 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"risk-functional extension engine"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out_path, format = "text";
  uint64_t seed = 1;
  bool strict = false;
  app.add_option("--config", config_path, "JSON experiment config");
  app.add_option("--seed", seed, "seed for sampling commands");
  app.add_flag("--strict", strict, "exit 3 on divergent/unsettled limits");
  app.add_option("--format", format, "output format")
      ->check(CLI::IsMember({"json", "csv", "text"}));
  app.add_option("--out", out_path, "write the report to this file");

  auto* c_eval = app.add_subcommand("eval", "double-truncation value of the functional");
  auto* c_norm = app.add_subcommand("norm", "gauge norm of the variable");
  auto* c_tail = app.add_subcommand("tail", "scaled tail profile and verdicts");
  auto* c_classify = app.add_subcommand("classify", "scale-triple membership verdict");
  auto* c_diagnose = app.add_subcommand("diagnose", "attainment/continuity diagnostic bundle");
  auto* c_support = app.add_subcommand("support", "maximal support of the dual domain");
  auto* c_repro = app.add_subcommand("reproduce-paper", "run the reference worked-example suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    Session s = open_session(config_path, !c_repro->parsed());
    s.seed = seed;
    s.strict = strict;
    s.format = format;
    s.out = out_path;
    if (c_eval->parsed()) return cmd_eval(s);
    if (c_norm->parsed()) return cmd_norm(s);
    if (c_tail->parsed()) return cmd_tail(s);
    if (c_classify->parsed()) return cmd_classify(s);
    if (c_diagnose->parsed()) return cmd_diagnose(s);
    if (c_support->parsed()) return cmd_support(s);
    if (c_repro->parsed()) return cmd_reproduce(s);
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const StrictDivergence& e) {
    std::cerr << "strict: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
