#ifndef LEBEX_MEMBERSHIP_HPP
#define LEBEX_MEMBERSHIP_HPP

#include <array>
#include <string>
#include <vector>

#include <json.hpp>

#include "lebex/extension.hpp"

namespace lebex {

/// Position of a variable in the scale triple: the finiteness space (all of
/// it), its maximal solid subspace of finite values, and the closed heart
/// where truncation converges uniformly over scalings.
enum class MemberClass { In_Mu, In_M_not_Mu, In_L_not_M, Not_in_L, Inconclusive };
std::string to_string(MemberClass c);

struct MembershipVerdict {
  MemberClass cls = MemberClass::Inconclusive;
  bool certifying = false;  // closed-form evidence only
  std::vector<std::pair<double, LimitResult>> finiteness;  // alpha -> hat(alpha|X|)
  TailProfile tail;

  nlohmann::json to_json() const;
};

MembershipVerdict classify(const Functional& f, const RandomVariable& x,
                           const Policy& pol = default_policy());

/// sup over dual candidates of E[|X| Z 1_A] along events A with P(A) -> 0.
/// Sampled candidates give a one-sided lower curve; quantile-form variables
/// get a Young-inequality upper bound instead (upper_bound_only).
struct UiCurve {
  struct Point {
    std::string event;
    double prob;
    double value;
  };
  std::vector<Point> points;
  bool upper_bound_only = false;

  nlohmann::json to_json() const;
};

UiCurve ui_diagnostic(const Functional& f, const RandomVariable& x, double c, int budget,
                      uint64_t seed, const Policy& pol = default_policy());

struct AttainmentResult {
  double best = -kInf;
  double hat = 0.0;
  bool attained = false;
  bool inconclusive = false;  // no dual candidate could be scored at all
  std::string witness;        // which candidate family produced `best`

  nlohmann::json to_json() const;
};

AttainmentResult attainment_check(const Functional& f, const RandomVariable& x, int budget,
                                  uint64_t seed, const Policy& pol = default_policy());

struct ProbeResult {
  std::string tag;
  double limit;   // observed limit of hat along the probe sequence
  double target;  // what continuity demands
  bool pass;
};

std::vector<ProbeResult> lebesgue_probe(const Functional& f, const RandomVariable& x,
                                        const std::vector<double>& alphas = {1.0},
                                        const Policy& pol = default_policy());

/// true iff both double-truncation orders and the single-truncation limit of
/// hat agree within tolerance.
bool truncation_interchange_check(const Functional& f, const RandomVariable& x,
                                  const Policy& pol = default_policy());

enum class CondStatus { Pass, Fail, Unknown };
std::string to_string(CondStatus s);

/// Numerical proxies for the four equivalent conditions (continuity along
/// dominated sequences; uniform integrability of the dual pairing; dual
/// attainment; max representation) evaluated per instance.
struct JstRow {
  std::string label;
  std::array<CondStatus, 4> cond;
  bool consistent = false;  // no Pass and Fail mixed among known conditions
};

struct JstReport {
  std::vector<JstRow> rows;
  bool all_consistent = false;

  nlohmann::json to_json() const;
};

JstReport jst_crosscheck(const Functional& f,
                         const std::vector<std::pair<std::string, RandomVariable>>& suite,
                         int budget, uint64_t seed, const Policy& pol = default_policy());

struct DiagnosticReport {
  int schema_version = 1;
  UiCurve ui;
  AttainmentResult attainment;
  std::vector<ProbeResult> probes;
  MembershipVerdict verdict;

  nlohmann::json to_json() const;
};

DiagnosticReport diagnose(const Functional& f, const RandomVariable& x, double c, int budget,
                          uint64_t seed, const Policy& pol = default_policy());

}  // namespace lebex

#endif
