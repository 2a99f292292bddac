#pragma once

#include "riskbo/risk.hpp"

#include <vector>

namespace riskbo {

// A z whose band [l(x,z), u(x,z)] contains the whole VaR interval at x.
struct LVResult {
  Vec z;
  bool certified = false;  // both defining inequalities hold within tolerance
  double d_u = 0.0;        // u(x,z) - VaR of the upper bound
  double d_l = 0.0;        // VaR of the lower bound - l(x,z)
  double weight = 0.0;     // mass or density at z
};

// Candidate atoms given per-atom band values: indices j with
// l[j] <= VaR_alpha(l) and u[j] >= VaR_alpha(u) (slack 1e-9).
std::vector<int> lv_candidate_indices(const Vec& l_vals, const Vec& u_vals,
                                      const Vec& masses, double alpha);

// Discrete candidate set; nonempty by construction of the VaR interval,
// so an empty result is reported as an internal error.
std::vector<int> lv_candidates_discrete(const ConfidenceField& field,
                                        const Vec& x,
                                        const EnvDistribution& env,
                                        double alpha);

enum class LvMode { Uniform, MaxMass };

// MaxMass breaks mass ties lexicographically on coordinates.
int select_lv_index(const std::vector<int>& candidates,
                    const EnvDistribution& env, LvMode mode, Rng& rng);
Vec select_lv(const std::vector<int>& candidates, const EnvDistribution& env,
              LvMode mode, Rng& rng);

// VaR endpoints of the band at x, computed once per (x, iteration).
struct VarEndpoints {
  double var_lower;  // VaR_alpha(l(x, Z))
  double var_upper;  // VaR_alpha(u(x, Z))
};

// Hinge loss that vanishes exactly on lacing values:
// relu(-d_u(z)) + relu(-d_l(z)).
double lv_loss(const Vec& z, const ConfidenceField& field, const Vec& x,
               const VarEndpoints& endpoints);

struct LvSearchConfig {
  int starts = 16;
  int hinge_steps = 100;
  int density_steps = 50;
  double step = 0.05;
  double tol = 1e-6;
};

// Continuous search: hinge-descent until the loss certifies, then
// density ascent restricted to the certified region. Returns best-effort
// with certified=false when no start reaches the tolerance.
LVResult find_lv_continuous(const ConfidenceField& field, const Vec& x,
                            const EnvDistribution& env, double alpha,
                            const PinballConfig& pinball,
                            const LvSearchConfig& cfg, Rng& rng);

}  // namespace riskbo
