#pragma once

#include "riskbo/gp.hpp"

#include <functional>
#include <memory>

namespace riskbo {

// beta_t = 2 log(t^2 pi^2 / 0.6)
double beta_practical(int t);

struct BetaSchedule {
  enum class Kind { Practical, Theoretical };
  Kind kind = Kind::Practical;
  // theoretical parameters
  double rkhs_bound = 1.0;  // B
  double sigma_n = 0.1;
  double delta = 0.1;
  std::function<double(int)> gamma_fn;  // t -> information-gain estimate

  double beta(int t) const;
};

// beta_t = (B + sigma_n sqrt(2 (gamma_{t-1} + 1 + log 1/delta)))^2
double beta_theoretical(int t, const BetaSchedule& schedule);

struct Interval {
  double lo;
  double hi;
};

// Posterior paired with the frozen beta of the current iteration.
// l = mu - sqrt(beta) sigma, u = mu + sqrt(beta) sigma.
struct ConfidenceField {
  std::shared_ptr<const GPPosterior> posterior;
  double beta = 1.0;

  Interval bounds_at(const Vec& p) const;
  double lower(const Vec& p) const { return bounds_at(p).lo; }
  double upper(const Vec& p) const { return bounds_at(p).hi; }
  // batched band over a fixed z-set at one x
  void bounds_at_atoms(const AtomPredictor& pred, const Vec& x, Vec& l,
                       Vec& u) const;
};

}  // namespace riskbo
