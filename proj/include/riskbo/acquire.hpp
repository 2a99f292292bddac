#pragma once

#include "riskbo/lacing.hpp"
#include "riskbo/surrogate_config.hpp"

#include <optional>

namespace riskbo {

struct OptimKnobs {
  int multistart = 10;
  int ascent_steps = 100;
  double step = 0.05;      // initial ascent step, halved on backtracking
  int sweep_points = 512;  // quasi-random candidate sweep
};

struct AcquisitionProblem {
  ConfidenceField field;
  const EnvDistribution* env = nullptr;
  double alpha = 0.1;
  Box domain;
  OptimKnobs knobs;
  // Finite decision set: the sweep evaluates exactly these rows and the
  // ascent phase is skipped (exact argmax over the set).
  std::optional<Mat> x_candidates;
  PinballConfig pinball;  // continuous-Z estimation knobs
  LnsoConfig lnso;        // continuous-Z maximization knobs
};

// VaR_alpha(u(x, Z)) over the atom set (exact discrete path).
double acq_value(const AcquisitionProblem& prob, const Vec& x);

// Batched acquisition values at many candidates.
Vec acq_values_batch(const AcquisitionProblem& prob, const Mat& xs);
Vec acq_values_batch_serial(const AcquisitionProblem& prob, const Mat& xs);

struct AcqGrad {
  Vec grad;
  bool degenerate = false;  // VaR-attaining atom tied within 1e-9
};

// d/dx u(x, z_at) at the VaR-attaining atom; ties resolved toward the
// larger-mass atom (then lowest index) with the degeneracy flag set.
AcqGrad acq_grad(const AcquisitionProblem& prob, const Vec& x);

// Discrete Z: quasi-random sweep plus multi-start projected gradient
// ascent; continuous Z: local neural surrogate maximization of u.
Vec select_x(const AcquisitionProblem& prob, Rng& rng);

struct StableOptResult {
  Vec x;
  Vec z;
  double value;  // max-min objective at x
};

// x = argmax_x min_z u(x,z) over the atom set, then z = argmin_z l(x,z).
StableOptResult stableopt_select(const ConfidenceField& field,
                                 const Box& domain_x, const Mat& z_atoms,
                                 const OptimKnobs& knobs, Rng& rng,
                                 const std::optional<Mat>& x_candidates = {});

}  // namespace riskbo
