#pragma once

#include "riskbo/common.hpp"

namespace riskbo {

enum class EnvKind { Discrete, Continuous };
enum class WeightRule { Uniform, GaussianBump };

// Environmental variable Z: either a finite atom set with masses or an
// independent per-axis truncated Gaussian over a box support.
// Immutable after construction; sampling takes a caller-supplied rng.
class EnvDistribution {
 public:
  // A default-constructed distribution is an empty placeholder; use the
  // factories below.
  EnvDistribution() = default;

  static EnvDistribution discrete(Mat atoms, Vec masses);
  // Equi-spaced grid over [0,1]^d_z (endpoints included; n=1 uses the
  // midpoint), n_per_axis^d_z atoms.
  static EnvDistribution grid(int d_z, int n_per_axis, WeightRule rule);
  // Per-axis truncated normal, mean 0.5, sd 0.125, cut at +-2 sd.
  static EnvDistribution truncated_gaussian(int d_z);
  static EnvDistribution truncated_gaussian(Vec mean, Vec sd, double width_sd,
                                            const Box& declared);

  EnvKind kind() const { return kind_; }
  int dim() const { return dim_; }

  // Discrete accessors; throw on continuous distributions.
  const Mat& atoms() const;
  const Vec& masses() const;
  int atom_count() const;

  // Continuous accessors; throw on discrete distributions.
  const Box& support() const;
  Vec mode() const;
  Vec log_density_grad(const Vec& z) const;

  Vec sample_one(Rng& rng) const;
  Mat sample(int n, Rng& rng) const;
  // Low-discrepancy panel mapped through the per-axis inverse CDF
  // (continuous only); deterministic in n.
  Mat quasi_sample(int n) const;

  // Probability mass at an atom (exact match within 1e-12 per coordinate)
  // or density value; 0 outside the support.
  double mass_or_density(const Vec& z) const;

 private:
  EnvKind kind_ = EnvKind::Discrete;
  int dim_ = 0;
  // discrete
  Mat atoms_;
  Vec masses_;
  Vec cum_;  // cumulative masses for inverse-CDF sampling
  // continuous
  Vec mean_, sd_;
  Box support_{};
};

}  // namespace riskbo
