#pragma once

#include "riskbo/common.hpp"

namespace riskbo {

// Anisotropic squared-exponential hyperparameters over joint (x, z) inputs.
// Constructor clamps into the supported ranges: lengthscales into
// [1e-3, 1e3], noise variance onto its 1e-4 floor.
struct GPHyper {
  Vec lengthscales;
  double signal_var = 1.0;
  double noise_var = 0.01;

  GPHyper() = default;
  GPHyper(Vec ls, double sf2, double sn2);
  static GPHyper defaults(int dim);

  int dim() const { return static_cast<int>(lengthscales.size()); }
};

struct ObservationSet {
  int d_x = 0;
  int d_z = 0;
  Mat joint;  // n x (d_x + d_z), row i = (x_i, z_i)
  Vec y;

  ObservationSet() = default;
  ObservationSet(int dx, int dz) : d_x(dx), d_z(dz), joint(0, dx + dz), y(0) {}

  int size() const { return static_cast<int>(y.size()); }
  int dim() const { return d_x + d_z; }
  void append(const Vec& x, const Vec& z, double yv);
  void append_joint(const Vec& p, double yv);
};

// k(p,q) = sf2 * exp(-1/2 * sum_i (p_i - q_i)^2 / ls_i^2)
double se_kernel(const Vec& p, const Vec& q, const GPHyper& hyper);

struct Prediction {
  double mu;
  double sigma;  // >= 0
};

struct Gradient {
  Vec dmu;
  Vec dsigma;
  bool sigma_degenerate = false;  // sigma below 1e-9, dsigma reported as 0
};

struct FactorizationError : std::runtime_error {
  explicit FactorizationError(double pivot)
      : std::runtime_error("Gram factorization failed, smallest pivot " +
                           std::to_string(pivot)),
        smallest_pivot(pivot) {}
  double smallest_pivot;
};

// Immutable exact posterior: lower Cholesky factor of K + sn2*I and the
// presolved weight vector. Thread-safe; predictions are pure.
// With standardize_y the fit runs on (y - mean)/sd and predictions map
// back; the band and VaR machinery commute with the affine map, and the
// hyperparameter bounds stay meaningful for any target scale.
class GPPosterior {
 public:
  GPPosterior(ObservationSet data, GPHyper hyper, bool standardize_y = false);

  Prediction predict(const Vec& p) const;
  Gradient predict_grad(const Vec& p) const;    // d/d(joint point)
  Gradient predict_grad_x(const Vec& p) const;  // first d_x components

  void predict_many(const Mat& points, Vec& mu, Vec& sigma) const;
  void predict_many_serial(const Mat& points, Vec& mu, Vec& sigma) const;

  const GPHyper& hyper() const { return hyper_; }
  const ObservationSet& data() const { return data_; }
  int n() const { return data_.size(); }
  const Mat& chol_lower() const { return chol_; }
  const Vec& weights() const { return alpha_; }
  double y_shift() const { return y_shift_; }
  double y_scale() const { return y_scale_; }

 private:
  void predict_into(const Vec& p, double& mu, double& sigma) const;

  ObservationSet data_;
  GPHyper hyper_;
  Mat chol_;   // lower triangular, n x n
  Vec alpha_;  // (K + sn2 I)^{-1} (y - shift)/scale
  double y_shift_ = 0.0;
  double y_scale_ = 1.0;
};

// Factorizes with one retry at doubled noise variance on failure.
GPPosterior fit_posterior(ObservationSet data, GPHyper hyper,
                          bool standardize_y = false);

// Batched posterior evaluation over a fixed z-set sharing one x.
// The SE kernel factorizes over coordinate blocks, so the z-part
// correlations with the data are precomputed once.
class AtomPredictor {
 public:
  AtomPredictor(const GPPosterior& post, Mat z_atoms);

  // mu, sigma resized to atom_count()
  void predict(const Vec& x, Vec& mu, Vec& sigma) const;
  int atom_count() const { return static_cast<int>(atoms_.rows()); }
  const Mat& atoms() const { return atoms_; }

 private:
  const GPPosterior* post_;
  Mat atoms_;
  Mat zcorr_;  // n x m, exp(-1/2 d_z-part squared distance)
};

struct LogMarginal {
  double value;
  Vec grad;  // d/d log-hyper, order: log ls..., log sf2, log sn2
};

LogMarginal log_marginal_likelihood(const ObservationSet& data,
                                    const GPHyper& hyper);

struct HyperBounds {
  double ls_lo = 1e-3, ls_hi = 1e3;
  double sf2_lo = 1e-4, sf2_hi = 1e2;
  double sn2_lo = 1e-4, sn2_hi = 1e2;
};

struct HyperFit {
  GPHyper hyper;
  bool fell_back = false;  // all restarts failed; previous returned
  double log_marginal = 0.0;
};

// Multi-start projected gradient ascent on the evidence in log-space.
// Restart 0 starts from `previous`. With standardize_y the evidence is
// evaluated on standardized targets, matching a standardized posterior.
HyperFit fit_hyperparams(const ObservationSet& data, int n_restarts,
                         const HyperBounds& bounds, const GPHyper& previous,
                         Rng& rng, bool standardize_y = false);

}  // namespace riskbo
