#include "riskbo/gp.hpp"

#include <Eigen/Cholesky>

#include <cmath>

namespace riskbo {

namespace {
constexpr double kSigmaFloor = 1e-9;
constexpr double kNoiseFloor = 1e-4;
}  // namespace

GPHyper::GPHyper(Vec ls, double sf2, double sn2)
    : lengthscales(std::move(ls)), signal_var(sf2), noise_var(sn2) {
  if (lengthscales.size() < 1 || !(signal_var > 0.0)) {
    throw std::invalid_argument("GPHyper: bad parameters");
  }
  lengthscales = lengthscales.cwiseMax(1e-3).cwiseMin(1e3);
  noise_var = std::max(noise_var, kNoiseFloor);
}

GPHyper GPHyper::defaults(int dim) {
  return GPHyper(Vec::Constant(dim, 0.2), 1.0, 0.01);
}

void ObservationSet::append(const Vec& x, const Vec& z, double yv) {
  if (x.size() != d_x || z.size() != d_z) {
    throw std::invalid_argument("ObservationSet::append: dimension mismatch");
  }
  Vec p(d_x + d_z);
  p << x, z;
  append_joint(p, yv);
}

void ObservationSet::append_joint(const Vec& p, double yv) {
  if (p.size() != dim() || !std::isfinite(yv)) {
    throw std::invalid_argument("ObservationSet::append_joint: bad row");
  }
  const int n = size();
  joint.conservativeResize(n + 1, dim());
  joint.row(n) = p.transpose();
  y.conservativeResize(n + 1);
  y[n] = yv;
}

double se_kernel(const Vec& p, const Vec& q, const GPHyper& hyper) {
  if (p.size() != q.size() || p.size() != hyper.dim()) {
    throw std::invalid_argument("se_kernel: dimension mismatch");
  }
  const double d2 =
      ((p - q).array() / hyper.lengthscales.array()).square().sum();
  return hyper.signal_var * std::exp(-0.5 * d2);
}

namespace {

// Gram matrix without the noise diagonal.
Mat gram(const Mat& pts, const GPHyper& h) {
  const int n = static_cast<int>(pts.rows());
  Mat scaled = pts.array().rowwise() /
               h.lengthscales.transpose().array();
  Vec sq = scaled.rowwise().squaredNorm();
  Mat d2 = sq.replicate(1, n) + sq.transpose().replicate(n, 1) -
           2.0 * scaled * scaled.transpose();
  return h.signal_var * (-0.5 * d2.cwiseMax(0.0).array()).exp();
}

Vec cross_cov(const Mat& pts, const Vec& p, const GPHyper& h) {
  const int n = static_cast<int>(pts.rows());
  Vec k(n);
  for (int i = 0; i < n; ++i) {
    const double d2 = ((pts.row(i).transpose() - p).array() /
                       h.lengthscales.array())
                          .square()
                          .sum();
    k[i] = h.signal_var * std::exp(-0.5 * d2);
  }
  return k;
}

}  // namespace

GPPosterior::GPPosterior(ObservationSet data, GPHyper hyper,
                         bool standardize_y)
    : data_(std::move(data)), hyper_(std::move(hyper)) {
  if (data_.dim() != hyper_.dim()) {
    throw std::invalid_argument("GPPosterior: hyper/data dimension mismatch");
  }
  const int n = data_.size();
  if (n == 0) return;
  if (standardize_y && n >= 2) {
    y_shift_ = data_.y.mean();
    const double sd =
        std::sqrt((data_.y.array() - y_shift_).square().mean());
    y_scale_ = std::max(sd, 1e-8);
  }
  Mat a = gram(data_.joint, hyper_);
  a.diagonal().array() += hyper_.noise_var;
  Eigen::LLT<Mat> llt(a);
  if (llt.info() != Eigen::Success) {
    const double pivot = llt.matrixLLT().diagonal().minCoeff();
    throw FactorizationError(pivot);
  }
  chol_ = llt.matrixL();
  alpha_ = llt.solve(((data_.y.array() - y_shift_) / y_scale_).matrix());
}

void GPPosterior::predict_into(const Vec& p, double& mu, double& sigma) const {
  const double kpp = hyper_.signal_var;
  if (n() == 0) {
    mu = 0.0;
    sigma = std::sqrt(kpp);
    return;
  }
  Vec k = cross_cov(data_.joint, p, hyper_);
  mu = y_shift_ + y_scale_ * k.dot(alpha_);
  Vec v = chol_.triangularView<Eigen::Lower>().solve(k);
  sigma = y_scale_ * std::sqrt(std::max(kpp - v.squaredNorm(), 0.0));
}

Prediction GPPosterior::predict(const Vec& p) const {
  Prediction out{};
  predict_into(p, out.mu, out.sigma);
  return out;
}

Gradient GPPosterior::predict_grad(const Vec& p) const {
  const int d = data_.dim();
  Gradient g;
  g.dmu = Vec::Zero(d);
  g.dsigma = Vec::Zero(d);
  if (n() == 0) return g;

  const int nn = n();
  Vec k = cross_cov(data_.joint, p, hyper_);
  // dk_i/dp_a = k_i * (q_ia - p_a) / ls_a^2
  Mat jac(nn, d);
  for (int i = 0; i < nn; ++i) {
    jac.row(i) = k[i] * ((data_.joint.row(i).transpose() - p).array() /
                         hyper_.lengthscales.array().square())
                            .matrix()
                            .transpose();
  }
  g.dmu = y_scale_ * (jac.transpose() * alpha_);

  Vec v = chol_.triangularView<Eigen::Lower>().solve(k);
  const double sigma2 = std::max(hyper_.signal_var - v.squaredNorm(), 0.0);
  const double sigma = std::sqrt(sigma2);
  if (sigma <= kSigmaFloor) {
    g.sigma_degenerate = true;
    return g;
  }
  Vec w = chol_.transpose().triangularView<Eigen::Upper>().solve(v);
  // d sigma^2 / dp = -2 w^T dk/dp (standardized), then rescale
  g.dsigma = y_scale_ * (-1.0 / sigma) * (jac.transpose() * w);
  return g;
}

Gradient GPPosterior::predict_grad_x(const Vec& p) const {
  Gradient full = predict_grad(p);
  Gradient out;
  out.dmu = full.dmu.head(data_.d_x);
  out.dsigma = full.dsigma.head(data_.d_x);
  out.sigma_degenerate = full.sigma_degenerate;
  return out;
}

void GPPosterior::predict_many(const Mat& points, Vec& mu, Vec& sigma) const {
  const int m = static_cast<int>(points.rows());
  mu.resize(m);
  sigma.resize(m);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    predict_into(points.row(i).transpose(), mu[i], sigma[i]);
  }
}

void GPPosterior::predict_many_serial(const Mat& points, Vec& mu,
                                      Vec& sigma) const {
  const int m = static_cast<int>(points.rows());
  mu.resize(m);
  sigma.resize(m);
  for (int i = 0; i < m; ++i) {
    predict_into(points.row(i).transpose(), mu[i], sigma[i]);
  }
}

GPPosterior fit_posterior(ObservationSet data, GPHyper hyper,
                          bool standardize_y) {
  try {
    return GPPosterior(data, hyper, standardize_y);
  } catch (const FactorizationError&) {
    GPHyper jittered = hyper;
    jittered.noise_var = 2.0 * hyper.noise_var;
    return GPPosterior(std::move(data), std::move(jittered), standardize_y);
  }
}

AtomPredictor::AtomPredictor(const GPPosterior& post, Mat z_atoms)
    : post_(&post), atoms_(std::move(z_atoms)) {
  const auto& obs = post.data();
  if (atoms_.cols() != obs.d_z) {
    throw std::invalid_argument("AtomPredictor: atom dimension mismatch");
  }
  const int n = obs.size();
  const int m = static_cast<int>(atoms_.rows());
  zcorr_.resize(n, m);
  const auto& ls = post.hyper().lengthscales;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      double d2 = 0.0;
      for (int a = 0; a < obs.d_z; ++a) {
        const double diff =
            (obs.joint(i, obs.d_x + a) - atoms_(j, a)) / ls[obs.d_x + a];
        d2 += diff * diff;
      }
      zcorr_(i, j) = std::exp(-0.5 * d2);
    }
  }
}

void AtomPredictor::predict(const Vec& x, Vec& mu, Vec& sigma) const {
  const auto& obs = post_->data();
  const auto& h = post_->hyper();
  const int n = obs.size();
  const int m = atom_count();
  mu.resize(m);
  sigma.resize(m);
  if (n == 0) {
    mu.setZero();
    sigma.setConstant(std::sqrt(h.signal_var));
    return;
  }
  Vec ax(n);
  for (int i = 0; i < n; ++i) {
    double d2 = 0.0;
    for (int a = 0; a < obs.d_x; ++a) {
      const double diff = (obs.joint(i, a) - x[a]) / h.lengthscales[a];
      d2 += diff * diff;
    }
    ax[i] = h.signal_var * std::exp(-0.5 * d2);
  }
  Mat kstar = ax.asDiagonal() * zcorr_;  // n x m
  mu = (post_->y_shift() +
        post_->y_scale() * (kstar.transpose() * post_->weights()).array())
           .matrix();
  post_->chol_lower().triangularView<Eigen::Lower>().solveInPlace(kstar);
  sigma = (post_->y_scale() *
           (h.signal_var - kstar.colwise().squaredNorm().transpose().array())
               .max(0.0)
               .sqrt())
              .matrix();
}

LogMarginal log_marginal_likelihood(const ObservationSet& data,
                                    const GPHyper& hyper) {
  const int n = data.size();
  if (n == 0) {
    throw std::invalid_argument("log_marginal_likelihood: empty data");
  }
  const int d = data.dim();
  Mat k = gram(data.joint, hyper);
  Mat a = k;
  a.diagonal().array() += hyper.noise_var;
  Eigen::LLT<Mat> llt(a);
  if (llt.info() != Eigen::Success) {
    throw FactorizationError(llt.matrixLLT().diagonal().minCoeff());
  }
  Mat l = llt.matrixL();
  Vec alpha = llt.solve(data.y);

  LogMarginal out;
  out.value = -0.5 * data.y.dot(alpha) - l.diagonal().array().log().sum() -
              0.5 * n * std::log(2.0 * M_PI);

  // grad_theta = 1/2 tr((alpha alpha^T - A^{-1}) dA/dtheta)
  Mat ainv = llt.solve(Mat::Identity(n, n));
  Mat g = alpha * alpha.transpose() - ainv;
  out.grad.resize(d + 2);
  for (int a_i = 0; a_i < d; ++a_i) {
    // dK/dlog ls_a = K .* sqdist_a / ls_a^2
    const double inv_ls2 =
        1.0 / (hyper.lengthscales[a_i] * hyper.lengthscales[a_i]);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double diff = data.joint(i, a_i) - data.joint(j, a_i);
        acc += g(i, j) * k(i, j) * diff * diff * inv_ls2;
      }
    }
    out.grad[a_i] = 0.5 * acc;
  }
  out.grad[d] = 0.5 * g.cwiseProduct(k).sum();          // dK/dlog sf2 = K
  out.grad[d + 1] = 0.5 * hyper.noise_var * g.trace();  // dA/dlog sn2 = sn2 I
  return out;
}

namespace {

Vec pack_log(const GPHyper& h) {
  const int d = h.dim();
  Vec t(d + 2);
  t.head(d) = h.lengthscales.array().log();
  t[d] = std::log(h.signal_var);
  t[d + 1] = std::log(h.noise_var);
  return t;
}

GPHyper unpack_log(const Vec& t, int d) {
  return GPHyper(t.head(d).array().exp(), std::exp(t[d]), std::exp(t[d + 1]));
}

Vec clamp_log(Vec t, int d, const HyperBounds& b) {
  for (int i = 0; i < d; ++i) {
    t[i] = std::clamp(t[i], std::log(b.ls_lo), std::log(b.ls_hi));
  }
  t[d] = std::clamp(t[d], std::log(b.sf2_lo), std::log(b.sf2_hi));
  t[d + 1] = std::clamp(t[d + 1], std::log(b.sn2_lo), std::log(b.sn2_hi));
  return t;
}

}  // namespace

HyperFit fit_hyperparams(const ObservationSet& data, int n_restarts,
                         const HyperBounds& bounds, const GPHyper& previous,
                         Rng& rng, bool standardize_y) {
  if (data.size() == 0) {
    throw std::invalid_argument("fit_hyperparams: empty data");
  }
  ObservationSet fit_data = data;
  if (standardize_y && data.size() >= 2) {
    const double mean = data.y.mean();
    const double sd =
        std::max(std::sqrt((data.y.array() - mean).square().mean()), 1e-8);
    fit_data.y = ((data.y.array() - mean) / sd).matrix();
  }
  const int d = data.dim();
  HyperFit best;
  best.hyper = previous;
  best.fell_back = true;
  best.log_marginal = -std::numeric_limits<double>::infinity();

  for (int r = 0; r < std::max(n_restarts, 1); ++r) {
    Vec theta;
    if (r == 0) {
      theta = clamp_log(pack_log(previous), d, bounds);
    } else {
      theta.resize(d + 2);
      for (int i = 0; i < d; ++i) theta[i] = std::log(uniform_in(rng, 0.05, 2.0));
      theta[d] = std::log(uniform_in(rng, 0.1, 10.0));
      theta[d + 1] = std::log(uniform_in(rng, 1e-4, 0.1));
      theta = clamp_log(theta, d, bounds);
    }
    try {
      GPHyper h = unpack_log(theta, d);
      LogMarginal cur = log_marginal_likelihood(fit_data, h);
      double step = 0.1;
      for (int iter = 0; iter < 60; ++iter) {
        if (cur.grad.cwiseAbs().maxCoeff() < 1e-5) break;
        bool accepted = false;
        double s = step;
        for (int half = 0; half < 12; ++half) {
          Vec trial = clamp_log(theta + s * cur.grad, d, bounds);
          GPHyper ht = unpack_log(trial, d);
          LogMarginal lt;
          try {
            lt = log_marginal_likelihood(fit_data, ht);
          } catch (const FactorizationError&) {
            s *= 0.5;
            continue;
          }
          if (lt.value > cur.value) {
            theta = trial;
            cur = lt;
            step = std::min(s * 1.3, 1.0);
            accepted = true;
            break;
          }
          s *= 0.5;
        }
        if (!accepted) break;
      }
      if (cur.value > best.log_marginal) {
        best.hyper = unpack_log(theta, d);
        best.log_marginal = cur.value;
        best.fell_back = false;
      }
    } catch (const FactorizationError&) {
      continue;  // restart failed entirely
    }
  }
  return best;
}

}  // namespace riskbo
