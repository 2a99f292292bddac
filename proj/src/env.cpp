#include "riskbo/env.hpp"

#include <algorithm>
#include <cmath>

namespace riskbo {

namespace {
constexpr double kAtomTol = 1e-12;
}

EnvDistribution EnvDistribution::discrete(Mat atoms, Vec masses) {
  if (atoms.rows() < 1) {
    throw std::invalid_argument("EnvDistribution: need at least one atom");
  }
  if (atoms.rows() != masses.size()) {
    throw std::invalid_argument("EnvDistribution: atoms/masses size mismatch");
  }
  for (int i = 0; i < masses.size(); ++i) {
    if (!(masses[i] > 0.0)) {
      throw std::invalid_argument("EnvDistribution: masses must be positive");
    }
  }
  if (std::abs(masses.sum() - 1.0) > 1e-12) {
    throw std::invalid_argument("EnvDistribution: masses must sum to 1");
  }
  for (int i = 0; i < atoms.rows(); ++i) {
    for (int j = i + 1; j < atoms.rows(); ++j) {
      if ((atoms.row(i) - atoms.row(j)).cwiseAbs().maxCoeff() <= kAtomTol) {
        throw std::invalid_argument("EnvDistribution: duplicate atoms");
      }
    }
  }
  EnvDistribution e;
  e.kind_ = EnvKind::Discrete;
  e.dim_ = static_cast<int>(atoms.cols());
  e.atoms_ = std::move(atoms);
  e.masses_ = std::move(masses);
  e.cum_ = Vec(e.masses_.size());
  double acc = 0.0;
  for (int i = 0; i < e.masses_.size(); ++i) {
    acc += e.masses_[i];
    e.cum_[i] = acc;
  }
  e.cum_[e.masses_.size() - 1] = 1.0;
  return e;
}

EnvDistribution EnvDistribution::grid(int d_z, int n_per_axis,
                                      WeightRule rule) {
  if (d_z < 1 || n_per_axis < 1) {
    throw std::invalid_argument("EnvDistribution::grid: bad dimensions");
  }
  Vec axis(n_per_axis);
  if (n_per_axis == 1) {
    axis[0] = 0.5;
  } else {
    for (int i = 0; i < n_per_axis; ++i) {
      axis[i] = static_cast<double>(i) / static_cast<double>(n_per_axis - 1);
    }
  }
  const long m = static_cast<long>(std::pow(n_per_axis, d_z) + 0.5);
  Mat atoms(m, d_z);
  for (long idx = 0; idx < m; ++idx) {
    long rem = idx;
    for (int a = d_z - 1; a >= 0; --a) {
      atoms(idx, a) = axis[rem % n_per_axis];
      rem /= n_per_axis;
    }
  }
  Vec w(m);
  if (rule == WeightRule::Uniform) {
    w.setConstant(1.0);
  } else {
    for (long i = 0; i < m; ++i) {
      double s = 0.0;
      for (int a = 0; a < d_z; ++a) {
        const double d = atoms(i, a) - 0.5;
        s += d * d;
      }
      w[i] = std::exp(-s / (0.1 * 0.1));
    }
  }
  const double total = w.sum();
  if (!(total > 0.0)) {
    throw std::runtime_error("EnvDistribution::grid: zero total weight");
  }
  return discrete(std::move(atoms), w / total);
}

EnvDistribution EnvDistribution::truncated_gaussian(int d_z) {
  if (d_z < 1) throw std::invalid_argument("truncated_gaussian: d_z >= 1");
  return truncated_gaussian(Vec::Constant(d_z, 0.5), Vec::Constant(d_z, 0.125),
                            2.0, Box::unit(d_z));
}

EnvDistribution EnvDistribution::truncated_gaussian(Vec mean, Vec sd,
                                                    double width_sd,
                                                    const Box& declared) {
  const int d = static_cast<int>(mean.size());
  if (sd.size() != d || declared.dim() != d) {
    throw std::invalid_argument("truncated_gaussian: dimension mismatch");
  }
  if (!(width_sd > 0.0) || (sd.array() <= 0.0).any()) {
    throw std::invalid_argument("truncated_gaussian: sd and width must be > 0");
  }
  EnvDistribution e;
  e.kind_ = EnvKind::Continuous;
  e.dim_ = d;
  e.mean_ = std::move(mean);
  e.sd_ = std::move(sd);
  e.support_.lo = (e.mean_ - width_sd * e.sd_).cwiseMax(declared.lo);
  e.support_.hi = (e.mean_ + width_sd * e.sd_).cwiseMin(declared.hi);
  for (int i = 0; i < d; ++i) {
    if (!(e.support_.lo[i] < e.support_.hi[i])) {
      throw std::invalid_argument("truncated_gaussian: empty support");
    }
  }
  return e;
}

const Mat& EnvDistribution::atoms() const {
  if (kind_ != EnvKind::Discrete)
    throw std::logic_error("atoms(): distribution is continuous");
  return atoms_;
}

const Vec& EnvDistribution::masses() const {
  if (kind_ != EnvKind::Discrete)
    throw std::logic_error("masses(): distribution is continuous");
  return masses_;
}

int EnvDistribution::atom_count() const {
  return static_cast<int>(atoms().rows());
}

const Box& EnvDistribution::support() const {
  if (kind_ != EnvKind::Continuous)
    throw std::logic_error("support(): distribution is discrete");
  return support_;
}

Vec EnvDistribution::mode() const {
  return support().clamp(mean_);
}

Vec EnvDistribution::log_density_grad(const Vec& z) const {
  if (kind_ != EnvKind::Continuous)
    throw std::logic_error("log_density_grad(): distribution is discrete");
  return ((mean_ - z).array() / sd_.array().square()).matrix();
}

Vec EnvDistribution::sample_one(Rng& rng) const {
  if (kind_ == EnvKind::Discrete) {
    const double u = uniform01(rng);
    const auto it = std::lower_bound(cum_.data(), cum_.data() + cum_.size(), u);
    const long idx = std::min<long>(it - cum_.data(), cum_.size() - 1);
    return atoms_.row(idx).transpose();
  }
  // per-axis rejection against the untruncated normal
  Vec z(dim_);
  for (int a = 0; a < dim_; ++a) {
    double v;
    do {
      v = mean_[a] + sd_[a] * std_normal(rng);
    } while (v < support_.lo[a] || v > support_.hi[a]);
    z[a] = v;
  }
  return z;
}

Mat EnvDistribution::sample(int n, Rng& rng) const {
  if (n < 1) throw std::invalid_argument("sample: n >= 1");
  Mat out(n, dim_);
  for (int i = 0; i < n; ++i) out.row(i) = sample_one(rng).transpose();
  return out;
}

Mat EnvDistribution::quasi_sample(int n) const {
  if (kind_ != EnvKind::Continuous)
    throw std::logic_error("quasi_sample(): distribution is discrete");
  Mat u = halton_points(n, dim_);
  Mat out(n, dim_);
  for (int a = 0; a < dim_; ++a) {
    const double alo = (support_.lo[a] - mean_[a]) / sd_[a];
    const double ahi = (support_.hi[a] - mean_[a]) / sd_[a];
    const double clo = normal_cdf(alo);
    const double chi = normal_cdf(ahi);
    for (int i = 0; i < n; ++i) {
      const double p = clo + u(i, a) * (chi - clo);
      out(i, a) = mean_[a] + sd_[a] * normal_quantile(p);
    }
    out.col(a) =
        out.col(a).cwiseMax(support_.lo[a]).cwiseMin(support_.hi[a]);
  }
  return out;
}

double EnvDistribution::mass_or_density(const Vec& z) const {
  if (z.size() != dim_) {
    throw std::invalid_argument("mass_or_density: dimension mismatch");
  }
  if (kind_ == EnvKind::Discrete) {
    for (int i = 0; i < atoms_.rows(); ++i) {
      if ((atoms_.row(i).transpose() - z).cwiseAbs().maxCoeff() <= kAtomTol) {
        return masses_[i];
      }
    }
    return 0.0;
  }
  double dens = 1.0;
  for (int a = 0; a < dim_; ++a) {
    if (z[a] < support_.lo[a] || z[a] > support_.hi[a]) return 0.0;
    const double alo = (support_.lo[a] - mean_[a]) / sd_[a];
    const double ahi = (support_.hi[a] - mean_[a]) / sd_[a];
    const double norm = normal_cdf(ahi) - normal_cdf(alo);
    dens *= normal_pdf((z[a] - mean_[a]) / sd_[a]) / (sd_[a] * norm);
  }
  return dens;
}

}  // namespace riskbo
