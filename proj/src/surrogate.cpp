#include "riskbo/surrogate.hpp"

#include "riskbo/risk.hpp"

#include <cmath>

namespace riskbo {

namespace {

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// subgradient of pinball at the kink takes the w >= 0 branch
double pinball_slope(double w, double alpha) {
  return w >= 0.0 ? alpha : alpha - 1.0;
}

struct Forward {
  Vec a1, h1, a2, h2;
  double out;
};

// f.out is the raw (standardized) head output
Forward run_forward(const SurrogateNet& net, const Vec& x) {
  Forward f;
  const Vec xn = (x - net.center) / net.scale;
  f.a1 = net.w1 * xn + net.b1;
  f.h1 = f.a1.unaryExpr([](double v) { return sigmoid(v); });
  f.a2 = net.w2 * f.h1 + net.b2;
  f.h2 = f.a2.unaryExpr([](double v) { return sigmoid(v); });
  f.out = net.w3.dot(f.h2) + net.b3;
  return f;
}

}  // namespace

SurrogateNet SurrogateNet::init(int d_x, int hidden, Rng& rng) {
  SurrogateNet net;
  auto glorot = [&](int rows, int cols) {
    const double s = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Mat m(rows, cols);
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) m(i, j) = uniform_in(rng, -s, s);
    }
    return m;
  };
  net.w1 = glorot(hidden, d_x);
  net.b1 = Vec::Zero(hidden);
  net.w2 = glorot(hidden, hidden);
  net.b2 = Vec::Zero(hidden);
  net.w3 = glorot(hidden, 1).col(0);
  net.b3 = 0.0;
  net.center = Vec::Zero(d_x);
  net.scale = 1.0;
  net.out_shift = 0.0;
  net.out_scale = 1.0;
  return net;
}

int SurrogateNet::param_count() const {
  return static_cast<int>(w1.size() + b1.size() + w2.size() + b2.size() +
                          w3.size() + 1);
}

double SurrogateNet::forward(const Vec& x) const {
  return out_scale * run_forward(*this, x).out + out_shift;
}

Vec SurrogateNet::input_grad(const Vec& x) const {
  const Forward f = run_forward(*this, x);
  const Vec s2 = f.h2.array() * (1.0 - f.h2.array());
  const Vec d2 = w3.cwiseProduct(s2);
  const Vec s1 = f.h1.array() * (1.0 - f.h1.array());
  const Vec d1 = (w2.transpose() * d2).cwiseProduct(s1);
  return out_scale * (w1.transpose() * d1) / scale;
}

Vec SurrogateNet::pack() const {
  Vec t(param_count());
  int off = 0;
  auto put = [&](const double* p, int n) {
    for (int i = 0; i < n; ++i) t[off++] = p[i];
  };
  put(w1.data(), static_cast<int>(w1.size()));
  put(b1.data(), static_cast<int>(b1.size()));
  put(w2.data(), static_cast<int>(w2.size()));
  put(b2.data(), static_cast<int>(b2.size()));
  put(w3.data(), static_cast<int>(w3.size()));
  t[off++] = b3;
  return t;
}

void SurrogateNet::unpack(const Vec& t) {
  int off = 0;
  auto get = [&](double* p, int n) {
    for (int i = 0; i < n; ++i) p[i] = t[off++];
  };
  get(w1.data(), static_cast<int>(w1.size()));
  get(b1.data(), static_cast<int>(b1.size()));
  get(w2.data(), static_cast<int>(w2.size()));
  get(b2.data(), static_cast<int>(b2.size()));
  get(w3.data(), static_cast<int>(w3.size()));
  b3 = t[off++];
}

void accumulate_output_param_grad(const SurrogateNet& net, const Vec& x,
                                  double coeff, Vec& acc) {
  const Vec xn = (x - net.center) / net.scale;
  const Forward f = run_forward(net, x);
  const Vec s2 = f.h2.array() * (1.0 - f.h2.array());
  const Vec d2 = net.w3.cwiseProduct(s2);              // d out / d a2
  const Vec s1 = f.h1.array() * (1.0 - f.h1.array());
  const Vec d1 = (net.w2.transpose() * d2).cwiseProduct(s1);  // d out / d a1

  const int h = static_cast<int>(net.b1.size());
  const int dx = net.input_dim();
  int off = 0;
  // w1
  for (int j = 0; j < dx; ++j) {
    for (int i = 0; i < h; ++i) acc[off + j * h + i] += coeff * d1[i] * xn[j];
  }
  off += h * dx;
  // b1
  for (int i = 0; i < h; ++i) acc[off + i] += coeff * d1[i];
  off += h;
  // w2
  for (int j = 0; j < h; ++j) {
    for (int i = 0; i < h; ++i) {
      acc[off + j * h + i] += coeff * d2[i] * f.h1[j];
    }
  }
  off += h * h;
  // b2
  for (int i = 0; i < h; ++i) acc[off + i] += coeff * d2[i];
  off += h;
  // w3
  for (int i = 0; i < h; ++i) acc[off + i] += coeff * f.h2[i];
  off += h;
  acc[off] += coeff;  // b3
}

double pinball_batch_loss(const SurrogateNet& net, const Mat& xs,
                          const Mat& zs, const TargetFn& target, double alpha) {
  double loss = 0.0;
  for (int i = 0; i < xs.rows(); ++i) {
    const Vec x = xs.row(i).transpose();
    const double g = net.forward(x);
    for (int j = 0; j < zs.rows(); ++j) {
      loss += pinball(target(x, zs.row(j).transpose()) - g, alpha);
    }
  }
  return loss / static_cast<double>(xs.rows() * zs.rows());
}

Vec sample_ball(const Vec& center, double radius, const Box& clip, Rng& rng) {
  const int d = static_cast<int>(center.size());
  Vec dir(d);
  double norm2 = 0.0;
  do {
    for (int i = 0; i < d; ++i) dir[i] = std_normal(rng);
    norm2 = dir.squaredNorm();
  } while (norm2 < 1e-24);
  const double r = radius * std::pow(uniform01(rng), 1.0 / d);
  return clip.clamp(center + (r / std::sqrt(norm2)) * dir);
}

void net_train_local(SurrogateNet& net, const Vec& center, double radius,
                     const Box& domain, const TargetFn& target,
                     const EnvDistribution& env, double alpha,
                     const LnsoConfig& cfg, Rng& rng,
                     std::vector<double>* loss_history) {
  net.center = center;
  net.scale = radius;
  // pilot standardization: the head trains on O(1) targets; quantiles
  // commute with the affine map, so forward() undoes it exactly
  {
    const int pilot_n = 64;
    Vec pv(pilot_n);
    for (int i = 0; i < pilot_n; ++i) {
      const Vec x = sample_ball(center, radius, domain, rng);
      pv[i] = target(x, env.sample_one(rng));
    }
    const double mean = pv.mean();
    const double sd = std::sqrt((pv.array() - mean).square().mean());
    net.out_shift = mean;
    net.out_scale = std::max(sd, 1e-6);
  }
  Vec grad(net.param_count());
  Vec theta = net.pack();
  // adam state
  Vec m = Vec::Zero(net.param_count());
  Vec v = Vec::Zero(net.param_count());
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kAdamEps = 1e-8;
  Mat xs(cfg.n_x, center.size());
  for (int j = 1; j <= cfg.train_steps; ++j) {
    Mat zs = env.sample(cfg.n_z, rng);
    for (int i = 0; i < cfg.n_x; ++i) {
      xs.row(i) = sample_ball(center, radius, domain, rng).transpose();
    }
    grad.setZero();
    const double denom = static_cast<double>(cfg.n_x * cfg.n_z);
    double loss = 0.0;
    for (int i = 0; i < cfg.n_x; ++i) {
      const Vec x = xs.row(i).transpose();
      const double g = net.forward(x);
      double coeff = 0.0;
      for (int k = 0; k < cfg.n_z; ++k) {
        // standardized residual: pinball slopes depend only on the sign
        const double w = (target(x, zs.row(k).transpose()) - g) / net.out_scale;
        loss += pinball(w, alpha);
        coeff -= pinball_slope(w, alpha);  // dL/d(raw head output)
      }
      accumulate_output_param_grad(net, x, coeff / denom, grad);
    }
    if (!std::isfinite(loss)) {
      throw std::runtime_error(
          "net_train_local: non-finite training loss at step " +
          std::to_string(j));
    }
    if (loss_history) loss_history->push_back(loss / denom);
    m = kBeta1 * m + (1.0 - kBeta1) * grad;
    v = kBeta2 * v.array().matrix() + (1.0 - kBeta2) * grad.cwiseProduct(grad);
    const double bc1 = 1.0 - std::pow(kBeta1, j);
    const double bc2 = 1.0 - std::pow(kBeta2, j);
    const double lr = cfg.step_theta / std::pow(static_cast<double>(j), 0.75);
    theta = net.pack();
    theta -= lr * ((m / bc1).array() /
                   ((v / bc2).array().sqrt() + kAdamEps))
                     .matrix();
    net.unpack(theta);
  }
}

namespace {

Vec ascent_direction(const SurrogateNet& net, const Vec& x,
                     const LnsoConfig& cfg) {
  if (cfg.grad_stencil <= 0.0) return net.input_grad(x);
  const double h = cfg.grad_stencil * cfg.radius;
  Vec g(x.size());
  for (int a = 0; a < x.size(); ++a) {
    Vec xp = x, xm = x;
    xp[a] += h;
    xm[a] -= h;
    g[a] = (net.forward(xp) - net.forward(xm)) / (2.0 * h);
  }
  return g;
}

}  // namespace

LnsoResult lnso_maximize(const TargetFn& target, const EnvDistribution& env,
                         double alpha, const Box& domain, const Vec& x0,
                         const LnsoConfig& cfg, Rng& rng) {
  if (!domain.contains(x0, 1e-12)) {
    throw std::invalid_argument("lnso_maximize: x0 outside the domain");
  }
  const double trigger = cfg.trigger_dist > 0.0 ? cfg.trigger_dist : cfg.radius;
  SurrogateNet net = SurrogateNet::init(domain.dim(), cfg.hidden, rng);
  LnsoResult res;
  Vec x = x0;
  Vec center = x0;
  Vec tail = Vec::Zero(domain.dim());
  int tail_n = 0;
  int since_retrain = 0;
  for (int i = 1; i <= cfg.x_steps; ++i) {
    const bool ball_left = (x - center).norm() >= trigger;
    const bool periodic =
        cfg.retrain_period > 0 && since_retrain >= cfg.retrain_period;
    if (i == 1 || ball_left || periodic) {
      center = x;
      if (periodic && !ball_left) {
        // fresh parameters decorrelate the fit error between refreshes
        net = SurrogateNet::init(domain.dim(), cfg.hidden, rng);
      }
      net_train_local(net, center, cfg.radius, domain, target, env, alpha,
                      cfg, rng);
      ++res.retrains;
      since_retrain = 0;
    }
    ++since_retrain;
    x = domain.clamp(x + cfg.step_x * ascent_direction(net, x, cfg));
    if (cfg.tail_frac > 0.0 &&
        i > int(cfg.x_steps * (1.0 - cfg.tail_frac))) {
      tail += x;
      ++tail_n;
    }
  }
  res.x = tail_n > 0 ? Vec(tail / tail_n) : x;
  return res;
}

}  // namespace riskbo
