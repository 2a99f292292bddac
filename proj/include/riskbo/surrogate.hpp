#pragma once

#include "riskbo/env.hpp"
#include "riskbo/surrogate_config.hpp"

#include <functional>

namespace riskbo {

using TargetFn = std::function<double(const Vec& x, const Vec& z)>;

// Feedforward surrogate d_x -> hidden -> hidden -> 1, sigmoid hidden
// units, linear output. Inputs are affinely mapped to ball coordinates
// (x - center) / scale before the first layer so the hidden units see
// O(1) spread regardless of the training-ball radius.
struct SurrogateNet {
  Mat w1;
  Vec b1;
  Mat w2;
  Vec b2;
  Vec w3;
  double b3 = 0.0;
  Vec center;          // input normalization offset
  double scale = 1.0;  // input normalization divisor
  double out_shift = 0.0;  // output de-standardization: raw*out_scale+out_shift
  double out_scale = 1.0;

  static SurrogateNet init(int d_x, int hidden, Rng& rng);

  int input_dim() const { return static_cast<int>(w1.cols()); }
  int param_count() const;
  double forward(const Vec& x) const;
  Vec input_grad(const Vec& x) const;  // d output / d x

  Vec pack() const;
  void unpack(const Vec& theta);
};

// d output / d parameters, accumulated as coeff * grad into `acc`
// (same layout as pack()).
void accumulate_output_param_grad(const SurrogateNet& net, const Vec& x,
                                  double coeff, Vec& acc);

// Mean pinball loss over all (x, z) pairs of the two sample sets.
double pinball_batch_loss(const SurrogateNet& net, const Mat& xs,
                          const Mat& zs, const TargetFn& target, double alpha);

// Uniform draw from the ball clipped into the box.
Vec sample_ball(const Vec& center, double radius, const Box& clip, Rng& rng);

// Stochastic pinball-loss training of the surrogate toward
// VaR_alpha(target(x, Z)) on the ball around center.
// Aborts with a diagnostic if the loss turns non-finite.
void net_train_local(SurrogateNet& net, const Vec& center, double radius,
                     const Box& domain, const TargetFn& target,
                     const EnvDistribution& env, double alpha,
                     const LnsoConfig& cfg, Rng& rng,
                     std::vector<double>* loss_history = nullptr);

struct LnsoResult {
  Vec x;
  int retrains = 0;
};

// Alternates surrogate-gradient ascent steps on x (projected into the
// domain) with retraining whenever the iterate leaves the trigger ball.
LnsoResult lnso_maximize(const TargetFn& target, const EnvDistribution& env,
                         double alpha, const Box& domain, const Vec& x0,
                         const LnsoConfig& cfg, Rng& rng);

}  // namespace riskbo
