#pragma once

namespace riskbo {

// Knobs for the local surrogate maximizer: the surrogate is retrained
// whenever the iterate leaves the ball of radius `radius` around the
// last training center (trigger_dist < 0 means trigger at the radius).
struct LnsoConfig {
  double radius = 0.1;
  int x_steps = 160;        // ascent iterations on the surrogate
  int train_steps = 400;    // adam iterations per (re)train
  double step_x = 0.02;
  double step_theta = 0.05;  // adam learning rate, decays as 1/sqrt(j)
  int n_z = 10;              // env samples per training batch
  int n_x = 50;              // ball samples per training batch
  double trigger_dist = -1.0;
  int hidden = 30;
  // Freshly-initialized refresh every this many steps even without the
  // ball trigger; decorrelates successive local fits so the tail
  // average cancels fit bias. 0 disables.
  int retrain_period = 15;
  // Returned point: average of the last fraction of iterates
  // (0 returns the final iterate).
  double tail_frac = 0.25;
  // Ascent direction: central difference of surrogate values over
  // +-grad_stencil*radius per axis (0 uses exact backprop gradients,
  // which carry the fit's small-wavelength noise).
  double grad_stencil = 0.2;
};

}  // namespace riskbo
