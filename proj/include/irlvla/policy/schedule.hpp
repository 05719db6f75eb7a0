#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace irlvla::policy {

// Index t runs 0..tau; entry 0 is the clean state (beta_0 = 0, alpha_bar_0 = 1).
struct NoiseSchedule {
  int tau = 0;
  std::vector<double> betas;
  std::vector<double> alphas;
  std::vector<double> alpha_bars;
  std::vector<double> sigmas;  // transition stddev of x_{t-1} | x_t

  // Coefficients of the posterior mean mu = a * x0_hat + b * x_t.
  double mean_coef_x0(int t) const;
  double mean_coef_xt(int t) const;
};

// Linear betas from beta_start to beta_end over tau steps. sigma_t =
// max(sigma_min, sigma_scale * sqrt(beta_t)).
NoiseSchedule linear_schedule(int tau, double beta_start, double beta_end,
                              double sigma_scale = 1.0, double sigma_min = 0.0);

// Replaces every transition stddev; zero gives the noiseless sampler.
void set_sigmas(NoiseSchedule& s, double sigma);

// x_t = sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * eps, eps ~ N(0, I)
// drawn from `seed`. Columns are independent samples.
Eigen::MatrixXd forward_noise(const Eigen::MatrixXd& x0, int t, const NoiseSchedule& s,
                              std::uint64_t seed);

}  // namespace irlvla::policy
