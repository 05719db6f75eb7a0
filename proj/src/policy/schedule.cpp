#include "irlvla/policy/schedule.hpp"

#include <algorithm>
#include <cmath>

#include "irlvla/common/error.hpp"
#include "irlvla/common/rng.hpp"

namespace irlvla::policy {

double NoiseSchedule::mean_coef_x0(int t) const {
  return std::sqrt(alpha_bars[t - 1]) * betas[t] / (1.0 - alpha_bars[t]);
}

double NoiseSchedule::mean_coef_xt(int t) const {
  return std::sqrt(alphas[t]) * (1.0 - alpha_bars[t - 1]) / (1.0 - alpha_bars[t]);
}

NoiseSchedule linear_schedule(int tau, double beta_start, double beta_end, double sigma_scale,
                              double sigma_min) {
  if (tau < 1) fail(ErrorCode::ConfigInvalid, "tau must be >= 1");
  if (!(beta_start > 0.0 && beta_end < 1.0 && beta_start <= beta_end)) {
    fail(ErrorCode::ConfigInvalid, "betas must satisfy 0 < beta_start <= beta_end < 1");
  }
  NoiseSchedule s;
  s.tau = tau;
  s.betas.assign(tau + 1, 0.0);
  s.alphas.assign(tau + 1, 1.0);
  s.alpha_bars.assign(tau + 1, 1.0);
  s.sigmas.assign(tau + 1, 0.0);
  for (int t = 1; t <= tau; ++t) {
    const double f = tau == 1 ? 0.0 : static_cast<double>(t - 1) / (tau - 1);
    s.betas[t] = beta_start + f * (beta_end - beta_start);
    s.alphas[t] = 1.0 - s.betas[t];
    s.alpha_bars[t] = s.alpha_bars[t - 1] * s.alphas[t];
    s.sigmas[t] = std::max(sigma_min, sigma_scale * std::sqrt(s.betas[t]));
  }
  return s;
}

void set_sigmas(NoiseSchedule& s, double sigma) {
  for (int t = 1; t <= s.tau; ++t) s.sigmas[t] = sigma;
}

Eigen::MatrixXd forward_noise(const Eigen::MatrixXd& x0, int t, const NoiseSchedule& s,
                              std::uint64_t seed) {
  if (t < 0 || t > s.tau) fail(ErrorCode::ShapeMismatch, "diffusion step out of range");
  Rng rng(seed);
  const double a = std::sqrt(s.alpha_bars[t]);
  const double b = std::sqrt(1.0 - s.alpha_bars[t]);
  Eigen::MatrixXd out(x0.rows(), x0.cols());
  for (Eigen::Index c = 0; c < x0.cols(); ++c) {
    for (Eigen::Index r = 0; r < x0.rows(); ++r) out(r, c) = a * x0(r, c) + b * rng.normal();
  }
  return out;
}

}  // namespace irlvla::policy
