#include "wxaug/diffusion.hpp"

#include <cmath>
#include <string>

namespace wxaug::diffusion {

NoiseSchedule::NoiseSchedule(std::vector<double> betas) : betas_(std::move(betas)) {
  if (betas_.empty()) throw std::invalid_argument("noise schedule needs at least one step");
  for (std::size_t i = 0; i < betas_.size(); ++i) {
    if (!(betas_[i] > 0.0 && betas_[i] < 1.0)) {
      throw std::invalid_argument("beta_" + std::to_string(i + 1) + " must lie in (0, 1)");
    }
  }
}

double NoiseSchedule::mean_scale(std::size_t t) const {
  double scale = 1.0;
  for (std::size_t s = 1; s <= t; ++s) scale *= std::sqrt(1.0 - beta(s));
  return scale;
}

double NoiseSchedule::marginal_variance(std::size_t t) const {
  double keep = 1.0;
  for (std::size_t s = 1; s <= t; ++s) keep *= 1.0 - beta(s);
  return 1.0 - keep;
}

namespace detail {

Vector forward_step_unchecked(std::span<const double> x_prev, double beta, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double keep = std::sqrt(1.0 - beta);
  const double noise = std::sqrt(beta);
  Vector out(x_prev.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = keep * x_prev[i] + noise * normal(rng);
  return out;
}

Vector reverse_step_unchecked(std::span<const double> mean, std::span<const double> cov_diag,
                              Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector out(mean.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = mean[i] + std::sqrt(cov_diag[i]) * normal(rng);
  }
  return out;
}

}  // namespace detail

Vector forward_step(std::span<const double> x_prev, double beta, Rng& rng) {
  if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("beta must lie in (0, 1)");
  return detail::forward_step_unchecked(x_prev, beta, rng);
}

Vector forward_marginal(std::span<const double> x0, const NoiseSchedule& schedule, std::size_t t,
                        Rng& rng) {
  if (t < 1 || t > schedule.steps()) {
    throw std::out_of_range("t must lie in [1, " + std::to_string(schedule.steps()) + "]");
  }
  Vector x(x0.begin(), x0.end());
  for (std::size_t s = 1; s <= t; ++s) x = forward_step(x, schedule.beta(s), rng);
  return x;
}

Vector reverse_step(std::span<const double> x_t, std::span<const double> mean,
                    std::span<const double> cov_diag, Rng& rng) {
  if (mean.size() != x_t.size() || cov_diag.size() != x_t.size()) {
    throw std::invalid_argument("mean and covariance must match the state dimension");
  }
  for (double v : cov_diag) {
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("variances must be positive");
  }
  return detail::reverse_step_unchecked(mean, cov_diag, rng);
}

Vector reverse_chain(std::span<const double> x_T, const NoiseSchedule& schedule,
                     const MeanFn& mean_fn, const CovFn& cov_fn, Rng& rng) {
  Vector x(x_T.begin(), x_T.end());
  for (std::size_t t = schedule.steps(); t >= 1; --t) {
    x = reverse_step(x, mean_fn(x, t), cov_fn(x, t), rng);
  }
  return x;
}

}  // namespace wxaug::diffusion
