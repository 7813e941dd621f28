#pragma once

// Desk-scale Gaussian diffusion: the forward noising chain q(x_t | x_{t-1}) and a
// reverse chain p(x_{t-1} | x_t) with caller-supplied mean and diagonal covariance.

#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace wxaug::diffusion {

using Vector = std::vector<double>;
using Rng = std::mt19937_64;

class NoiseSchedule {
 public:
  /// Every beta must lie in (0, 1); at least one step.
  explicit NoiseSchedule(std::vector<double> betas);

  std::size_t steps() const { return betas_.size(); }
  /// 1-based, matching the chain's step index.
  double beta(std::size_t t) const { return betas_.at(t - 1); }
  const std::vector<double>& betas() const { return betas_; }

  /// prod_{s<=t} sqrt(1 - beta_s)
  double mean_scale(std::size_t t) const;
  /// 1 - prod_{s<=t} (1 - beta_s): variance of x_t given x_0.
  double marginal_variance(std::size_t t) const;

 private:
  std::vector<double> betas_;
};

/// sqrt(1 - beta) * x_prev + sqrt(beta) * eps, eps ~ N(0, I). Requires beta in (0, 1).
Vector forward_step(std::span<const double> x_prev, double beta, Rng& rng);

/// Applies forward_step for s = 1..t starting from x0. Requires 1 <= t <= T.
Vector forward_marginal(std::span<const double> x0, const NoiseSchedule& schedule, std::size_t t,
                        Rng& rng);

/// Sample of N(mean, diag(cov_diag)). `x_t` fixes the dimension; every variance must be > 0.
Vector reverse_step(std::span<const double> x_t, std::span<const double> mean,
                    std::span<const double> cov_diag, Rng& rng);

using MeanFn = std::function<Vector(std::span<const double> x_t, std::size_t t)>;
using CovFn = std::function<Vector(std::span<const double> x_t, std::size_t t)>;

/// Runs reverse_step from t = T down to t = 1.
Vector reverse_chain(std::span<const double> x_T, const NoiseSchedule& schedule,
                     const MeanFn& mean_fn, const CovFn& cov_fn, Rng& rng);

namespace detail {
// Boundary variants (beta in [0, 1], variances >= 0) for tests of the limits.
Vector forward_step_unchecked(std::span<const double> x_prev, double beta, Rng& rng);
Vector reverse_step_unchecked(std::span<const double> mean, std::span<const double> cov_diag,
                              Rng& rng);
}  // namespace detail

}  // namespace wxaug::diffusion
