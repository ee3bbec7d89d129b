#pragma once

#include <cstddef>
#include <vector>

#include "maskmatch/tensor.hpp"

namespace maskmatch {

// Strided noise schedule over T sampling steps. alpha_bar[0] = 1 is the clean
// latent; alpha_bar[k] for k in [1, T] is the cumulative product of the
// training schedule up to virtual timestep timesteps[k].
struct Schedule {
  std::size_t steps = 0;
  std::vector<double> alpha_bar;        // T + 1 entries, strictly decreasing
  std::vector<std::size_t> timesteps;   // T + 1 virtual timesteps, timesteps[0] = 0
  std::vector<double> sigma;            // per step, all zero (deterministic)
};

inline constexpr std::size_t kTrainSteps = 1000;
inline constexpr double kBetaStart = 8.5e-4;
inline constexpr double kBetaEnd = 1.2e-2;

// Cumulative alpha of the training schedule at virtual timestep t (t = 0 -> 1).
double train_alpha_bar(std::size_t virtual_t);

// Linear betas over kTrainSteps, strided down to `steps`.
Schedule make_linear_schedule(std::size_t steps);

// z_{t-1} from z_t, sigma_t = 0. Requires t in [1, T].
Tensor ddim_step(const Tensor& z, const Tensor& eps, std::size_t t, const Schedule& schedule);

// z_{t+1} from z_t. Requires t in [0, T).
Tensor ddim_invert_step(const Tensor& z, const Tensor& eps, std::size_t t,
                        const Schedule& schedule);

// eps_uncond + scale * (eps_cond - eps_uncond)
Tensor cfg(const Tensor& eps_cond, const Tensor& eps_uncond, double scale);

double relative_l2(const Tensor& a, const Tensor& reference);

}  // namespace maskmatch
