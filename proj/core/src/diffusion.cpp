#include "maskmatch/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace maskmatch {

namespace {

const std::vector<double>& cumulative_alphas() {
  static const std::vector<double> table = [] {
    std::vector<double> cumulative(kTrainSteps);
    double acc = 1.0;
    for (std::size_t i = 0; i < kTrainSteps; ++i) {
      const double beta = kBetaStart + (kBetaEnd - kBetaStart) * static_cast<double>(i) /
                                           static_cast<double>(kTrainSteps - 1);
      acc *= 1.0 - beta;
      cumulative[i] = acc;
    }
    return cumulative;
  }();
  return table;
}

}  // namespace

double train_alpha_bar(std::size_t virtual_t) {
  if (virtual_t > kTrainSteps) {
    throw Error(ErrorCode::kInvalidArgument,
                "virtual timestep must lie in [0, " + std::to_string(kTrainSteps) + "]");
  }
  return virtual_t == 0 ? 1.0 : cumulative_alphas()[virtual_t - 1];
}

Schedule make_linear_schedule(std::size_t steps) {
  if (steps == 0 || steps > kTrainSteps) {
    throw Error(ErrorCode::kInvalidArgument,
                "step count must lie in [1, " + std::to_string(kTrainSteps) + "]");
  }
  Schedule s;
  s.steps = steps;
  s.alpha_bar.resize(steps + 1);
  s.timesteps.resize(steps + 1);
  s.sigma.assign(steps + 1, 0.0);
  for (std::size_t k = 0; k <= steps; ++k) {
    s.timesteps[k] = k * kTrainSteps / steps;
    s.alpha_bar[k] = train_alpha_bar(s.timesteps[k]);
  }
  return s;
}

namespace {

void require_same(const Tensor& a, const Tensor& b, const char* what) {
  if (a.dims() != b.dims()) throw Error(ErrorCode::kShapeMismatch, what);
}

Tensor affine(const Tensor& z, double cz, const Tensor& eps, double ce) {
  Tensor out(z.dims());
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = static_cast<float>(cz * z[i] + ce * eps[i]);
  }
  return out;
}

}  // namespace

Tensor ddim_step(const Tensor& z, const Tensor& eps, std::size_t t, const Schedule& schedule) {
  require_same(z, eps, "ddim_step: latent and noise shapes differ");
  if (t < 1 || t > schedule.steps) {
    throw Error(ErrorCode::kInvalidArgument, "ddim_step: t must lie in [1, T]");
  }
  const double a_t = schedule.alpha_bar[t];
  const double a_prev = schedule.alpha_bar[t - 1];
  const double sigma = schedule.sigma[t];
  // sqrt(a_prev) * (z - sqrt(1 - a_t) eps) / sqrt(a_t) + sqrt(1 - a_prev - sigma^2) eps
  const double cz = std::sqrt(a_prev / a_t);
  const double ce = std::sqrt(std::max(0.0, 1.0 - a_prev - sigma * sigma)) -
                    std::sqrt(a_prev) * std::sqrt(1.0 - a_t) / std::sqrt(a_t);
  return affine(z, cz, eps, ce);
}

Tensor ddim_invert_step(const Tensor& z, const Tensor& eps, std::size_t t,
                        const Schedule& schedule) {
  require_same(z, eps, "ddim_invert_step: latent and noise shapes differ");
  if (t >= schedule.steps) {
    throw Error(ErrorCode::kInvalidArgument, "ddim_invert_step: t must lie in [0, T)");
  }
  const double a_t = schedule.alpha_bar[t];
  const double a_next = schedule.alpha_bar[t + 1];
  // Exact inverse of ddim_step: the familiar sqrt(1/a - 1) difference is the
  // update of z / sqrt(a), so it is scaled back by sqrt(a_next) here.
  const double cz = std::sqrt(a_next / a_t);
  const double ce =
      std::sqrt(a_next) * (std::sqrt(1.0 / a_next - 1.0) - std::sqrt(1.0 / a_t - 1.0));
  return affine(z, cz, eps, ce);
}

Tensor cfg(const Tensor& eps_cond, const Tensor& eps_uncond, double scale) {
  require_same(eps_cond, eps_uncond, "cfg: conditional and unconditional shapes differ");
  Tensor out(eps_cond.dims());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double u = eps_uncond[i];
    out[i] = static_cast<float>(u + scale * (static_cast<double>(eps_cond[i]) - u));
  }
  return out;
}

double relative_l2(const Tensor& a, const Tensor& reference) {
  require_same(a, reference, "relative_l2: shapes differ");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - reference[i];
    num += d * d;
    den += static_cast<double>(reference[i]) * reference[i];
  }
  if (den == 0.0) return num == 0.0 ? 0.0 : INFINITY;
  return std::sqrt(num / den);
}

}  // namespace maskmatch
