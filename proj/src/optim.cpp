#include "protolex/optim.hpp"

#include <algorithm>
#include <cmath>

#include "protolex/error.hpp"

namespace protolex {

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr,
               double weight_decay) {
  if (params.size() != grads.size() || params.size() != state.m.size() || params.size() != state.v.size())
    throw Error(Errc::shape_mismatch, "adam: parameter, gradient and moment sizes differ");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    double g = grads[i] + weight_decay * params[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    double m_hat = state.m[i] / bc1;
    double v_hat = state.v[i] / bc2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
  }
}

double lr_schedule(std::span<const double> val_losses, double current_lr, const PlateauSchedule& schedule) {
  const auto epoch = val_losses.size();
  if (schedule.patience <= 0 || epoch == 0 || epoch % static_cast<std::size_t>(schedule.patience) != 0)
    return current_lr;
  const std::size_t window_start = std::max<std::size_t>(epoch - static_cast<std::size_t>(schedule.patience), 1);
  if (window_start >= epoch) return current_lr;
  double reference = *std::min_element(val_losses.begin(), val_losses.begin() + static_cast<std::ptrdiff_t>(window_start));
  double window_best = *std::min_element(val_losses.begin() + static_cast<std::ptrdiff_t>(window_start), val_losses.end());
  return window_best < reference ? current_lr : current_lr * schedule.factor;
}

}  // namespace protolex
