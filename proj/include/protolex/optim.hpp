#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace protolex {

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  explicit AdamState(std::size_t size = 0) : m(size, 0.0), v(size, 0.0) {}
};

// Bias-corrected Adam. Weight decay is added to the gradient as wd * param
// before the moment updates (coupled l2). Throws ShapeMismatch.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr,
               double weight_decay);

struct PlateauSchedule {
  double factor = 0.5;
  int patience = 30;
};

// Called after `val_losses.size()` completed epochs. At every multiple of
// patience, the best loss inside the last window is compared with the best
// loss before it (the first epoch serves as reference for the very first
// window); without strict improvement the rate is multiplied by factor.
double lr_schedule(std::span<const double> val_losses, double current_lr, const PlateauSchedule& schedule);

}  // namespace protolex
