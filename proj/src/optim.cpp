#include "regd/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace regd {

AdamState::AdamState(std::size_t num_params, double learning_rate)
    : lr(learning_rate), m(num_params, 0.0), v(num_params, 0.0) {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
}

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grad) {
  if (params.size() != state.m.size() || grad.size() != state.m.size())
    throw std::invalid_argument("adam_step shape mismatch");
  ++state.step_count;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grad[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    params[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
  }
}

std::vector<double> finite_difference(const std::function<double(std::span<const double>)>& f,
                                      std::span<const double> params, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite difference step must be positive");
  std::vector<double> work(params.begin(), params.end());
  std::vector<double> out(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double x = work[i];
    work[i] = x + h;
    const double fp = f(work);
    work[i] = x - h;
    const double fm = f(work);
    work[i] = x;
    out[i] = (fp - fm) / (2.0 * h);
  }
  return out;
}

}  // namespace regd
