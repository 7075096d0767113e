#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace regd {

// Bias-corrected Adam over a flat parameter vector, updated in place.
struct AdamState {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step_count = 0;
  std::vector<double> m;
  std::vector<double> v;

  AdamState(std::size_t num_params, double learning_rate);
};

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grad);

// Central-difference gradient of f at `params`, one coordinate at a time.
std::vector<double> finite_difference(const std::function<double(std::span<const double>)>& f,
                                      std::span<const double> params, double h = 1e-6);

}  // namespace regd
