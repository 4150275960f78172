#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "hypersage/tensor.hpp"

namespace hypersage {

struct AdamOptions {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Coupled L2: weight_decay * param is added to the gradient before the
  /// moment updates.
  double weight_decay = 0.0;
};

struct AdamState {
  AdamOptions options;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  std::uint64_t step = 0;

  AdamState() = default;
  AdamState(AdamOptions opts, std::span<const Matrix> params);
};

/// One Adam update of every parameter in place.
void adam_step(std::span<Matrix> params, std::span<const Matrix> grads, AdamState& state);

struct LossEvaluation {
  double loss = 0.0;
  /// One gradient per parameter; may be left empty when not requested.
  std::vector<Matrix> grads;
  /// Tape branch signature of the evaluation (see Tape::branch_signature).
  std::uint64_t branch_signature = 0;
};

using LossFunction = std::function<LossEvaluation(std::span<const Matrix> params, bool need_grad)>;

struct GradCheckOptions {
  /// Largest probe offset; smaller ones shrink geometrically from here.
  double step = 1e-4;
  /// 0 checks every coordinate; otherwise distinct coordinates are drawn
  /// uniformly (with a fixed seed) until this many non-kink ones are checked.
  std::size_t max_coordinates = 0;
  std::uint64_t seed = 0;
  /// Denominator floor for the relative error; gradients smaller than this
  /// are compared on an absolute scale of floor * tolerance.
  double magnitude_floor = 1e-6;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  /// Coordinates where a probe within ±step crossed a rectifier or clamp
  /// boundary; the function is not differentiable there.
  std::size_t skipped_kinks = 0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Compares tape gradients with Ridders-extrapolated central differences.
GradCheckReport finite_diff_check(const LossFunction& loss_fn, std::vector<Matrix> params,
                                  const GradCheckOptions& opts = {});

}  // namespace hypersage
