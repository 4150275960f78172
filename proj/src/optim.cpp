#include "hypersage/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hypersage/error.hpp"
#include "hypersage/random.hpp"

namespace hypersage {

AdamState::AdamState(AdamOptions opts, std::span<const Matrix> params) : options(opts) {
  for (const auto& p : params) {
    first_moment.emplace_back(p.rows(), p.cols());
    second_moment.emplace_back(p.rows(), p.cols());
  }
}

void adam_step(std::span<Matrix> params, std::span<const Matrix> grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
    throw InvalidArgument("adam_step: parameter, gradient and state counts differ");
  }
  const auto& o = state.options;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(o.beta1, t);
  const double bc2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].data();
    const auto g = grads[i].data();
    auto m = state.first_moment[i].data();
    auto v = state.second_moment[i].data();
    if (g.size() != w.size() || m.size() != w.size()) throw InvalidArgument("adam_step: shape mismatch");
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double gk = g[k] + o.weight_decay * w[k];
      m[k] = o.beta1 * m[k] + (1.0 - o.beta1) * gk;
      v[k] = o.beta2 * v[k] + (1.0 - o.beta2) * gk * gk;
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      w[k] -= o.lr * mhat / (std::sqrt(vhat) + o.eps);
    }
  }
}

namespace {

struct Derivative {
  double value = 0.0;
  bool kink = false;
};

// Ridders' extrapolation of central differences: the step shrinks by `kShrink`
// per row and the estimate with the smallest internal error wins. Any probe
// whose branch signature differs from the base point marks a kink.
Derivative ridders(const std::function<LossEvaluation(double)>& probe, double h, std::uint64_t signature) {
  constexpr int kRows = 10;
  constexpr double kShrink = 1.4, kShrink2 = kShrink * kShrink;
  double table[kRows][kRows];
  Derivative out;
  double best_err = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kRows; ++i, h /= kShrink) {
    const LossEvaluation plus = probe(h), minus = probe(-h);
    if (plus.branch_signature != signature || minus.branch_signature != signature) return {0.0, true};
    table[0][i] = (plus.loss - minus.loss) / (2.0 * h);
    double fac = kShrink2;
    for (int j = 1; j <= i; ++j, fac *= kShrink2) {
      table[j][i] = (table[j - 1][i] * fac - table[j - 1][i - 1]) / (fac - 1.0);
      const double err =
          std::max(std::abs(table[j][i] - table[j - 1][i]), std::abs(table[j][i] - table[j - 1][i - 1]));
      if (err <= best_err) {
        best_err = err;
        out.value = table[j][i];
      }
    }
    if (i == 0) out.value = table[0][0];
    // Higher order got worse by a clear margin: stop early.
    if (i > 0 && std::abs(table[i][i] - table[i - 1][i - 1]) >= 2.0 * best_err) break;
  }
  return out;
}

}  // namespace

GradCheckReport finite_diff_check(const LossFunction& loss_fn, std::vector<Matrix> params,
                                  const GradCheckOptions& opts) {
  const LossEvaluation base = loss_fn(params, true);
  if (base.grads.size() != params.size()) throw InvalidArgument("loss function returned the wrong number of gradients");

  std::size_t total = 0;
  for (const auto& p : params) total += p.size();
  // Visit order over flat coordinates: all in order, or a seeded shuffle.
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t target = opts.max_coordinates == 0 ? total : std::min(opts.max_coordinates, total);
  if (target < total) {
    Rng rng(opts.seed);
    rng.shuffle(order.begin(), order.end());
  }

  GradCheckReport report;
  for (std::size_t n = 0; n < total && report.checked < target; ++n) {
    std::size_t k = order[n], i = 0;
    while (k >= params[i].size()) k -= params[i++].size();
    double& w = params[i].data()[k];
    const double orig = w;
    const Derivative d = ridders(
        [&](double offset) {
          w = orig + offset;
          return loss_fn(params, false);
        },
        opts.step, base.branch_signature);
    w = orig;
    if (d.kink) {
      ++report.skipped_kinks;
      continue;
    }
    const double numeric = d.value;
    const double analytic = base.grads[i].data()[k];
    const double denom = std::max({std::abs(numeric), std::abs(analytic), opts.magnitude_floor});
    const double rel = std::abs(numeric - analytic) / denom;
    ++report.checked;
    if (report.checked == 1 || rel > report.max_relative_error) {
      report.max_relative_error = rel;
      report.worst_param = i;
      report.worst_index = k;
      report.worst_analytic = analytic;
      report.worst_numeric = numeric;
    }
  }
  return report;
}

}  // namespace hypersage
