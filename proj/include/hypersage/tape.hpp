#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "hypersage/tensor.hpp"

namespace hypersage {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape
/// lives.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Matrix& value() const;
  const Matrix& grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

/// Reverse-mode recorder. Nodes are appended in evaluation order, so the
/// record is topologically sorted; backward() walks it once in reverse.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Var leaf(Matrix value, bool requires_grad = true);
  Var constant(Matrix value) { return leaf(std::move(value), false); }

  /// Appends an op result. `backward` is only kept if some input requires grad.
  Var record(Matrix value, bool requires_grad, BackwardFn backward);

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  const Matrix& grad(std::size_t id) const { return nodes_[id].grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Gradient accumulator of `id`, allocated on first use.
  Matrix& grad_mut(std::size_t id);

  /// Seeds d(out)/d(out) = 1 for a 1x1 output and back-propagates.
  void backward(Var out);

  std::size_t size() const noexcept { return nodes_.size(); }

  /// When enabled, ops hash their branch decisions (rectifier signs, clamp
  /// hits) into branch_signature(). Two evaluations with equal signatures lie
  /// on the same smooth piece of the function.
  void track_branches(bool on) noexcept { track_branches_ = on; }
  bool tracks_branches() const noexcept { return track_branches_; }
  std::uint64_t branch_signature() const noexcept { return branch_signature_; }
  void note_branch(std::uint64_t bits) noexcept;

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  bool track_branches_ = false;
  std::uint64_t branch_signature_ = 0x6a09e667f3bcc908ULL;
};

/// Sparse weighted power-mean operator. Output row r is
///
///   row_scale[r] * ( sum_k coeff[k] * max(x[source[k]], eps)^p )^(1/p)
///
/// over k in [offsets[r], offsets[r+1]), elementwise across columns. Rows with
/// no terms produce zeros.
struct PowerMeanStencil {
  std::size_t num_rows = 0;
  std::vector<std::size_t> offsets{0};
  std::vector<std::uint32_t> sources;
  std::vector<double> coeffs;
  std::vector<double> row_scale;  // empty means 1 for every row
  double p = 1.0;
  double epsilon = 1e-7;

  void add_row(std::span<const std::uint32_t> srcs, std::span<const double> cs, double scale = 1.0);
  std::size_t terms(std::size_t r) const { return offsets[r + 1] - offsets[r]; }
};

/// Untracked evaluation of a stencil.
Matrix apply_stencil(const PowerMeanStencil& stencil, const Matrix& x);

// Differentiable primitives. Inputs may live on the same tape only.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var rectify(Var x);
/// Divides each row by its L2 norm; zero rows pass through unchanged.
Var row_l2_normalize(Var x);
/// Train mode: zero each entry with probability `rate`, scale survivors by
/// 1/(1-rate). Test mode or rate == 0: identity.
Var dropout(Var x, double rate, bool train, std::uint64_t seed);
/// matmul(dropout(x, ...), w) for a constant x that must outlive the tape.
/// Same mask and bit-identical result, but the dropped copy of x is never
/// materialized; the mask is regenerated in the backward pass.
Var dropout_matmul(Tape& tape, const Matrix& x, Var w, double rate, bool train, std::uint64_t seed);
Var power_mean(Var x, const PowerMeanStencil& stencil);
/// Generalized mean of all rows of x: a 1 x cols result.
Var generalized_mean(Var x, double p, double epsilon = 1e-7);
/// Mean over `mask` rows of -log softmax(logits)[label]. Returns 1x1.
Var masked_cross_entropy(Var logits, std::span<const int> labels, std::span<const std::uint32_t> mask);
Var sum_squares(Var x);

}  // namespace hypersage
