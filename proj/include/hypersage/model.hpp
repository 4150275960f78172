#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "hypersage/aggregation.hpp"
#include "hypersage/hypergraph.hpp"
#include "hypersage/tape.hpp"
#include "hypersage/tensor.hpp"

namespace hypersage {

/// Per-layer weights W^l (in_dim x out_dim). dims = [d, hidden..., classes].
struct ModelParams {
  std::vector<std::size_t> dims;
  std::vector<Matrix> weights;

  std::size_t num_layers() const noexcept { return weights.size(); }

  /// Glorot-uniform weights, limit sqrt(6 / (fan_in + fan_out)).
  static ModelParams glorot(std::vector<std::size_t> dims, std::uint64_t seed);

  /// Throws InvalidArgument unless L = dims.size() - 1 and shapes chain.
  void validate() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

struct ForwardConfig {
  AggregatorConfig aggregator;
  double dropout_rate = 0.0;
  Mode mode = Mode::kTest;
  std::uint64_t seed = 0;
  AccumulationSemantics semantics = AccumulationSemantics::kNodeCentric;
};

/// Reuses work across forwards on one hypergraph: aggregation stencils that
/// do not depend on the seed (test mode, or no sample budget), and the
/// normalized first-layer input when the features are a constant.
struct ForwardCache {
  std::vector<std::optional<PowerMeanStencil>> stencils;
  /// Normalized first-layer input, valid while the features are constant and
  /// the first stencil is deterministic.
  std::optional<Matrix> first_layer_input;
};

/// Optional per-layer intermediates.
struct ForwardTrace {
  /// h_i + F2(F1(.)) before normalization, one matrix per layer.
  std::vector<Matrix> pre_transform;
};

/// Tape-level forward pass. For each layer l:
///   u = h + agg(h); n = dropout(u / ||u||_2); h = relu(n W^l)
/// with the rectifier omitted after the last layer, whose output are logits.
/// Throws NumericError naming layer and node on a non-finite activation.
Var forward(Tape& tape, const Hypergraph& h, Var features, std::span<const Var> weights, const ForwardConfig& cfg,
            ForwardCache* cache = nullptr, ForwardTrace* trace = nullptr);

/// Untracked convenience wrapper.
Matrix forward(const Hypergraph& h, const Matrix& features, const ModelParams& params, const ForwardConfig& cfg,
               ForwardTrace* trace = nullptr);

/// Inference on a hypergraph that extends the training one with new nodes
/// and incidences. Runs in test mode; weights are node-agnostic so unseen
/// nodes are embedded with the same parameters.
Matrix forward_extended(const Hypergraph& h_train, const Hypergraph& h_full, const Matrix& features_full,
                        const ModelParams& params, ForwardConfig cfg);

/// Row-wise argmax, ties to the lowest class index.
std::vector<int> predict(const Matrix& logits);

struct Checkpoint {
  ModelParams params;
  AggregatorConfig aggregator;
  AccumulationSemantics semantics = AccumulationSemantics::kNodeCentric;
};

/// Text container, version line first, reals in hexadecimal floating point so
/// that a write/read round trip is bit-exact.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace hypersage
