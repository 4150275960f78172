#include "hypersage/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "hypersage/error.hpp"
#include "hypersage/random.hpp"

namespace hypersage {

ModelParams ModelParams::glorot(std::vector<std::size_t> dims, std::uint64_t seed) {
  if (dims.size() < 2) throw InvalidArgument("a model needs at least input and output dimensions");
  ModelParams params;
  params.dims = std::move(dims);
  Rng rng(derive_seed(seed, {0x676c6f726f74ULL}));
  for (std::size_t l = 0; l + 1 < params.dims.size(); ++l) {
    const std::size_t in = params.dims[l];
    const std::size_t out = params.dims[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    Matrix w(in, out);
    for (double& v : w.data()) v = rng.uniform(-limit, limit);
    params.weights.push_back(std::move(w));
  }
  return params;
}

void ModelParams::validate() const {
  if (dims.size() < 2 || weights.size() != dims.size() - 1) {
    throw InvalidArgument("model has " + std::to_string(weights.size()) + " weight matrices for " +
                          std::to_string(dims.size()) + " dims");
  }
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows() != dims[l] || weights[l].cols() != dims[l + 1]) {
      throw InvalidArgument("weight " + std::to_string(l) + " has shape " + std::to_string(weights[l].rows()) + "x" +
                            std::to_string(weights[l].cols()) + ", expected " + std::to_string(dims[l]) + "x" +
                            std::to_string(dims[l + 1]));
    }
  }
}

namespace {

void check_finite(const Matrix& m, std::size_t layer, const char* stage) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (double v : m.row(r)) {
      if (!std::isfinite(v)) {
        throw NumericError(std::string("non-finite ") + stage + " at layer " + std::to_string(layer + 1) + ", node " +
                           std::to_string(r));
      }
    }
  }
}

bool stencil_is_deterministic(const ForwardConfig& cfg) {
  return cfg.mode == Mode::kTest || !cfg.aggregator.alpha;
}

// Stencils are cached per layer when they do not depend on sampling.
const PowerMeanStencil& stencil_for_layer(const Hypergraph& h, const ForwardConfig& cfg, ForwardCache* cache,
                                          std::size_t l, PowerMeanStencil& local) {
  const std::uint64_t layer_seed = derive_seed(cfg.seed, {l, 0x73616d70ULL});
  if (cache && stencil_is_deterministic(cfg)) {
    auto& slot = cache->stencils[l];
    if (!slot) slot = build_aggregation_stencil(h, cfg.aggregator, cfg.mode, layer_seed, cfg.semantics);
    return *slot;
  }
  local = build_aggregation_stencil(h, cfg.aggregator, cfg.mode, layer_seed, cfg.semantics);
  return local;
}

}  // namespace

Var forward(Tape& tape, const Hypergraph& h, Var features, std::span<const Var> weights, const ForwardConfig& cfg,
            ForwardCache* cache, ForwardTrace* trace) {
  cfg.aggregator.validate();
  if (features.rows() != h.num_nodes()) {
    throw InvalidArgument("feature matrix has " + std::to_string(features.rows()) + " rows for " +
                          std::to_string(h.num_nodes()) + " nodes");
  }
  if (weights.empty()) throw InvalidArgument("model has no layers");
  const bool train = cfg.mode == Mode::kTrain;
  if (cache && cache->stencils.size() < weights.size()) cache->stencils.resize(weights.size());

  Var hidden = features;
  PowerMeanStencil scratch;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (hidden.cols() != weights[l].rows()) {
      throw InvalidArgument("layer " + std::to_string(l + 1) + " expects " + std::to_string(weights[l].rows()) +
                            " input features, got " + std::to_string(hidden.cols()));
    }
    const bool constant_input = !tape.requires_grad(hidden.id);
    const bool reuse_input = l == 0 && cache && constant_input && stencil_is_deterministic(cfg) && !trace;
    const std::uint64_t dropout_seed = derive_seed(cfg.seed, {l, 0x64726f70ULL});
    if (reuse_input && !cache->first_layer_input) {
      const Var update = add(hidden, power_mean(hidden, stencil_for_layer(h, cfg, cache, l, scratch)));
      check_finite(update.value(), l, "aggregate");
      cache->first_layer_input = row_l2_normalize(update).value();
    }
    Var z;
    if (reuse_input) {
      z = dropout_matmul(tape, *cache->first_layer_input, weights[l], cfg.dropout_rate, train, dropout_seed);
    } else {
      Var update = add(hidden, power_mean(hidden, stencil_for_layer(h, cfg, cache, l, scratch)));
      check_finite(update.value(), l, "aggregate");
      if (trace) trace->pre_transform.push_back(update.value());
      z = matmul(dropout(row_l2_normalize(update), cfg.dropout_rate, train, dropout_seed), weights[l]);
    }
    hidden = l + 1 < weights.size() ? rectify(z) : z;
    check_finite(hidden.value(), l, "activation");
  }
  return hidden;
}

Matrix forward(const Hypergraph& h, const Matrix& features, const ModelParams& params, const ForwardConfig& cfg,
               ForwardTrace* trace) {
  params.validate();
  Tape tape;
  Var x = tape.constant(features);
  std::vector<Var> ws;
  for (const auto& w : params.weights) ws.push_back(tape.constant(w));
  return forward(tape, h, x, ws, cfg, nullptr, trace).value();
}

Matrix forward_extended(const Hypergraph& h_train, const Hypergraph& h_full, const Matrix& features_full,
                        const ModelParams& params, ForwardConfig cfg) {
  params.validate();
  if (h_full.num_nodes() < h_train.num_nodes()) throw InvalidArgument("extended hypergraph has fewer nodes");
  if (features_full.cols() != params.dims.front()) {
    throw InvalidArgument("extended features have " + std::to_string(features_full.cols()) +
                          " columns, model expects " + std::to_string(params.dims.front()));
  }
  for (std::size_t e = 0; e < h_train.num_edges(); ++e) {
    const auto small = h_train.edge(static_cast<EdgeId>(e));
    bool covered = false;
    for (EdgeId f : h_full.incident_edges(small.front())) {
      const auto big = h_full.edge(f);
      if (std::includes(big.begin(), big.end(), small.begin(), small.end())) {
        covered = true;
        break;
      }
    }
    if (!covered) throw InvalidArgument("training hyperedge " + std::to_string(e) + " is not part of the extended hypergraph");
  }
  cfg.mode = Mode::kTest;
  return forward(h_full, features_full, params, cfg);
}

std::vector<int> predict(const Matrix& logits) {
  std::vector<int> out(logits.rows(), 0);
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto row = logits.row(r);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

namespace {

constexpr const char* kCheckpointMagic = "hypersage-checkpoint";
constexpr int kCheckpointVersion = 1;

std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double parse_real(const std::string& tok, const std::filesystem::path& path) {
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (tok.empty() || *end != '\0') throw InvalidArgument(path.string() + ": bad real value '" + tok + "'");
  return v;
}

std::string expect_key(std::istream& in, const std::string& key, const std::filesystem::path& path) {
  std::string k, rest;
  if (!(in >> k) || k != key) throw InvalidArgument(path.string() + ": expected '" + key + "'");
  in >> std::ws;
  std::getline(in, rest);
  return rest;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  ckpt.params.validate();
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot open checkpoint for writing: " + path.string());
  out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  out << "dims";
  for (auto d : ckpt.params.dims) out << ' ' << d;
  out << '\n';
  out << "p " << hex(ckpt.aggregator.p) << '\n';
  out << "alpha " << (ckpt.aggregator.alpha ? std::to_string(*ckpt.aggregator.alpha) : std::string("max")) << '\n';
  out << "epsilon " << hex(ckpt.aggregator.epsilon) << '\n';
  out << "edge_count_prefactor " << (ckpt.aggregator.edge_count_prefactor ? 1 : 0) << '\n';
  out << "semantics " << (ckpt.semantics == AccumulationSemantics::kNodeCentric ? "eq4" : "alg1-per-edge") << '\n';
  for (std::size_t l = 0; l < ckpt.params.weights.size(); ++l) {
    const auto& w = ckpt.params.weights[l];
    out << "weight " << l << ' ' << w.rows() << ' ' << w.cols() << '\n';
    for (std::size_t r = 0; r < w.rows(); ++r) {
      const auto row = w.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) out << (c ? " " : "") << hex(row[c]);
      out << '\n';
    }
  }
  out << "end\n";
  if (!out) throw InvalidArgument("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open checkpoint: " + path.string());
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != kCheckpointMagic) throw InvalidArgument(path.string() + ": not a checkpoint");
  if (version != kCheckpointVersion) {
    throw InvalidArgument(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  {
    std::istringstream dims(expect_key(in, "dims", path));
    std::size_t d;
    while (dims >> d) ck.params.dims.push_back(d);
  }
  ck.aggregator.p = parse_real(expect_key(in, "p", path), path);
  const std::string alpha = expect_key(in, "alpha", path);
  if (alpha != "max") {
    std::size_t budget = 0;
    const auto [ptr, ec] = std::from_chars(alpha.data(), alpha.data() + alpha.size(), budget);
    if (ec != std::errc() || ptr != alpha.data() + alpha.size()) {
      throw InvalidArgument(path.string() + ": bad sample budget '" + alpha + "'");
    }
    ck.aggregator.alpha = budget;
  }
  ck.aggregator.epsilon = parse_real(expect_key(in, "epsilon", path), path);
  ck.aggregator.edge_count_prefactor = expect_key(in, "edge_count_prefactor", path) == "1";
  const std::string sem = expect_key(in, "semantics", path);
  if (sem == "eq4") {
    ck.semantics = AccumulationSemantics::kNodeCentric;
  } else if (sem == "alg1-per-edge") {
    ck.semantics = AccumulationSemantics::kPerIncidentEdge;
  } else {
    throw InvalidArgument(path.string() + ": unknown semantics '" + sem + "'");
  }
  for (std::size_t l = 0; l + 1 < ck.params.dims.size(); ++l) {
    std::string key;
    std::size_t idx, rows, cols;
    if (!(in >> key >> idx >> rows >> cols) || key != "weight" || idx != l) {
      throw InvalidArgument(path.string() + ": malformed weight header for layer " + std::to_string(l));
    }
    Matrix w(rows, cols);
    std::string tok;
    for (double& v : w.data()) {
      if (!(in >> tok)) throw InvalidArgument(path.string() + ": truncated weight matrix " + std::to_string(l));
      v = parse_real(tok, path);
    }
    ck.params.weights.push_back(std::move(w));
  }
  std::string trailer;
  if (!(in >> trailer) || trailer != "end") throw InvalidArgument(path.string() + ": truncated checkpoint");
  ck.params.validate();
  ck.aggregator.validate();
  return ck;
}

}  // namespace hypersage
