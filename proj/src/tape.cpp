#include "hypersage/tape.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "hypersage/error.hpp"
#include "hypersage/random.hpp"

namespace hypersage {

const Matrix& Var::value() const { return tape->value(id); }
const Matrix& Var::grad() const { return tape->grad(id); }

Var Tape::leaf(Matrix value, bool requires_grad) {
  nodes_.push_back(Node{std::move(value), Matrix{}, requires_grad, nullptr});
  return Var{this, nodes_.size() - 1};
}

Var Tape::record(Matrix value, bool requires_grad, BackwardFn backward) {
  nodes_.push_back(Node{std::move(value), Matrix{}, requires_grad, requires_grad ? std::move(backward) : nullptr});
  return Var{this, nodes_.size() - 1};
}

Matrix& Tape::grad_mut(std::size_t id) {
  auto& n = nodes_[id];
  if (n.grad.empty() && !n.value.empty()) n.grad = Matrix(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var out) {
  if (out.tape != this) throw InvalidArgument("backward called with a variable from another tape");
  const auto& v = nodes_[out.id].value;
  if (v.rows() != 1 || v.cols() != 1) throw InvalidArgument("backward expects a 1x1 output");
  for (auto& n : nodes_) n.grad.fill(0.0);
  grad_mut(out.id)(0, 0) = 1.0;
  for (std::size_t i = out.id + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
    n.backward(*this, i);
  }
}

void Tape::note_branch(std::uint64_t bits) noexcept { branch_signature_ = mix64(branch_signature_ ^ bits); }

namespace {

void same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw InvalidArgument("operands live on different tapes");
}

inline double pow_p(double y, double p) {
  if (p == 1.0) return y;
  if (p == 2.0) return y * y;
  if (p == -1.0) return 1.0 / y;
  if (p == 3.0) return y * y * y;
  return std::pow(y, p);
}

inline double root_p(double s, double p) {
  if (p == 1.0) return s;
  if (p == 2.0) return std::sqrt(s);
  if (p == -1.0) return 1.0 / s;
  return std::pow(s, 1.0 / p);
}

// Raw weighted sums S (before the 1/p root) for every output row.
Matrix stencil_sums(const PowerMeanStencil& st, const Matrix& x, Tape* branch_tape) {
  const std::size_t d = x.cols();
  Matrix sums(st.num_rows, d);
  std::vector<double> powered(d);
  const double eps_pow = pow_p(st.epsilon, st.p);
  std::uint64_t clamp_hash = 0;
  for (std::size_t r = 0; r < st.num_rows; ++r) {
    double* s = sums.row(r).data();
    for (std::size_t k = st.offsets[r]; k < st.offsets[r + 1]; ++k) {
      const double c = st.coeffs[k];
      const double* xs = x.row(st.sources[k]).data();
      if (st.p == 1.0) {
        for (std::size_t j = 0; j < d; ++j) s[j] += c * std::max(xs[j], st.epsilon);
      } else {
        // Sparse inputs are mostly clamped; their power is a constant.
        for (std::size_t j = 0; j < d; ++j) powered[j] = xs[j] <= st.epsilon ? eps_pow : pow_p(xs[j], st.p);
        for (std::size_t j = 0; j < d; ++j) s[j] += c * powered[j];
      }
      if (branch_tape) {
        for (std::size_t j = 0; j < d; ++j)
          if (xs[j] < st.epsilon) clamp_hash = mix64(clamp_hash ^ (k * 1315423911ULL + j));
      }
    }
  }
  if (branch_tape) branch_tape->note_branch(clamp_hash);
  return sums;
}

Matrix finish_stencil(const PowerMeanStencil& st, const Matrix& sums) {
  Matrix out(sums.rows(), sums.cols());
  for (std::size_t r = 0; r < st.num_rows; ++r) {
    if (st.terms(r) == 0) continue;
    const double scale = st.row_scale.empty() ? 1.0 : st.row_scale[r];
    const auto s = sums.row(r);
    auto o = out.row(r);
    // Columns fed only by clamped entries repeat the same sum.
    double last_sum = -1.0, last_root = 0.0;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (s[j] != last_sum) {
        last_sum = s[j];
        last_root = root_p(s[j], st.p);
      }
      o[j] = scale * last_root;
    }
  }
  return out;
}

void check_stencil(const PowerMeanStencil& st, const Matrix& x) {
  if (st.p == 0.0) throw InvalidArgument("power-mean exponent p must be non-zero");
  if (!(st.epsilon > 0.0)) throw InvalidArgument("power-mean epsilon must be positive");
  if (st.offsets.size() != st.num_rows + 1) throw InvalidArgument("stencil offsets do not match row count");
  for (auto s : st.sources)
    if (s >= x.rows()) throw InvalidArgument("stencil source row " + std::to_string(s) + " out of range");
}

}  // namespace

void PowerMeanStencil::add_row(std::span<const std::uint32_t> srcs, std::span<const double> cs, double scale) {
  if (srcs.size() != cs.size()) throw InvalidArgument("stencil row sources/coefficients size mismatch");
  sources.insert(sources.end(), srcs.begin(), srcs.end());
  coeffs.insert(coeffs.end(), cs.begin(), cs.end());
  offsets.push_back(sources.size());
  if (scale != 1.0 || !row_scale.empty()) {
    row_scale.resize(num_rows, 1.0);
    row_scale.push_back(scale);
  }
  ++num_rows;
}

Matrix apply_stencil(const PowerMeanStencil& stencil, const Matrix& x) {
  check_stencil(stencil, x);
  return finish_stencil(stencil, stencil_sums(stencil, x, nullptr));
}

Var matmul(Var a, Var b) {
  same_tape(a, b);
  Tape& t = *a.tape;
  const bool rg = t.requires_grad(a.id) || t.requires_grad(b.id);
  return t.record(matmul(a.value(), b.value()), rg, [a, b](Tape& tape, std::size_t self) {
    const Matrix& g = tape.grad(self);
    if (tape.requires_grad(a.id)) add_inplace(tape.grad_mut(a.id), matmul_nt(g, tape.value(b.id)));
    if (tape.requires_grad(b.id)) add_inplace(tape.grad_mut(b.id), matmul_tn(tape.value(a.id), g));
  });
}

Var add(Var a, Var b) {
  same_tape(a, b);
  Tape& t = *a.tape;
  Matrix out = a.value();
  add_inplace(out, b.value());
  const bool rg = t.requires_grad(a.id) || t.requires_grad(b.id);
  return t.record(std::move(out), rg, [a, b](Tape& tape, std::size_t self) {
    const Matrix& g = tape.grad(self);
    if (tape.requires_grad(a.id)) add_inplace(tape.grad_mut(a.id), g);
    if (tape.requires_grad(b.id)) add_inplace(tape.grad_mut(b.id), g);
  });
}

Var rectify(Var x) {
  Tape& t = *x.tape;
  Matrix out = x.value();
  std::uint64_t h = 0;
  const bool track = t.tracks_branches();
  for (std::size_t i = 0; i < out.size(); ++i) {
    double& v = out.data()[i];
    if (v > 0.0) {
      if (track) h = mix64(h ^ i);
    } else {
      v = 0.0;
    }
  }
  if (track) t.note_branch(h);
  return t.record(std::move(out), t.requires_grad(x.id), [x](Tape& tape, std::size_t self) {
    const Matrix& g = tape.grad(self);
    const Matrix& in = tape.value(x.id);
    Matrix& gx = tape.grad_mut(x.id);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (in.data()[i] > 0.0) gx.data()[i] += g.data()[i];
  });
}

Var row_l2_normalize(Var x) {
  Tape& t = *x.tape;
  const Matrix& in = x.value();
  Matrix out = in;
  std::vector<double> norms(in.rows());
  for (std::size_t r = 0; r < in.rows(); ++r) {
    double s = 0.0;
    for (double v : in.row(r)) s += v * v;
    norms[r] = std::sqrt(s);
    if (norms[r] > 0.0)
      for (double& v : out.row(r)) v /= norms[r];
  }
  return t.record(std::move(out), t.requires_grad(x.id), [x, norms = std::move(norms)](Tape& tape, std::size_t self) {
    const Matrix& g = tape.grad(self);
    const Matrix& y = tape.value(self);
    Matrix& gx = tape.grad_mut(x.id);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      const auto gr = g.row(r);
      auto gxr = gx.row(r);
      if (norms[r] == 0.0) {
        for (std::size_t j = 0; j < gr.size(); ++j) gxr[j] += gr[j];
        continue;
      }
      const auto yr = y.row(r);
      double dot = 0.0;
      for (std::size_t j = 0; j < gr.size(); ++j) dot += yr[j] * gr[j];
      for (std::size_t j = 0; j < gr.size(); ++j) gxr[j] += (gr[j] - yr[j] * dot) / norms[r];
    }
  });
}

namespace {

// Counter-based draws: flat entry i survives iff its hashed uniform is >= rate.
struct DropoutMask {
  std::uint64_t key;
  double rate;
  bool keep(std::size_t i) const { return static_cast<double>(mix64(key + i) >> 11) * 0x1.0p-53 >= rate; }
};

}  // namespace

Var dropout(Var x, double rate, bool train, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) throw InvalidArgument("dropout rate must be in [0, 1)");
  if (!train || rate == 0.0) return x;
  Tape& t = *x.tape;
  const double keep_scale = 1.0 / (1.0 - rate);
  const DropoutMask drop{mix64(seed), rate};
  Matrix out = x.value();
  const bool rg = t.requires_grad(x.id);
  std::vector<bool> mask(rg ? out.size() : 0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const bool k = drop.keep(i);
    out.data()[i] = k ? out.data()[i] * keep_scale : 0.0;
    if (rg) mask[i] = k;
  }
  return t.record(std::move(out), rg, [x, keep_scale, mask = std::move(mask)](Tape& tape, std::size_t self) {
    const Matrix& g = tape.grad(self);
    Matrix& gx = tape.grad_mut(x.id);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (mask[i]) gx.data()[i] += g.data()[i] * keep_scale;
  });
}

Var dropout_matmul(Tape& t, const Matrix& x, Var w, double rate, bool train, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) throw InvalidArgument("dropout rate must be in [0, 1)");
  if (x.cols() != w.rows()) throw InvalidArgument("matmul shape mismatch: " + std::to_string(x.rows()) + "x" +
                                                 std::to_string(x.cols()) + " * " + std::to_string(w.rows()) + "x" +
                                                 std::to_string(w.cols()));
  if (w.tape != &t) throw InvalidArgument("operands live on different tapes");
  if (!train || rate == 0.0) {
    return t.record(matmul(x, w.value()), t.requires_grad(w.id), [&x, w](Tape& tape, std::size_t self) {
      add_inplace(tape.grad_mut(w.id), matmul_tn(x, tape.grad(self)));
    });
  }
  const DropoutMask drop{mix64(seed), rate};
  const double keep_scale = 1.0 / (1.0 - rate);
  const std::size_t d = x.cols(), n = w.cols();
  // Visits the surviving nonzero entries of row i as (column, scaled value).
  // Survivors are compacted first so the hash loop stays branch-free.
  auto for_kept = [&x, drop, keep_scale, d](std::size_t i, auto&& f) {
    thread_local std::vector<std::uint32_t> cols;
    cols.resize(d);
    const double* xi = x.row(i).data();
    std::size_t m = 0;
    for (std::size_t k = 0; k < d; ++k) {
      cols[m] = static_cast<std::uint32_t>(k);
      m += drop.keep(i * d + k) & (xi[k] != 0.0);
    }
    for (std::size_t q = 0; q < m; ++q) f(cols[q], xi[cols[q]] * keep_scale);
  };
  const Matrix& wv = w.value();
  Matrix z(x.rows(), n);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double* zi = z.row(i).data();
    for_kept(i, [&](std::size_t k, double v) {
      const double* wk = wv.row(k).data();
      for (std::size_t j = 0; j < n; ++j) zi[j] += v * wk[j];
    });
  }
  return t.record(std::move(z), t.requires_grad(w.id), [&x, w, for_kept, n](Tape& tape, std::size_t self) {
    const Matrix& g = tape.grad(self);
    Matrix& gw = tape.grad_mut(w.id);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const double* gi = g.row(i).data();
      for_kept(i, [&](std::size_t k, double v) {
        double* gk = gw.row(k).data();
        for (std::size_t j = 0; j < n; ++j) gk[j] += v * gi[j];
      });
    }
  });
}

Var power_mean(Var x, const PowerMeanStencil& stencil) {
  Tape& t = *x.tape;
  check_stencil(stencil, x.value());
  Matrix sums = stencil_sums(stencil, x.value(), t.tracks_branches() ? &t : nullptr);
  Matrix out = finish_stencil(stencil, sums);
  if (!all_finite(out)) throw NumericError("power mean produced a non-finite value (p=" + std::to_string(stencil.p) + ")");
  const bool rg = t.requires_grad(x.id);
  return t.record(std::move(out), rg, [x, stencil, sums = std::move(sums)](Tape& tape, std::size_t self) {
    const Matrix& g = tape.grad(self);
    const Matrix& y = tape.value(self);
    const Matrix& in = tape.value(x.id);
    Matrix& gx = tape.grad_mut(x.id);
    const std::size_t d = in.cols();
    const double p = stencil.p;
    std::vector<double> factor(d);
    for (std::size_t r = 0; r < stencil.num_rows; ++r) {
      if (stencil.terms(r) == 0) continue;
      // d out / d S = out / (p S); d S / d y = coeff * p * y^(p-1).
      for (std::size_t j = 0; j < d; ++j) {
        const double s = sums(r, j);
        factor[j] = s != 0.0 ? g(r, j) * y(r, j) / s : 0.0;
      }
      for (std::size_t k = stencil.offsets[r]; k < stencil.offsets[r + 1]; ++k) {
        const double c = stencil.coeffs[k];
        const double* xs = in.row(stencil.sources[k]).data();
        double* gs = gx.row(stencil.sources[k]).data();
        for (std::size_t j = 0; j < d; ++j) {
          if (xs[j] < stencil.epsilon) continue;
          gs[j] += c * factor[j] * pow_p(xs[j], p - 1.0);
        }
      }
    }
  });
}

Var generalized_mean(Var x, double p, double epsilon) {
  const std::size_t n = x.rows();
  if (n == 0) throw InvalidArgument("generalized mean of an empty set");
  PowerMeanStencil st;
  st.p = p;
  st.epsilon = epsilon;
  std::vector<std::uint32_t> src(n);
  std::iota(src.begin(), src.end(), 0u);
  std::vector<double> cs(n, 1.0 / static_cast<double>(n));
  st.add_row(src, cs);
  return power_mean(x, st);
}

Var masked_cross_entropy(Var logits, std::span<const int> labels, std::span<const std::uint32_t> mask) {
  if (mask.empty()) throw InvalidArgument("cross-entropy mask is empty");
  const Matrix& z = logits.value();
  if (labels.size() != z.rows()) throw InvalidArgument("label count does not match logit rows");
  const std::size_t c = z.cols();
  Matrix probs(mask.size(), c);
  double loss = 0.0;
  for (std::size_t m = 0; m < mask.size(); ++m) {
    const auto r = mask[m];
    if (r >= z.rows()) throw InvalidArgument("mask row out of range");
    const int label = labels[r];
    if (label < 0 || static_cast<std::size_t>(label) >= c) throw InvalidArgument("label out of range");
    const auto zr = z.row(r);
    const double mx = *std::max_element(zr.begin(), zr.end());
    double total = 0.0;
    for (std::size_t j = 0; j < c; ++j) total += std::exp(zr[j] - mx);
    for (std::size_t j = 0; j < c; ++j) probs(m, j) = std::exp(zr[j] - mx) / total;
    loss += -(zr[label] - mx - std::log(total));
  }
  loss /= static_cast<double>(mask.size());
  Tape& t = *logits.tape;
  std::vector<std::uint32_t> rows(mask.begin(), mask.end());
  std::vector<int> lab(labels.begin(), labels.end());
  return t.record(Matrix(1, 1, loss), t.requires_grad(logits.id),
                  [logits, rows = std::move(rows), lab = std::move(lab), probs = std::move(probs)](Tape& tape,
                                                                                                   std::size_t self) {
                    const double g = tape.grad(self)(0, 0) / static_cast<double>(rows.size());
                    Matrix& gz = tape.grad_mut(logits.id);
                    for (std::size_t m = 0; m < rows.size(); ++m) {
                      auto gr = gz.row(rows[m]);
                      for (std::size_t j = 0; j < gr.size(); ++j) gr[j] += g * probs(m, j);
                      gr[static_cast<std::size_t>(lab[rows[m]])] -= g;
                    }
                  });
}

Var sum_squares(Var x) {
  Tape& t = *x.tape;
  double s = 0.0;
  for (double v : x.value().data()) s += v * v;
  return t.record(Matrix(1, 1, s), t.requires_grad(x.id), [x](Tape& tape, std::size_t self) {
    const double g = tape.grad(self)(0, 0);
    const Matrix& in = tape.value(x.id);
    Matrix& gx = tape.grad_mut(x.id);
    for (std::size_t i = 0; i < in.size(); ++i) gx.data()[i] += 2.0 * g * in.data()[i];
  });
}

}  // namespace hypersage
