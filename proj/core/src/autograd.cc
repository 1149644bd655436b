#include "remark/autograd.h"

#include <cmath>

#include "remark/error.h"

namespace remark::nn {
namespace {

template <typename T>
bool tracking(Tape<T>* tape, std::initializer_list<const Tensor<T>*> inputs) {
  if (tape == nullptr) return false;
  for (const auto* t : inputs) {
    if (t->defined() && t->requires_grad()) return true;
  }
  return false;
}

template <typename T>
Tensor<T> make_output(Matrix<T> value, bool track) {
  return Tensor<T>(std::move(value), track);
}

template <typename T>
void softmax_in_place(Eigen::Ref<Matrix<T>> m) {
  for (Index r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    const T mx = row.maxCoeff();
    row = (row.array() - mx).exp();
    row /= row.sum();
  }
}

}  // namespace

template <typename T>
void Tape<T>::backward(const Tensor<T>& loss) {
  if (loss.rows() != 1 || loss.cols() != 1) {
    throw Error("backward requires a scalar loss");
  }
  loss.grad_buffer()(0, 0) = T(1);
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
}

Segments make_segments(const std::vector<Index>& lengths) {
  Segments segs;
  segs.reserve(lengths.size());
  Index offset = 0;
  for (Index len : lengths) {
    segs.push_back({offset, len});
    offset += len;
  }
  return segs;
}

Index total_rows(const Segments& segments) {
  return segments.empty() ? 0
                          : segments.back().offset + segments.back().length;
}

template <typename T>
Tensor<T> linear(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& w,
                 const Tensor<T>& b) {
  if (x.cols() != w.rows()) throw Error("linear: shape mismatch");
  Matrix<T> y(x.rows(), w.cols());
  y.noalias() = x.value() * w.value();
  if (b.defined()) y.rowwise() += b.value().row(0);
  const bool track = tracking(tape, {&x, &w, &b});
  Tensor<T> out = make_output(std::move(y), track);
  if (track) {
    tape->push([x, w, b, out] {
      const auto& g = out.grad();
      if (g.size() == 0) return;
      if (x.requires_grad()) x.grad_buffer().noalias() += g * w.value().transpose();
      if (w.requires_grad()) w.grad_buffer().noalias() += x.value().transpose() * g;
      if (b.defined() && b.requires_grad()) {
        b.grad_buffer().row(0) += g.colwise().sum();
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> matmul_transposed(Tape<T>* tape, const Tensor<T>& x,
                            const Tensor<T>& w) {
  if (x.cols() != w.cols()) throw Error("matmul_transposed: shape mismatch");
  Matrix<T> y(x.rows(), w.rows());
  y.noalias() = x.value() * w.value().transpose();
  const bool track = tracking(tape, {&x, &w});
  Tensor<T> out = make_output(std::move(y), track);
  if (track) {
    tape->push([x, w, out] {
      const auto& g = out.grad();
      if (g.size() == 0) return;
      if (x.requires_grad()) x.grad_buffer().noalias() += g * w.value();
      if (w.requires_grad()) w.grad_buffer().noalias() += g.transpose() * x.value();
    });
  }
  return out;
}

template <typename T>
Tensor<T> embedding(Tape<T>* tape, const Tensor<T>& table,
                    const std::vector<std::int32_t>& ids) {
  Matrix<T> y(static_cast<Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table.rows()) {
      throw Error("embedding: id out of range");
    }
    y.row(static_cast<Index>(i)) = table.value().row(ids[i]);
  }
  const bool track = tracking(tape, {&table});
  Tensor<T> out = make_output(std::move(y), track);
  if (track) {
    tape->push([table, ids, out] {
      const auto& g = out.grad();
      if (g.size() == 0) return;
      auto& tg = table.grad_buffer();
      for (std::size_t i = 0; i < ids.size(); ++i) {
        tg.row(ids[i]) += g.row(static_cast<Index>(i));
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> add_position(Tape<T>* tape, const Tensor<T>& x,
                       const Tensor<T>& table,
                       const std::vector<std::int32_t>& positions) {
  if (static_cast<Index>(positions.size()) != x.rows() ||
      x.cols() != table.cols()) {
    throw Error("add_position: shape mismatch");
  }
  Matrix<T> y = x.value();
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (positions[i] < 0 || positions[i] >= table.rows()) {
      throw Error("add_position: position exceeds the configured maximum");
    }
    y.row(static_cast<Index>(i)) += table.value().row(positions[i]);
  }
  const bool track = tracking(tape, {&x, &table});
  Tensor<T> out = make_output(std::move(y), track);
  if (track) {
    tape->push([x, table, positions, out] {
      const auto& g = out.grad();
      if (g.size() == 0) return;
      if (x.requires_grad()) x.grad_buffer() += g;
      if (table.requires_grad()) {
        auto& tg = table.grad_buffer();
        for (std::size_t i = 0; i < positions.size(); ++i) {
          tg.row(positions[i]) += g.row(static_cast<Index>(i));
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> add(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error("add: shape mismatch");
  }
  const bool track = tracking(tape, {&a, &b});
  Tensor<T> out = make_output<T>(a.value() + b.value(), track);
  if (track) {
    tape->push([a, b, out] {
      const auto& g = out.grad();
      if (g.size() == 0) return;
      if (a.requires_grad()) a.grad_buffer() += g;
      if (b.requires_grad()) b.grad_buffer() += g;
    });
  }
  return out;
}

template <typename T>
Tensor<T> scale(Tape<T>* tape, const Tensor<T>& x, T factor) {
  const bool track = tracking(tape, {&x});
  Tensor<T> out = make_output<T>(x.value() * factor, track);
  if (track) {
    tape->push([x, out, factor] {
      const auto& g = out.grad();
      if (g.size() == 0) return;
      x.grad_buffer() += g * factor;
    });
  }
  return out;
}

template <typename T>
Tensor<T> add_segment_rows(Tape<T>* tape, const Tensor<T>& x,
                           const Segments& segments, const Tensor<T>& v) {
  if (static_cast<Index>(segments.size()) != v.rows() ||
      x.cols() != v.cols() || total_rows(segments) != x.rows()) {
    throw Error("add_segment_rows: shape mismatch");
  }
  Matrix<T> y = x.value();
  for (std::size_t s = 0; s < segments.size(); ++s) {
    y.middleRows(segments[s].offset, segments[s].length).rowwise() +=
        v.value().row(static_cast<Index>(s));
  }
  const bool track = tracking(tape, {&x, &v});
  Tensor<T> out = make_output(std::move(y), track);
  if (track) {
    tape->push([x, v, segments, out] {
      const auto& g = out.grad();
      if (g.size() == 0) return;
      if (x.requires_grad()) x.grad_buffer() += g;
      if (v.requires_grad()) {
        auto& vg = v.grad_buffer();
        for (std::size_t s = 0; s < segments.size(); ++s) {
          vg.row(static_cast<Index>(s)) +=
              g.middleRows(segments[s].offset, segments[s].length)
                  .colwise()
                  .sum();
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> layer_norm(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& gain,
                     const Tensor<T>& bias) {
  constexpr T kEps = T(1e-5);
  const Index n = x.rows();
  const Index d = x.cols();
  if (gain.cols() != d || bias.cols() != d) {
    throw Error("layer_norm: shape mismatch");
  }
  Matrix<T> xhat(n, d);
  Eigen::Matrix<T, Eigen::Dynamic, 1> inv_std(n);
  for (Index r = 0; r < n; ++r) {
    const auto row = x.value().row(r);
    const T mean = row.mean();
    const T var = (row.array() - mean).square().mean();
    inv_std(r) = T(1) / std::sqrt(var + kEps);
    xhat.row(r) = (row.array() - mean) * inv_std(r);
  }
  Matrix<T> y = (xhat.array().rowwise() * gain.value().row(0).array())
                    .rowwise() +
                bias.value().row(0).array();
  const bool track = tracking(tape, {&x, &gain, &bias});
  Tensor<T> out = make_output(std::move(y), track);
  if (track) {
    tape->push([x, gain, bias, out, xhat = std::move(xhat),
                inv_std = std::move(inv_std)] {
      const auto& g = out.grad();
      if (g.size() == 0) return;
      if (gain.requires_grad()) {
        gain.grad_buffer().row(0) += (g.array() * xhat.array()).colwise().sum().matrix();
      }
      if (bias.requires_grad()) bias.grad_buffer().row(0) += g.colwise().sum();
      if (x.requires_grad()) {
        auto& xg = x.grad_buffer();
        const Index d = xhat.cols();
        for (Index r = 0; r < xhat.rows(); ++r) {
          const auto dxhat = (g.row(r).array() * gain.value().row(0).array()).eval();
          const T mean_d = dxhat.mean();
          const T mean_dx = (dxhat * xhat.row(r).array()).mean();
          xg.row(r).array() +=
              inv_std(r) * (dxhat - mean_d - xhat.row(r).array() * mean_dx);
        }
        (void)d;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> gelu(Tape<T>* tape, const Tensor<T>& x) {
  static constexpr T kC = T(0.7978845608028654);
  static constexpr T kA = T(0.044715);
  const auto& xv = x.value().array();
  Matrix<T> t = (kC * (xv + kA * xv.cube())).tanh().matrix();
  Matrix<T> y = (T(0.5) * xv * (T(1) + t.array())).matrix();
  const bool track = tracking(tape, {&x});
  Tensor<T> out = make_output(std::move(y), track);
  if (track) {
    tape->push([x, out, t = std::move(t)] {
      const auto& g = out.grad();
      if (g.size() == 0) return;
      const auto xv = x.value().array();
      const auto ta = t.array();
      x.grad_buffer().array() +=
          g.array() * (T(0.5) * (T(1) + ta) +
                       T(0.5) * xv * (T(1) - ta.square()) * kC *
                           (T(1) + T(3) * kA * xv.square()));
    });
  }
  return out;
}

template <typename T>
Tensor<T> sigmoid(Tape<T>* tape, const Tensor<T>& x) {
  Matrix<T> y = (T(1) / (T(1) + (-x.value().array()).exp())).matrix();
  const bool track = tracking(tape, {&x});
  Tensor<T> out = make_output(std::move(y), track);
  if (track) {
    tape->push([x, out] {
      const auto& g = out.grad();
      if (g.size() == 0) return;
      const auto ya = out.value().array();
      x.grad_buffer().array() += g.array() * ya * (T(1) - ya);
    });
  }
  return out;
}

template <typename T>
Tensor<T> attention(Tape<T>* tape, const Tensor<T>& q, const Tensor<T>& k,
                    const Tensor<T>& v, int heads, const Segments& q_segments,
                    const Segments& kv_segments) {
  const Index width = q.cols();
  if (heads <= 0 || width % heads != 0 || k.cols() != width ||
      v.cols() != width || q_segments.size() != kv_segments.size() ||
      k.rows() != v.rows()) {
    throw Error("attention: shape mismatch");
  }
  const Index dh = width / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  Matrix<T> y(q.rows(), width);
  std::vector<Matrix<T>> probs;
  probs.reserve(q_segments.size() * static_cast<std::size_t>(heads));
  for (std::size_t s = 0; s < q_segments.size(); ++s) {
    const auto [qo, ql] = q_segments[s];
    const auto [ko, kl] = kv_segments[s];
    if (kl == 0 && ql > 0) throw Error("attention: empty key segment");
    for (int h = 0; h < heads; ++h) {
      const Index c = h * dh;
      Matrix<T> p(ql, kl);
      p.noalias() = q.value().block(qo, c, ql, dh) *
                    k.value().block(ko, c, kl, dh).transpose();
      p *= scale;
      softmax_in_place<T>(p);
      y.block(qo, c, ql, dh).noalias() = p * v.value().block(ko, c, kl, dh);
      probs.push_back(std::move(p));
    }
  }
  const bool track = tracking(tape, {&q, &k, &v});
  Tensor<T> out = make_output(std::move(y), track);
  if (track) {
    tape->push([q, k, v, out, heads, dh, scale, q_segments, kv_segments,
                probs = std::move(probs)] {
      const auto& g = out.grad();
      if (g.size() == 0) return;
      Matrix<T>* qg = q.requires_grad() ? &q.grad_buffer() : nullptr;
      Matrix<T>* kg = k.requires_grad() ? &k.grad_buffer() : nullptr;
      Matrix<T>* vg = v.requires_grad() ? &v.grad_buffer() : nullptr;
      std::size_t idx = 0;
      for (std::size_t s = 0; s < q_segments.size(); ++s) {
        const auto [qo, ql] = q_segments[s];
        const auto [ko, kl] = kv_segments[s];
        for (int h = 0; h < heads; ++h, ++idx) {
          const Index c = h * dh;
          const Matrix<T>& p = probs[idx];
          const auto dy = g.block(qo, c, ql, dh);
          if (vg) vg->block(ko, c, kl, dh).noalias() += p.transpose() * dy;
          Matrix<T> dp(ql, kl);
          dp.noalias() = dy * v.value().block(ko, c, kl, dh).transpose();
          const auto rows = (dp.array() * p.array()).rowwise().sum().eval();
          Matrix<T> ds = (p.array() * (dp.array().colwise() - rows)).matrix();
          ds *= scale;
          if (qg) qg->block(qo, c, ql, dh).noalias() += ds * k.value().block(ko, c, kl, dh);
          if (kg) kg->block(ko, c, kl, dh).noalias() += ds.transpose() * q.value().block(qo, c, ql, dh);
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> log_softmax_rows(Tape<T>* tape, const Tensor<T>& x) {
  Matrix<T> y(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    const auto row = x.value().row(r);
    const T mx = row.maxCoeff();
    const T lse = mx + std::log((row.array() - mx).exp().sum());
    y.row(r) = row.array() - lse;
  }
  const bool track = tracking(tape, {&x});
  Tensor<T> out = make_output(std::move(y), track);
  if (track) {
    tape->push([x, out] {
      const auto& g = out.grad();
      if (g.size() == 0) return;
      const auto sums = g.rowwise().sum().eval();
      x.grad_buffer().array() +=
          g.array() - out.value().array().exp().colwise() * sums.array();
    });
  }
  return out;
}

template <typename T>
Tensor<T> gumbel_softmax(Tape<T>* tape, const Tensor<T>& log_probs,
                         const Matrix<T>& noise, T tau, T log_floor) {
  if (!(tau > T(0))) throw Error("gumbel_softmax: tau must be positive");
  if (noise.rows() != log_probs.rows() || noise.cols() != log_probs.cols()) {
    throw Error("gumbel_softmax: noise shape mismatch");
  }
  Matrix<T> y =
      ((log_probs.value().array().max(log_floor) + noise.array()) / tau)
          .matrix();
  softmax_in_place<T>(y);
  const bool track = tracking(tape, {&log_probs});
  Tensor<T> out = make_output(std::move(y), track);
  if (track) {
    tape->push([log_probs, out, tau, log_floor] {
      const auto& g = out.grad();
      if (g.size() == 0) return;
      const auto& yv = out.value();
      const auto rows = (g.array() * yv.array()).rowwise().sum().eval();
      const auto dz = (yv.array() * (g.array().colwise() - rows)) / tau;
      log_probs.grad_buffer().array() +=
          (log_probs.value().array() > log_floor).select(dz, T(0));
    });
  }
  return out;
}

template <typename T>
Tensor<T> select_rows(Tape<T>* tape, const Tensor<T>& x,
                      const std::vector<Index>& sources,
                      const std::vector<std::int32_t>& onehot) {
  if (sources.size() != onehot.size()) {
    throw Error("select_rows: plan size mismatch");
  }
  Matrix<T> y = Matrix<T>::Zero(static_cast<Index>(sources.size()), x.cols());
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const auto r = static_cast<Index>(i);
    if (sources[i] >= 0) {
      if (sources[i] >= x.rows()) throw Error("select_rows: bad source row");
      y.row(r) = x.value().row(sources[i]);
    } else {
      if (onehot[i] < 0 || onehot[i] >= x.cols()) {
        throw Error("select_rows: bad one-hot column");
      }
      y(r, onehot[i]) = T(1);
    }
  }
  const bool track = tracking(tape, {&x});
  Tensor<T> out = make_output(std::move(y), track);
  if (track) {
    tape->push([x, sources, out] {
      const auto& g = out.grad();
      if (g.size() == 0) return;
      auto& xg = x.grad_buffer();
      for (std::size_t i = 0; i < sources.size(); ++i) {
        if (sources[i] >= 0) xg.row(sources[i]) += g.row(static_cast<Index>(i));
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> mean_pool(Tape<T>* tape, const Tensor<T>& x,
                    const Segments& segments) {
  Matrix<T> y(static_cast<Index>(segments.size()), x.cols());
  for (std::size_t s = 0; s < segments.size(); ++s) {
    if (segments[s].length <= 0) throw Error("mean_pool: empty segment");
    y.row(static_cast<Index>(s)) =
        x.value().middleRows(segments[s].offset, segments[s].length)
            .colwise()
            .mean();
  }
  const bool track = tracking(tape, {&x});
  Tensor<T> out = make_output(std::move(y), track);
  if (track) {
    tape->push([x, segments, out] {
      const auto& g = out.grad();
      if (g.size() == 0) return;
      auto& xg = x.grad_buffer();
      for (std::size_t s = 0; s < segments.size(); ++s) {
        const T inv = T(1) / static_cast<T>(segments[s].length);
        xg.middleRows(segments[s].offset, segments[s].length).rowwise() +=
            g.row(static_cast<Index>(s)) * inv;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> sequence_nll(Tape<T>* tape, const Tensor<T>& log_probs,
                       const std::vector<std::int32_t>& targets,
                       const Segments& segments) {
  if (static_cast<Index>(targets.size()) != log_probs.rows() ||
      total_rows(segments) != log_probs.rows() || segments.empty()) {
    throw Error("sequence_nll: length mismatch");
  }
  T total = 0;
  for (const auto& seg : segments) {
    T sum = 0;
    for (Index r = seg.offset; r < seg.offset + seg.length; ++r) {
      const auto t = targets[static_cast<std::size_t>(r)];
      if (t < 0 || t >= log_probs.cols()) {
        throw Error("sequence_nll: target id out of range");
      }
      sum -= log_probs.value()(r, t);
    }
    total += sum / static_cast<T>(seg.length);
  }
  Matrix<T> y(1, 1);
  y(0, 0) = total / static_cast<T>(segments.size());
  const bool track = tracking(tape, {&log_probs});
  Tensor<T> out = make_output(std::move(y), track);
  if (track) {
    tape->push([log_probs, targets, segments, out] {
      const auto& g = out.grad();
      if (g.size() == 0) return;
      auto& lg = log_probs.grad_buffer();
      const T base = g(0, 0) / static_cast<T>(segments.size());
      for (const auto& seg : segments) {
        const T w = base / static_cast<T>(seg.length);
        for (Index r = seg.offset; r < seg.offset + seg.length; ++r) {
          lg(r, targets[static_cast<std::size_t>(r)]) -= w;
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> l1_rows(Tape<T>* tape, const Tensor<T>& x, const Matrix<T>& targets) {
  if (x.rows() != targets.rows() || x.cols() != targets.cols() ||
      x.rows() == 0) {
    throw Error("l1_rows: shape mismatch");
  }
  Matrix<T> y(1, 1);
  y(0, 0) = (targets - x.value()).cwiseAbs().sum() / static_cast<T>(x.rows());
  const bool track = tracking(tape, {&x});
  Tensor<T> out = make_output(std::move(y), track);
  if (track) {
    tape->push([x, targets, out] {
      const auto& g = out.grad();
      if (g.size() == 0) return;
      const T scale = g(0, 0) / static_cast<T>(x.rows());
      x.grad_buffer().array() +=
          (x.value() - targets).array().sign() * scale;
    });
  }
  return out;
}

template <typename T>
Tensor<T> weighted_sum(Tape<T>* tape, const std::vector<Tensor<T>>& terms,
                       const std::vector<T>& weights) {
  if (terms.size() != weights.size()) {
    throw Error("weighted_sum: size mismatch");
  }
  Matrix<T> y = Matrix<T>::Zero(1, 1);
  bool track = false;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (terms[i].rows() != 1 || terms[i].cols() != 1) {
      throw Error("weighted_sum: terms must be scalars");
    }
    y(0, 0) += weights[i] * terms[i].scalar();
    track = track || tracking(tape, {&terms[i]});
  }
  Tensor<T> out = make_output(std::move(y), track);
  if (track) {
    tape->push([terms, weights, out] {
      const auto& g = out.grad();
      if (g.size() == 0) return;
      for (std::size_t i = 0; i < terms.size(); ++i) {
        if (terms[i].requires_grad()) {
          terms[i].grad_buffer()(0, 0) += weights[i] * g(0, 0);
        }
      }
    });
  }
  return out;
}

#define REMARK_INSTANTIATE_AUTOGRAD(T)                                         \
  template class Tape<T>;                                                      \
  template Tensor<T> linear(Tape<T>*, const Tensor<T>&, const Tensor<T>&,      \
                            const Tensor<T>&);                                 \
  template Tensor<T> matmul_transposed(Tape<T>*, const Tensor<T>&,             \
                                       const Tensor<T>&);                      \
  template Tensor<T> embedding(Tape<T>*, const Tensor<T>&,                     \
                               const std::vector<std::int32_t>&);              \
  template Tensor<T> add_position(Tape<T>*, const Tensor<T>&,                  \
                                  const Tensor<T>&,                            \
                                  const std::vector<std::int32_t>&);           \
  template Tensor<T> add(Tape<T>*, const Tensor<T>&, const Tensor<T>&);        \
  template Tensor<T> scale(Tape<T>*, const Tensor<T>&, T);                     \
  template Tensor<T> add_segment_rows(Tape<T>*, const Tensor<T>&,              \
                                      const Segments&, const Tensor<T>&);      \
  template Tensor<T> layer_norm(Tape<T>*, const Tensor<T>&, const Tensor<T>&,  \
                                const Tensor<T>&);                             \
  template Tensor<T> gelu(Tape<T>*, const Tensor<T>&);                         \
  template Tensor<T> sigmoid(Tape<T>*, const Tensor<T>&);                      \
  template Tensor<T> attention(Tape<T>*, const Tensor<T>&, const Tensor<T>&,   \
                               const Tensor<T>&, int, const Segments&,         \
                               const Segments&);                               \
  template Tensor<T> log_softmax_rows(Tape<T>*, const Tensor<T>&);             \
  template Tensor<T> gumbel_softmax(Tape<T>*, const Tensor<T>&,                \
                                    const Matrix<T>&, T, T);                   \
  template Tensor<T> select_rows(Tape<T>*, const Tensor<T>&,                   \
                                 const std::vector<Index>&,                    \
                                 const std::vector<std::int32_t>&);            \
  template Tensor<T> mean_pool(Tape<T>*, const Tensor<T>&, const Segments&);   \
  template Tensor<T> sequence_nll(Tape<T>*, const Tensor<T>&,                  \
                                  const std::vector<std::int32_t>&,            \
                                  const Segments&);                            \
  template Tensor<T> l1_rows(Tape<T>*, const Tensor<T>&, const Matrix<T>&);    \
  template Tensor<T> weighted_sum(Tape<T>*, const std::vector<Tensor<T>>&,     \
                                  const std::vector<T>&);

REMARK_INSTANTIATE_AUTOGRAD(float)
REMARK_INSTANTIATE_AUTOGRAD(double)

#undef REMARK_INSTANTIATE_AUTOGRAD

}  // namespace remark::nn
