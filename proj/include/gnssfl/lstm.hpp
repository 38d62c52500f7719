#pragma once

// Two stacked LSTM layers and a sigmoid dense head, with batched forward pass
// and backpropagation through time.
//
// Parameters live in one flat vector. Layout, in order:
//   layer1: wx [input x 4H] | wh [H x 4H] | b [4H]
//   layer2: wx [H x 4H]     | wh [H x 4H] | b [4H]
//   head:   w [H]           | b [1]
// Matrices are row-major; gate columns are ordered (input, forget, cell, output).
//
// Batched inputs are stacked time-major: row t * batch + b holds timestep t of
// sequence b.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gnssfl/errors.hpp"

namespace gnssfl {

template <typename S>
using RowMatrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using RowVec = Eigen::Matrix<S, 1, Eigen::Dynamic>;

struct ModelLayout {
  std::size_t input = 36;
  std::size_t hidden = 100;

  static std::size_t layer_size(std::size_t in, std::size_t h) { return 4 * (in * h + h * h + h); }

  std::size_t layer1_offset() const { return 0; }
  std::size_t layer2_offset() const { return layer_size(input, hidden); }
  std::size_t head_offset() const { return layer2_offset() + layer_size(hidden, hidden); }
  std::size_t param_count() const { return head_offset() + hidden + 1; }

  struct Block {
    std::string name;
    std::size_t offset;
    std::size_t rows;
    std::size_t cols;
  };

  std::vector<Block> manifest() const {
    const std::size_t h = hidden, g = 4 * hidden;
    std::size_t off = 0;
    std::vector<Block> out;
    auto add = [&](const char* name, std::size_t r, std::size_t c) {
      out.push_back({name, off, r, c});
      off += r * c;
    };
    add("lstm1.wx", input, g);
    add("lstm1.wh", h, g);
    add("lstm1.b", 1, g);
    add("lstm2.wx", h, g);
    add("lstm2.wh", h, g);
    add("lstm2.b", 1, g);
    add("head.w", h, 1);
    add("head.b", 1, 1);
    return out;
  }

  friend bool operator==(const ModelLayout&, const ModelLayout&) = default;
};

// Parameter storage aligned like Eigen's own buffers. Vectorized reductions
// peel by address alignment, so a fixed alignment keeps results bit-identical
// between runs.
template <typename S>
using ParamVector = std::vector<S, Eigen::aligned_allocator<S>>;

template <typename S>
struct ModelParams {
  ModelLayout layout;
  ParamVector<S> values;

  ModelParams() = default;
  explicit ModelParams(const ModelLayout& l) : layout(l), values(l.param_count(), S(0)) {}

  std::size_t size() const { return values.size(); }
  friend bool operator==(const ModelParams&, const ModelParams&) = default;

  template <typename T>
  ModelParams<T> cast() const {
    ModelParams<T> out(layout);
    for (std::size_t i = 0; i < values.size(); ++i) out.values[i] = static_cast<T>(values[i]);
    return out;
  }
};

using LstmModelParams = ModelParams<float>;

// Owning, structured view of the parameters.
template <typename S>
struct LstmWeights {
  struct Layer {
    RowMatrix<S> wx, wh;
    RowVec<S> b;
  };
  ModelLayout layout;
  Layer layer1, layer2;
  RowVec<S> head_w;
  S head_b = S(0);
};

template <typename S>
LstmWeights<S> unflatten(const ModelParams<S>& p) {
  require(p.values.size() == p.layout.param_count(), "unflatten: parameter count does not match layout");
  LstmWeights<S> w;
  w.layout = p.layout;
  const std::size_t h = p.layout.hidden, g = 4 * h;
  const S* ptr = p.values.data();
  auto take = [&ptr](std::size_t r, std::size_t c) {
    RowMatrix<S> m = Eigen::Map<const RowMatrix<S>>(ptr, static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    ptr += r * c;
    return m;
  };
  w.layer1.wx = take(p.layout.input, g);
  w.layer1.wh = take(h, g);
  w.layer1.b = take(1, g);
  w.layer2.wx = take(h, g);
  w.layer2.wh = take(h, g);
  w.layer2.b = take(1, g);
  w.head_w = take(1, h);
  w.head_b = *ptr;
  return w;
}

template <typename S>
ModelParams<S> flatten(const LstmWeights<S>& w) {
  ModelParams<S> p(w.layout);
  S* ptr = p.values.data();
  auto put = [&ptr](const auto& m) {
    RowMatrix<S> tmp = m;
    std::copy(tmp.data(), tmp.data() + tmp.size(), ptr);
    ptr += tmp.size();
  };
  put(w.layer1.wx);
  put(w.layer1.wh);
  put(w.layer1.b);
  put(w.layer2.wx);
  put(w.layer2.wh);
  put(w.layer2.b);
  put(w.head_w);
  *ptr = w.head_b;
  return p;
}

// Glorot-uniform weights, zero biases except the forget gate at 1.
template <typename S = float>
ModelParams<S> init_params(std::uint64_t seed, const ModelLayout& layout = {}) {
  ModelParams<S> p(layout);
  std::mt19937_64 rng(seed);
  const std::size_t h = layout.hidden, g = 4 * h;
  for (const auto& blk : layout.manifest()) {
    S* dst = p.values.data() + blk.offset;
    const std::size_t n = blk.rows * blk.cols;
    if (blk.rows == 1) {
      std::fill(dst, dst + n, S(0));
      if (blk.name != "head.b") std::fill(dst + h, dst + 2 * h, S(1));
      continue;
    }
    const double fan_out = blk.cols == g ? static_cast<double>(g) : 1.0;
    const double limit = std::sqrt(6.0 / (static_cast<double>(blk.rows) + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (std::size_t i = 0; i < n; ++i) dst[i] = static_cast<S>(dist(rng));
  }
  return p;
}

inline std::vector<std::size_t> forget_bias_indices(const ModelLayout& layout) {
  std::vector<std::size_t> out;
  for (const auto& blk : layout.manifest())
    if (blk.name == "lstm1.b" || blk.name == "lstm2.b")
      for (std::size_t k = layout.hidden; k < 2 * layout.hidden; ++k) out.push_back(blk.offset + k);
  return out;
}

namespace detail {

template <typename S>
struct LayerMaps {
  Eigen::Map<const RowMatrix<S>> wx, wh;
  Eigen::Map<const RowVec<S>> b;
};

template <typename S>
struct GradMaps {
  Eigen::Map<RowMatrix<S>> wx, wh;
  Eigen::Map<RowVec<S>> b;
};

template <typename S>
LayerMaps<S> layer_maps(const S* base, std::size_t in, std::size_t h) {
  const auto g = static_cast<Eigen::Index>(4 * h);
  const auto ei = static_cast<Eigen::Index>(in), eh = static_cast<Eigen::Index>(h);
  return {Eigen::Map<const RowMatrix<S>>(base, ei, g), Eigen::Map<const RowMatrix<S>>(base + in * 4 * h, eh, g),
          Eigen::Map<const RowVec<S>>(base + (in + h) * 4 * h, g)};
}

template <typename S>
GradMaps<S> grad_maps(S* base, std::size_t in, std::size_t h) {
  const auto g = static_cast<Eigen::Index>(4 * h);
  const auto ei = static_cast<Eigen::Index>(in), eh = static_cast<Eigen::Index>(h);
  return {Eigen::Map<RowMatrix<S>>(base, ei, g), Eigen::Map<RowMatrix<S>>(base + in * 4 * h, eh, g),
          Eigen::Map<RowVec<S>>(base + (in + h) * 4 * h, g)};
}

template <typename S>
struct LayerCache {
  RowMatrix<S> gates;   // activated (i, f, g, o), T*B x 4H
  RowMatrix<S> c;       // T*B x H
  RowMatrix<S> tanh_c;  // T*B x H
  RowMatrix<S> h;       // T*B x H
};

template <typename S>
void layer_forward(const LayerMaps<S>& w, const RowMatrix<S>& x, Eigen::Index steps, Eigen::Index batch,
                   LayerCache<S>& cache) {
  const Eigen::Index h = w.wh.rows();
  cache.gates.noalias() = x * w.wx;
  cache.gates.rowwise() += w.b;
  cache.c.resize(steps * batch, h);
  cache.tanh_c.resize(steps * batch, h);
  cache.h.resize(steps * batch, h);
  for (Eigen::Index t = 0; t < steps; ++t) {
    auto z = cache.gates.middleRows(t * batch, batch);
    if (t > 0) z.noalias() += cache.h.middleRows((t - 1) * batch, batch) * w.wh;
    z.leftCols(2 * h) = (S(1) / (S(1) + (-z.leftCols(2 * h).array()).exp())).matrix();
    z.middleCols(2 * h, h) = z.middleCols(2 * h, h).array().tanh().matrix();
    z.rightCols(h) = (S(1) / (S(1) + (-z.rightCols(h).array()).exp())).matrix();
    auto c = cache.c.middleRows(t * batch, batch);
    if (t > 0)
      c = (z.middleCols(h, h).array() * cache.c.middleRows((t - 1) * batch, batch).array() +
           z.leftCols(h).array() * z.middleCols(2 * h, h).array())
              .matrix();
    else
      c = (z.leftCols(h).array() * z.middleCols(2 * h, h).array()).matrix();
    auto tc = cache.tanh_c.middleRows(t * batch, batch);
    tc = c.array().tanh().matrix();
    cache.h.middleRows(t * batch, batch) = (z.rightCols(h).array() * tc.array()).matrix();
  }
}

// dh_seq: gradient w.r.t. every h_t from above (T*B x H), or null.
// dh_last: gradient w.r.t. the final h only (B x H), or null.
// Returns dL/dx when want_dx.
template <typename S>
RowMatrix<S> layer_backward(const LayerMaps<S>& w, GradMaps<S>& g, const RowMatrix<S>& x, const LayerCache<S>& cache,
                            Eigen::Index steps, Eigen::Index batch, const RowMatrix<S>* dh_seq,
                            const RowMatrix<S>* dh_last, bool want_dx) {
  const Eigen::Index h = w.wh.rows();
  RowMatrix<S> dz(steps * batch, 4 * h);
  RowMatrix<S> dh_next = RowMatrix<S>::Zero(batch, h);
  RowMatrix<S> dc_next = RowMatrix<S>::Zero(batch, h);
  RowMatrix<S> dh(batch, h), dc(batch, h);
  for (Eigen::Index t = steps - 1; t >= 0; --t) {
    dh = dh_next;
    if (dh_seq) dh += dh_seq->middleRows(t * batch, batch);
    if (dh_last && t == steps - 1) dh += *dh_last;
    const auto gates = cache.gates.middleRows(t * batch, batch);
    const auto i = gates.leftCols(h).array();
    const auto f = gates.middleCols(h, h).array();
    const auto gg = gates.middleCols(2 * h, h).array();
    const auto o = gates.rightCols(h).array();
    const auto tc = cache.tanh_c.middleRows(t * batch, batch).array();
    dc = (dh.array() * o * (S(1) - tc * tc) + dc_next.array()).matrix();
    auto dzt = dz.middleRows(t * batch, batch);
    dzt.leftCols(h) = (dc.array() * gg * i * (S(1) - i)).matrix();
    if (t > 0)
      dzt.middleCols(h, h) = (dc.array() * cache.c.middleRows((t - 1) * batch, batch).array() * f * (S(1) - f)).matrix();
    else
      dzt.middleCols(h, h).setZero();
    dzt.middleCols(2 * h, h) = (dc.array() * i * (S(1) - gg * gg)).matrix();
    dzt.rightCols(h) = (dh.array() * tc * o * (S(1) - o)).matrix();
    dc_next = (dc.array() * f).matrix();
    if (t > 0) dh_next.noalias() = dzt * w.wh.transpose();
  }
  g.wx.noalias() += x.transpose() * dz;
  if (steps > 1)
    g.wh.noalias() += cache.h.topRows((steps - 1) * batch).transpose() * dz.bottomRows((steps - 1) * batch);
  g.b += dz.colwise().sum();
  RowMatrix<S> dx;
  if (want_dx) dx.noalias() = dz * w.wx.transpose();
  return dx;
}

}  // namespace detail

// Activations kept from a forward pass for the backward pass.
template <typename S>
struct ForwardCache {
  Eigen::Index steps = 0;
  Eigen::Index batch = 0;
  detail::LayerCache<S> layer1, layer2;
  Eigen::Matrix<S, Eigen::Dynamic, 1> output;  // sigmoid predictions, one per sequence
};

// Batched forward pass; x is (steps * batch) x input, time-major.
template <typename S>
const Eigen::Matrix<S, Eigen::Dynamic, 1>& forward_batch(const ModelParams<S>& params, const RowMatrix<S>& x,
                                                         Eigen::Index steps, ForwardCache<S>& cache) {
  const auto& L = params.layout;
  require(params.values.size() == L.param_count(), "forward: parameter count does not match layout");
  require(steps >= 1 && x.rows() % steps == 0, "forward: rows must be a multiple of the step count");
  require(x.cols() == static_cast<Eigen::Index>(L.input), "forward: input width does not match layout");
  if (!x.allFinite()) throw PreconditionError("forward: non-finite input");
  cache.steps = steps;
  cache.batch = x.rows() / steps;
  const S* base = params.values.data();
  const auto l1 = detail::layer_maps(base + L.layer1_offset(), L.input, L.hidden);
  const auto l2 = detail::layer_maps(base + L.layer2_offset(), L.hidden, L.hidden);
  detail::layer_forward(l1, x, steps, cache.batch, cache.layer1);
  detail::layer_forward(l2, cache.layer1.h, steps, cache.batch, cache.layer2);
  const Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, 1>> head_w(base + L.head_offset(),
                                                                      static_cast<Eigen::Index>(L.hidden));
  const S head_b = base[L.head_offset() + L.hidden];
  cache.output.noalias() = cache.layer2.h.bottomRows(cache.batch) * head_w;
  cache.output = (S(1) / (S(1) + (-(cache.output.array() + head_b)).exp())).matrix();
  return cache.output;
}

// Single-sequence forward; seq is steps x input, row-major.
template <typename S, typename T>
S forward(const ModelParams<S>& params, std::span<const T> seq, ForwardCache<S>& cache) {
  const auto in = static_cast<Eigen::Index>(params.layout.input);
  require(!seq.empty() && seq.size() % params.layout.input == 0, "forward: sequence width must equal input size");
  const Eigen::Index steps = static_cast<Eigen::Index>(seq.size()) / in;
  RowMatrix<S> x(steps, in);
  for (Eigen::Index r = 0; r < steps; ++r)
    for (Eigen::Index c = 0; c < in; ++c) x(r, c) = static_cast<S>(seq[static_cast<std::size_t>(r * in + c)]);
  return forward_batch(params, x, steps, cache)(0);
}

template <typename S, typename T>
S forward(const ModelParams<S>& params, std::span<const T> seq) {
  ForwardCache<S> cache;
  return forward(params, seq, cache);
}

template <typename S>
struct GradientResult {
  ParamVector<S> gradient;  // same layout as the parameters
  double mse = 0.0;
};

// Gradient of the batch mean squared error. Runs its own forward pass.
template <typename S>
GradientResult<S> backward(const ModelParams<S>& params, const RowMatrix<S>& x, Eigen::Index steps,
                           std::span<const S> targets, ForwardCache<S>& cache) {
  require(!targets.empty(), "backward: empty batch");
  require(steps >= 1 && x.rows() == steps * static_cast<Eigen::Index>(targets.size()),
          "backward: targets must match the batch size");
  const auto& pred = forward_batch(params, x, steps, cache);
  const auto& L = params.layout;
  const Eigen::Index batch = cache.batch;
  const auto eh = static_cast<Eigen::Index>(L.hidden);

  GradientResult<S> res;
  res.gradient.assign(L.param_count(), S(0));
  Eigen::Matrix<S, Eigen::Dynamic, 1> dz_head(batch);
  double sq = 0.0;
  for (Eigen::Index b = 0; b < batch; ++b) {
    const double err = static_cast<double>(pred(b)) - static_cast<double>(targets[static_cast<std::size_t>(b)]);
    sq += err * err;
    const double y = static_cast<double>(pred(b));
    dz_head(b) = static_cast<S>(2.0 * err / static_cast<double>(batch) * y * (1.0 - y));
  }
  res.mse = sq / static_cast<double>(batch);

  const S* base = params.values.data();
  S* gbase = res.gradient.data();
  const auto& h2_last = cache.layer2.h.bottomRows(batch);
  Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, 1>> g_head_w(gbase + L.head_offset(), eh);
  g_head_w.noalias() = h2_last.transpose() * dz_head;
  gbase[L.head_offset() + L.hidden] = dz_head.sum();
  const Eigen::Map<const RowVec<S>> head_w(base + L.head_offset(), eh);
  const RowMatrix<S> dh2_last = dz_head * head_w;

  const auto l1 = detail::layer_maps(base + L.layer1_offset(), L.input, L.hidden);
  const auto l2 = detail::layer_maps(base + L.layer2_offset(), L.hidden, L.hidden);
  auto g1 = detail::grad_maps(gbase + L.layer1_offset(), L.input, L.hidden);
  auto g2 = detail::grad_maps(gbase + L.layer2_offset(), L.hidden, L.hidden);
  const RowMatrix<S> dh1 =
      detail::layer_backward<S>(l2, g2, cache.layer1.h, cache.layer2, steps, batch, nullptr, &dh2_last, true);
  detail::layer_backward<S>(l1, g1, x, cache.layer1, steps, batch, &dh1, nullptr, false);
  return res;
}

// Mean squared error of the batch without gradients.
template <typename S>
double batch_mse(const ModelParams<S>& params, const RowMatrix<S>& x, Eigen::Index steps, std::span<const S> targets,
                 ForwardCache<S>& cache) {
  const auto& pred = forward_batch(params, x, steps, cache);
  double sq = 0.0;
  for (Eigen::Index b = 0; b < pred.size(); ++b) {
    const double e = static_cast<double>(pred(b)) - static_cast<double>(targets[static_cast<std::size_t>(b)]);
    sq += e * e;
  }
  return sq / static_cast<double>(pred.size());
}

}  // namespace gnssfl
