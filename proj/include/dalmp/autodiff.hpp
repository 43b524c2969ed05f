#pragma once

// Tape-based reverse-mode differentiation over dense float64 tensors.
//
// A Graph is an append-only list of nodes; every node is evaluated eagerly
// when it is created, so node order is already a topological order and
// backward() is a single reverse sweep.

#include <Eigen/Core>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "dalmp/error.hpp"
#include "dalmp/tensor.hpp"

namespace dalmp {

enum class Primitive : std::uint8_t {
  leaf,
  matmul,
  add,
  sub,
  mul,
  scale,
  sigmoid,
  tanh,
  relu,
  abs,
  conv1d,
  concat,
  slice,
  reshape,
  sum,
  mean,
};

inline const char* primitive_name(Primitive kind) {
  switch (kind) {
    case Primitive::leaf: return "leaf";
    case Primitive::matmul: return "matmul";
    case Primitive::add: return "add";
    case Primitive::sub: return "sub";
    case Primitive::mul: return "mul";
    case Primitive::scale: return "scale";
    case Primitive::sigmoid: return "sigmoid";
    case Primitive::tanh: return "tanh";
    case Primitive::relu: return "relu";
    case Primitive::abs: return "abs";
    case Primitive::conv1d: return "conv1d";
    case Primitive::concat: return "concat";
    case Primitive::slice: return "slice";
    case Primitive::reshape: return "reshape";
    case Primitive::sum: return "sum";
    case Primitive::mean: return "mean";
  }
  return "unknown";
}

/// Handle to a node inside one Graph.
struct Var {
  std::size_t index = 0;
};

/// Non-tensor arguments for primitives that need them.
struct PrimitiveAttrs {
  std::size_t axis = 0;
  std::size_t begin = 0;
  std::size_t end = 0;
  double factor = 1.0;
  Shape shape{};
};

struct GraphNode {
  Tensor value;
  mutable Tensor gradient;  // allocated on first use; empty means all zeros
  Primitive kind = Primitive::leaf;
  std::vector<std::size_t> parents;
  PrimitiveAttrs attrs;
};

namespace detail {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixView = Eigen::Map<RowMatrix>;
using ConstMatrixView = Eigen::Map<const RowMatrix>;

inline ConstMatrixView as_matrix(const Tensor& t, std::size_t rows, std::size_t cols) {
  return {t.data().data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}
inline MatrixView as_matrix(Tensor& t, std::size_t rows, std::size_t cols) {
  return {t.data().data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

[[noreturn]] inline void shape_error(Primitive kind, const Shape& a, const Shape& b) {
  throw Error(ErrorCode::shape_mismatch, std::string(primitive_name(kind)) + " got " + a.str() + " and " + b.str());
}
[[noreturn]] inline void shape_error(Primitive kind, const Shape& a, const std::string& why) {
  throw Error(ErrorCode::shape_mismatch, std::string(primitive_name(kind)) + " got " + a.str() + ": " + why);
}

inline Eigen::Map<Eigen::ArrayXd> as_array(Tensor& t) {
  return {t.data().data(), static_cast<Eigen::Index>(t.size())};
}
inline Eigen::Map<const Eigen::ArrayXd> as_array(const Tensor& t) {
  return {t.data().data(), static_cast<Eigen::Index>(t.size())};
}

inline double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// conv1d operands viewed as (batch, length, channels).
struct ConvDims {
  std::size_t batch, length, in_channels, out_channels, width;
};

inline ConvDims conv_dims(const Shape& x, const Shape& w, const Shape& b) {
  if (x.rank() != 2 && x.rank() != 3) shape_error(Primitive::conv1d, x, "input must be length x channels");
  if (w.rank() != 3) shape_error(Primitive::conv1d, w, "kernel must be width x in x out");
  ConvDims d{};
  d.batch = x.rank() == 3 ? x[0] : 1;
  d.length = x.rank() == 3 ? x[1] : x[0];
  d.in_channels = x.back();
  d.width = w[0];
  d.out_channels = w[2];
  if (w[1] != d.in_channels) shape_error(Primitive::conv1d, x, w);
  if (d.width > d.length) shape_error(Primitive::conv1d, x, w);
  if (b.rank() != 1 || b[0] != d.out_channels) shape_error(Primitive::conv1d, w, b);
  return d;
}

}  // namespace detail

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;

  /// Leaf node; inputs and parameters are both leaves, their gradients are
  /// readable after backward().
  Var leaf(Tensor value) {
    GraphNode node;
    node.value = std::move(value);
    nodes_.push_back(std::move(node));
    return Var{nodes_.size() - 1};
  }

  const Tensor& value(Var v) const { return nodes_.at(v.index).value; }
  const Tensor& gradient(Var v) const {
    const GraphNode& n = nodes_.at(v.index);
    if (n.gradient.empty()) n.gradient = Tensor(n.value.shape());
    return n.gradient;
  }
  const GraphNode& node(Var v) const { return nodes_.at(v.index); }
  std::size_t size() const { return nodes_.size(); }

  void zero_gradients() {
    for (auto& n : nodes_) n.gradient = Tensor();
  }

  /// Generic entry point; the named helpers below forward here.
  Var apply(Primitive kind, std::span<const Var> inputs, const PrimitiveAttrs& attrs = {}) {
    std::vector<std::size_t> parents;
    parents.reserve(inputs.size());
    for (Var v : inputs) {
      if (v.index >= nodes_.size()) throw Error(ErrorCode::shape_mismatch, "dangling node reference");
      parents.push_back(v.index);
    }
    Tensor out = evaluate(kind, parents, attrs);
    GraphNode node;
    node.value = std::move(out);
    node.kind = kind;
    node.parents = std::move(parents);
    node.attrs = attrs;
    nodes_.push_back(std::move(node));
    return Var{nodes_.size() - 1};
  }

  Var matmul(Var a, Var b) { return apply(Primitive::matmul, std::initializer_list<Var>{a, b}); }
  Var add(Var a, Var b) { return apply(Primitive::add, std::initializer_list<Var>{a, b}); }
  Var sub(Var a, Var b) { return apply(Primitive::sub, std::initializer_list<Var>{a, b}); }
  Var mul(Var a, Var b) { return apply(Primitive::mul, std::initializer_list<Var>{a, b}); }
  Var scale(Var a, double factor) {
    PrimitiveAttrs at;
    at.factor = factor;
    return apply(Primitive::scale, std::initializer_list<Var>{a}, at);
  }
  Var sigmoid(Var a) { return apply(Primitive::sigmoid, std::initializer_list<Var>{a}); }
  Var tanh(Var a) { return apply(Primitive::tanh, std::initializer_list<Var>{a}); }
  Var relu(Var a) { return apply(Primitive::relu, std::initializer_list<Var>{a}); }
  Var abs(Var a) { return apply(Primitive::abs, std::initializer_list<Var>{a}); }
  /// Stride-1 convolution along the length axis with zero "same" padding.
  Var conv1d(Var x, Var kernel, Var bias) {
    return apply(Primitive::conv1d, std::initializer_list<Var>{x, kernel, bias});
  }
  Var concat(std::initializer_list<Var> parts) { return apply(Primitive::concat, parts); }
  Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end) {
    PrimitiveAttrs at;
    at.axis = axis;
    at.begin = begin;
    at.end = end;
    return apply(Primitive::slice, std::initializer_list<Var>{a}, at);
  }
  Var reshape(Var a, Shape shape) {
    PrimitiveAttrs at;
    at.shape = shape;
    return apply(Primitive::reshape, std::initializer_list<Var>{a}, at);
  }
  Var sum(Var a) { return apply(Primitive::sum, std::initializer_list<Var>{a}); }
  Var mean(Var a) { return apply(Primitive::mean, std::initializer_list<Var>{a}); }

  /// Mean absolute error between two equally shaped nodes.
  Var mae(Var prediction, Var target) { return mean(abs(sub(prediction, target))); }

  /// Accumulates d(loss)/d(node) into every ancestor of `loss`. Gradients
  /// add up across calls; use zero_gradients() between independent passes.
  void backward(Var loss) {
    const Shape& ls = value(loss).shape();
    if (!(ls.rank() == 1 && ls[0] == 1)) {
      throw Error(ErrorCode::non_scalar_loss, "loss has shape " + ls.str());
    }
    const std::size_t top = loss.index;
    std::vector<char> reachable(top + 1, 0);
    reachable[top] = 1;
    for (std::size_t i = top + 1; i-- > 0;) {
      if (!reachable[i]) continue;
      for (std::size_t p : nodes_[i].parents) reachable[p] = 1;
    }

    // Propagate this pass in scratch buffers so repeated calls add exactly
    // one more copy of the gradient.
    std::vector<Tensor> pass(top + 1);
    pass[top] = Tensor(ls, 1.0);
    for (std::size_t i = top + 1; i-- > 0;) {
      if (!reachable[i] || pass[i].empty()) continue;
      const GraphNode& n = nodes_[i];
      for (std::size_t p : n.parents) {
        if (pass[p].empty()) pass[p] = Tensor(nodes_[p].value.shape());
      }
      propagate(n, nodes_[i].value, pass[i], pass);
      if (n.gradient.empty()) {
        n.gradient = std::move(pass[i]);
      } else {
        auto g = n.gradient.data();
        auto d = pass[i].data();
        for (std::size_t k = 0; k < g.size(); ++k) g[k] += d[k];
        pass[i] = Tensor();
      }
    }
  }

 private:
  const Tensor& in(const std::vector<std::size_t>& parents, std::size_t k) const { return nodes_[parents[k]].value; }

  static void expect_arity(Primitive kind, std::size_t got, std::size_t want) {
    if (got != want) {
      throw Error(ErrorCode::shape_mismatch, std::string(primitive_name(kind)) + " expects " + std::to_string(want) +
                                                 " inputs, got " + std::to_string(got));
    }
  }

  Tensor evaluate(Primitive kind, const std::vector<std::size_t>& parents, const PrimitiveAttrs& at) const {
    using detail::as_matrix;
    switch (kind) {
      case Primitive::matmul: {
        expect_arity(kind, parents.size(), 2);
        const Tensor& a = in(parents, 0);
        const Tensor& b = in(parents, 1);
        if (a.shape().rank() != 2 || b.shape().rank() != 2 || a.shape()[1] != b.shape()[0]) {
          detail::shape_error(kind, a.shape(), b.shape());
        }
        const std::size_t n = a.shape()[0], k = a.shape()[1], m = b.shape()[1];
        Tensor out(Shape{n, m});
        as_matrix(out, n, m).noalias() = as_matrix(a, n, k) * as_matrix(b, k, m);
        return out;
      }
      case Primitive::add: {
        expect_arity(kind, parents.size(), 2);
        const Tensor& a = in(parents, 0);
        const Tensor& b = in(parents, 1);
        Tensor out = a;
        if (a.shape() == b.shape()) {
          for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
        } else if (b.shape().rank() == 1 && b.shape()[0] == a.shape().back()) {
          const std::size_t w = b.size();
          for (std::size_t r = 0; r < out.size(); r += w) {
            for (std::size_t j = 0; j < w; ++j) out[r + j] += b[j];
          }
        } else {
          detail::shape_error(kind, a.shape(), b.shape());
        }
        return out;
      }
      case Primitive::sub:
      case Primitive::mul: {
        expect_arity(kind, parents.size(), 2);
        const Tensor& a = in(parents, 0);
        const Tensor& b = in(parents, 1);
        if (!(a.shape() == b.shape())) detail::shape_error(kind, a.shape(), b.shape());
        Tensor out = a;
        if (kind == Primitive::sub) {
          for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
        } else {
          for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
        }
        return out;
      }
      case Primitive::scale:
      case Primitive::sigmoid:
      case Primitive::tanh:
      case Primitive::relu:
      case Primitive::abs: {
        expect_arity(kind, parents.size(), 1);
        Tensor out = in(parents, 0);
        auto v = detail::as_array(out);
        switch (kind) {
          case Primitive::scale: v *= at.factor; break;
          // exp overflow saturates both to their limits
          case Primitive::sigmoid: v = 1.0 / (1.0 + (-v).exp()); break;
          case Primitive::tanh: v = 1.0 - 2.0 / ((2.0 * v).exp() + 1.0); break;
          case Primitive::relu: v = v.max(0.0); break;
          default: v = v.abs(); break;
        }
        return out;
      }
      case Primitive::conv1d: {
        expect_arity(kind, parents.size(), 3);
        const Tensor& x = in(parents, 0);
        const Tensor& w = in(parents, 1);
        const Tensor& b = in(parents, 2);
        const auto d = detail::conv_dims(x.shape(), w.shape(), b.shape());
        Tensor out(x.shape().rank() == 3 ? Shape{d.batch, d.length, d.out_channels} : Shape{d.length, d.out_channels});
        const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>((d.width - 1) / 2);
        const auto xs = x.data();
        const auto ws = w.data();
        auto os = out.data();
        for (std::size_t bi = 0; bi < d.batch; ++bi) {
          for (std::size_t t = 0; t < d.length; ++t) {
            double* o = &os[(bi * d.length + t) * d.out_channels];
            for (std::size_t c = 0; c < d.out_channels; ++c) o[c] = b[c];
            for (std::size_t k = 0; k < d.width; ++k) {
              const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + k) - pad;
              if (src < 0 || src >= static_cast<std::ptrdiff_t>(d.length)) continue;
              const double* xi = &xs[(bi * d.length + static_cast<std::size_t>(src)) * d.in_channels];
              const double* wk = &ws[k * d.in_channels * d.out_channels];
              for (std::size_t ci = 0; ci < d.in_channels; ++ci) {
                const double xv = xi[ci];
                const double* wr = wk + ci * d.out_channels;
                for (std::size_t c = 0; c < d.out_channels; ++c) o[c] += xv * wr[c];
              }
            }
          }
        }
        return out;
      }
      case Primitive::concat: {
        if (parents.empty()) throw Error(ErrorCode::shape_mismatch, "concat needs at least one input");
        const Shape& first = in(parents, 0).shape();
        std::size_t total = 0;
        for (std::size_t k = 0; k < parents.size(); ++k) {
          const Shape& s = in(parents, k).shape();
          if (s.rank() != first.rank()) detail::shape_error(kind, first, s);
          for (std::size_t ax = 0; ax + 1 < s.rank(); ++ax) {
            if (s[ax] != first[ax]) detail::shape_error(kind, first, s);
          }
          total += s.back();
        }
        std::vector<std::size_t> dims(first.dims().begin(), first.dims().end());
        dims.back() = total;
        Tensor out(Shape::of(dims));
        const std::size_t rows = out.size() / total;
        std::size_t offset = 0;
        for (std::size_t k = 0; k < parents.size(); ++k) {
          const Tensor& part = in(parents, k);
          const std::size_t w = part.shape().back();
          for (std::size_t r = 0; r < rows; ++r) {
            std::copy_n(&part.data()[r * w], w, &out.data()[r * total + offset]);
          }
          offset += w;
        }
        return out;
      }
      case Primitive::slice: {
        expect_arity(kind, parents.size(), 1);
        const Tensor& a = in(parents, 0);
        const Shape& s = a.shape();
        if (at.axis >= s.rank() || at.begin >= at.end || at.end > s[at.axis]) {
          detail::shape_error(kind, s,
                              "axis " + std::to_string(at.axis) + " range [" + std::to_string(at.begin) + ", " +
                                  std::to_string(at.end) + ")");
        }
        std::vector<std::size_t> dims(s.dims().begin(), s.dims().end());
        dims[at.axis] = at.end - at.begin;
        Tensor out(Shape::of(dims));
        for_each_slice_block(s, at, [&](std::size_t src, std::size_t dst, std::size_t len) {
          std::copy_n(&a.data()[src], len, &out.data()[dst]);
        });
        return out;
      }
      case Primitive::reshape: {
        expect_arity(kind, parents.size(), 1);
        const Tensor& a = in(parents, 0);
        if (at.shape.size() != a.size()) detail::shape_error(kind, a.shape(), at.shape);
        return a.reshaped(at.shape);
      }
      case Primitive::sum:
      case Primitive::mean: {
        expect_arity(kind, parents.size(), 1);
        const Tensor& a = in(parents, 0);
        double acc = 0.0;
        for (double v : a.data()) acc += v;
        if (kind == Primitive::mean) acc /= static_cast<double>(a.size());
        return Tensor(Shape{1}, acc);
      }
      case Primitive::leaf:
        break;
    }
    throw Error(ErrorCode::unknown_primitive,
                "primitive kind " + std::to_string(static_cast<int>(kind)) + " cannot be applied");
  }

  // Visits contiguous runs of a slice: (source offset, destination offset, run length).
  template <typename F>
  static void for_each_slice_block(const Shape& s, const PrimitiveAttrs& at, F&& f) {
    std::size_t outer = 1;
    for (std::size_t ax = 0; ax < at.axis; ++ax) outer *= s[ax];
    std::size_t inner = 1;
    for (std::size_t ax = at.axis + 1; ax < s.rank(); ++ax) inner *= s[ax];
    const std::size_t extent = s[at.axis];
    const std::size_t len = (at.end - at.begin) * inner;
    for (std::size_t o = 0; o < outer; ++o) {
      f((o * extent + at.begin) * inner, o * len, len);
    }
  }

  void propagate(const GraphNode& n, const Tensor& out, const Tensor& dout, std::vector<Tensor>& pass) const {
    using detail::as_matrix;
    const auto& ps = n.parents;
    switch (n.kind) {
      case Primitive::leaf:
        return;
      case Primitive::matmul: {
        const Tensor& a = nodes_[ps[0]].value;
        const Tensor& b = nodes_[ps[1]].value;
        const std::size_t rows = a.shape()[0], k = a.shape()[1], m = b.shape()[1];
        auto g = as_matrix(dout, rows, m);
        as_matrix(pass[ps[0]], rows, k).noalias() += g * as_matrix(b, k, m).transpose();
        as_matrix(pass[ps[1]], k, m).noalias() += as_matrix(a, rows, k).transpose() * g;
        return;
      }
      case Primitive::add: {
        auto ga = pass[ps[0]].data();
        auto gb = pass[ps[1]].data();
        const auto d = dout.data();
        for (std::size_t i = 0; i < d.size(); ++i) ga[i] += d[i];
        const std::size_t w = gb.size();
        if (w == d.size()) {
          for (std::size_t i = 0; i < d.size(); ++i) gb[i] += d[i];
        } else {
          for (std::size_t r = 0; r < d.size(); r += w) {
            for (std::size_t j = 0; j < w; ++j) gb[j] += d[r + j];
          }
        }
        return;
      }
      case Primitive::sub: {
        auto ga = pass[ps[0]].data();
        auto gb = pass[ps[1]].data();
        const auto d = dout.data();
        for (std::size_t i = 0; i < d.size(); ++i) {
          ga[i] += d[i];
          gb[i] -= d[i];
        }
        return;
      }
      case Primitive::mul: {
        const auto a = nodes_[ps[0]].value.data();
        const auto b = nodes_[ps[1]].value.data();
        const auto d = dout.data();
        if (ps[0] == ps[1]) {
          auto g = pass[ps[0]].data();
          for (std::size_t i = 0; i < d.size(); ++i) g[i] += 2.0 * d[i] * a[i];
          return;
        }
        auto ga = pass[ps[0]].data();
        auto gb = pass[ps[1]].data();
        for (std::size_t i = 0; i < d.size(); ++i) {
          ga[i] += d[i] * b[i];
          gb[i] += d[i] * a[i];
        }
        return;
      }
      case Primitive::scale:
      case Primitive::sigmoid:
      case Primitive::tanh:
      case Primitive::relu:
      case Primitive::abs: {
        Tensor& gt = pass[ps[0]];
        auto g = detail::as_array(gt);
        const auto d = detail::as_array(dout);
        switch (n.kind) {
          case Primitive::scale: g += d * n.attrs.factor; break;
          case Primitive::sigmoid: {
            const auto y = detail::as_array(out);
            g += d * y * (1.0 - y);
            break;
          }
          case Primitive::tanh: {
            const auto y = detail::as_array(out);
            g += d * (1.0 - y * y);
            break;
          }
          case Primitive::relu: {
            const auto x = detail::as_array(nodes_[ps[0]].value);
            g += (x > 0.0).select(d, 0.0);
            break;
          }
          default: {
            const auto x = nodes_[ps[0]].value.data();
            auto gs = gt.data();
            for (std::size_t i = 0; i < gs.size(); ++i) gs[i] += dout[i] * detail::sign(x[i]);
            break;
          }
        }
        return;
      }
      case Primitive::conv1d: {
        const Tensor& x = nodes_[ps[0]].value;
        const Tensor& w = nodes_[ps[1]].value;
        const auto dims = detail::conv_dims(x.shape(), w.shape(), nodes_[ps[2]].value.shape());
        const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>((dims.width - 1) / 2);
        const auto xs = x.data();
        const auto ws = w.data();
        const auto d = dout.data();
        auto gx = pass[ps[0]].data();
        auto gw = pass[ps[1]].data();
        auto gb = pass[ps[2]].data();
        for (std::size_t bi = 0; bi < dims.batch; ++bi) {
          for (std::size_t t = 0; t < dims.length; ++t) {
            const double* go = &d[(bi * dims.length + t) * dims.out_channels];
            for (std::size_t c = 0; c < dims.out_channels; ++c) gb[c] += go[c];
            for (std::size_t k = 0; k < dims.width; ++k) {
              const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + k) - pad;
              if (src < 0 || src >= static_cast<std::ptrdiff_t>(dims.length)) continue;
              const std::size_t xoff = (bi * dims.length + static_cast<std::size_t>(src)) * dims.in_channels;
              const std::size_t woff = k * dims.in_channels * dims.out_channels;
              for (std::size_t ci = 0; ci < dims.in_channels; ++ci) {
                const double xv = xs[xoff + ci];
                double acc = 0.0;
                for (std::size_t c = 0; c < dims.out_channels; ++c) {
                  gw[woff + ci * dims.out_channels + c] += xv * go[c];
                  acc += ws[woff + ci * dims.out_channels + c] * go[c];
                }
                gx[xoff + ci] += acc;
              }
            }
          }
        }
        return;
      }
      case Primitive::concat: {
        const std::size_t total = out.shape().back();
        const std::size_t rows = out.size() / total;
        std::size_t offset = 0;
        for (std::size_t p : ps) {
          auto g = pass[p].data();
          const std::size_t w = nodes_[p].value.shape().back();
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < w; ++j) g[r * w + j] += dout[r * total + offset + j];
          }
          offset += w;
        }
        return;
      }
      case Primitive::slice: {
        auto g = pass[ps[0]].data();
        const auto d = dout.data();
        for_each_slice_block(nodes_[ps[0]].value.shape(), n.attrs, [&](std::size_t src, std::size_t dst, std::size_t len) {
          for (std::size_t j = 0; j < len; ++j) g[src + j] += d[dst + j];
        });
        return;
      }
      case Primitive::reshape: {
        auto g = pass[ps[0]].data();
        const auto d = dout.data();
        for (std::size_t i = 0; i < d.size(); ++i) g[i] += d[i];
        return;
      }
      case Primitive::sum:
      case Primitive::mean: {
        auto g = pass[ps[0]].data();
        const double scale = n.kind == Primitive::mean ? dout[0] / static_cast<double>(g.size()) : dout[0];
        for (double& v : g) v += scale;
        return;
      }
    }
    throw Error(ErrorCode::unknown_primitive, "no derivative rule");
  }

  std::vector<GraphNode> nodes_;
};

}  // namespace dalmp
