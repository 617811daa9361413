#include "solido/ops.hpp"

#include <algorithm>
#include <cmath>

namespace solido {

namespace {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

Tensor make_result(Shape shape, std::vector<double> data, std::vector<NodePtr> parents,
                   std::function<void(Node&)> backward_fn) {
  bool rg = false;
  for (const auto& p : parents) rg = rg || p->requires_grad;
  Tensor t = Tensor::from(std::move(shape), std::move(data), rg);
  if (rg) {
    t.node()->parents = std::move(parents);
    t.node()->backward_fn = std::move(backward_fn);
  }
  return t;
}

bool wants(const NodePtr& p) { return p->requires_grad; }

}  // namespace

// ---- elementwise -------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "add: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  std::vector<double> out(a.numel());
  auto ad = a.data(), bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] + bd[i];
  NodePtr an = a.node(), bn = b.node();
  return make_result(a.shape(), std::move(out), {an, bn}, [an, bn](Node& self) {
    if (wants(an)) {
      an->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
    }
    if (wants(bn)) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "sub: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  std::vector<double> out(a.numel());
  auto ad = a.data(), bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] - bd[i];
  NodePtr an = a.node(), bn = b.node();
  return make_result(a.shape(), std::move(out), {an, bn}, [an, bn](Node& self) {
    if (wants(an)) {
      an->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
    }
    if (wants(bn)) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "mul: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  std::vector<double> out(a.numel());
  auto ad = a.data(), bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * bd[i];
  NodePtr an = a.node(), bn = b.node();
  return make_result(a.shape(), std::move(out), {an, bn}, [an, bn](Node& self) {
    if (wants(an)) {
      an->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i] * bn->data[i];
    }
    if (wants(bn)) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] += self.grad[i] * an->data[i];
    }
  });
}

Tensor scale(const Tensor& a, double c) {
  std::vector<double> out(a.numel());
  auto ad = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * c;
  NodePtr an = a.node();
  return make_result(a.shape(), std::move(out), {an}, [an, c](Node& self) {
    if (!wants(an)) return;
    an->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i] * c;
  });
}

Tensor elementwise(EwOp op, const Tensor& a, const Tensor& b) {
  switch (op) {
    case EwOp::kAdd: return add(a, b);
    case EwOp::kSub: return sub(a, b);
    case EwOp::kMul: return mul(a, b);
    case EwOp::kScale: require(b.numel() == 1, "elementwise: scale needs a scalar"); return scale(a, b.data()[0]);
  }
  throw Error("elementwise: unknown op");
}

Tensor elementwise(EwOp op, const Tensor& a, double b) {
  return elementwise(op, a, Tensor::scalar(b));
}

// ---- linear algebra ----------------------------------------------------------

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
  require(x.shape().size() == 2 && w.shape().size() == 2, "linear: x and w must be 2-D");
  std::size_t B = x.shape()[0], n = x.shape()[1];
  std::size_t m = w.shape()[0];
  require(w.shape()[1] == n, "linear: inner dimensions disagree: x " + shape_str(x.shape()) + ", w " + shape_str(w.shape()));
  if (bias.defined()) require(bias.shape() == Shape{m}, "linear: bias shape mismatch");

  std::vector<double> out(B * m, 0.0);
  auto xd = x.data(), wd = w.data();
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t j = 0; j < m; ++j) {
      double acc = bias.defined() ? bias.data()[j] : 0.0;
      const double* xr = &xd[b * n];
      const double* wr = &wd[j * n];
      for (std::size_t i = 0; i < n; ++i) acc += xr[i] * wr[i];
      out[b * m + j] = acc;
    }

  NodePtr xn = x.node(), wn = w.node(), bn = bias.defined() ? bias.node() : nullptr;
  std::vector<NodePtr> parents{xn, wn};
  if (bn) parents.push_back(bn);
  return make_result({B, m}, std::move(out), std::move(parents), [xn, wn, bn, B, n, m](Node& self) {
    if (wants(xn)) {
      xn->ensure_grad();
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t j = 0; j < m; ++j) {
          double g = self.grad[b * m + j];
          const double* wr = &wn->data[j * n];
          double* gx = &xn->grad[b * n];
          for (std::size_t i = 0; i < n; ++i) gx[i] += g * wr[i];
        }
    }
    if (wants(wn)) {
      wn->ensure_grad();
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t j = 0; j < m; ++j) {
          double g = self.grad[b * m + j];
          const double* xr = &xn->data[b * n];
          double* gw = &wn->grad[j * n];
          for (std::size_t i = 0; i < n; ++i) gw[i] += g * xr[i];
        }
    }
    if (bn && wants(bn)) {
      bn->ensure_grad();
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t j = 0; j < m; ++j) bn->grad[j] += self.grad[b * m + j];
    }
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.shape().size() == 2 && b.shape().size() == 2, "matmul: operands must be 2-D");
  std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  require(b.shape()[0] == k, "matmul: inner dimensions disagree");
  std::vector<double> out(m * n, 0.0);
  auto ad = a.data(), bd = b.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      double av = ad[i * k + p];
      const double* br = &bd[p * n];
      double* orow = &out[i * n];
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * br[j];
    }
  NodePtr an = a.node(), bn = b.node();
  return make_result({m, n}, std::move(out), {an, bn}, [an, bn, m, k, n](Node& self) {
    if (wants(an)) {
      an->ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          const double* g = &self.grad[i * n];
          const double* br = &bn->data[p * n];
          for (std::size_t j = 0; j < n; ++j) acc += g[j] * br[j];
          an->grad[i * k + p] += acc;
        }
    }
    if (wants(bn)) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double av = an->data[i * k + p];
          const double* g = &self.grad[i * n];
          double* gb = &bn->grad[p * n];
          for (std::size_t j = 0; j < n; ++j) gb[j] += av * g[j];
        }
    }
  });
}

// ---- conv1d -------------------------------------------------------------------

Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias, const ConvSpec& spec) {
  require(x.shape().size() == 3 && w.shape().size() == 3, "conv1d: x must be [B,Cin,L], w [Cout,Cin/g,k]");
  std::size_t B = x.shape()[0], cin = x.shape()[1], L = x.shape()[2];
  std::size_t cout = w.shape()[0], cing = w.shape()[1], k = w.shape()[2];
  require(spec.groups >= 1 && cin % spec.groups == 0, "conv1d: Cin not divisible by groups");
  require(cout % spec.groups == 0, "conv1d: Cout not divisible by groups");
  require(cing == cin / spec.groups, "conv1d: kernel channel dim disagrees with Cin/groups");
  require(spec.stride >= 1 && spec.dilation >= 1, "conv1d: stride and dilation must be >= 1");
  if (bias.defined()) require(bias.shape() == Shape{cout}, "conv1d: bias shape mismatch");
  std::size_t Lout = conv_out_len(L, k, spec);

  const std::size_t s = spec.stride, d = spec.dilation, g = spec.groups;
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(spec.padding);
  const std::size_t cout_g = cout / g;

  // Captured by value: the backward closure outlives this frame.
  auto bounds = [L, s, Lout](std::ptrdiff_t off, std::size_t& i_lo, std::size_t& i_hi) {
    // output indices i with 0 <= i*s + off < L
    std::ptrdiff_t lo = 0;
    if (off < 0) lo = (-off + static_cast<std::ptrdiff_t>(s) - 1) / static_cast<std::ptrdiff_t>(s);
    std::ptrdiff_t hi = 0;
    std::ptrdiff_t last = static_cast<std::ptrdiff_t>(L) - 1 - off;
    if (last >= 0) hi = last / static_cast<std::ptrdiff_t>(s) + 1;
    i_lo = static_cast<std::size_t>(std::max<std::ptrdiff_t>(lo, 0));
    i_hi = std::min(static_cast<std::size_t>(std::max<std::ptrdiff_t>(hi, 0)), Lout);
  };

  std::vector<double> out(B * cout * Lout, 0.0);
  auto xd = x.data(), wd = w.data();
  if (bias.defined()) {
    auto bd = bias.data();
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t co = 0; co < cout; ++co)
        std::fill_n(&out[(b * cout + co) * Lout], Lout, bd[co]);
  }
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t gi = 0; gi < g; ++gi)
      for (std::size_t co = gi * cout_g; co < (gi + 1) * cout_g; ++co) {
        double* yrow = &out[(b * cout + co) * Lout];
        for (std::size_t ci = 0; ci < cing; ++ci) {
          const double* xrow = &xd[(b * cin + gi * cing + ci) * L];
          const double* wrow = &wd[(co * cing + ci) * k];
          for (std::size_t kk = 0; kk < k; ++kk) {
            double wv = wrow[kk];
            std::ptrdiff_t off = static_cast<std::ptrdiff_t>(kk * d) - pad;
            std::size_t i_lo, i_hi;
            bounds(off, i_lo, i_hi);
            if (s == 1) {
              const double* xp = xrow + off;
              for (std::size_t i = i_lo; i < i_hi; ++i) yrow[i] += wv * xp[i];
            } else {
              for (std::size_t i = i_lo; i < i_hi; ++i) yrow[i] += wv * xrow[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(i * s) + off)];
            }
          }
        }
      }

  NodePtr xn = x.node(), wn = w.node(), bn = bias.defined() ? bias.node() : nullptr;
  std::vector<NodePtr> parents{xn, wn};
  if (bn) parents.push_back(bn);
  auto backward = [xn, wn, bn, B, cin, cing, cout, cout_g, L, Lout, k, s, d, g, pad, bounds](Node& self) {
    if (wants(xn)) xn->ensure_grad();
    if (wants(wn)) wn->ensure_grad();
    if (bn && wants(bn)) bn->ensure_grad();
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t gi = 0; gi < g; ++gi)
        for (std::size_t co = gi * cout_g; co < (gi + 1) * cout_g; ++co) {
          const double* grow = &self.grad[(b * cout + co) * Lout];
          if (bn && wants(bn)) {
            double acc = 0.0;
            for (std::size_t i = 0; i < Lout; ++i) acc += grow[i];
            bn->grad[co] += acc;
          }
          for (std::size_t ci = 0; ci < cing; ++ci) {
            std::size_t xch = (b * cin + gi * cing + ci) * L;
            for (std::size_t kk = 0; kk < k; ++kk) {
              std::ptrdiff_t off = static_cast<std::ptrdiff_t>(kk * d) - pad;
              std::size_t i_lo, i_hi;
              bounds(off, i_lo, i_hi);
              if (wants(xn)) {
                double wv = wn->data[(co * cing + ci) * k + kk];
                double* gx = &xn->grad[xch];
                if (s == 1) {
                  double* gp = gx + off;
                  for (std::size_t i = i_lo; i < i_hi; ++i) gp[i] += wv * grow[i];
                } else {
                  for (std::size_t i = i_lo; i < i_hi; ++i) gx[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(i * s) + off)] += wv * grow[i];
                }
              }
              if (wants(wn)) {
                const double* xr = &xn->data[xch];
                double acc = 0.0;
                if (s == 1) {
                  const double* xp = xr + off;
                  for (std::size_t i = i_lo; i < i_hi; ++i) acc += grow[i] * xp[i];
                } else {
                  for (std::size_t i = i_lo; i < i_hi; ++i) acc += grow[i] * xr[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(i * s) + off)];
                }
                wn->grad[(co * cing + ci) * k + kk] += acc;
              }
            }
          }
        }
  };
  return make_result({B, cout, Lout}, std::move(out), std::move(parents), std::move(backward));
}

// ---- activations ---------------------------------------------------------------

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.numel());
  auto xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[i] > 0.0 ? xd[i] : 0.0;
  NodePtr xn = x.node();
  return make_result(x.shape(), std::move(out), {xn}, [xn](Node& self) {
    if (!wants(xn)) return;
    xn->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      if (xn->data[i] > 0.0) xn->grad[i] += self.grad[i];
  });
}

Tensor sigmoid(const Tensor& x) {
  std::vector<double> out(x.numel());
  auto xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    double v = xd[i];
    out[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  NodePtr xn = x.node();
  Tensor t = make_result(x.shape(), std::move(out), {xn}, [xn](Node& self) {
    if (!wants(xn)) return;
    xn->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      double y = self.data[i];
      xn->grad[i] += self.grad[i] * y * (1.0 - y);
    }
  });
  return t;
}

Tensor tanh_op(const Tensor& x) {
  std::vector<double> out(x.numel());
  auto xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(xd[i]);
  NodePtr xn = x.node();
  return make_result(x.shape(), std::move(out), {xn}, [xn](Node& self) {
    if (!wants(xn)) return;
    xn->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      double y = self.data[i];
      xn->grad[i] += self.grad[i] * (1.0 - y * y);
    }
  });
}

Tensor log_op(const Tensor& x) {
  std::vector<double> out(x.numel());
  auto xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    require(xd[i] > 0.0, "log: input must be strictly positive");
    out[i] = std::log(xd[i]);
  }
  NodePtr xn = x.node();
  return make_result(x.shape(), std::move(out), {xn}, [xn](Node& self) {
    if (!wants(xn)) return;
    xn->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += self.grad[i] / xn->data[i];
  });
}

Tensor activation(const std::string& name, const Tensor& x) {
  if (name == "relu") return relu(x);
  if (name == "sigmoid") return sigmoid(x);
  if (name == "log") return log_op(x);
  if (name == "tanh") return tanh_op(x);
  throw Error("activation: unknown op " + name);
}

// ---- reductions / losses --------------------------------------------------------

Tensor reduce_mean(const Tensor& x, const std::vector<std::size_t>& axes) {
  const Shape& sh = x.shape();
  require(!axes.empty(), "reduce_mean: no axes given");
  std::vector<bool> reduced(sh.size(), false);
  std::size_t n_reduced = 1;
  for (std::size_t a : axes) {
    require(a < sh.size(), "reduce_mean: axis out of range");
    require(!reduced[a], "reduce_mean: duplicate axis");
    require(sh[a] > 0, "reduce_mean: empty axis");
    reduced[a] = true;
    n_reduced *= sh[a];
  }
  Shape out_shape;
  for (std::size_t i = 0; i < sh.size(); ++i)
    if (!reduced[i]) out_shape.push_back(sh[i]);
  if (out_shape.empty()) out_shape = {1};

  // Row-major strides of the input and of the (kept-axes) output.
  std::vector<std::size_t> in_stride(sh.size(), 1);
  for (std::size_t i = sh.size(); i-- > 1;) in_stride[i - 1] = in_stride[i] * sh[i];
  std::size_t out_numel = shape_numel(out_shape);
  std::vector<double> out(out_numel, 0.0);

  // For each input element, its flat output index.
  std::vector<std::size_t> out_index(x.numel());
  for (std::size_t flat = 0; flat < x.numel(); ++flat) {
    std::size_t rem = flat, oi = 0;
    for (std::size_t axis = 0; axis < sh.size(); ++axis) {
      std::size_t coord = rem / in_stride[axis];
      rem %= in_stride[axis];
      if (!reduced[axis]) oi = oi * sh[axis] + coord;
    }
    out_index[flat] = oi;
  }
  auto xd = x.data();
  for (std::size_t flat = 0; flat < x.numel(); ++flat) out[out_index[flat]] += xd[flat];
  double inv = 1.0 / static_cast<double>(n_reduced);
  for (double& v : out) v *= inv;

  NodePtr xn = x.node();
  auto idx = std::make_shared<std::vector<std::size_t>>(std::move(out_index));
  return make_result(std::move(out_shape), std::move(out), {xn}, [xn, idx, inv](Node& self) {
    if (!wants(xn)) return;
    xn->ensure_grad();
    for (std::size_t flat = 0; flat < xn->data.size(); ++flat)
      xn->grad[flat] += self.grad[(*idx)[flat]] * inv;
  });
}

Tensor mean_all(const Tensor& x) {
  std::vector<std::size_t> axes(x.shape().size());
  for (std::size_t i = 0; i < axes.size(); ++i) axes[i] = i;
  return reduce_mean(x, axes);
}

Tensor sum_all(const Tensor& x) { return scale(mean_all(x), static_cast<double>(x.numel())); }

Tensor l1_distance(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "l1_distance: shape mismatch");
  double acc = 0.0;
  auto ad = a.data(), bd = b.data();
  for (std::size_t i = 0; i < a.numel(); ++i) acc += std::abs(ad[i] - bd[i]);
  NodePtr an = a.node(), bn = b.node();
  return make_result({1}, {acc}, {an, bn}, [an, bn](Node& self) {
    double g = self.grad[0];
    for (std::size_t i = 0; i < an->data.size(); ++i) {
      double diff = an->data[i] - bn->data[i];
      double sgn = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);  // subgradient 0 at ties
      if (wants(an)) {
        an->ensure_grad();
        an->grad[i] += g * sgn;
      }
      if (wants(bn)) {
        bn->ensure_grad();
        bn->grad[i] -= g * sgn;
      }
    }
  });
}

Tensor bce_with_logits(const Tensor& logits, const Tensor& targets) {
  require(logits.shape() == targets.shape(), "bce_with_logits: shape mismatch");
  auto xd = logits.data(), td = targets.data();
  for (std::size_t i = 0; i < targets.numel(); ++i)
    require(td[i] == 0.0 || td[i] == 1.0, "bce_with_logits: targets must be binary");
  double acc = 0.0;
  std::size_t n = logits.numel();
  for (std::size_t i = 0; i < n; ++i) {
    double x = xd[i], t = td[i];
    acc += std::max(x, 0.0) - x * t + std::log1p(std::exp(-std::abs(x)));
  }
  acc /= static_cast<double>(n);
  NodePtr xn = logits.node(), tn = targets.node();
  return make_result({1}, {acc}, {xn, tn}, [xn, tn, n](Node& self) {
    if (!wants(xn)) return;
    xn->ensure_grad();
    double g = self.grad[0] / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      double x = xn->data[i];
      double p = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
      xn->grad[i] += g * (p - tn->data[i]);
    }
  });
}

// ---- structural ------------------------------------------------------------------

Tensor reshape(const Tensor& x, Shape shape) {
  require(shape_numel(shape) == x.numel(), "reshape: element count mismatch");
  std::vector<double> out(x.data().begin(), x.data().end());
  NodePtr xn = x.node();
  return make_result(std::move(shape), std::move(out), {xn}, [xn](Node& self) {
    if (!wants(xn)) return;
    xn->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += self.grad[i];
  });
}

Tensor slice_last(const Tensor& x, std::size_t start, std::size_t len) {
  const Shape& sh = x.shape();
  std::size_t L = sh.back();
  require(start + len <= L && len >= 1, "slice_last: range out of bounds");
  std::size_t rows = x.numel() / L;
  Shape out_shape = sh;
  out_shape.back() = len;
  std::vector<double> out(rows * len);
  auto xd = x.data();
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(&xd[r * L + start], len, &out[r * len]);
  NodePtr xn = x.node();
  return make_result(std::move(out_shape), std::move(out), {xn}, [xn, rows, L, start, len](Node& self) {
    if (!wants(xn)) return;
    xn->ensure_grad();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t i = 0; i < len; ++i) xn->grad[r * L + start + i] += self.grad[r * len + i];
  });
}

Tensor slice_channels(const Tensor& x, std::size_t c0, std::size_t c1) {
  require(x.shape().size() == 3, "slice_channels: expects [B,C,L]");
  std::size_t B = x.shape()[0], C = x.shape()[1], L = x.shape()[2];
  require(c0 < c1 && c1 <= C, "slice_channels: bad channel range");
  std::size_t Cn = c1 - c0;
  std::vector<double> out(B * Cn * L);
  auto xd = x.data();
  for (std::size_t b = 0; b < B; ++b)
    std::copy_n(&xd[(b * C + c0) * L], Cn * L, &out[b * Cn * L]);
  NodePtr xn = x.node();
  return make_result({B, Cn, L}, std::move(out), {xn}, [xn, B, C, L, c0, Cn](Node& self) {
    if (!wants(xn)) return;
    xn->ensure_grad();
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t i = 0; i < Cn * L; ++i) xn->grad[(b * C + c0) * L + i] += self.grad[b * Cn * L + i];
  });
}

Tensor channel_bias_add(const Tensor& x, const Tensor& b) {
  require(x.shape().size() == 3, "channel_bias_add: expects [B,C,L]");
  std::size_t B = x.shape()[0], C = x.shape()[1], L = x.shape()[2];
  require(b.shape() == Shape{C}, "channel_bias_add: bias must be [C]");
  std::vector<double> out(x.data().begin(), x.data().end());
  auto bd = b.data();
  for (std::size_t bi = 0; bi < B; ++bi)
    for (std::size_t c = 0; c < C; ++c) {
      double v = bd[c];
      double* row = &out[(bi * C + c) * L];
      for (std::size_t i = 0; i < L; ++i) row[i] += v;
    }
  NodePtr xn = x.node(), bn = b.node();
  return make_result(x.shape(), std::move(out), {xn, bn}, [xn, bn, B, C, L](Node& self) {
    if (wants(xn)) {
      xn->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += self.grad[i];
    }
    if (wants(bn)) {
      bn->ensure_grad();
      for (std::size_t bi = 0; bi < B; ++bi)
        for (std::size_t c = 0; c < C; ++c) {
          const double* row = &self.grad[(bi * C + c) * L];
          double acc = 0.0;
          for (std::size_t i = 0; i < L; ++i) acc += row[i];
          bn->grad[c] += acc;
        }
    }
  });
}

Tensor concat_batch(const std::vector<Tensor>& xs) {
  require(!xs.empty(), "concat_batch: empty list");
  Shape item = xs[0].shape();
  std::size_t per = xs[0].numel() / item[0];
  std::size_t total_b = 0;
  for (const auto& t : xs) {
    require(t.shape().size() == item.size(), "concat_batch: rank mismatch");
    for (std::size_t i = 1; i < item.size(); ++i) require(t.shape()[i] == item[i], "concat_batch: trailing shape mismatch");
    total_b += t.shape()[0];
  }
  Shape out_shape = item;
  out_shape[0] = total_b;
  std::vector<double> out;
  out.reserve(total_b * per);
  for (const auto& t : xs) out.insert(out.end(), t.data().begin(), t.data().end());
  std::vector<NodePtr> parents;
  for (const auto& t : xs) parents.push_back(t.node());
  auto sizes = std::make_shared<std::vector<std::size_t>>();
  for (const auto& t : xs) sizes->push_back(t.numel());
  auto parents_copy = parents;
  return make_result(std::move(out_shape), std::move(out), std::move(parents), [parents_copy, sizes](Node& self) {
    std::size_t off = 0;
    for (std::size_t j = 0; j < parents_copy.size(); ++j) {
      const NodePtr& p = parents_copy[j];
      if (wants(p)) {
        p->ensure_grad();
        for (std::size_t i = 0; i < (*sizes)[j]; ++i) p->grad[i] += self.grad[off + i];
      }
      off += (*sizes)[j];
    }
  });
}

// ---- attack ops --------------------------------------------------------------------

Tensor delay_add(const Tensor& x, std::size_t delay, double attenuation) {
  std::size_t L = x.shape().back();
  require(delay < L, "delay_add: delay reaches past the signal");
  std::size_t rows = x.numel() / L;
  std::vector<double> out(x.data().begin(), x.data().end());
  auto xd = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    double* y = &out[r * L];
    const double* xr = &xd[r * L];
    for (std::size_t n = L; n-- > delay;) y[n] += attenuation * xr[n - delay];
  }
  NodePtr xn = x.node();
  return make_result(x.shape(), std::move(out), {xn}, [xn, rows, L, delay, attenuation](Node& self) {
    if (!wants(xn)) return;
    xn->ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      double* gx = &xn->grad[r * L];
      const double* g = &self.grad[r * L];
      for (std::size_t n = 0; n < L; ++n) {
        gx[n] += g[n];
        if (n + delay < L) gx[n] += attenuation * g[n + delay];
      }
    }
  });
}

Tensor dither_quantize(const Tensor& x, const std::vector<double>& noise, double lsb) {
  require(noise.size() == x.numel(), "dither_quantize: noise length mismatch");
  std::vector<double> out(x.numel());
  auto xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = std::round((xd[i] + noise[i]) / lsb) * lsb;
  NodePtr xn = x.node();
  // Straight-through: the quantizer has zero derivative almost everywhere,
  // so the incoming gradient is passed unchanged.
  return make_result(x.shape(), std::move(out), {xn}, [xn](Node& self) {
    if (!wants(xn)) return;
    xn->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += self.grad[i];
  });
}

// ---- spectrogram ops -----------------------------------------------------------------

namespace {

struct StftBuffers {
  std::vector<double> re, im;
  std::size_t frames = 0, bins = 0;
};

std::shared_ptr<StftBuffers> stft_forward(std::span<const double> x, std::size_t window_len,
                                          std::size_t hop) {
  auto tables = dsp::dft_tables(window_len);
  auto buf = std::make_shared<StftBuffers>();
  buf->frames = dsp::stft_frames(x.size(), window_len, hop);
  buf->bins = tables->bins;
  buf->re.assign(buf->frames * buf->bins, 0.0);
  buf->im.assign(buf->frames * buf->bins, 0.0);
  for (std::size_t f = 0; f < buf->frames; ++f) {
    std::size_t start = f * hop;
    std::size_t avail = (start < x.size()) ? std::min(window_len, x.size() - start) : 0;
    for (std::size_t k = 0; k < buf->bins; ++k) {
      const double* cb = &tables->cos_basis[k * window_len];
      const double* sb = &tables->sin_basis[k * window_len];
      double re = 0.0, im = 0.0;
      for (std::size_t n = 0; n < avail; ++n) {
        re += cb[n] * x[start + n];
        im += sb[n] * x[start + n];
      }
      buf->re[f * buf->bins + k] = re;
      buf->im[f * buf->bins + k] = im;
    }
  }
  return buf;
}

// Scatter d(loss)/d(re,im) back to the signal.
void stft_backward(const StftBuffers& buf, const std::vector<double>& dre,
                   const std::vector<double>& dim, std::size_t window_len, std::size_t hop,
                   std::size_t L, std::span<double> gx) {
  auto tables = dsp::dft_tables(window_len);
  for (std::size_t f = 0; f < buf.frames; ++f) {
    std::size_t start = f * hop;
    std::size_t avail = (start < L) ? std::min(window_len, L - start) : 0;
    for (std::size_t k = 0; k < buf.bins; ++k) {
      double gr = dre[f * buf.bins + k];
      double gi = dim[f * buf.bins + k];
      if (gr == 0.0 && gi == 0.0) continue;
      const double* cb = &tables->cos_basis[k * window_len];
      const double* sb = &tables->sin_basis[k * window_len];
      for (std::size_t n = 0; n < avail; ++n) gx[start + n] += gr * cb[n] + gi * sb[n];
    }
  }
}

}  // namespace

Tensor stft_power(const Tensor& x, std::size_t window_len, std::size_t hop) {
  require(x.shape().size() == 1, "stft_power: expects a 1-D signal");
  require(hop > 0, "stft_power: hop must be positive");
  auto buf = stft_forward(x.data(), window_len, hop);
  std::vector<double> out(buf->frames * buf->bins);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = buf->re[i] * buf->re[i] + buf->im[i] * buf->im[i];
  NodePtr xn = x.node();
  std::size_t L = x.numel();
  return make_result({buf->frames, buf->bins}, std::move(out), {xn},
                     [xn, buf, window_len, hop, L](Node& self) {
                       if (!wants(xn)) return;
                       xn->ensure_grad();
                       std::vector<double> dre(buf->re.size()), dim(buf->im.size());
                       for (std::size_t i = 0; i < dre.size(); ++i) {
                         dre[i] = 2.0 * buf->re[i] * self.grad[i];
                         dim[i] = 2.0 * buf->im[i] * self.grad[i];
                       }
                       stft_backward(*buf, dre, dim, window_len, hop, L, xn->grad);
                     });
}

Tensor stft_log_magnitude(const Tensor& x, std::size_t window_len, std::size_t hop, double floor) {
  require(x.shape().size() == 1, "stft_log_magnitude: expects a 1-D signal");
  require(hop > 0, "stft_log_magnitude: hop must be positive");
  auto buf = stft_forward(x.data(), window_len, hop);
  auto mag = std::make_shared<std::vector<double>>(buf->re.size());
  std::vector<double> out(buf->re.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    (*mag)[i] = std::sqrt(buf->re[i] * buf->re[i] + buf->im[i] * buf->im[i]);
    out[i] = std::log((*mag)[i] + floor);
  }
  NodePtr xn = x.node();
  std::size_t L = x.numel();
  return make_result({buf->frames, buf->bins}, std::move(out), {xn},
                     [xn, buf, mag, window_len, hop, L, floor](Node& self) {
                       if (!wants(xn)) return;
                       xn->ensure_grad();
                       std::vector<double> dre(buf->re.size()), dim(buf->im.size());
                       for (std::size_t i = 0; i < dre.size(); ++i) {
                         double m = (*mag)[i];
                         double dm = self.grad[i] / (m + floor);
                         double inv = m > 0.0 ? dm / m : 0.0;
                         dre[i] = inv * buf->re[i];
                         dim[i] = inv * buf->im[i];
                       }
                       stft_backward(*buf, dre, dim, window_len, hop, L, xn->grad);
                     });
}

Tensor mel_compress(const Tensor& power, const dsp::MelFilterbank& fb) {
  require(power.shape().size() == 2, "mel_compress: expects [frames, bins]");
  std::size_t F = power.shape()[0], K = power.shape()[1];
  require(K == fb.bins, "mel_compress: filterbank bins (" + std::to_string(fb.bins) +
                            ") do not match spectrogram bins (" + std::to_string(K) + ")");
  std::size_t M = fb.n_mels;
  auto acc = std::make_shared<std::vector<double>>(F * M, 0.0);
  auto pd = power.data();
  for (std::size_t f = 0; f < F; ++f)
    for (std::size_t m = 0; m < M; ++m) {
      const double* w = &fb.weights[m * K];
      const double* row = &pd[f * K];
      double s = 0.0;
      for (std::size_t k = 0; k < K; ++k) s += w[k] * row[k];
      (*acc)[f * M + m] = s;
    }
  std::vector<double> out(F * M);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log1p((*acc)[i]);
  NodePtr pn = power.node();
  auto weights = std::make_shared<std::vector<double>>(fb.weights);
  return make_result({F, M}, std::move(out), {pn}, [pn, acc, weights, F, M, K](Node& self) {
    if (!wants(pn)) return;
    pn->ensure_grad();
    for (std::size_t f = 0; f < F; ++f)
      for (std::size_t m = 0; m < M; ++m) {
        double g = self.grad[f * M + m] / (1.0 + (*acc)[f * M + m]);
        if (g == 0.0) continue;
        const double* w = &(*weights)[m * K];
        double* gp = &pn->grad[f * K];
        for (std::size_t k = 0; k < K; ++k) gp[k] += g * w[k];
      }
  });
}

}  // namespace solido
