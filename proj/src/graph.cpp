#include "trajlm/graph.hpp"

#include <cmath>

#include "trajlm/errors.hpp"
#include "trajlm/kernels.hpp"

namespace trajlm::ad {

namespace {

void check_same_graph(Value a, Value b) {
  if (a.graph != b.graph) throw ConfigError("op spans two graphs");
}

double gelu_fwd(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

double gelu_deriv(double x) {
  return 0.5 * (1.0 + std::erf(x * M_SQRT1_2)) +
         x * std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
}

}  // namespace

Value Graph::input(Tensor t, bool requires_grad) {
  Node n;
  n.value = std::move(t);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Value{this, static_cast<int>(nodes_.size()) - 1};
}

const Tensor& Graph::val(Value v) const { return nodes_[v.id].value; }

const Tensor& Graph::grad(Value v) {
  return grad_buf(v.id);
}

Tensor& Graph::grad_buf(int id) {
  Node& n = nodes_[id];
  if (!n.grad_alloc) {
    n.grad = Tensor::zeros(n.value.shape());
    n.grad_alloc = true;
  }
  return n.grad;
}

bool Graph::grad_allocated(int id) const { return nodes_[id].grad_alloc; }

bool Graph::needs_grad(Value v) const { return nodes_[v.id].requires_grad; }

void Graph::accumulate(int id, const Tensor& contrib) {
  if (!nodes_[id].requires_grad) return;
  grad_buf(id).add_scaled(contrib, 1.0);
}

Value Graph::make(Tensor out, const std::vector<Value>& parents, BackwardFn fn) {
  Node n;
  n.value = std::move(out);
  for (Value p : parents) {
    if (p.graph != this) throw ConfigError("op parent from another graph");
    if (nodes_[p.id].requires_grad) n.requires_grad = true;
  }
  if (n.requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Value{this, static_cast<int>(nodes_.size()) - 1};
}

void Graph::backward(Value loss) {
  if (loss.graph != this) throw ConfigError("backward: loss from another graph");
  if (nodes_[loss.id].value.numel() != 1) {
    throw ConfigError("backward: loss must be scalar, got shape " +
                      nodes_[loss.id].value.shape_str());
  }
  grad_buf(loss.id)[0] = 1.0;
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.requires_grad || !n.backward || !n.grad_alloc) continue;
    n.backward(*this, id);
  }
}

// ---------------------------------------------------------------------------
// Matrix products

Value matmul(Value a, Value b) {
  check_same_graph(a, b);
  Graph& g = *a.graph;
  const Tensor& ta = g.val(a);
  const Tensor& tb = g.val(b);
  if (ta.cols() != tb.rows()) {
    throw ConfigError("matmul: " + ta.shape_str() + " x " + tb.shape_str());
  }
  const std::size_t m = ta.rows(), k = ta.cols(), n = tb.cols();
  Tensor out({m, n});
  kern::matmul(ta.data(), tb.data(), out.data(), m, k, n);
  const int ia = a.id, ib = b.id;
  return g.make(std::move(out), {a, b}, [ia, ib, m, k, n](Graph& gg, int self) {
    const Tensor& go = gg.grad_buf(self);
    if (gg.needs_grad(Value{&gg, ia})) {
      Tensor da({m, k});
      kern::matmul_nt(go.data(), gg.node_val(ib).data(), da.data(), m, n, k);
      gg.accumulate(ia, da);
    }
    if (gg.needs_grad(Value{&gg, ib})) {
      Tensor db({k, n});
      kern::matmul_tn(gg.node_val(ia).data(), go.data(), db.data(), k, m, n);
      gg.accumulate(ib, db);
    }
  });
}

Value matmul_nt(Value a, Value b) {
  check_same_graph(a, b);
  Graph& g = *a.graph;
  const Tensor& ta = g.val(a);
  const Tensor& tb = g.val(b);
  if (ta.cols() != tb.cols()) {
    throw ConfigError("matmul_nt: " + ta.shape_str() + " x " + tb.shape_str() + "^T");
  }
  const std::size_t m = ta.rows(), k = ta.cols(), n = tb.rows();
  Tensor out({m, n});
  kern::matmul_nt(ta.data(), tb.data(), out.data(), m, k, n);
  const int ia = a.id, ib = b.id;
  return g.make(std::move(out), {a, b}, [ia, ib, m, k, n](Graph& gg, int self) {
    const Tensor& go = gg.grad_buf(self);
    if (gg.needs_grad(Value{&gg, ia})) {
      Tensor da({m, k});
      kern::matmul(go.data(), gg.node_val(ib).data(), da.data(), m, n, k);
      gg.accumulate(ia, da);
    }
    if (gg.needs_grad(Value{&gg, ib})) {
      Tensor db({n, k});
      kern::matmul_tn(go.data(), gg.node_val(ia).data(), db.data(), n, m, k);
      gg.accumulate(ib, db);
    }
  });
}

Value matmul_tn(Value a, Value b) {
  check_same_graph(a, b);
  Graph& g = *a.graph;
  const Tensor& ta = g.val(a);
  const Tensor& tb = g.val(b);
  if (ta.rows() != tb.rows()) {
    throw ConfigError("matmul_tn: " + ta.shape_str() + "^T x " + tb.shape_str());
  }
  const std::size_t k = ta.rows(), m = ta.cols(), n = tb.cols();
  Tensor out({m, n});
  kern::matmul_tn(ta.data(), tb.data(), out.data(), m, k, n);
  const int ia = a.id, ib = b.id;
  return g.make(std::move(out), {a, b}, [ia, ib, m, k, n](Graph& gg, int self) {
    const Tensor& go = gg.grad_buf(self);
    if (gg.needs_grad(Value{&gg, ia})) {
      Tensor da({k, m});
      kern::matmul_nt(gg.node_val(ib).data(), go.data(), da.data(), k, n, m);
      gg.accumulate(ia, da);
    }
    if (gg.needs_grad(Value{&gg, ib})) {
      Tensor db({k, n});
      kern::matmul(gg.node_val(ia).data(), go.data(), db.data(), k, m, n);
      gg.accumulate(ib, db);
    }
  });
}

// ---------------------------------------------------------------------------
// Elementwise

Value add(Value a, Value b) {
  check_same_graph(a, b);
  Graph& g = *a.graph;
  const Tensor& ta = g.val(a);
  const Tensor& tb = g.val(b);
  if (!ta.same_shape(tb)) throw ConfigError("add: " + ta.shape_str() + " vs " + tb.shape_str());
  Tensor out = ta;
  out.add_scaled(tb, 1.0);
  const int ia = a.id, ib = b.id;
  return g.make(std::move(out), {a, b}, [ia, ib](Graph& gg, int self) {
    gg.accumulate(ia, gg.grad_buf(self));
    gg.accumulate(ib, gg.grad_buf(self));
  });
}

Value sub(Value a, Value b) {
  check_same_graph(a, b);
  Graph& g = *a.graph;
  const Tensor& ta = g.val(a);
  const Tensor& tb = g.val(b);
  if (!ta.same_shape(tb)) throw ConfigError("sub: " + ta.shape_str() + " vs " + tb.shape_str());
  Tensor out = ta;
  out.add_scaled(tb, -1.0);
  const int ia = a.id, ib = b.id;
  return g.make(std::move(out), {a, b}, [ia, ib](Graph& gg, int self) {
    const Tensor& go = gg.grad_buf(self);
    gg.accumulate(ia, go);
    if (gg.needs_grad(Value{&gg, ib})) {
      Tensor neg = go;
      for (std::size_t i = 0; i < neg.numel(); ++i) neg[i] = -neg[i];
      gg.accumulate(ib, neg);
    }
  });
}

Value mul(Value a, Value b) {
  check_same_graph(a, b);
  Graph& g = *a.graph;
  const Tensor& ta = g.val(a);
  const Tensor& tb = g.val(b);
  if (!ta.same_shape(tb)) throw ConfigError("mul: " + ta.shape_str() + " vs " + tb.shape_str());
  Tensor out = ta;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= tb[i];
  const int ia = a.id, ib = b.id;
  return g.make(std::move(out), {a, b}, [ia, ib](Graph& gg, int self) {
    const Tensor& go = gg.grad_buf(self);
    if (gg.needs_grad(Value{&gg, ia})) {
      Tensor da = go;
      const Tensor& tb2 = gg.node_val(ib);
      for (std::size_t i = 0; i < da.numel(); ++i) da[i] *= tb2[i];
      gg.accumulate(ia, da);
    }
    if (gg.needs_grad(Value{&gg, ib})) {
      Tensor db = go;
      const Tensor& ta2 = gg.node_val(ia);
      for (std::size_t i = 0; i < db.numel(); ++i) db[i] *= ta2[i];
      gg.accumulate(ib, db);
    }
  });
}

Value scale(Value a, double s) {
  Graph& g = *a.graph;
  Tensor out = g.val(a);
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= s;
  const int ia = a.id;
  return g.make(std::move(out), {a}, [ia, s](Graph& gg, int self) {
    Tensor da = gg.grad_buf(self);
    for (std::size_t i = 0; i < da.numel(); ++i) da[i] *= s;
    gg.accumulate(ia, da);
  });
}

Value add_rowvec(Value a, Value row) {
  check_same_graph(a, row);
  Graph& g = *a.graph;
  const Tensor& ta = g.val(a);
  const Tensor& tr = g.val(row);
  const std::size_t m = ta.rows(), n = ta.cols();
  if (tr.rows() != 1 || tr.cols() != n) {
    throw ConfigError("add_rowvec: " + ta.shape_str() + " + " + tr.shape_str());
  }
  Tensor out = ta;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) += tr[j];
  const int ia = a.id, ir = row.id;
  return g.make(std::move(out), {a, row}, [ia, ir, m, n](Graph& gg, int self) {
    const Tensor& go = gg.grad_buf(self);
    gg.accumulate(ia, go);
    if (gg.needs_grad(Value{&gg, ir})) {
      Tensor dr({1, n});
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) dr[j] += go(i, j);
      gg.accumulate(ir, dr);
    }
  });
}

Value gelu(Value a) {
  Graph& g = *a.graph;
  const Tensor& ta = g.val(a);
  Tensor out = ta;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = gelu_fwd(out[i]);
  const int ia = a.id;
  return g.make(std::move(out), {a}, [ia](Graph& gg, int self) {
    const Tensor& go = gg.grad_buf(self);
    const Tensor& x = gg.node_val(ia);
    Tensor da = go;
    for (std::size_t i = 0; i < da.numel(); ++i) da[i] *= gelu_deriv(x[i]);
    gg.accumulate(ia, da);
  });
}

Value sigmoid(Value a) {
  Graph& g = *a.graph;
  Tensor out = g.val(a);
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = 1.0 / (1.0 + std::exp(-out[i]));
  const int ia = a.id;
  return g.make(std::move(out), {a}, [ia](Graph& gg, int self) {
    const Tensor& go = gg.grad_buf(self);
    const Tensor& y = gg.node_val(self);
    Tensor da = go;
    for (std::size_t i = 0; i < da.numel(); ++i) da[i] *= y[i] * (1.0 - y[i]);
    gg.accumulate(ia, da);
  });
}

Value softmax_rows(Value a, const Tensor* mask) {
  Graph& g = *a.graph;
  const Tensor& ta = g.val(a);
  const std::size_t m = ta.rows(), n = ta.cols();
  if (mask && !mask->same_shape(ta)) {
    throw ConfigError("softmax mask shape " + mask->shape_str() + " vs " + ta.shape_str());
  }
  Tensor out({m, n});
  kern::softmax_rows(ta.data(), mask ? mask->data() : nullptr, out.data(), m, n);
  const int ia = a.id;
  return g.make(std::move(out), {a}, [ia, m, n](Graph& gg, int self) {
    const Tensor& go = gg.grad_buf(self);
    const Tensor& y = gg.node_val(self);
    Tensor da({m, n});
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += go(i, j) * y(i, j);
      for (std::size_t j = 0; j < n; ++j) da(i, j) = y(i, j) * (go(i, j) - dot);
    }
    gg.accumulate(ia, da);
  });
}

Value layer_norm_rows(Value x, Value gain, Value bias, double eps) {
  check_same_graph(x, gain);
  check_same_graph(x, bias);
  Graph& g = *x.graph;
  const Tensor& tx = g.val(x);
  const Tensor& tg = g.val(gain);
  const Tensor& tb = g.val(bias);
  const std::size_t m = tx.rows(), n = tx.cols();
  if (tg.cols() != n || tb.cols() != n) throw ConfigError("layer_norm: param width mismatch");

  Tensor xhat({m, n});
  Tensor inv_std({m, 1});
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += tx(i, j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = tx(i, j) - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std(i, 0) = inv;
    for (std::size_t j = 0; j < n; ++j) {
      xhat(i, j) = (tx(i, j) - mean) * inv;
      out(i, j) = xhat(i, j) * tg[j] + tb[j];
    }
  }
  const int ix = x.id, ig = gain.id, ib = bias.id;
  return g.make(std::move(out), {x, gain, bias},
                [ix, ig, ib, m, n, xhat, inv_std](Graph& gg, int self) {
    const Tensor& go = gg.grad_buf(self);
    const Tensor& tg2 = gg.node_val(ig);
    if (gg.needs_grad(Value{&gg, ix})) {
      Tensor dx({m, n});
      for (std::size_t i = 0; i < m; ++i) {
        double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          const double dxh = go(i, j) * tg2[j];
          mean_dxhat += dxh;
          mean_dxhat_xhat += dxh * xhat(i, j);
        }
        mean_dxhat /= static_cast<double>(n);
        mean_dxhat_xhat /= static_cast<double>(n);
        for (std::size_t j = 0; j < n; ++j) {
          const double dxh = go(i, j) * tg2[j];
          dx(i, j) = inv_std(i, 0) * (dxh - mean_dxhat - xhat(i, j) * mean_dxhat_xhat);
        }
      }
      gg.accumulate(ix, dx);
    }
    if (gg.needs_grad(Value{&gg, ig})) {
      Tensor dg({1, n});
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) dg[j] += go(i, j) * xhat(i, j);
      gg.accumulate(ig, dg);
    }
    if (gg.needs_grad(Value{&gg, ib})) {
      Tensor db({1, n});
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) db[j] += go(i, j);
      gg.accumulate(ib, db);
    }
  });
}

// ---------------------------------------------------------------------------
// Shape ops

Value concat_cols(Value a, Value b) {
  check_same_graph(a, b);
  Graph& g = *a.graph;
  const Tensor& ta = g.val(a);
  const Tensor& tb = g.val(b);
  if (ta.rows() != tb.rows()) {
    throw ConfigError("concat_cols: " + ta.shape_str() + " | " + tb.shape_str());
  }
  const std::size_t m = ta.rows(), p = ta.cols(), q = tb.cols();
  Tensor out({m, p + q});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < p; ++j) out(i, j) = ta(i, j);
    for (std::size_t j = 0; j < q; ++j) out(i, p + j) = tb(i, j);
  }
  const int ia = a.id, ib = b.id;
  return g.make(std::move(out), {a, b}, [ia, ib, m, p, q](Graph& gg, int self) {
    const Tensor& go = gg.grad_buf(self);
    if (gg.needs_grad(Value{&gg, ia})) {
      Tensor da({m, p});
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < p; ++j) da(i, j) = go(i, j);
      gg.accumulate(ia, da);
    }
    if (gg.needs_grad(Value{&gg, ib})) {
      Tensor db({m, q});
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < q; ++j) db(i, j) = go(i, p + j);
      gg.accumulate(ib, db);
    }
  });
}

Value concat_rows(Value a, Value b) {
  check_same_graph(a, b);
  Graph& g = *a.graph;
  const Tensor& ta = g.val(a);
  const Tensor& tb = g.val(b);
  if (ta.cols() != tb.cols()) {
    throw ConfigError("concat_rows: " + ta.shape_str() + " / " + tb.shape_str());
  }
  const std::size_t p = ta.rows(), q = tb.rows(), n = ta.cols();
  Tensor out({p + q, n});
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) = ta(i, j);
  for (std::size_t i = 0; i < q; ++i)
    for (std::size_t j = 0; j < n; ++j) out(p + i, j) = tb(i, j);
  const int ia = a.id, ib = b.id;
  return g.make(std::move(out), {a, b}, [ia, ib, p, q, n](Graph& gg, int self) {
    const Tensor& go = gg.grad_buf(self);
    if (gg.needs_grad(Value{&gg, ia})) {
      Tensor da({p, n});
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < n; ++j) da(i, j) = go(i, j);
      gg.accumulate(ia, da);
    }
    if (gg.needs_grad(Value{&gg, ib})) {
      Tensor db({q, n});
      for (std::size_t i = 0; i < q; ++i)
        for (std::size_t j = 0; j < n; ++j) db(i, j) = go(p + i, j);
      gg.accumulate(ib, db);
    }
  });
}

Value slice_rows(Value a, std::size_t r0, std::size_t r1) {
  Graph& g = *a.graph;
  const Tensor& ta = g.val(a);
  if (r1 > ta.rows() || r0 >= r1) throw ConfigError("slice_rows: bad range");
  const std::size_t n = ta.cols(), m = r1 - r0;
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) = ta(r0 + i, j);
  const int ia = a.id;
  const std::size_t rows_a = ta.rows();
  return g.make(std::move(out), {a}, [ia, r0, m, n, rows_a](Graph& gg, int self) {
    const Tensor& go = gg.grad_buf(self);
    Tensor da({rows_a, n});
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) da(r0 + i, j) = go(i, j);
    gg.accumulate(ia, da);
  });
}

Value slice_cols(Value a, std::size_t c0, std::size_t c1) {
  Graph& g = *a.graph;
  const Tensor& ta = g.val(a);
  if (c1 > ta.cols() || c0 >= c1) throw ConfigError("slice_cols: bad range");
  const std::size_t m = ta.rows(), n = c1 - c0;
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) = ta(i, c0 + j);
  const int ia = a.id;
  const std::size_t cols_a = ta.cols();
  return g.make(std::move(out), {a}, [ia, c0, m, n, cols_a](Graph& gg, int self) {
    const Tensor& go = gg.grad_buf(self);
    Tensor da({m, cols_a});
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) da(i, c0 + j) = go(i, j);
    gg.accumulate(ia, da);
  });
}

Value reshape(Value a, std::vector<std::size_t> shape) {
  Graph& g = *a.graph;
  Tensor out = g.val(a).reshaped(shape);
  const int ia = a.id;
  const std::vector<std::size_t> orig = g.val(a).shape();
  return g.make(std::move(out), {a}, [ia, orig](Graph& gg, int self) {
    gg.accumulate(ia, gg.grad_buf(self).reshaped(orig));
  });
}

Value mean_rows(Value a) {
  Graph& g = *a.graph;
  const Tensor& ta = g.val(a);
  const std::size_t m = ta.rows(), n = ta.cols();
  Tensor out({1, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j] += ta(i, j);
  for (std::size_t j = 0; j < n; ++j) out[j] /= static_cast<double>(m);
  const int ia = a.id;
  return g.make(std::move(out), {a}, [ia, m, n](Graph& gg, int self) {
    const Tensor& go = gg.grad_buf(self);
    Tensor da({m, n});
    const double inv = 1.0 / static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) da(i, j) = go[j] * inv;
    gg.accumulate(ia, da);
  });
}

Value mean_all(Value a) {
  Graph& g = *a.graph;
  const Tensor& ta = g.val(a);
  const std::size_t count = ta.numel();
  Tensor out({1, 1});
  for (std::size_t i = 0; i < count; ++i) out[0] += ta[i];
  out[0] /= static_cast<double>(count);
  const int ia = a.id;
  const std::vector<std::size_t> shape = ta.shape();
  return g.make(std::move(out), {a}, [ia, count, shape](Graph& gg, int self) {
    const double go = gg.grad_buf(self)[0] / static_cast<double>(count);
    Tensor da(shape);
    for (std::size_t i = 0; i < count; ++i) da[i] = go;
    gg.accumulate(ia, da);
  });
}

Value conv2d(Value x, Value w, Value b, std::size_t stride, std::size_t pad) {
  check_same_graph(x, w);
  check_same_graph(x, b);
  Graph& g = *x.graph;
  const Tensor& tx = g.val(x);
  const Tensor& tw = g.val(w);
  const Tensor& tb = g.val(b);
  if (tx.ndim() != 3 || tw.ndim() != 4 || tb.ndim() != 1) {
    throw ConfigError("conv2d: need x{C,H,W}, w{O,C,Kh,Kw}, b{O}");
  }
  const std::size_t ci = tx.shape()[0], h = tx.shape()[1], wd = tx.shape()[2];
  const std::size_t co = tw.shape()[0], kh = tw.shape()[2], kw = tw.shape()[3];
  if (tw.shape()[1] != ci || tb.shape()[0] != co) {
    throw ConfigError("conv2d: kernel " + tw.shape_str() + " does not match input " +
                      tx.shape_str());
  }
  const std::size_t ho = kern::conv_out_dim(h, kh, stride, pad);
  const std::size_t wo = kern::conv_out_dim(wd, kw, stride, pad);
  Tensor out({co, ho, wo});
  kern::conv2d_forward(tx.data(), ci, h, wd, tw.data(), tb.data(), co, kh, kw, stride, pad,
                       out.data());
  const int ix = x.id, iw = w.id, ib = b.id;
  return g.make(std::move(out), {x, w, b},
                [ix, iw, ib, ci, h, wd, co, kh, kw, stride, pad](Graph& gg, int self) {
    const Tensor& go = gg.grad_buf(self);
    if (gg.needs_grad(Value{&gg, iw}) || gg.needs_grad(Value{&gg, ib})) {
      Tensor gwk({co, ci, kh, kw});
      Tensor gb({co});
      kern::conv2d_grad_w(go.data(), gg.node_val(ix).data(), ci, h, wd, co, kh, kw, stride, pad,
                          gwk.data(), gb.data());
      gg.accumulate(iw, gwk);
      gg.accumulate(ib, gb);
    }
    if (gg.needs_grad(Value{&gg, ix})) {
      Tensor gx({ci, h, wd});
      kern::conv2d_grad_x(go.data(), gg.node_val(iw).data(), ci, h, wd, co, kh, kw, stride, pad,
                          gx.data());
      gg.accumulate(ix, gx);
    }
  });
}

Value chw_to_tokens(Value x) {
  Graph& g = *x.graph;
  const Tensor& tx = g.val(x);
  if (tx.ndim() != 3) throw ConfigError("chw_to_tokens: need {C,H,W}");
  const std::size_t c = tx.shape()[0], h = tx.shape()[1], w = tx.shape()[2];
  Tensor out({h * w, c});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t xx = 0; xx < w; ++xx) out(y * w + xx, ch) = tx.at3(ch, y, xx);
  const int ix = x.id;
  return g.make(std::move(out), {x}, [ix, c, h, w](Graph& gg, int self) {
    const Tensor& go = gg.grad_buf(self);
    Tensor dx({c, h, w});
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t xx = 0; xx < w; ++xx) dx.at3(ch, y, xx) = go(y * w + xx, ch);
    gg.accumulate(ix, dx);
  });
}

Value huber(Value a, double delta) {
  Graph& g = *a.graph;
  Tensor out = g.val(a);
  for (std::size_t i = 0; i < out.numel(); ++i) {
    const double v = out[i];
    out[i] = std::fabs(v) <= delta ? 0.5 * v * v : delta * (std::fabs(v) - 0.5 * delta);
  }
  const int ia = a.id;
  return g.make(std::move(out), {a}, [ia, delta](Graph& gg, int self) {
    const Tensor& go = gg.grad_buf(self);
    const Tensor& x = gg.node_val(ia);
    Tensor da = go;
    for (std::size_t i = 0; i < da.numel(); ++i) {
      const double v = x[i];
      da[i] *= std::fabs(v) <= delta ? v : (v > 0 ? delta : -delta);
    }
    gg.accumulate(ia, da);
  });
}

}  // namespace trajlm::ad
