#include "xview/graph.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "xview/errors.hpp"

namespace xview::num {

Var Graph::constant(Tensor v) {
  nodes_.emplace_back();
  Node& n = nodes_.back();
  n.value = std::move(v);
  n.needs_grad = false;
  return &n;
}

Var Graph::leaf(Tensor v, bool needs_grad) {
  nodes_.emplace_back();
  Node& n = nodes_.back();
  n.value = std::move(v);
  n.needs_grad = needs_grad;
  return &n;
}

Var Graph::param(ParamSet& ps, const std::string& name) {
  auto it = param_cache_.find(name);
  if (it != param_cache_.end()) return it->second;
  int idx = ps.find(name);
  if (idx < 0) throw ConfigError("graph: unknown parameter '" + name + "'");
  Var n = leaf(ps.entry(idx).value, true);
  n->bound_params = &ps;
  n->bound_index = idx;
  param_cache_[name] = n;
  return n;
}

Var Graph::make(Tensor value, std::vector<Var> parents, std::function<void(Node&)> back) {
  nodes_.emplace_back();
  Node& n = nodes_.back();
  n.value = std::move(value);
  n.parents = std::move(parents);
  for (Var p : n.parents)
    if (p->needs_grad) n.needs_grad = true;
  if (n.needs_grad) n.backfn = std::move(back);
  return &n;
}

void Graph::accum(Node* n, const Tensor& g) {
  if (!n->needs_grad) return;
  if (!n->grad_alloc) {
    n->grad = Tensor::zeros(n->value.shape);
    n->grad_alloc = true;
  }
  t_axpy(n->grad, 1.0, g);
}

void Graph::backward(Var loss) {
  if (swept_) throw NumericError("graph: backward called twice");
  swept_ = true;
  if (loss->value.numel() != 1) throw ShapeError("backward: loss must be scalar");
  loss->grad = Tensor::full(loss->value.shape, 1.0);
  loss->grad_alloc = true;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node& n = *it;
    if (!n.grad_alloc || !n.needs_grad) continue;
    if (n.backfn) n.backfn(n);
  }
  for (auto& n : nodes_) {
    if (n.bound_params && n.grad_alloc)
      t_axpy(n.bound_params->entry(n.bound_index).grad, 1.0, n.grad);
  }
}

// ---- ops ----

Var matmul(Graph& g, Var a, Var b) {
  if (a->value.cols() != b->value.rows())
    throw ShapeError("matmul: " + a->value.shape_str() + " x " + b->value.shape_str());
  Tensor y = t_matmul(a->value, b->value);
  return g.make(std::move(y), {a, b}, [a, b](Node& n) {
    Graph::accum(a, t_matmul(n.grad, b->value, false, true));
    Graph::accum(b, t_matmul(a->value, n.grad, true, false));
  });
}

Var matmul_nt(Graph& g, Var a, Var b) {
  if (a->value.cols() != b->value.cols())
    throw ShapeError("matmul_nt: " + a->value.shape_str() + " x " + b->value.shape_str());
  Tensor y = t_matmul(a->value, b->value, false, true);
  return g.make(std::move(y), {a, b}, [a, b](Node& n) {
    Graph::accum(a, t_matmul(n.grad, b->value));
    Graph::accum(b, t_matmul(n.grad, a->value, true, false));
  });
}

Var add(Graph& g, Var a, Var b) {
  if (!a->value.same_shape(b->value))
    throw ShapeError("add: " + a->value.shape_str() + " vs " + b->value.shape_str());
  return g.make(t_add(a->value, b->value), {a, b}, [a, b](Node& n) {
    Graph::accum(a, n.grad);
    Graph::accum(b, n.grad);
  });
}

Var sub(Graph& g, Var a, Var b) {
  if (!a->value.same_shape(b->value))
    throw ShapeError("sub: " + a->value.shape_str() + " vs " + b->value.shape_str());
  return g.make(t_sub(a->value, b->value), {a, b}, [a, b](Node& n) {
    Graph::accum(a, n.grad);
    Graph::accum(b, t_scale(n.grad, -1.0));
  });
}

Var mul(Graph& g, Var a, Var b) {
  if (!a->value.same_shape(b->value))
    throw ShapeError("mul: " + a->value.shape_str() + " vs " + b->value.shape_str());
  Tensor y = a->value;
  for (size_t i = 0; i < y.data.size(); ++i) y.data[i] *= b->value.data[i];
  return g.make(std::move(y), {a, b}, [a, b](Node& n) {
    Tensor da = n.grad, db = n.grad;
    for (size_t i = 0; i < da.data.size(); ++i) {
      da.data[i] *= b->value.data[i];
      db.data[i] *= a->value.data[i];
    }
    Graph::accum(a, da);
    Graph::accum(b, db);
  });
}

Var mul_const(Graph& g, Var a, Tensor c) {
  if (!a->value.same_shape(c))
    throw ShapeError("mul_const: " + a->value.shape_str() + " vs " + c.shape_str());
  Tensor y = a->value;
  for (size_t i = 0; i < y.data.size(); ++i) y.data[i] *= c.data[i];
  auto cc = std::make_shared<Tensor>(std::move(c));
  return g.make(std::move(y), {a}, [a, cc](Node& n) {
    Tensor da = n.grad;
    for (size_t i = 0; i < da.data.size(); ++i) da.data[i] *= cc->data[i];
    Graph::accum(a, da);
  });
}

Var scale(Graph& g, Var a, double s) {
  return g.make(t_scale(a->value, s), {a},
                [a, s](Node& n) { Graph::accum(a, t_scale(n.grad, s)); });
}

Var add_rowvec(Graph& g, Var x, Var b) {
  const int cols = x->value.cols();
  if (b->value.numel() != cols)
    throw ShapeError("add_rowvec: " + x->value.shape_str() + " + " + b->value.shape_str());
  Tensor y = x->value;
  const int rows = x->value.rows();
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) y.at(i, j) += b->value.data[j];
  return g.make(std::move(y), {x, b}, [x, b, rows, cols](Node& n) {
    Graph::accum(x, n.grad);
    Tensor db = Tensor::zeros(b->value.shape);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) db.data[j] += n.grad.at(i, j);
    Graph::accum(b, db);
  });
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

Var gelu(Graph& g, Var x) {
  Tensor y = x->value;
  for (auto& v : y.data) {
    const double u = kGeluC * (v + kGeluA * v * v * v);
    v = 0.5 * v * (1.0 + std::tanh(u));
  }
  return g.make(std::move(y), {x}, [x](Node& n) {
    Tensor dx = n.grad;
    for (size_t i = 0; i < dx.data.size(); ++i) {
      const double v = x->value.data[i];
      const double u = kGeluC * (v + kGeluA * v * v * v);
      const double th = std::tanh(u);
      const double d = 0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * kGeluC * (1.0 + 3.0 * kGeluA * v * v);
      dx.data[i] *= d;
    }
    Graph::accum(x, dx);
  });
}

Var relu(Graph& g, Var x) {
  Tensor y = x->value;
  for (auto& v : y.data) v = v > 0.0 ? v : 0.0;
  return g.make(std::move(y), {x}, [x](Node& n) {
    Tensor dx = n.grad;
    for (size_t i = 0; i < dx.data.size(); ++i)
      if (x->value.data[i] <= 0.0) dx.data[i] = 0.0;
    Graph::accum(x, dx);
  });
}

Var sqrt_rows(Graph& g, Var x) {
  Tensor y = x->value;
  for (auto& v : y.data) v = std::sqrt(v);
  return g.make(std::move(y), {x}, [x](Node& n) {
    Tensor dx = n.grad;
    for (size_t i = 0; i < dx.data.size(); ++i) {
      const double s = std::sqrt(std::max(x->value.data[i], 1e-24));
      dx.data[i] *= 0.5 / s;
    }
    Graph::accum(x, dx);
  });
}

Var layer_norm(Graph& g, Var x, Var gain, Var bias, double eps) {
  const int rows = x->value.rows(), cols = x->value.cols();
  if (gain->value.numel() != cols || bias->value.numel() != cols)
    throw ShapeError("layer_norm: gain/bias vs " + x->value.shape_str());
  Tensor y({rows, cols});
  auto xhat = std::make_shared<Tensor>(Tensor({rows, cols}));
  auto istd = std::make_shared<std::vector<double>>(rows);
  for (int i = 0; i < rows; ++i) {
    double mu = 0.0;
    for (int j = 0; j < cols; ++j) mu += x->value.at(i, j);
    mu /= cols;
    double var = 0.0;
    for (int j = 0; j < cols; ++j) {
      const double d = x->value.at(i, j) - mu;
      var += d * d;
    }
    var /= cols;
    const double is = 1.0 / std::sqrt(var + eps);
    (*istd)[i] = is;
    for (int j = 0; j < cols; ++j) {
      const double xh = (x->value.at(i, j) - mu) * is;
      xhat->at(i, j) = xh;
      y.at(i, j) = gain->value.data[j] * xh + bias->value.data[j];
    }
  }
  return g.make(std::move(y), {x, gain, bias}, [x, gain, bias, xhat, istd, rows, cols](Node& n) {
    Tensor dx({rows, cols});
    Tensor dgain = Tensor::zeros(gain->value.shape);
    Tensor dbias = Tensor::zeros(bias->value.shape);
    for (int i = 0; i < rows; ++i) {
      double m1 = 0.0, m2 = 0.0;
      for (int j = 0; j < cols; ++j) {
        const double dxh = n.grad.at(i, j) * gain->value.data[j];
        m1 += dxh;
        m2 += dxh * xhat->at(i, j);
        dgain.data[j] += n.grad.at(i, j) * xhat->at(i, j);
        dbias.data[j] += n.grad.at(i, j);
      }
      m1 /= cols;
      m2 /= cols;
      for (int j = 0; j < cols; ++j) {
        const double dxh = n.grad.at(i, j) * gain->value.data[j];
        dx.at(i, j) = (*istd)[i] * (dxh - m1 - xhat->at(i, j) * m2);
      }
    }
    Graph::accum(x, dx);
    Graph::accum(gain, dgain);
    Graph::accum(bias, dbias);
  });
}

Var masked_softmax_rows(Graph& g, Var x, const std::vector<uint8_t>& col_valid) {
  const int rows = x->value.rows(), cols = x->value.cols();
  if (static_cast<int>(col_valid.size()) != cols)
    throw ShapeError("masked_softmax_rows: validity length vs " + x->value.shape_str());
  Tensor y({rows, cols});
  bool any_valid = false;
  for (auto v : col_valid) any_valid |= (v != 0);
  if (any_valid) {
    for (int i = 0; i < rows; ++i) {
      double mx = -1e300;
      for (int j = 0; j < cols; ++j)
        if (col_valid[j]) mx = std::max(mx, x->value.at(i, j));
      double z = 0.0;
      for (int j = 0; j < cols; ++j) {
        if (!col_valid[j]) continue;
        const double e = std::exp(x->value.at(i, j) - mx);
        y.at(i, j) = e;
        z += e;
      }
      for (int j = 0; j < cols; ++j)
        y.at(i, j) = col_valid[j] ? y.at(i, j) / z : 0.0;
    }
  }
  auto valid = std::make_shared<std::vector<uint8_t>>(col_valid);
  return g.make(std::move(y), {x}, [x, valid, rows, cols](Node& n) {
    Tensor dx = Tensor::zeros(x->value.shape);
    for (int i = 0; i < rows; ++i) {
      double s = 0.0;
      for (int j = 0; j < cols; ++j)
        if ((*valid)[j]) s += n.grad.at(i, j) * n.value.at(i, j);
      for (int j = 0; j < cols; ++j)
        if ((*valid)[j]) dx.at(i, j) = n.value.at(i, j) * (n.grad.at(i, j) - s);
    }
    Graph::accum(x, dx);
  });
}

Var masked_logsumexp_rows(Graph& g, Var x, Tensor mask) {
  const int rows = x->value.rows(), cols = x->value.cols();
  if (!x->value.same_shape(mask))
    throw ShapeError("masked_logsumexp_rows: mask vs " + x->value.shape_str());
  Tensor y({rows, 1});
  for (int i = 0; i < rows; ++i) {
    double mx = -1e300;
    bool any = false;
    for (int j = 0; j < cols; ++j)
      if (mask.at(i, j) != 0.0) {
        mx = std::max(mx, x->value.at(i, j));
        any = true;
      }
    if (!any) throw NumericError("masked_logsumexp_rows: empty row " + std::to_string(i));
    double z = 0.0;
    for (int j = 0; j < cols; ++j)
      if (mask.at(i, j) != 0.0) z += std::exp(x->value.at(i, j) - mx);
    y.at(i, 0) = mx + std::log(z);
  }
  auto mk = std::make_shared<Tensor>(std::move(mask));
  return g.make(std::move(y), {x}, [x, mk, rows, cols](Node& n) {
    Tensor dx = Tensor::zeros(x->value.shape);
    for (int i = 0; i < rows; ++i) {
      const double gi = n.grad.at(i, 0);
      const double li = n.value.at(i, 0);
      for (int j = 0; j < cols; ++j)
        if (mk->at(i, j) != 0.0) dx.at(i, j) = gi * std::exp(x->value.at(i, j) - li);
    }
    Graph::accum(x, dx);
  });
}

Var slice_rows(Graph& g, Var x, int from, int to) {
  const int rows = x->value.rows(), cols = x->value.cols();
  if (from < 0 || to > rows || from > to) throw ShapeError("slice_rows: bad range");
  Tensor y({to - from, cols});
  std::copy(x->value.data.begin() + static_cast<size_t>(from) * cols,
            x->value.data.begin() + static_cast<size_t>(to) * cols, y.data.begin());
  return g.make(std::move(y), {x}, [x, from, cols](Node& n) {
    Tensor dx = Tensor::zeros(x->value.shape);
    std::copy(n.grad.data.begin(), n.grad.data.end(),
              dx.data.begin() + static_cast<size_t>(from) * cols);
    Graph::accum(x, dx);
  });
}

Var slice_cols(Graph& g, Var x, int from, int to) {
  const int rows = x->value.rows(), cols = x->value.cols();
  if (from < 0 || to > cols || from > to) throw ShapeError("slice_cols: bad range");
  Tensor y({rows, to - from});
  for (int i = 0; i < rows; ++i)
    for (int j = from; j < to; ++j) y.at(i, j - from) = x->value.at(i, j);
  return g.make(std::move(y), {x}, [x, from, to, rows](Node& n) {
    Tensor dx = Tensor::zeros(x->value.shape);
    for (int i = 0; i < rows; ++i)
      for (int j = from; j < to; ++j) dx.at(i, j) = n.grad.at(i, j - from);
    Graph::accum(x, dx);
  });
}

Var concat_rows(Graph& g, const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: empty");
  const int cols = parts[0]->value.cols();
  int rows = 0;
  for (Var p : parts) {
    if (p->value.cols() != cols) throw ShapeError("concat_rows: column mismatch");
    rows += p->value.rows();
  }
  Tensor y({rows, cols});
  size_t off = 0;
  for (Var p : parts) {
    std::copy(p->value.data.begin(), p->value.data.end(), y.data.begin() + off);
    off += p->value.data.size();
  }
  auto ps = parts;
  return g.make(std::move(y), ps, [ps, cols](Node& n) {
    size_t off = 0;
    for (Var p : ps) {
      Tensor dp(p->value.shape);
      std::copy(n.grad.data.begin() + off, n.grad.data.begin() + off + p->value.data.size(),
                dp.data.begin());
      off += p->value.data.size();
      Graph::accum(p, dp);
    }
  });
}

Var concat_cols(Graph& g, const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: empty");
  const int rows = parts[0]->value.rows();
  int cols = 0;
  for (Var p : parts) {
    if (p->value.rows() != rows) throw ShapeError("concat_cols: row mismatch");
    cols += p->value.cols();
  }
  Tensor y({rows, cols});
  int coff = 0;
  for (Var p : parts) {
    const int pc = p->value.cols();
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < pc; ++j) y.at(i, coff + j) = p->value.at(i, j);
    coff += pc;
  }
  auto ps = parts;
  return g.make(std::move(y), ps, [ps, rows](Node& n) {
    int coff = 0;
    for (Var p : ps) {
      const int pc = p->value.cols();
      Tensor dp(p->value.shape);
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < pc; ++j) dp.at(i, j) = n.grad.at(i, coff + j);
      coff += pc;
      Graph::accum(p, dp);
    }
  });
}

Var gather_rows(Graph& g, Var table, std::vector<int> idx) {
  const int rows = table->value.rows(), cols = table->value.cols();
  for (int i : idx)
    if (i < 0 || i >= rows) throw ShapeError("gather_rows: index out of range");
  Tensor y({static_cast<int>(idx.size()), cols});
  for (size_t r = 0; r < idx.size(); ++r)
    for (int j = 0; j < cols; ++j) y.at(static_cast<int>(r), j) = table->value.at(idx[r], j);
  auto ix = std::make_shared<std::vector<int>>(std::move(idx));
  return g.make(std::move(y), {table}, [table, ix, cols](Node& n) {
    Tensor dt = Tensor::zeros(table->value.shape);
    for (size_t r = 0; r < ix->size(); ++r)
      for (int j = 0; j < cols; ++j) dt.at((*ix)[r], j) += n.grad.at(static_cast<int>(r), j);
    Graph::accum(table, dt);
  });
}

Var weighted_gather(Graph& g, Var table, std::vector<std::vector<BilinearTap>> taps) {
  const int rows = table->value.rows(), cols = table->value.cols();
  Tensor y({static_cast<int>(taps.size()), cols});
  for (size_t r = 0; r < taps.size(); ++r)
    for (const auto& t : taps[r]) {
      if (t.index < 0 || t.index >= rows) throw ShapeError("weighted_gather: index out of range");
      for (int j = 0; j < cols; ++j)
        y.at(static_cast<int>(r), j) += t.weight * table->value.at(t.index, j);
    }
  auto tp = std::make_shared<std::vector<std::vector<BilinearTap>>>(std::move(taps));
  return g.make(std::move(y), {table}, [table, tp, cols](Node& n) {
    Tensor dt = Tensor::zeros(table->value.shape);
    for (size_t r = 0; r < tp->size(); ++r)
      for (const auto& t : (*tp)[r])
        for (int j = 0; j < cols; ++j)
          dt.at(t.index, j) += t.weight * n.grad.at(static_cast<int>(r), j);
    Graph::accum(table, dt);
  });
}

Var segment_mean(Graph& g, Var x, std::vector<int> assign, int k) {
  const int rows = x->value.rows(), cols = x->value.cols();
  if (static_cast<int>(assign.size()) != rows) throw ShapeError("segment_mean: assignment length");
  std::vector<int> counts(k, 0);
  for (int a : assign) {
    if (a < 0 || a >= k) throw ShapeError("segment_mean: assignment out of range");
    counts[a]++;
  }
  for (int c : counts)
    if (c == 0) throw ShapeError("segment_mean: empty segment");
  Tensor y({k, cols});
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) y.at(assign[i], j) += x->value.at(i, j);
  for (int c = 0; c < k; ++c)
    for (int j = 0; j < cols; ++j) y.at(c, j) /= counts[c];
  auto as = std::make_shared<std::vector<int>>(std::move(assign));
  auto cnt = std::make_shared<std::vector<int>>(std::move(counts));
  return g.make(std::move(y), {x}, [x, as, cnt, rows, cols](Node& n) {
    Tensor dx({rows, cols});
    for (int i = 0; i < rows; ++i) {
      const int c = (*as)[i];
      for (int j = 0; j < cols; ++j) dx.at(i, j) = n.grad.at(c, j) / (*cnt)[c];
    }
    Graph::accum(x, dx);
  });
}

Var row_select(Graph& g, const std::vector<uint8_t>& take_a, Var a, Var b) {
  const int rows = a->value.rows(), cols = a->value.cols();
  const bool b_broadcast = b->value.rows() == 1;
  if (static_cast<int>(take_a.size()) != rows) throw ShapeError("row_select: mask length");
  if (b->value.cols() != cols || (!b_broadcast && b->value.rows() != rows))
    throw ShapeError("row_select: " + a->value.shape_str() + " vs " + b->value.shape_str());
  Tensor y({rows, cols});
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      y.at(i, j) = take_a[i] ? a->value.at(i, j) : b->value.at(b_broadcast ? 0 : i, j);
  auto mask = std::make_shared<std::vector<uint8_t>>(take_a);
  return g.make(std::move(y), {a, b}, [a, b, mask, rows, cols, b_broadcast](Node& n) {
    Tensor da = Tensor::zeros(a->value.shape);
    Tensor db = Tensor::zeros(b->value.shape);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) {
        if ((*mask)[i])
          da.at(i, j) = n.grad.at(i, j);
        else
          db.at(b_broadcast ? 0 : i, j) += n.grad.at(i, j);
      }
    Graph::accum(a, da);
    Graph::accum(b, db);
  });
}

Var broadcast_row(Graph& g, Var v, int n_rows) {
  const int cols = v->value.cols();
  if (v->value.rows() != 1) throw ShapeError("broadcast_row: source must be a single row");
  Tensor y({n_rows, cols});
  for (int i = 0; i < n_rows; ++i)
    for (int j = 0; j < cols; ++j) y.at(i, j) = v->value.data[j];
  return g.make(std::move(y), {v}, [v, n_rows, cols](Node& n) {
    Tensor dv = Tensor::zeros(v->value.shape);
    for (int i = 0; i < n_rows; ++i)
      for (int j = 0; j < cols; ++j) dv.data[j] += n.grad.at(i, j);
    Graph::accum(v, dv);
  });
}

Var masked_mean_rows(Graph& g, Var x, const std::vector<uint8_t>& valid) {
  const int rows = x->value.rows(), cols = x->value.cols();
  if (static_cast<int>(valid.size()) != rows) throw ShapeError("masked_mean_rows: mask length");
  int nv = 0;
  for (auto v : valid) nv += v ? 1 : 0;
  if (nv == 0) throw EmptyRegionError("masked_mean_rows: no valid rows");
  Tensor y({1, cols});
  for (int i = 0; i < rows; ++i)
    if (valid[i])
      for (int j = 0; j < cols; ++j) y.at(0, j) += x->value.at(i, j);
  for (int j = 0; j < cols; ++j) y.at(0, j) /= nv;
  auto mask = std::make_shared<std::vector<uint8_t>>(valid);
  return g.make(std::move(y), {x}, [x, mask, rows, cols, nv](Node& n) {
    Tensor dx = Tensor::zeros(x->value.shape);
    for (int i = 0; i < rows; ++i)
      if ((*mask)[i])
        for (int j = 0; j < cols; ++j) dx.at(i, j) = n.grad.at(0, j) / nv;
    Graph::accum(x, dx);
  });
}

Var mean_rows(Graph& g, Var x) {
  return masked_mean_rows(g, x, std::vector<uint8_t>(x->value.rows(), 1));
}

Var sum_all(Graph& g, Var x) {
  double s = 0.0;
  for (double v : x->value.data) s += v;
  return g.make(Tensor::scalar(s), {x}, [x](Node& n) {
    Graph::accum(x, Tensor::full(x->value.shape, n.grad.data[0]));
  });
}

Var mean_all(Graph& g, Var x) {
  return scale(g, sum_all(g, x), 1.0 / static_cast<double>(x->value.numel()));
}

Var l2_normalize_rows(Graph& g, Var x, double eps) {
  const int rows = x->value.rows(), cols = x->value.cols();
  Tensor y({rows, cols});
  auto norms = std::make_shared<std::vector<double>>(rows);
  for (int i = 0; i < rows; ++i) {
    double ss = 0.0;
    for (int j = 0; j < cols; ++j) ss += x->value.at(i, j) * x->value.at(i, j);
    const double n = std::sqrt(ss);
    (*norms)[i] = n;
    const double s = 1.0 / (n + eps);
    for (int j = 0; j < cols; ++j) y.at(i, j) = x->value.at(i, j) * s;
  }
  return g.make(std::move(y), {x}, [x, norms, rows, cols, eps](Node& n) {
    Tensor dx({rows, cols});
    for (int i = 0; i < rows; ++i) {
      const double nv = (*norms)[i];
      const double s = 1.0 / (nv + eps);
      double gx = 0.0;
      for (int j = 0; j < cols; ++j) gx += n.grad.at(i, j) * x->value.at(i, j);
      const double nsafe = std::max(nv, eps);
      for (int j = 0; j < cols; ++j)
        dx.at(i, j) = s * n.grad.at(i, j) - s * s * (gx / nsafe) * x->value.at(i, j);
    }
    Graph::accum(x, dx);
  });
}

Var zero_rows(Graph& g, Var x, const std::vector<uint8_t>& keep) {
  const int rows = x->value.rows(), cols = x->value.cols();
  if (static_cast<int>(keep.size()) != rows) throw ShapeError("zero_rows: mask length");
  Tensor m({rows, cols});
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m.at(i, j) = keep[i] ? 1.0 : 0.0;
  return mul_const(g, x, std::move(m));
}

Var reshape(Graph& g, Var x, std::vector<int> shape) {
  if (Tensor::numel_of(shape) != x->value.numel())
    throw ShapeError("reshape: element count mismatch for " + x->value.shape_str());
  Tensor y(shape, x->value.data);
  return g.make(std::move(y), {x}, [x](Node& n) {
    Tensor dx(x->value.shape, n.grad.data);
    Graph::accum(x, dx);
  });
}

}  // namespace xview::num
