#include "poirank/tape.hpp"

#include <stdexcept>

#include "poirank/linalg.hpp"

namespace poirank {

namespace debug {
bool corrupt_tanh_backward = false;
}

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

Var Tape::leaf(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.op = Op::Leaf;
  return push(std::move(n));
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{static_cast<uint32_t>(nodes_.size() - 1)};
}

Tensor Tape::grad(Var v) const {
  if (v.id < grads_.size() && grads_[v.id].size() > 0) return grads_[v.id];
  return Tensor(nodes_[v.id].value.shape());
}

Tensor& Tape::ensure_grad(uint32_t id) {
  if (grads_[id].size() == 0) grads_[id] = Tensor(nodes_[id].value.shape());
  return grads_[id];
}

void Tape::backward(Var loss, double seed) {
  require(loss.valid() && loss.id < nodes_.size(), "backward: invalid loss var");
  require(nodes_[loss.id].value.size() == 1,
          "backward: loss must be a scalar, got shape " + nodes_[loss.id].value.shape_str());
  grads_.assign(nodes_.size(), Tensor{});
  ensure_grad(loss.id)[0] = seed;
  for (uint32_t id = loss.id + 1; id-- > 0;) {
    if (grads_[id].size() == 0) continue;  // never reached the loss
    backward_node(id);
  }
}

void Tape::backward_node(uint32_t id) {
  Node& n = nodes_[id];
  const Tensor& g = grads_[id];
  auto in_val = [&](size_t i) -> const Tensor& { return nodes_[n.inputs[i]].value; };
  auto in_grad = [&](size_t i) -> Tensor& { return ensure_grad(n.inputs[i]); };

  switch (n.op) {
    case Op::Leaf:
      break;
    case Op::MatMul: {
      const Tensor& a = in_val(0);
      const Tensor& b = in_val(1);
      outer_accumulate(in_grad(0), g, b);
      matmul_transposed_into(in_grad(1), a, g);
      break;
    }
    case Op::Add: {
      for (int s = 0; s < 2; ++s) {
        Tensor& d = in_grad(s);
        for (size_t i = 0; i < g.size(); ++i) d[i] += g[i];
      }
      break;
    }
    case Op::Sub: {
      Tensor& da = in_grad(0);
      Tensor& db = in_grad(1);
      for (size_t i = 0; i < g.size(); ++i) {
        da[i] += g[i];
        db[i] -= g[i];
      }
      break;
    }
    case Op::Scale: {
      Tensor& d = in_grad(0);
      for (size_t i = 0; i < g.size(); ++i) d[i] += n.c0 * g[i];
      break;
    }
    case Op::AddScalar: {
      Tensor& d = in_grad(0);
      for (size_t i = 0; i < g.size(); ++i) d[i] += g[i];
      break;
    }
    case Op::Concat: {
      Tensor& da = in_grad(0);
      Tensor& db = in_grad(1);
      size_t na = da.size();
      for (size_t i = 0; i < na; ++i) da[i] += g[i];
      for (size_t i = 0; i < db.size(); ++i) db[i] += g[na + i];
      break;
    }
    case Op::Relu: {
      Tensor& d = in_grad(0);
      const Tensor& y = n.value;
      for (size_t i = 0; i < g.size(); ++i) {
        if (y[i] > 0.0) d[i] += g[i];
      }
      break;
    }
    case Op::Tanh: {
      Tensor& d = in_grad(0);
      const Tensor& y = n.value;
      double corrupt = debug::corrupt_tanh_backward ? 1.5 : 1.0;
      for (size_t i = 0; i < g.size(); ++i) d[i] += corrupt * g[i] * (1.0 - y[i] * y[i]);
      break;
    }
    case Op::Sigmoid: {
      Tensor& d = in_grad(0);
      const Tensor& y = n.value;
      for (size_t i = 0; i < g.size(); ++i) d[i] += g[i] * y[i] * (1.0 - y[i]);
      break;
    }
    case Op::Softmax: {
      Tensor& d = in_grad(0);
      const Tensor& y = n.value;
      double gy = 0.0;
      for (size_t i = 0; i < g.size(); ++i) gy += g[i] * y[i];
      for (size_t i = 0; i < g.size(); ++i) d[i] += y[i] * (g[i] - gy);
      break;
    }
    case Op::Mul: {
      Tensor& da = in_grad(0);
      Tensor& db = in_grad(1);
      const Tensor& a = in_val(0);
      const Tensor& b = in_val(1);
      for (size_t i = 0; i < g.size(); ++i) {
        da[i] += g[i] * b[i];
        db[i] += g[i] * a[i];
      }
      break;
    }
    case Op::Dot: {
      Tensor& da = in_grad(0);
      Tensor& db = in_grad(1);
      const Tensor& a = in_val(0);
      const Tensor& b = in_val(1);
      double gs = g[0];
      for (size_t i = 0; i < a.size(); ++i) {
        da[i] += gs * b[i];
        db[i] += gs * a[i];
      }
      break;
    }
    case Op::Sum: {
      Tensor& d = in_grad(0);
      double gs = g[0];
      for (size_t i = 0; i < d.size(); ++i) d[i] += gs;
      break;
    }
    case Op::Slice: {
      Tensor& d = in_grad(0);
      for (size_t i = 0; i < g.size(); ++i) d[n.i0 + i] += g[i];
      break;
    }
    case Op::EmbedRow: {
      Tensor& d = in_grad(0);
      size_t cols = in_val(0).cols();
      for (size_t i = 0; i < g.size(); ++i) d[n.i0 * cols + i] += g[i];
      break;
    }
    case Op::GruCell: {
      // inputs: x, h, Wz, Uz, bz, Wr, Ur, br, Wh, Uh, bh; aux = [z, r, htilde]
      const Tensor& x = in_val(0);
      const Tensor& h = in_val(1);
      size_t hid = h.size();
      const double* z = n.aux.data();
      const double* r = n.aux.data() + hid;
      const double* ht = n.aux.data() + 2 * hid;

      Tensor d_pre_z({hid}), d_pre_r({hid}), d_pre_h({hid}), d_rh({hid}), rh({hid});
      Tensor& dh = in_grad(1);
      for (size_t i = 0; i < hid; ++i) {
        rh[i] = r[i] * h[i];
        double dht = g[i] * z[i];
        double dz = g[i] * (ht[i] - h[i]);
        dh[i] += g[i] * (1.0 - z[i]);
        d_pre_h[i] = dht * (1.0 - ht[i] * ht[i]);
        d_pre_z[i] = dz * z[i] * (1.0 - z[i]);
      }
      // candidate-state path
      outer_accumulate(in_grad(8), d_pre_h, x);    // dWh
      outer_accumulate(in_grad(9), d_pre_h, rh);   // dUh
      {
        Tensor& dbh = in_grad(10);
        for (size_t i = 0; i < hid; ++i) dbh[i] += d_pre_h[i];
      }
      matmul_transposed_into(in_grad(0), in_val(8), d_pre_h);  // dx += Wh^T ...
      matmul_transposed_into(d_rh, in_val(9), d_pre_h);        // Uh^T ...
      for (size_t i = 0; i < hid; ++i) {
        double dr = d_rh[i] * h[i];
        dh[i] += d_rh[i] * r[i];
        d_pre_r[i] = dr * r[i] * (1.0 - r[i]);
      }
      // update gate
      outer_accumulate(in_grad(2), d_pre_z, x);  // dWz
      outer_accumulate(in_grad(3), d_pre_z, h);  // dUz
      {
        Tensor& dbz = in_grad(4);
        for (size_t i = 0; i < hid; ++i) dbz[i] += d_pre_z[i];
      }
      matmul_transposed_into(in_grad(0), in_val(2), d_pre_z);
      matmul_transposed_into(dh, in_val(3), d_pre_z);
      // reset gate
      outer_accumulate(in_grad(5), d_pre_r, x);  // dWr
      outer_accumulate(in_grad(6), d_pre_r, h);  // dUr
      {
        Tensor& dbr = in_grad(7);
        for (size_t i = 0; i < hid; ++i) dbr[i] += d_pre_r[i];
      }
      matmul_transposed_into(in_grad(0), in_val(5), d_pre_r);
      matmul_transposed_into(dh, in_val(6), d_pre_r);
      break;
    }
    case Op::StackCols: {
      size_t m = n.inputs.size();
      size_t d = n.value.rows();
      for (size_t j = 0; j < m; ++j) {
        Tensor& dj = in_grad(j);
        for (size_t i = 0; i < d; ++i) dj[i] += g[i * m + j];
      }
      break;
    }
    case Op::AddColBroadcast: {
      Tensor& dm = in_grad(0);
      Tensor& dv = in_grad(1);
      size_t r = n.value.rows(), c = n.value.cols();
      for (size_t i = 0; i < r; ++i) {
        double acc = 0.0;
        for (size_t j = 0; j < c; ++j) {
          double gv = g[i * c + j];
          dm[i * c + j] += gv;
          acc += gv;
        }
        dv[i] += acc;
      }
      break;
    }
    case Op::VecMatDot: {
      Tensor& dv = in_grad(0);
      Tensor& dm = in_grad(1);
      const Tensor& v = in_val(0);
      const Tensor& m = in_val(1);
      size_t r = m.rows(), c = m.cols();
      for (size_t i = 0; i < r; ++i) {
        double acc = 0.0;
        for (size_t j = 0; j < c; ++j) {
          acc += g[j] * m.at2(i, j);
          dm[i * c + j] += v[i] * g[j];
        }
        dv[i] += acc;
      }
      break;
    }
  }
}

Var matmul(Tape& t, Var a, Var b) {
  const Tensor& ta = t.value(a);
  const Tensor& tb = t.value(b);
  require(ta.ndim() == 2, "matmul: left operand must be 2-D, got " + ta.shape_str());
  require(tb.ndim() == 1 || tb.ndim() == 2,
          "matmul: right operand must be 1-D or 2-D, got " + tb.shape_str());
  require(ta.cols() == tb.rows(), "matmul: shape mismatch " + ta.shape_str() + " x " +
                                      tb.shape_str());
  Tape::Node n;
  n.op = Tape::Op::MatMul;
  n.inputs = {a.id, b.id};
  n.value = tb.ndim() == 2 ? Tensor({ta.rows(), tb.cols()}) : Tensor({ta.rows()});
  matmul_into(n.value, ta, tb);
  return t.push(std::move(n));
}

namespace {
template <class F>
Var elementwise2(Tape& t, Var a, Var b, Tape::Op op, F f) {
  const Tensor& ta = t.value(a);
  const Tensor& tb = t.value(b);
  require(ta.same_shape(tb), "elementwise op: shape mismatch " + ta.shape_str() + " vs " +
                                 tb.shape_str());
  Tape::Node n;
  n.op = op;
  n.inputs = {a.id, b.id};
  n.value = Tensor(ta.shape());
  for (size_t i = 0; i < ta.size(); ++i) n.value[i] = f(ta[i], tb[i]);
  return t.push(std::move(n));
}
}  // namespace

Var add(Tape& t, Var a, Var b) {
  return elementwise2(t, a, b, Tape::Op::Add, [](double x, double y) { return x + y; });
}

Var sub(Tape& t, Var a, Var b) {
  return elementwise2(t, a, b, Tape::Op::Sub, [](double x, double y) { return x - y; });
}

Var mul(Tape& t, Var a, Var b) {
  return elementwise2(t, a, b, Tape::Op::Mul, [](double x, double y) { return x * y; });
}

Var scale(Tape& t, Var a, double c) {
  Tape::Node n;
  n.op = Tape::Op::Scale;
  n.inputs = {a.id};
  n.c0 = c;
  const Tensor& ta = t.value(a);
  n.value = Tensor(ta.shape());
  for (size_t i = 0; i < ta.size(); ++i) n.value[i] = c * ta[i];
  return t.push(std::move(n));
}

Var add_scalar(Tape& t, Var a, double c) {
  Tape::Node n;
  n.op = Tape::Op::AddScalar;
  n.inputs = {a.id};
  n.c0 = c;
  const Tensor& ta = t.value(a);
  n.value = Tensor(ta.shape());
  for (size_t i = 0; i < ta.size(); ++i) n.value[i] = ta[i] + c;
  return t.push(std::move(n));
}

Var concat(Tape& t, Var a, Var b) {
  const Tensor& ta = t.value(a);
  const Tensor& tb = t.value(b);
  require(ta.ndim() == 1 && tb.ndim() == 1, "concat: both operands must be 1-D");
  Tape::Node n;
  n.op = Tape::Op::Concat;
  n.inputs = {a.id, b.id};
  n.value = Tensor({ta.size() + tb.size()});
  for (size_t i = 0; i < ta.size(); ++i) n.value[i] = ta[i];
  for (size_t i = 0; i < tb.size(); ++i) n.value[ta.size() + i] = tb[i];
  return t.push(std::move(n));
}

namespace {
template <class F>
Var elementwise1(Tape& t, Var a, Tape::Op op, F f) {
  Tape::Node n;
  n.op = op;
  n.inputs = {a.id};
  const Tensor& ta = t.value(a);
  n.value = Tensor(ta.shape());
  for (size_t i = 0; i < ta.size(); ++i) n.value[i] = f(ta[i]);
  return t.push(std::move(n));
}
}  // namespace

Var relu(Tape& t, Var a) {
  return elementwise1(t, a, Tape::Op::Relu, [](double x) { return x > 0.0 ? x : 0.0; });
}

Var tanh(Tape& t, Var a) {
  return elementwise1(t, a, Tape::Op::Tanh, [](double x) { return std::tanh(x); });
}

Var sigmoid(Tape& t, Var a) {
  return elementwise1(t, a, Tape::Op::Sigmoid, [](double x) { return sigmoid_value(x); });
}

Var softmax(Tape& t, Var a) {
  const Tensor& ta = t.value(a);
  require(ta.ndim() == 1 && ta.size() > 0, "softmax: needs a non-empty vector");
  Tape::Node n;
  n.op = Tape::Op::Softmax;
  n.inputs = {a.id};
  n.value = Tensor(ta.shape());
  double mx = ta[0];
  for (size_t i = 1; i < ta.size(); ++i) mx = std::max(mx, ta[i]);
  double total = 0.0;
  for (size_t i = 0; i < ta.size(); ++i) {
    n.value[i] = std::exp(ta[i] - mx);
    total += n.value[i];
  }
  for (size_t i = 0; i < ta.size(); ++i) n.value[i] /= total;
  return t.push(std::move(n));
}

Var dot(Tape& t, Var a, Var b) {
  const Tensor& ta = t.value(a);
  const Tensor& tb = t.value(b);
  require(ta.same_shape(tb) && ta.ndim() == 1,
          "dot: operands must be same-shape vectors, got " + ta.shape_str() + " and " +
              tb.shape_str());
  Tape::Node n;
  n.op = Tape::Op::Dot;
  n.inputs = {a.id, b.id};
  double acc = 0.0;
  for (size_t i = 0; i < ta.size(); ++i) acc += ta[i] * tb[i];
  n.value = Tensor::scalar(acc);
  return t.push(std::move(n));
}

Var sum(Tape& t, Var a) {
  Tape::Node n;
  n.op = Tape::Op::Sum;
  n.inputs = {a.id};
  const Tensor& ta = t.value(a);
  double acc = 0.0;
  for (size_t i = 0; i < ta.size(); ++i) acc += ta[i];
  n.value = Tensor::scalar(acc);
  return t.push(std::move(n));
}

Var slice(Tape& t, Var a, size_t begin, size_t end) {
  const Tensor& ta = t.value(a);
  require(ta.ndim() == 1, "slice: only 1-D supported");
  require(begin <= end && end <= ta.size(), "slice: bad range");
  Tape::Node n;
  n.op = Tape::Op::Slice;
  n.inputs = {a.id};
  n.i0 = begin;
  n.i1 = end;
  n.value = Tensor({end - begin});
  for (size_t i = begin; i < end; ++i) n.value[i - begin] = ta[i];
  return t.push(std::move(n));
}

Var embed_row(Tape& t, Var matrix, size_t row) {
  const Tensor& tm = t.value(matrix);
  require(tm.ndim() == 2, "embed_row: needs a matrix");
  require(row < tm.rows(), "embed_row: row out of range");
  Tape::Node n;
  n.op = Tape::Op::EmbedRow;
  n.inputs = {matrix.id};
  n.i0 = row;
  size_t c = tm.cols();
  n.value = Tensor({c});
  for (size_t i = 0; i < c; ++i) n.value[i] = tm[row * c + i];
  return t.push(std::move(n));
}

Var gru_cell(Tape& t, Var x, Var h_prev, const GruParamVars& p) {
  const Tensor& tx = t.value(x);
  const Tensor& th = t.value(h_prev);
  size_t in_dim = tx.size(), hid = th.size();
  require(t.value(p.Wz).rows() == hid && t.value(p.Wz).cols() == in_dim,
          "gru_cell: Wz shape mismatch");
  require(t.value(p.Uz).rows() == hid && t.value(p.Uz).cols() == hid,
          "gru_cell: Uz shape mismatch");

  Tape::Node n;
  n.op = Tape::Op::GruCell;
  n.inputs = {x.id,    h_prev.id, p.Wz.id, p.Uz.id, p.bz.id, p.Wr.id,
              p.Ur.id, p.br.id,   p.Wh.id, p.Uh.id, p.bh.id};
  n.value = Tensor({hid});
  n.aux = Tensor({3 * hid});

  Tensor pre_z({hid}), pre_r({hid}), pre_h({hid}), rh({hid});
  const Tensor& bz = t.value(p.bz);
  const Tensor& br = t.value(p.br);
  const Tensor& bh = t.value(p.bh);
  for (size_t i = 0; i < hid; ++i) {
    pre_z[i] = bz[i];
    pre_r[i] = br[i];
  }
  matmul_into(pre_z, t.value(p.Wz), tx);
  matmul_into(pre_z, t.value(p.Uz), th);
  matmul_into(pre_r, t.value(p.Wr), tx);
  matmul_into(pre_r, t.value(p.Ur), th);

  double* z = n.aux.data();
  double* r = n.aux.data() + hid;
  double* ht = n.aux.data() + 2 * hid;
  for (size_t i = 0; i < hid; ++i) {
    z[i] = sigmoid_value(pre_z[i]);
    r[i] = sigmoid_value(pre_r[i]);
    rh[i] = r[i] * th[i];
    pre_h[i] = bh[i];
  }
  matmul_into(pre_h, t.value(p.Wh), tx);
  matmul_into(pre_h, t.value(p.Uh), rh);
  for (size_t i = 0; i < hid; ++i) {
    ht[i] = std::tanh(pre_h[i]);
    n.value[i] = (1.0 - z[i]) * th[i] + z[i] * ht[i];
  }
  return t.push(std::move(n));
}

Var stack_cols(Tape& t, const std::vector<Var>& columns) {
  require(!columns.empty(), "stack_cols: needs at least one column");
  size_t d = t.value(columns[0]).size();
  Tape::Node n;
  n.op = Tape::Op::StackCols;
  size_t m = columns.size();
  n.value = Tensor({d, m});
  n.inputs.reserve(m);
  for (size_t j = 0; j < m; ++j) {
    const Tensor& col = t.value(columns[j]);
    require(col.size() == d, "stack_cols: column size mismatch");
    n.inputs.push_back(columns[j].id);
    for (size_t i = 0; i < d; ++i) n.value[i * m + j] = col[i];
  }
  return t.push(std::move(n));
}

Var add_col_broadcast(Tape& t, Var matrix, Var vec) {
  const Tensor& tm = t.value(matrix);
  const Tensor& tv = t.value(vec);
  require(tm.ndim() == 2 && tv.ndim() == 1 && tm.rows() == tv.size(),
          "add_col_broadcast: shape mismatch " + tm.shape_str() + " + " + tv.shape_str());
  Tape::Node n;
  n.op = Tape::Op::AddColBroadcast;
  n.inputs = {matrix.id, vec.id};
  size_t r = tm.rows(), c = tm.cols();
  n.value = Tensor({r, c});
  for (size_t i = 0; i < r; ++i) {
    for (size_t j = 0; j < c; ++j) n.value[i * c + j] = tm[i * c + j] + tv[i];
  }
  return t.push(std::move(n));
}

Var vec_mat_dot(Tape& t, Var vec, Var matrix) {
  const Tensor& tv = t.value(vec);
  const Tensor& tm = t.value(matrix);
  require(tm.ndim() == 2 && tv.ndim() == 1 && tm.rows() == tv.size(),
          "vec_mat_dot: shape mismatch " + tv.shape_str() + " . " + tm.shape_str());
  Tape::Node n;
  n.op = Tape::Op::VecMatDot;
  n.inputs = {vec.id, matrix.id};
  size_t r = tm.rows(), c = tm.cols();
  n.value = Tensor({c});
  for (size_t i = 0; i < r; ++i) {
    double v = tv[i];
    for (size_t j = 0; j < c; ++j) n.value[j] += v * tm[i * c + j];
  }
  return t.push(std::move(n));
}

}  // namespace poirank
