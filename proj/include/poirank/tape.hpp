#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "poirank/tensor.hpp"

namespace poirank {

namespace debug {
// Test hook: scales the tanh backward rule so gradient checking can prove it
// catches a broken derivative.
extern bool corrupt_tanh_backward;
}  // namespace debug

struct Var {
  uint32_t id = UINT32_MAX;
  bool valid() const { return id != UINT32_MAX; }
};

// Reverse-mode tape. Nodes are recorded in evaluation order, which is a
// topological order, so backward is a single reverse sweep that visits each
// node once. Gradients are allocated lazily; branches that do not reach the
// loss are skipped entirely and report zero gradients.
class Tape {
 public:
  enum class Op : uint8_t {
    Leaf,
    MatMul,
    Add,
    Sub,
    Scale,
    AddScalar,
    Concat,
    Relu,
    Tanh,
    Sigmoid,
    Softmax,
    Mul,
    Dot,
    Sum,
    Slice,
    EmbedRow,
    GruCell,
    StackCols,
    AddColBroadcast,
    VecMatDot,
  };

  struct Node {
    Tensor value;
    Tensor aux;  // op-specific cache (e.g. GRU gate activations)
    std::vector<uint32_t> inputs;
    Op op = Op::Leaf;
    size_t i0 = 0, i1 = 0;
    double c0 = 0.0;
  };

  Var leaf(Tensor value);
  Var push(Node node);

  const Tensor& value(Var v) const { return nodes_[v.id].value; }

  // Gradient of the last backward() loss w.r.t. v; zeros if v is unreachable.
  Tensor grad(Var v) const;

  void backward(Var loss, double seed = 1.0);

  size_t node_count() const { return nodes_.size(); }
  void reserve(size_t n) { nodes_.reserve(n); }
  void clear() {
    nodes_.clear();
    grads_.clear();
  }

 private:
  Tensor& ensure_grad(uint32_t id);
  void backward_node(uint32_t id);

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;  // parallel to nodes_, empty = not yet reached
};

// GRU parameter handles: h' = (1-z) h + z tanh(Wh x + Uh (r*h) + bh).
struct GruParamVars {
  Var Wz, Uz, bz;
  Var Wr, Ur, br;
  Var Wh, Uh, bh;
};

Var matmul(Tape& t, Var a, Var b);
Var add(Tape& t, Var a, Var b);
Var sub(Tape& t, Var a, Var b);
Var scale(Tape& t, Var a, double c);
Var add_scalar(Tape& t, Var a, double c);
Var concat(Tape& t, Var a, Var b);
Var relu(Tape& t, Var a);
Var tanh(Tape& t, Var a);
Var sigmoid(Tape& t, Var a);
Var softmax(Tape& t, Var a);
Var mul(Tape& t, Var a, Var b);
Var dot(Tape& t, Var a, Var b);
Var sum(Tape& t, Var a);
Var slice(Tape& t, Var a, size_t begin, size_t end);
Var embed_row(Tape& t, Var matrix, size_t row);
Var gru_cell(Tape& t, Var x, Var h_prev, const GruParamVars& p);
Var stack_cols(Tape& t, const std::vector<Var>& columns);
Var add_col_broadcast(Tape& t, Var matrix, Var vec);
Var vec_mat_dot(Tape& t, Var vec, Var matrix);

// Scalar kernel shared by the tape and the batched inference path.
inline double sigmoid_value(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace poirank
