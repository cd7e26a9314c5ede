#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <vector>

#include "trajlm/tensor.hpp"

namespace trajlm::ad {

class Graph;

/// Handle to a node in a Graph. Cheap to copy; valid as long as the graph lives.
struct Value {
  Graph* graph = nullptr;
  int id = -1;
  bool valid() const { return graph != nullptr && id >= 0; }
};

/// Eager reverse-mode tape. Each op computes its output immediately and
/// records a closure that scatters the output gradient back to its parents.
/// Node ids grow monotonically, so a single reverse sweep is a valid
/// topological order.
class Graph {
public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// New leaf. Gradients are only tracked through nodes with requires_grad
  /// somewhere below them.
  Value input(Tensor t, bool requires_grad = false);

  const Tensor& val(Value v) const;
  /// Gradient of the last backward() target w.r.t. v (zeros if unreached).
  const Tensor& grad(Value v);

  /// Seeds d(loss)/d(loss) = 1 and runs the reverse sweep. loss must be 1x1.
  void backward(Value loss);

  std::size_t num_nodes() const { return nodes_.size(); }

  // --- op-builder interface ---
  using BackwardFn = std::function<void(Graph&, int self)>;
  Value make(Tensor out, const std::vector<Value>& parents, BackwardFn fn);
  bool needs_grad(Value v) const;
  /// Gradient buffer of a node, allocated zero on first touch.
  Tensor& grad_buf(int id);
  bool grad_allocated(int id) const;
  const Tensor& node_val(int id) const { return nodes_[id].value; }
  /// Accumulate into a parent's gradient, skipping grad-free subtrees.
  void accumulate(int id, const Tensor& contrib);

private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool grad_alloc = false;
    BackwardFn backward;
  };
  std::deque<Node> nodes_;
};

// Matrix products (2-D). nt/tn multiply by a transposed right/left factor
// without materializing the transpose.
Value matmul(Value a, Value b);
Value matmul_nt(Value a, Value b);
Value matmul_tn(Value a, Value b);

Value add(Value a, Value b);
Value sub(Value a, Value b);
Value mul(Value a, Value b);
Value scale(Value a, double s);
/// Broadcast-add a 1xN row (bias) to every row of a MxN matrix.
Value add_rowvec(Value a, Value row);

Value gelu(Value a);
Value sigmoid(Value a);
/// Row-wise softmax; mask, when non-null, is added to the logits first.
Value softmax_rows(Value a, const Tensor* mask = nullptr);
Value layer_norm_rows(Value x, Value gain, Value bias, double eps = 1e-5);

Value concat_cols(Value a, Value b);
Value concat_rows(Value a, Value b);
Value slice_rows(Value a, std::size_t r0, std::size_t r1);
Value slice_cols(Value a, std::size_t c0, std::size_t c1);
Value reshape(Value a, std::vector<std::size_t> shape);

/// Mean over rows: MxN -> 1xN.
Value mean_rows(Value a);
/// Mean over all elements: -> 1x1.
Value mean_all(Value a);

/// Replicate-padded convolution, x {Ci,H,W}, w {Co,Ci,Kh,Kw}, b {Co}.
Value conv2d(Value x, Value w, Value b, std::size_t stride, std::size_t pad);
/// {C,H,W} feature map -> (H*W)xC token matrix, row-major over cells.
Value chw_to_tokens(Value x);

/// Elementwise Huber with the given threshold.
Value huber(Value a, double delta);

}  // namespace trajlm::ad
