#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace pmmtalk {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

/// A named trainable tensor with its gradient accumulator.
struct Parameter {
  Matrix value;
  Matrix grad;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

/// Name-ordered parameter table. Element addresses are stable for the lifetime
/// of the store (std::map nodes never move).
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;

  Parameter& add(const std::string& name, Matrix init);
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  /// Total number of scalar parameters.
  std::size_t census() const;
  std::size_t size() const { return params_.size(); }

  void zero_grad();

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::map<std::string, Parameter> params_;
};

class Graph;

/// Handle to a node of a Graph. Cheap to copy.
class Var {
 public:
  Var() = default;
  Var(Graph* graph, int id) : graph_(graph), id_(id) {}

  const Matrix& value() const;
  const Matrix& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }

  Graph* graph() const { return graph_; }
  int id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  Graph* graph_ = nullptr;
  int id_ = -1;
};

/// Reverse-mode tape. Nodes are appended in evaluation order; backward()
/// walks them in reverse. With recording off the graph is a plain evaluator.
class Graph {
 public:
  explicit Graph(bool record = true) : record_(record) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return record_; }

  Var constant(Matrix value);
  Var scalar(double value);
  /// Leaf bound to a parameter; backward() accumulates into `p.grad`.
  Var param(Parameter& p);

  /// Seeds d(out)/d(out) = 1 for a 1x1 output and back-propagates.
  void backward(Var out);

  const Matrix& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  const Matrix& grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }
  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }

  /// Gradient buffer for node `id`, zero-initialized on first access.
  Matrix& grad_buffer(int id);

  using Backprop = std::function<void(Graph&, const Matrix& upstream)>;

  /// Appends an op result. `inputs` decide whether the node needs a gradient.
  Var push(Matrix value, std::initializer_list<Var> inputs, Backprop backprop);
  Var push(Matrix value, const std::vector<Var>& inputs, Backprop backprop);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backprop backprop;
    bool needs_grad = false;
  };

  std::vector<Node> nodes_;
  bool record_;
};

inline const Matrix& Var::value() const { return graph_->value(id_); }
inline const Matrix& Var::grad() const { return graph_->grad(id_); }

// Differentiable ops. Shapes follow the row-per-frame convention: a T x d
// matrix is a sequence of T feature rows.

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var hadamard(Var a, Var b);
Var scale(Var a, double s);
/// `a * s` where `s` is a 1x1 node.
Var scale_by(Var a, Var s);
Var add_scalar(Var a, double s);
/// Adds a 1 x n row to every row of `a`.
Var add_row(Var a, Var row);
Var matmul(Var a, Var b);
/// Same product, but every output row is summed in a fixed order that does not
/// depend on how many rows there are. Slower; for per-frame layers whose rows
/// must not drift with sequence length.
Var matmul_rowwise(Var a, Var b);
/// a * b^T
Var matmul_nt(Var a, Var b);
Var transpose(Var a);
Var square(Var a);
Var exp(Var a);
Var gelu(Var a);
Var sum(Var a);
/// Mean over rows: T x n -> 1 x n.
Var mean_rows(Var a);
/// Repeats a 1 x n row `rows` times.
Var broadcast_rows(Var row, Eigen::Index rows);
Var concat_cols(const std::vector<Var>& parts);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
/// Row t of the result is row t+1 minus row t.
Var diff_rows(Var a);
Var softmax_rows(Var a);
Var log_softmax_rows(Var a);
/// Per-row normalization to zero mean / unit variance, then gain and bias (1 x n).
Var layer_norm_rows(Var a, Var gain, Var bias, double eps = 1e-5);
/// Cosine similarity of two 1 x n rows, returned as 1x1.
Var cosine_similarity(Var a, Var b);

/// Patch extraction for a stack of feature maps.
/// Input rows are indexed (frame, y, x) in row-major order with `channels`
/// columns. Output rows are (frame, oy, ox); columns are (ky, kx, channel).
Var im2col(Var a, Eigen::Index frames, Eigen::Index height, Eigen::Index width,
           Eigen::Index channels, Eigen::Index kernel, Eigen::Index stride, Eigen::Index pad);

/// Regroups `frames * positions` rows of `channels` columns into `frames` rows
/// of `positions * channels` columns (row-major flatten of each frame).
Var fold_frames(Var a, Eigen::Index frames);

}  // namespace pmmtalk
