#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace slucl {

// Dense row-major real tensor (rank 1 or 2 in practice; scalars use shape
// {1}). Values are 64-bit floats throughout: the finite-difference tolerances
// that gate this project would not survive 32-bit noise.
struct TensorData {
  std::vector<std::size_t> shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until backward touches this tensor
  bool requires_grad = false;
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor from(std::vector<std::size_t> shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return data_ != nullptr; }
  const std::vector<std::size_t>& shape() const { return data_->shape; }
  std::size_t rank() const { return data_->shape.size(); }
  std::size_t numel() const { return data_->values.size(); }

  // Rank-2 accessors; a rank-1 tensor is treated as a single row.
  std::size_t rows() const { return rank() == 2 ? data_->shape[0] : 1; }
  std::size_t cols() const { return rank() == 2 ? data_->shape[1] : data_->shape[0]; }

  const std::vector<double>& values() const { return data_->values; }
  std::vector<double>& mutable_values() { return data_->values; }
  double item() const;  // scalar tensors only

  bool requires_grad() const { return data_->requires_grad; }
  const std::vector<double>& grad() const { return data_->grad; }
  bool has_grad() const { return !data_->grad.empty(); }
  void ensure_grad();  // allocate zero grad (requires_grad tensors only)
  void clear_grad() { data_->grad.clear(); }

  // Value copy detached from any graph.
  Tensor detached_copy(bool requires_grad = false) const;

  const std::shared_ptr<TensorData>& data() const { return data_; }

 private:
  std::shared_ptr<TensorData> data_;
};

std::string shape_string(const std::vector<std::size_t>& shape);

// Define-by-run tape: an append-only list of operation records. Node order is
// topological by construction and the backward pass walks it in strict
// reverse insertion order.
class Graph {
 public:
  struct Node {
    std::string tag;
    std::shared_ptr<TensorData> output;
    std::function<void()> backward;
  };

  void add_node(std::string tag, std::shared_ptr<TensorData> output,
                std::function<void()> backward) {
    nodes_.push_back(Node{std::move(tag), std::move(output), std::move(backward)});
  }

  std::size_t size() const { return nodes_.size(); }
  const std::vector<Node>& nodes() const { return nodes_; }
  std::vector<Node>& nodes() { return nodes_; }
  void clear() { nodes_.clear(); }

 private:
  std::vector<Node> nodes_;
};

// Thread-local active tape. Ops record onto it when set; a null active graph
// (the default, and inside NoGradScope) yields plain value tensors, which is
// how teacher passes produce constants.
Graph* active_graph();

class RecordScope {
 public:
  explicit RecordScope(Graph& graph);
  ~RecordScope();
  RecordScope(const RecordScope&) = delete;
  RecordScope& operator=(const RecordScope&) = delete;

 private:
  Graph* previous_;
};

class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Graph* previous_;
};

}  // namespace slucl
