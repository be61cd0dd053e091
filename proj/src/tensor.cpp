#include "slucl/tensor.hpp"

#include <numeric>
#include <stdexcept>

namespace slucl {

namespace {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

thread_local Graph* g_active_graph = nullptr;

}  // namespace

Tensor Tensor::from(std::vector<std::size_t> shape, std::vector<double> values,
                    bool requires_grad) {
  for (std::size_t d : shape) {
    if (d == 0) throw std::invalid_argument("Tensor: zero-sized dimension in " + shape_string(shape));
  }
  if (shape_numel(shape) != values.size()) {
    throw std::invalid_argument("Tensor: " + std::to_string(values.size()) +
                                " values do not fill shape " + shape_string(shape));
  }
  Tensor t;
  t.data_ = std::make_shared<TensorData>();
  t.data_->shape = std::move(shape);
  t.data_->values = std::move(values);
  t.data_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
  std::vector<double> values(shape_numel(shape), 0.0);
  return from(std::move(shape), std::move(values), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

double Tensor::item() const {
  if (numel() != 1) {
    throw std::invalid_argument("Tensor::item: tensor of shape " + shape_string(shape()) +
                                " is not a scalar");
  }
  return data_->values[0];
}

void Tensor::ensure_grad() {
  if (!data_->requires_grad) return;
  if (data_->grad.empty()) data_->grad.assign(data_->values.size(), 0.0);
}

Tensor Tensor::detached_copy(bool requires_grad) const {
  return Tensor::from(data_->shape, data_->values, requires_grad);
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  s += "]";
  return s;
}

Graph* active_graph() { return g_active_graph; }

RecordScope::RecordScope(Graph& graph) : previous_(g_active_graph) { g_active_graph = &graph; }
RecordScope::~RecordScope() { g_active_graph = previous_; }

NoGradScope::NoGradScope() : previous_(g_active_graph) { g_active_graph = nullptr; }
NoGradScope::~NoGradScope() { g_active_graph = previous_; }

}  // namespace slucl
