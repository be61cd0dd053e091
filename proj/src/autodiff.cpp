#include "slucl/autodiff.hpp"

#include <cmath>
#include <stdexcept>

namespace slucl {

void backward(const Tensor& loss, Graph& graph) {
  if (!loss.defined() || loss.numel() != 1) {
    throw std::invalid_argument("backward: loss must be a scalar tensor");
  }
  if (!loss.requires_grad()) {
    // Constant loss: nothing upstream, all grads stay absent.
    return;
  }
  loss.data()->grad.assign(1, 1.0);
  auto& nodes = graph.nodes();
  for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
    if (it->output->grad.empty()) continue;  // not reachable from the loss
    it->backward();
  }
}

double GradCheckReport::max_rel_error() const {
  double m = 0.0;
  for (const auto& e : per_param) m = std::max(m, e.max_rel_error);
  return m;
}

GradCheckReport grad_check(const std::function<Tensor()>& loss_fn,
                           const std::vector<NamedTensor>& params, double h, double tol) {
  if (!(h > 0.0)) throw std::invalid_argument("grad_check: h must be positive");

  GradCheckReport report;
  report.tolerance = tol;
  if (params.empty()) return report;

  // Analytic gradients from one recorded pass.
  std::vector<std::vector<double>> analytic;
  {
    zero_grads(params);
    Graph graph;
    Tensor loss;
    {
      RecordScope scope(graph);
      loss = loss_fn();
    }
    if (!std::isfinite(loss.item())) {
      throw std::invalid_argument("grad_check: loss is not finite");
    }
    backward(loss, graph);
    for (const auto& [name, p] : params) {
      if (p.has_grad()) {
        analytic.push_back(p.grad());
      } else {
        analytic.emplace_back(p.numel(), 0.0);
      }
    }
  }

  // Finite-difference probes, values only.
  NoGradScope no_grad;
  auto eval = [&]() {
    const double v = loss_fn().item();
    if (!std::isfinite(v)) throw std::invalid_argument("grad_check: loss is not finite");
    return v;
  };
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    const auto& name = params[pi].first;
    Tensor param = params[pi].second;
    auto& values = param.mutable_values();
    double worst = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double f_plus = eval();
      values[i] = saved - h;
      const double f_minus = eval();
      values[i] = saved;
      const double numeric = (f_plus - f_minus) / (2.0 * h);
      const double a = analytic[pi][i];
      const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
      worst = std::max(worst, std::fabs(a - numeric) / denom);
    }
    report.per_param.push_back({name, worst});
  }
  return report;
}

void zero_grads(const std::vector<NamedTensor>& params) {
  for (const auto& [name, p] : params) {
    Tensor t = p;
    t.clear_grad();
  }
}

}  // namespace slucl
