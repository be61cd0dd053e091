#include "slucl/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace slucl {

namespace {

void ensure_data_grad(TensorData& d) {
  if (d.grad.empty()) d.grad.assign(d.values.size(), 0.0);
}

bool should_record(std::initializer_list<const Tensor*> inputs) {
  if (active_graph() == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

Tensor make_output(std::vector<std::size_t> shape, std::vector<double> values, bool track) {
  return Tensor::from(std::move(shape), std::move(values), track);
}

[[noreturn]] void shape_error(const std::string& op, const Tensor& a, const Tensor& b,
                              const std::string& detail) {
  throw std::invalid_argument(op + ": incompatible shapes " + shape_string(a.shape()) + " vs " +
                              shape_string(b.shape()) + " (" + detail + ")");
}

void require_rank12(const std::string& op, const Tensor& x) {
  if (x.rank() < 1 || x.rank() > 2) {
    throw std::invalid_argument(op + ": expected rank 1 or 2, got " + shape_string(x.shape()));
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank12("matmul", a);
  require_rank12("matmul", b);
  // Logical dims: a is [m x k] (rank-1 -> single row), b is [k x n]
  // (rank-1 -> single column).
  const std::size_t m = a.rank() == 2 ? a.shape()[0] : 1;
  const std::size_t k = a.rank() == 2 ? a.shape()[1] : a.shape()[0];
  const std::size_t kb = b.rank() == 2 ? b.shape()[0] : b.shape()[0];
  const std::size_t n = b.rank() == 2 ? b.shape()[1] : 1;
  if (k != kb) shape_error("matmul", a, b, "inner dimensions differ");

  std::vector<double> out(m * n, 0.0);
  {
    const double* pa = a.values().data();
    const double* pb = b.values().data();
    double* pc = out.data();
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t p = 0; p < k; ++p) {
        const double aip = pa[i * k + p];
        if (aip == 0.0) continue;
        const double* brow = pb + p * n;
        double* crow = pc + i * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
      }
    }
  }

  std::vector<std::size_t> out_shape;
  if (a.rank() == 2 && b.rank() == 2) out_shape = {m, n};
  else if (a.rank() == 1 && b.rank() == 2) out_shape = {n};
  else if (a.rank() == 2 && b.rank() == 1) out_shape = {m};
  else out_shape = {1};

  const bool track = should_record({&a, &b});
  Tensor result = make_output(std::move(out_shape), std::move(out), track);
  if (track) {
    auto da = a.data();
    auto db = b.data();
    auto dc = result.data();
    active_graph()->add_node("matmul", dc, [da, db, dc, m, k, n]() {
      if (dc->grad.empty()) return;
      const double* gout = dc->grad.data();
      if (da->requires_grad) {
        ensure_data_grad(*da);
        // dA += dC * B^T
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            double acc = 0.0;
            const double* grow = gout + i * n;
            const double* brow = db->values.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
            da->grad[i * k + p] += acc;
          }
        }
      }
      if (db->requires_grad) {
        ensure_data_grad(*db);
        // dB += A^T * dC
        for (std::size_t p = 0; p < k; ++p) {
          for (std::size_t i = 0; i < m; ++i) {
            const double aip = da->values[i * k + p];
            if (aip == 0.0) continue;
            const double* grow = gout + i * n;
            double* brow = db->grad.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) brow[j] += aip * grow[j];
          }
        }
      }
    });
  }
  return result;
}

Tensor add(const Tensor& a, const Tensor& b) {
  const bool bias_broadcast =
      a.rank() == 2 && b.rank() == 1 && b.shape()[0] == a.shape()[1];
  if (!bias_broadcast && a.shape() != b.shape()) {
    shape_error("add", a, b, "expected equal shapes or [r x c] + [c]");
  }

  std::vector<double> out(a.numel());
  if (bias_broadcast) {
    const std::size_t r = a.shape()[0], c = a.shape()[1];
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) out[i * c + j] = a.values()[i * c + j] + b.values()[j];
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
  }

  const bool track = should_record({&a, &b});
  Tensor result = make_output(a.shape(), std::move(out), track);
  if (track) {
    auto da = a.data();
    auto db = b.data();
    auto dc = result.data();
    active_graph()->add_node("add", dc, [da, db, dc, bias_broadcast]() {
      if (dc->grad.empty()) return;
      if (da->requires_grad) {
        ensure_data_grad(*da);
        for (std::size_t i = 0; i < dc->grad.size(); ++i) da->grad[i] += dc->grad[i];
      }
      if (db->requires_grad) {
        ensure_data_grad(*db);
        if (bias_broadcast) {
          const std::size_t c = db->values.size();
          const std::size_t r = dc->grad.size() / c;
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) db->grad[j] += dc->grad[i * c + j];
        } else {
          for (std::size_t i = 0; i < dc->grad.size(); ++i) db->grad[i] += dc->grad[i];
        }
      }
    });
  }
  return result;
}

Tensor subtract(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("subtract", a, b, "expected equal shapes");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] - b.values()[i];

  const bool track = should_record({&a, &b});
  Tensor result = make_output(a.shape(), std::move(out), track);
  if (track) {
    auto da = a.data();
    auto db = b.data();
    auto dc = result.data();
    active_graph()->add_node("subtract", dc, [da, db, dc]() {
      if (dc->grad.empty()) return;
      if (da->requires_grad) {
        ensure_data_grad(*da);
        for (std::size_t i = 0; i < dc->grad.size(); ++i) da->grad[i] += dc->grad[i];
      }
      if (db->requires_grad) {
        ensure_data_grad(*db);
        for (std::size_t i = 0; i < dc->grad.size(); ++i) db->grad[i] -= dc->grad[i];
      }
    });
  }
  return result;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const bool a_scalar = a.numel() == 1;
  const bool b_scalar = b.numel() == 1;
  if (!a_scalar && !b_scalar && a.shape() != b.shape()) {
    shape_error("elementwise-multiply", a, b, "expected equal shapes or a scalar operand");
  }

  const Tensor& big = b_scalar ? a : b;
  std::vector<double> out(big.numel());
  if (a_scalar && !b_scalar) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[0] * b.values()[i];
  } else if (b_scalar && !a_scalar) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[0];
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
  }

  const bool track = should_record({&a, &b});
  Tensor result = make_output(big.shape(), std::move(out), track);
  if (track) {
    auto da = a.data();
    auto db = b.data();
    auto dc = result.data();
    const bool as = a_scalar && !b_scalar;
    const bool bs = b_scalar && !a_scalar;
    active_graph()->add_node("elementwise-multiply", dc, [da, db, dc, as, bs]() {
      if (dc->grad.empty()) return;
      if (da->requires_grad) {
        ensure_data_grad(*da);
        if (as) {
          double acc = 0.0;
          for (std::size_t i = 0; i < dc->grad.size(); ++i) acc += dc->grad[i] * db->values[i];
          da->grad[0] += acc;
        } else if (bs) {
          for (std::size_t i = 0; i < dc->grad.size(); ++i) da->grad[i] += dc->grad[i] * db->values[0];
        } else {
          for (std::size_t i = 0; i < dc->grad.size(); ++i) da->grad[i] += dc->grad[i] * db->values[i];
        }
      }
      if (db->requires_grad) {
        ensure_data_grad(*db);
        if (bs) {
          double acc = 0.0;
          for (std::size_t i = 0; i < dc->grad.size(); ++i) acc += dc->grad[i] * da->values[i];
          db->grad[0] += acc;
        } else if (as) {
          for (std::size_t i = 0; i < dc->grad.size(); ++i) db->grad[i] += dc->grad[i] * da->values[0];
        } else {
          for (std::size_t i = 0; i < dc->grad.size(); ++i) db->grad[i] += dc->grad[i] * da->values[i];
        }
      }
    });
  }
  return result;
}

Tensor scale(const Tensor& x, double factor) {
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = factor * x.values()[i];
  const bool track = should_record({&x});
  Tensor result = make_output(x.shape(), std::move(out), track);
  if (track) {
    auto dx = x.data();
    auto dc = result.data();
    active_graph()->add_node("scalar-scale", dc, [dx, dc, factor]() {
      if (dc->grad.empty() || !dx->requires_grad) return;
      ensure_data_grad(*dx);
      for (std::size_t i = 0; i < dc->grad.size(); ++i) dx->grad[i] += factor * dc->grad[i];
    });
  }
  return result;
}

Tensor exp(const Tensor& x) {
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(x.values()[i]);
  const bool track = should_record({&x});
  Tensor result = make_output(x.shape(), std::move(out), track);
  if (track) {
    auto dx = x.data();
    auto dc = result.data();
    active_graph()->add_node("exp", dc, [dx, dc]() {
      if (dc->grad.empty() || !dx->requires_grad) return;
      ensure_data_grad(*dx);
      for (std::size_t i = 0; i < dc->grad.size(); ++i) dx->grad[i] += dc->grad[i] * dc->values[i];
    });
  }
  return result;
}

Tensor log(const Tensor& x) {
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(x.values()[i] > 0.0)) {
      throw std::invalid_argument("log: non-positive input " + std::to_string(x.values()[i]) +
                                  " at index " + std::to_string(i));
    }
    out[i] = std::log(x.values()[i]);
  }
  const bool track = should_record({&x});
  Tensor result = make_output(x.shape(), std::move(out), track);
  if (track) {
    auto dx = x.data();
    auto dc = result.data();
    active_graph()->add_node("log", dc, [dx, dc]() {
      if (dc->grad.empty() || !dx->requires_grad) return;
      ensure_data_grad(*dx);
      for (std::size_t i = 0; i < dc->grad.size(); ++i) dx->grad[i] += dc->grad[i] / dx->values[i];
    });
  }
  return result;
}

namespace {
thread_local double* g_relu_gap_slot = nullptr;
}

void set_relu_gap_probe(double* slot) { g_relu_gap_slot = slot; }

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.numel());
  if (g_relu_gap_slot != nullptr) {
    for (double v : x.values()) *g_relu_gap_slot = std::min(*g_relu_gap_slot, std::fabs(v));
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.values()[i] > 0.0 ? x.values()[i] : 0.0;
  const bool track = should_record({&x});
  Tensor result = make_output(x.shape(), std::move(out), track);
  if (track) {
    auto dx = x.data();
    auto dc = result.data();
    active_graph()->add_node("relu", dc, [dx, dc]() {
      if (dc->grad.empty() || !dx->requires_grad) return;
      ensure_data_grad(*dx);
      for (std::size_t i = 0; i < dc->grad.size(); ++i) {
        if (dx->values[i] > 0.0) dx->grad[i] += dc->grad[i];
      }
    });
  }
  return result;
}

Tensor row_softmax(const Tensor& x) {
  require_rank12("row-softmax", x);
  const std::size_t r = x.rows(), c = x.cols();
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = x.values().data() + i * c;
    double* orow = out.data() + i * c;
    double mx = row[0];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double denom = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      orow[j] = std::exp(row[j] - mx);
      denom += orow[j];
    }
    for (std::size_t j = 0; j < c; ++j) orow[j] /= denom;
  }
  const bool track = should_record({&x});
  Tensor result = make_output(x.shape(), std::move(out), track);
  if (track) {
    auto dx = x.data();
    auto dc = result.data();
    active_graph()->add_node("row-softmax", dc, [dx, dc, r, c]() {
      if (dc->grad.empty() || !dx->requires_grad) return;
      ensure_data_grad(*dx);
      for (std::size_t i = 0; i < r; ++i) {
        const double* y = dc->values.data() + i * c;
        const double* gy = dc->grad.data() + i * c;
        double inner = 0.0;
        for (std::size_t j = 0; j < c; ++j) inner += gy[j] * y[j];
        double* gx = dx->grad.data() + i * c;
        for (std::size_t j = 0; j < c; ++j) gx[j] += y[j] * (gy[j] - inner);
      }
    });
  }
  return result;
}

Tensor l2_normalize_rows(const Tensor& x) {
  require_rank12("l2-normalize-rows", x);
  const std::size_t r = x.rows(), c = x.cols();
  std::vector<double> out(x.numel());
  std::vector<double> norms(r);
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = x.values().data() + i * c;
    double sq = 0.0;
    for (std::size_t j = 0; j < c; ++j) sq += row[j] * row[j];
    const double norm = std::sqrt(sq);
    if (norm <= 1e-10) {
      throw std::invalid_argument("l2-normalize-rows: row " + std::to_string(i) +
                                  " has norm " + std::to_string(norm));
    }
    norms[i] = norm;
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = row[j] / norm;
  }
  const bool track = should_record({&x});
  Tensor result = make_output(x.shape(), std::move(out), track);
  if (track) {
    auto dx = x.data();
    auto dc = result.data();
    active_graph()->add_node("l2-normalize-rows", dc, [dx, dc, norms, r, c]() {
      if (dc->grad.empty() || !dx->requires_grad) return;
      ensure_data_grad(*dx);
      for (std::size_t i = 0; i < r; ++i) {
        const double* y = dc->values.data() + i * c;
        const double* gy = dc->grad.data() + i * c;
        double inner = 0.0;
        for (std::size_t j = 0; j < c; ++j) inner += gy[j] * y[j];
        double* gx = dx->grad.data() + i * c;
        for (std::size_t j = 0; j < c; ++j) gx[j] += (gy[j] - y[j] * inner) / norms[i];
      }
    });
  }
  return result;
}

Tensor mean_over_axis(const Tensor& x, int axis) {
  require_rank12("mean-over-axis", x);
  if (axis != 0 && axis != 1) {
    throw std::invalid_argument("mean-over-axis: axis must be 0 or 1");
  }
  if (x.rank() == 1) {
    if (axis != 0) throw std::invalid_argument("mean-over-axis: rank-1 input accepts axis 0 only");
    const std::size_t n = x.numel();
    double acc = 0.0;
    for (double v : x.values()) acc += v;
    const bool track = should_record({&x});
    Tensor result = make_output({1}, {acc / static_cast<double>(n)}, track);
    if (track) {
      auto dx = x.data();
      auto dc = result.data();
      active_graph()->add_node("mean-over-axis", dc, [dx, dc, n]() {
        if (dc->grad.empty() || !dx->requires_grad) return;
        ensure_data_grad(*dx);
        const double g = dc->grad[0] / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) dx->grad[i] += g;
      });
    }
    return result;
  }

  const std::size_t r = x.shape()[0], c = x.shape()[1];
  std::vector<double> out(axis == 0 ? c : r, 0.0);
  if (axis == 0) {
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) out[j] += x.values()[i * c + j];
    for (std::size_t j = 0; j < c; ++j) out[j] /= static_cast<double>(r);
  } else {
    for (std::size_t i = 0; i < r; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < c; ++j) acc += x.values()[i * c + j];
      out[i] = acc / static_cast<double>(c);
    }
  }
  const bool track = should_record({&x});
  const std::size_t out_len = out.size();
  Tensor result = make_output({out_len}, std::move(out), track);
  if (track) {
    auto dx = x.data();
    auto dc = result.data();
    active_graph()->add_node("mean-over-axis", dc, [dx, dc, r, c, axis]() {
      if (dc->grad.empty() || !dx->requires_grad) return;
      ensure_data_grad(*dx);
      if (axis == 0) {
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j)
            dx->grad[i * c + j] += dc->grad[j] / static_cast<double>(r);
      } else {
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j)
            dx->grad[i * c + j] += dc->grad[i] / static_cast<double>(c);
      }
    });
  }
  return result;
}

Tensor concatenate(const std::vector<Tensor>& inputs, int axis) {
  if (inputs.empty()) throw std::invalid_argument("concatenate: no inputs");
  if (axis != 0 && axis != 1) throw std::invalid_argument("concatenate: axis must be 0 or 1");

  std::vector<const Tensor*> ptrs;
  ptrs.reserve(inputs.size());
  for (const Tensor& t : inputs) {
    require_rank12("concatenate", t);
    ptrs.push_back(&t);
  }

  Tensor result;
  std::vector<std::size_t> row_offsets;  // axis 0: starting row per input
  std::vector<std::size_t> col_offsets;  // axis 1: starting col per input
  if (axis == 0) {
    const std::size_t c = inputs[0].cols();
    std::size_t total_rows = 0;
    for (const Tensor& t : inputs) {
      if (t.cols() != c) {
        shape_error("concatenate", inputs[0], t, "column counts differ for axis-0 concat");
      }
      row_offsets.push_back(total_rows);
      total_rows += t.rows();
    }
    std::vector<double> out;
    out.reserve(total_rows * c);
    for (const Tensor& t : inputs) out.insert(out.end(), t.values().begin(), t.values().end());
    bool track = false;
    for (const Tensor& t : inputs) track = track || (active_graph() && t.requires_grad());
    result = make_output({total_rows, c}, std::move(out), track);
    if (track) {
      std::vector<std::shared_ptr<TensorData>> ins;
      for (const Tensor& t : inputs) ins.push_back(t.data());
      auto dc = result.data();
      active_graph()->add_node("concatenate", dc, [ins, dc, row_offsets, c]() {
        if (dc->grad.empty()) return;
        for (std::size_t u = 0; u < ins.size(); ++u) {
          if (!ins[u]->requires_grad) continue;
          ensure_data_grad(*ins[u]);
          const std::size_t n = ins[u]->values.size();
          const double* src = dc->grad.data() + row_offsets[u] * c;
          for (std::size_t i = 0; i < n; ++i) ins[u]->grad[i] += src[i];
        }
      });
    }
  } else {
    const std::size_t r = inputs[0].rows();
    std::size_t total_cols = 0;
    for (const Tensor& t : inputs) {
      if (t.rows() != r) {
        shape_error("concatenate", inputs[0], t, "row counts differ for axis-1 concat");
      }
      col_offsets.push_back(total_cols);
      total_cols += t.cols();
    }
    std::vector<double> out(r * total_cols);
    for (std::size_t u = 0; u < inputs.size(); ++u) {
      const std::size_t c = inputs[u].cols();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j)
          out[i * total_cols + col_offsets[u] + j] = inputs[u].values()[i * c + j];
    }
    bool track = false;
    for (const Tensor& t : inputs) track = track || (active_graph() && t.requires_grad());
    result = make_output({r, total_cols}, std::move(out), track);
    if (track) {
      std::vector<std::shared_ptr<TensorData>> ins;
      std::vector<std::size_t> widths;
      for (const Tensor& t : inputs) {
        ins.push_back(t.data());
        widths.push_back(t.cols());
      }
      auto dc = result.data();
      active_graph()->add_node("concatenate", dc, [ins, dc, col_offsets, widths, r, total_cols]() {
        if (dc->grad.empty()) return;
        for (std::size_t u = 0; u < ins.size(); ++u) {
          if (!ins[u]->requires_grad) continue;
          ensure_data_grad(*ins[u]);
          const std::size_t c = widths[u];
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j)
              ins[u]->grad[i * c + j] += dc->grad[i * total_cols + col_offsets[u] + j];
        }
      });
    }
  }
  return result;
}

namespace {

Tensor gather_impl(const char* tag, const Tensor& x, const std::vector<int>& indices) {
  if (x.rank() != 2) {
    throw std::invalid_argument(std::string(tag) + ": expected rank-2 source, got " +
                                shape_string(x.shape()));
  }
  if (indices.empty()) throw std::invalid_argument(std::string(tag) + ": empty index list");
  const std::size_t r = x.shape()[0], c = x.shape()[1];
  for (int id : indices) {
    if (id < 0 || static_cast<std::size_t>(id) >= r) {
      throw std::invalid_argument(std::string(tag) + ": index " + std::to_string(id) +
                                  " out of range for " + std::to_string(r) + " rows");
    }
  }
  std::vector<double> out(indices.size() * c);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const double* src = x.values().data() + static_cast<std::size_t>(indices[i]) * c;
    std::copy(src, src + c, out.data() + i * c);
  }
  const bool track = should_record({&x});
  Tensor result = make_output({indices.size(), c}, std::move(out), track);
  if (track) {
    auto dx = x.data();
    auto dc = result.data();
    active_graph()->add_node(tag, dc, [dx, dc, indices, c]() {
      if (dc->grad.empty() || !dx->requires_grad) return;
      ensure_data_grad(*dx);
      for (std::size_t i = 0; i < indices.size(); ++i) {
        double* dst = dx->grad.data() + static_cast<std::size_t>(indices[i]) * c;
        const double* src = dc->grad.data() + i * c;
        for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
      }
    });
  }
  return result;
}

}  // namespace

Tensor gather_rows(const Tensor& x, const std::vector<int>& indices) {
  return gather_impl("gather-rows", x, indices);
}

Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids) {
  return gather_impl("embedding-lookup", table, ids);
}

Tensor transpose(const Tensor& x) {
  if (x.rank() != 2) {
    throw std::invalid_argument("transpose: expected rank-2 input, got " + shape_string(x.shape()));
  }
  const std::size_t r = x.shape()[0], c = x.shape()[1];
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = x.values()[i * c + j];
  const bool track = should_record({&x});
  Tensor result = make_output({c, r}, std::move(out), track);
  if (track) {
    auto dx = x.data();
    auto dc = result.data();
    active_graph()->add_node("transpose", dc, [dx, dc, r, c]() {
      if (dc->grad.empty() || !dx->requires_grad) return;
      ensure_data_grad(*dx);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) dx->grad[i * c + j] += dc->grad[j * r + i];
    });
  }
  return result;
}

Tensor masked_fill(const Tensor& x, const std::vector<std::uint8_t>& mask, double fill) {
  if (mask.size() != x.numel()) {
    throw std::invalid_argument("masked-fill: mask size " + std::to_string(mask.size()) +
                                " does not match tensor " + shape_string(x.shape()));
  }
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = mask[i] ? fill : x.values()[i];
  const bool track = should_record({&x});
  Tensor result = make_output(x.shape(), std::move(out), track);
  if (track) {
    auto dx = x.data();
    auto dc = result.data();
    active_graph()->add_node("masked-fill", dc, [dx, dc, mask]() {
      if (dc->grad.empty() || !dx->requires_grad) return;
      ensure_data_grad(*dx);
      for (std::size_t i = 0; i < dc->grad.size(); ++i) {
        if (!mask[i]) dx->grad[i] += dc->grad[i];
      }
    });
  }
  return result;
}

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kMatmul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kSubtract: return "subtract";
    case OpKind::kMul: return "elementwise-multiply";
    case OpKind::kScale: return "scalar-scale";
    case OpKind::kExp: return "exp";
    case OpKind::kLog: return "log";
    case OpKind::kRowSoftmax: return "row-softmax";
    case OpKind::kL2NormalizeRows: return "l2-normalize-rows";
    case OpKind::kMeanOverAxis: return "mean-over-axis";
    case OpKind::kConcat: return "concatenate";
    case OpKind::kGatherRows: return "gather-rows";
    case OpKind::kTranspose: return "transpose";
    case OpKind::kRelu: return "relu";
    case OpKind::kEmbeddingLookup: return "embedding-lookup";
    case OpKind::kMaskedFill: return "masked-fill";
  }
  return "unknown";
}

Tensor op_forward(OpKind kind, const std::vector<Tensor>& inputs, const OpAttrs& attrs) {
  auto want = [&](std::size_t n) {
    if (inputs.size() != n) {
      throw std::invalid_argument(std::string(op_name(kind)) + ": expected " + std::to_string(n) +
                                  " inputs, got " + std::to_string(inputs.size()));
    }
  };
  switch (kind) {
    case OpKind::kMatmul: want(2); return matmul(inputs[0], inputs[1]);
    case OpKind::kAdd: want(2); return add(inputs[0], inputs[1]);
    case OpKind::kSubtract: want(2); return subtract(inputs[0], inputs[1]);
    case OpKind::kMul: want(2); return mul(inputs[0], inputs[1]);
    case OpKind::kScale: want(1); return scale(inputs[0], attrs.scale);
    case OpKind::kExp: want(1); return exp(inputs[0]);
    case OpKind::kLog: want(1); return log(inputs[0]);
    case OpKind::kRowSoftmax: want(1); return row_softmax(inputs[0]);
    case OpKind::kL2NormalizeRows: want(1); return l2_normalize_rows(inputs[0]);
    case OpKind::kMeanOverAxis: want(1); return mean_over_axis(inputs[0], attrs.axis);
    case OpKind::kConcat: return concatenate(inputs, attrs.axis);
    case OpKind::kGatherRows: want(1); return gather_rows(inputs[0], attrs.indices);
    case OpKind::kTranspose: want(1); return transpose(inputs[0]);
    case OpKind::kRelu: want(1); return relu(inputs[0]);
    case OpKind::kEmbeddingLookup: want(1); return embedding_lookup(inputs[0], attrs.indices);
    case OpKind::kMaskedFill: want(1); return masked_fill(inputs[0], attrs.mask, attrs.fill);
  }
  throw std::invalid_argument("op_forward: unknown kind");
}

Tensor neg(const Tensor& x) { return scale(x, -1.0); }

Tensor sum_all(const Tensor& x) {
  const double n = static_cast<double>(x.numel());
  if (x.rank() == 1) return scale(mean_over_axis(x, 0), n);
  return scale(mean_over_axis(mean_over_axis(x, 1), 0), n);
}

Tensor mean_all(const Tensor& x) { return scale(sum_all(x), 1.0 / static_cast<double>(x.numel())); }

Tensor dot(const Tensor& u, const Tensor& v) { return matmul(u, v); }

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
  return add(matmul(x, w), b);
}

}  // namespace slucl
