#pragma once

#include <cstdint>
#include <vector>

#include "slucl/tensor.hpp"

namespace slucl {

// Differentiable operation set. Each op validates shapes, computes values,
// and records a backward closure on the active graph when any input requires
// grad. Domain violations (shape mismatch, log of non-positive values,
// normalizing a zero-norm row) throw std::invalid_argument.

// matmul supports [r x k]*[k x c] -> [r x c]; rank-1 operands are treated as
// a single row (left) or a column (right), so matmul(u, v) of two vectors is
// their dot product as a scalar.
Tensor matmul(const Tensor& a, const Tensor& b);

// add of identical shapes, or [r x c] + [c] row-broadcast (bias add).
Tensor add(const Tensor& a, const Tensor& b);
Tensor subtract(const Tensor& a, const Tensor& b);

// Elementwise product of identical shapes; either operand may be a scalar
// {1}, which broadcasts.
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& x, double factor);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor relu(const Tensor& x);

// Gradient-check support: while `slot` is set (thread-local), every relu
// records the smallest |input| it sees there. Central finite differences are
// one-sided at relu kinks, so the check harness skips batches whose
// pre-activations sit within the probe step of zero.
void set_relu_gap_probe(double* slot);

// Stable softmax over the last axis; rank-1 input is one row.
Tensor row_softmax(const Tensor& x);

// Divide each row by its Euclidean norm; rows with norm <= 1e-10 are
// rejected.
Tensor l2_normalize_rows(const Tensor& x);

// axis 0: mean down columns, [r x c] -> [c] (rank-1 input -> scalar);
// axis 1: mean across columns, [r x c] -> [r].
Tensor mean_over_axis(const Tensor& x, int axis);

// axis 0 stacks rows (rank-1 inputs become rows of the result); axis 1
// concatenates columns of rank-2 inputs with equal row counts.
Tensor concatenate(const std::vector<Tensor>& inputs, int axis);

Tensor gather_rows(const Tensor& x, const std::vector<int>& indices);
// Same gather semantics against an embedding table; ids must be < rows.
Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids);

Tensor transpose(const Tensor& x);

// out[i] = mask[i] ? fill : x[i]; the mask is a constant.
Tensor masked_fill(const Tensor& x, const std::vector<std::uint8_t>& mask, double fill);

// ---------------------------------------------------------------------------
// Generic tagged entry point over the same op set (used by the op-level
// gradient property suite).

enum class OpKind {
  kMatmul,
  kAdd,
  kSubtract,
  kMul,
  kScale,
  kExp,
  kLog,
  kRowSoftmax,
  kL2NormalizeRows,
  kMeanOverAxis,
  kConcat,
  kGatherRows,
  kTranspose,
  kRelu,
  kEmbeddingLookup,
  kMaskedFill,
};

struct OpAttrs {
  int axis = 0;
  double scale = 1.0;
  double fill = 0.0;
  std::vector<std::uint8_t> mask;
  std::vector<int> indices;
};

const char* op_name(OpKind kind);
Tensor op_forward(OpKind kind, const std::vector<Tensor>& inputs, const OpAttrs& attrs = {});

// ---------------------------------------------------------------------------
// Composites built from the ops above.

Tensor neg(const Tensor& x);
Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);
Tensor dot(const Tensor& u, const Tensor& v);
// x [r x in] (or rank-1 [in]) -> x*w + b with w [in x out], b [out].
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b);

}  // namespace slucl
