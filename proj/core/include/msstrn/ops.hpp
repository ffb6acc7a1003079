#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "msstrn/tape.hpp"

// Differentiable primitives. All shape agreement is explicit: binary
// elementwise ops need identical shapes, and the few ops that reuse an
// operand across leading slices say so in their name.
namespace msstrn::ops {

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);

Var sigmoid(Var a);
Var tanh(Var a);
// Subgradient at 0 is 0.
Var abs(Var a);

// A: m x k, B: k x n.
Var matmul(Var a, Var b);
// A: (..., m, k), B: (..., k, n) with identical leading dimensions.
Var batched_matmul(Var a, Var b);
// x: (..., k), w: k x n -> (..., n). The same w applies to every row.
Var linear(Var x, Var w);
// g: n x n, x: (p, n, c) -> (p, n, c) with out[p] = g * x[p].
Var graph_mix(Var g, Var x);
// z: (p, n, j), theta: (n, j, o) -> (p, n, o) with a separate matrix per node n.
Var node_matmul(Var z, Var theta);

// (..., m, n) -> (..., n, m)
Var transpose_last(Var a);
Var permute(Var a, std::span<const std::size_t> axes);
Var reshape(Var a, Shape shape);

Var concat_last(std::span<const Var> parts);
Var slice_last(Var a, std::size_t begin, std::size_t width);
Var stack(std::span<const Var> parts, std::size_t axis);
// Removes `axis`, keeping entry `index` along it.
Var select(Var a, std::size_t axis, std::size_t index);

// Adds b to every trailing block of a: a has shape (..., b.shape...).
Var add_trailing(Var a, Var b);

// Softmax along the last axis, max-subtracted.
Var softmax_rows(Var a);
// Normalizes along the last axis with population variance; gain and bias
// have the size of that axis.
Var layer_norm(Var a, Var gain, Var bias, double eps = 1e-5);

Var sum(Var a);
Var mean(Var a);

}  // namespace msstrn::ops
