#pragma once

#include <cstdint>
#include <vector>

#include "mvlloc/rng.hpp"
#include "mvlloc/tensor.hpp"

/// Value-level tensor kernels. Every function is pure given its inputs (and
/// the generator state for dropout). The tape in autodiff.hpp records these
/// same kernels and supplies their adjoints.
namespace mvl::ops {

inline constexpr double kLayerNormEps = 1e-5;

/// [m x k] * [k x n].
Tensor matmul(const Tensor& a, const Tensor& b);
/// [m x k] * [n x k]^T.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
/// [k x m]^T * [k x n].
Tensor matmul_tn(const Tensor& a, const Tensor& b);

Tensor transpose(const Tensor& a);

/// Per-row normalization with biased variance, then `* gain + bias`.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = kLayerNormEps);

/// Softmax of a vector, max-subtracted.
Tensor softmax(const Tensor& z);
/// Softmax applied independently to each row of a matrix.
Tensor softmax_rows(const Tensor& x);
/// log(sum(exp(z))) computed with max subtraction.
double log_sum_exp(const Tensor& z);

/// Exact GELU, x * Phi(x).
Tensor gelu(const Tensor& x);
double gelu(double x);
/// d gelu / dx = Phi(x) + x * phi(x).
double gelu_derivative(double x);

/// Inverted dropout mask: 0 with probability `rate`, otherwise 1/(1-rate).
std::vector<double> dropout_mask(std::size_t n, double rate, Rng& rng);
/// Training: x * mask. Inference (or rate == 0): returns x unchanged.
Tensor dropout(const Tensor& x, double rate, Rng& rng, bool training);

}  // namespace mvl::ops
