#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include "mvlloc/autodiff.hpp"
#include "mvlloc/geometry.hpp"

namespace mvl {

/// Learnable log-variance weights on the tape (initialized to -4 and -2).
struct LossWeights {
  Var alpha;
  Var beta;
};

/// Ground truth for one sample; `orientation` must be hemisphere-canonical.
struct PoseTarget {
  geo::Vec3 position{};
  geo::Quaternion orientation;
  std::size_t scene = 0;
};

/// Individual pieces of one sample's objective, all shape [1].
struct PoseLossTerms {
  Var total;
  Var position_l1;
  Var rotation_l1;
  Var classification;
};

/// -log softmax(z)[k0] via log-sum-exp. Throws std::out_of_range for k0 >= K.
Var classification_loss(const Var& logits, std::size_t k0);

/// log(canonicalize(normalize(q_raw))) for a [1 x 4] (w, x, y, z) row,
/// giving a [1 x 3] row. Throws std::domain_error when |q_raw| < 1e-12.
Var quat_log_of_raw(const Var& q_raw);

/// |p - p^|_1 e^-alpha + alpha + |log q - log q^|_1 e^-beta + beta + L_cls
/// for a [1 x 7] head output (p, q_raw). `sample` is only used to label
/// errors.
PoseLossTerms pose_loss(const Var& head_output, const PoseTarget& target, const LossWeights& weights,
                        const Var& logits, std::optional<std::size_t> sample = std::nullopt);

/// Arithmetic mean of per-sample losses, summed in index order.
Var batch_loss(std::span<const Var> per_sample);

/// Plain-value evaluation of pose_loss, mainly for tests and reports.
double pose_loss_value(const geo::Vec3& p, const geo::Quaternion& q_raw, const PoseTarget& target, double alpha,
                       double beta, std::span<const double> logits);

}  // namespace mvl
