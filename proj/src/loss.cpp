#include "mvlloc/loss.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mvl {

Var classification_loss(const Var& logits, std::size_t k0) { return ad::nll_from_logits(logits, k0); }

Var quat_log_of_raw(const Var& q_raw) {
  GradientTape& tape = *q_raw.tape();
  const Tensor& raw = q_raw.value();
  if (raw.size() != 4) throw std::invalid_argument("quat_log_of_raw: expected 4 values, got " + shape_string(raw.shape()));
  const double n = std::sqrt(raw[0] * raw[0] + raw[1] * raw[1] + raw[2] * raw[2] + raw[3] * raw[3]);
  if (!(n >= geo::kDegenerateNorm)) throw std::domain_error("degenerate predicted quaternion (norm < 1e-12)");

  const geo::Quaternion unit{raw[0] / n, {raw[1] / n, raw[2] / n, raw[3] / n}};
  const geo::Quaternion canon = geo::canonicalize_hemisphere(unit);
  const double sign = canon.w == unit.w && canon.v == unit.v ? 1.0 : -1.0;
  const geo::LogQuaternion u = geo::quat_log(canon);

  const Var in[] = {q_raw};
  return tape.record(Tensor({1, 3}, {u[0], u[1], u[2]}), in,
                     [&tape, q_raw, unit, canon, sign, n](const Tensor& g, const Tensor&) {
                       // d u / d canon, as a 3x4 Jacobian over (w, x, y, z).
                       double jac[3][4] = {};
                       const double w = canon.w;
                       const auto& v = canon.v;
                       const double s = geo::norm(v);
                       if (s > geo::kSmallAngle) {
                         const double r2 = s * s + w * w;
                         const double theta = std::atan2(s, w);
                         const double k = theta / s;
                         const double coupling = (w / r2 - k) / (s * s);
                         for (int i = 0; i < 3; ++i) {
                           jac[i][0] = -v[i] / r2;
                           for (int j = 0; j < 3; ++j) jac[i][j + 1] = (i == j ? k : 0.0) + v[i] * v[j] * coupling;
                         }
                       } else {
                         for (int i = 0; i < 3; ++i) jac[i][i + 1] = 1.0;
                       }
                       double gc[4] = {};
                       for (int j = 0; j < 4; ++j)
                         for (int i = 0; i < 3; ++i) gc[j] += jac[i][j] * g[i];
                       // Through the sign flip and the projection (I - q q^T) / n.
                       const double q[4] = {unit.w, unit.v[0], unit.v[1], unit.v[2]};
                       double dot = 0.0;
                       for (int j = 0; j < 4; ++j) dot += q[j] * gc[j];
                       Tensor& gr = tape.grad_buffer(q_raw);
                       for (int j = 0; j < 4; ++j) gr[j] += sign * (gc[j] - q[j] * dot) / n;
                     });
}

PoseLossTerms pose_loss(const Var& head_output, const PoseTarget& target, const LossWeights& weights,
                        const Var& logits, std::optional<std::size_t> sample) {
  GradientTape& tape = *head_output.tape();
  if (head_output.value().size() != 7) {
    throw std::invalid_argument("pose head output must hold 7 values, got " + shape_string(head_output.shape()));
  }
  const Var p = ad::slice_cols(head_output, 0, 3);
  const Var q_raw = ad::slice_cols(head_output, 3, 7);

  Var log_q;
  try {
    log_q = quat_log_of_raw(q_raw);
  } catch (const std::domain_error& e) {
    throw std::domain_error(sample ? "sample " + std::to_string(*sample) + ": " + e.what() : std::string(e.what()));
  }
  const geo::LogQuaternion log_target = geo::quat_log(target.orientation);

  const Var p_hat = tape.constant(Tensor({1, 3}, {target.position[0], target.position[1], target.position[2]}));
  const Var log_hat = tape.constant(Tensor({1, 3}, {log_target[0], log_target[1], log_target[2]}));

  PoseLossTerms terms;
  terms.position_l1 = ad::sum(ad::abs(ad::sub(p, p_hat)));
  terms.rotation_l1 = ad::sum(ad::abs(ad::sub(log_q, log_hat)));
  terms.classification = classification_loss(logits, target.scene);

  const Var position_term = ad::add(ad::scalar_mul(ad::exp(ad::neg(weights.alpha)), terms.position_l1), weights.alpha);
  const Var rotation_term = ad::add(ad::scalar_mul(ad::exp(ad::neg(weights.beta)), terms.rotation_l1), weights.beta);
  terms.total = ad::add(ad::add(position_term, rotation_term), terms.classification);
  return terms;
}

Var batch_loss(std::span<const Var> per_sample) {
  if (per_sample.empty()) throw std::invalid_argument("batch_loss on an empty batch");
  Var total = per_sample.front();
  for (std::size_t i = 1; i < per_sample.size(); ++i) total = ad::add(total, per_sample[i]);
  if (per_sample.size() == 1) return total;
  return ad::scale(total, 1.0 / static_cast<double>(per_sample.size()));
}

double pose_loss_value(const geo::Vec3& p, const geo::Quaternion& q_raw, const PoseTarget& target, double alpha,
                       double beta, std::span<const double> logits) {
  GradientTape tape;
  const Var head =
      tape.constant(Tensor({1, 7}, {p[0], p[1], p[2], q_raw.w, q_raw.v[0], q_raw.v[1], q_raw.v[2]}));
  const Var z = tape.constant(Tensor({1, logits.size()}, std::vector<double>(logits.begin(), logits.end())));
  const LossWeights weights{tape.constant(Tensor::scalar(alpha)), tape.constant(Tensor::scalar(beta))};
  return pose_loss(head, target, weights, z).total.value().item();
}

}  // namespace mvl
