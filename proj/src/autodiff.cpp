#include "mvlloc/autodiff.hpp"

#include <cmath>
#include <stdexcept>

#include "mvlloc/ops.hpp"

namespace mvl {

const Tensor& Var::value() const {
  if (!tape_) throw std::logic_error("use of an unbound Var");
  return tape_->value(id_);
}

bool Var::requires_grad() const { return tape_ && tape_->requires_grad(id_); }

const Tensor& Gradients::at(const std::string& name) const {
  auto it = grads_.find(name);
  if (it == grads_.end()) throw std::out_of_range("parameter '" + name + "' is not on the tape");
  return it->second;
}

Var GradientTape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, false});
  return {this, nodes_.size() - 1};
}

Var GradientTape::parameter(const std::string& name, const Tensor& value) {
  if (auto it = params_.find(name); it != params_.end()) return {this, it->second};
  nodes_.push_back(Node{value, {}, {}, true});
  params_.emplace(name, nodes_.size() - 1);
  return {this, nodes_.size() - 1};
}

Var GradientTape::record(Tensor value, std::span<const Var> inputs, Backward backward) {
  bool needs = false;
  for (const auto& in : inputs) {
    if (in.tape() != this) throw std::logic_error("op input recorded on a different tape");
    needs = needs || nodes_[in.id()].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, needs ? std::move(backward) : Backward{}, needs});
  return {this, nodes_.size() - 1};
}

Tensor& GradientTape::grad_buffer(const Var& v) {
  Node& node = nodes_[v.id()];
  if (node.grad.empty()) node.grad = Tensor(node.value.shape());
  return node.grad;
}

void GradientTape::accumulate(const Var& v, const Tensor& g) {
  if (!nodes_[v.id()].requires_grad) return;
  Tensor& buf = grad_buffer(v);
  if (buf.size() != g.size()) {
    throw std::logic_error("gradient shape " + shape_string(g.shape()) + " does not match value shape " +
                           shape_string(buf.shape()));
  }
  for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
}

Gradients GradientTape::backward(const Var& loss) {
  if (loss.tape() != this) throw std::logic_error("loss was not recorded on this tape");
  const Tensor& lv = nodes_[loss.id()].value;
  if (lv.size() != 1) throw std::invalid_argument("backward: loss must be a scalar, got " + shape_string(lv.shape()));
  lv.require_finite("loss");

  for (auto& node : nodes_) node.grad = Tensor{};
  if (nodes_[loss.id()].requires_grad) grad_buffer(loss)[0] = 1.0;

  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (node.grad.empty() || !node.backward) continue;
    node.backward(node.grad, node.value);
  }

  Gradients out;
  for (const auto& [name, id] : params_) {
    const Node& node = nodes_[id];
    out.grads_.emplace(name, node.grad.empty() ? Tensor(node.value.shape()) : node.grad);
  }
  return out;
}

namespace ad {

namespace {

void require_same_shape(const char* op, const Var& a, const Var& b) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                                shape_string(b.shape()));
  }
}

GradientTape& tape_of(const Var& v) {
  if (!v.tape()) throw std::logic_error("use of an unbound Var");
  return *v.tape();
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  auto& tape = tape_of(a);
  Tensor out = ops::matmul(a.value(), b.value());
  const Var in[] = {a, b};
  return tape.record(std::move(out), in, [&tape, a, b](const Tensor& g, const Tensor&) {
    if (a.requires_grad()) tape.accumulate(a, ops::matmul_nt(g, b.value()));
    if (b.requires_grad()) tape.accumulate(b, ops::matmul_tn(a.value(), g));
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  auto& tape = tape_of(a);
  Tensor out = ops::matmul_nt(a.value(), b.value());
  const Var in[] = {a, b};
  return tape.record(std::move(out), in, [&tape, a, b](const Tensor& g, const Tensor&) {
    if (a.requires_grad()) tape.accumulate(a, ops::matmul(g, b.value()));
    if (b.requires_grad()) tape.accumulate(b, ops::matmul_tn(g, a.value()));
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape("add", a, b);
  auto& tape = tape_of(a);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  const Var in[] = {a, b};
  return tape.record(std::move(out), in, [&tape, a, b](const Tensor& g, const Tensor&) {
    tape.accumulate(a, g);
    tape.accumulate(b, g);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape("sub", a, b);
  auto& tape = tape_of(a);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  const Var in[] = {a, b};
  return tape.record(std::move(out), in, [&tape, a, b](const Tensor& g, const Tensor&) {
    tape.accumulate(a, g);
    if (b.requires_grad()) {
      Tensor& gb = tape.grad_buffer(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape("mul", a, b);
  auto& tape = tape_of(a);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  const Var in[] = {a, b};
  return tape.record(std::move(out), in, [&tape, a, b](const Tensor& g, const Tensor&) {
    if (a.requires_grad()) {
      Tensor& ga = tape.grad_buffer(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b.value()[i];
    }
    if (b.requires_grad()) {
      Tensor& gb = tape.grad_buffer(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a.value()[i];
    }
  });
}

Var add_row(const Var& x, const Var& row) {
  auto& tape = tape_of(x);
  const std::size_t n = x.value().rows();
  const std::size_t d = x.value().cols();
  if (row.value().size() != d) {
    throw std::invalid_argument("add_row: row of size " + std::to_string(row.value().size()) +
                                " does not match width " + std::to_string(d));
  }
  Tensor out = x.value();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) out[r * d + c] += row.value()[c];
  const Var in[] = {x, row};
  return tape.record(std::move(out), in, [&tape, x, row, n, d](const Tensor& g, const Tensor&) {
    tape.accumulate(x, g);
    if (row.requires_grad()) {
      Tensor& gr = tape.grad_buffer(row);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) gr[c] += g[r * d + c];
    }
  });
}

Var scale(const Var& x, double factor) {
  auto& tape = tape_of(x);
  Tensor out = x.value();
  for (auto& v : out.storage()) v *= factor;
  const Var in[] = {x};
  return tape.record(std::move(out), in, [&tape, x, factor](const Tensor& g, const Tensor&) {
    Tensor& gx = tape.grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * factor;
  });
}

Var add_scalar(const Var& x, double c) {
  auto& tape = tape_of(x);
  Tensor out = x.value();
  for (auto& v : out.storage()) v += c;
  const Var in[] = {x};
  return tape.record(std::move(out), in, [&tape, x](const Tensor& g, const Tensor&) { tape.accumulate(x, g); });
}

Var neg(const Var& x) { return scale(x, -1.0); }

Var abs(const Var& x) {
  auto& tape = tape_of(x);
  Tensor out = x.value();
  for (auto& v : out.storage()) v = std::abs(v);
  const Var in[] = {x};
  return tape.record(std::move(out), in, [&tape, x](const Tensor& g, const Tensor&) {
    Tensor& gx = tape.grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double v = x.value()[i];
      gx[i] += v > 0.0 ? g[i] : (v < 0.0 ? -g[i] : 0.0);
    }
  });
}

Var exp(const Var& x) {
  auto& tape = tape_of(x);
  Tensor out = x.value();
  for (auto& v : out.storage()) v = std::exp(v);
  const Var in[] = {x};
  return tape.record(std::move(out), in, [&tape, x](const Tensor& g, const Tensor& y) {
    Tensor& gx = tape.grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i];
  });
}

Var sum(const Var& x) {
  auto& tape = tape_of(x);
  double total = 0.0;
  for (double v : x.value().data()) total += v;
  const Var in[] = {x};
  return tape.record(Tensor({1}, total), in, [&tape, x](const Tensor& g, const Tensor&) {
    Tensor& gx = tape.grad_buffer(x);
    for (auto& v : gx.storage()) v += g[0];
  });
}

Var scalar_mul(const Var& s, const Var& x) {
  if (s.value().size() != 1) throw std::invalid_argument("scalar_mul: first operand must be a single element");
  auto& tape = tape_of(x);
  const double sv = s.value()[0];
  Tensor out = x.value();
  for (auto& v : out.storage()) v *= sv;
  const Var in[] = {s, x};
  return tape.record(std::move(out), in, [&tape, s, x](const Tensor& g, const Tensor&) {
    if (s.requires_grad()) {
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * x.value()[i];
      tape.grad_buffer(s)[0] += acc;
    }
    if (x.requires_grad()) {
      const double sv2 = s.value()[0];
      Tensor& gx = tape.grad_buffer(x);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * sv2;
    }
  });
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
  auto& tape = tape_of(x);
  Tensor out = ops::layer_norm(x.value(), gain.value(), bias.value(), eps);
  const Var in[] = {x, gain, bias};
  return tape.record(std::move(out), in, [&tape, x, gain, bias, eps](const Tensor& g, const Tensor&) {
    const Tensor& xv = x.value();
    const std::size_t n = xv.rows();
    const std::size_t d = xv.cols();
    const double inv_d = 1.0 / static_cast<double>(d);
    std::vector<double> xhat(d), dxhat(d);
    Tensor* gx = x.requires_grad() ? &tape.grad_buffer(x) : nullptr;
    Tensor* gg = gain.requires_grad() ? &tape.grad_buffer(gain) : nullptr;
    Tensor* gb = bias.requires_grad() ? &tape.grad_buffer(bias) : nullptr;
    for (std::size_t r = 0; r < n; ++r) {
      const double* row = xv.data().data() + r * d;
      const double* grow = g.data().data() + r * d;
      double mean = 0.0;
      for (std::size_t c = 0; c < d; ++c) mean += row[c];
      mean *= inv_d;
      double var = 0.0;
      for (std::size_t c = 0; c < d; ++c) var += (row[c] - mean) * (row[c] - mean);
      var *= inv_d;
      const double rstd = 1.0 / std::sqrt(var + eps);
      double mean_dxhat = 0.0;
      double mean_dxhat_xhat = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        xhat[c] = (row[c] - mean) * rstd;
        dxhat[c] = grow[c] * gain.value()[c];
        mean_dxhat += dxhat[c];
        mean_dxhat_xhat += dxhat[c] * xhat[c];
        if (gg) (*gg)[c] += grow[c] * xhat[c];
        if (gb) (*gb)[c] += grow[c];
      }
      mean_dxhat *= inv_d;
      mean_dxhat_xhat *= inv_d;
      if (gx) {
        for (std::size_t c = 0; c < d; ++c) {
          (*gx)[r * d + c] += rstd * (dxhat[c] - mean_dxhat - xhat[c] * mean_dxhat_xhat);
        }
      }
    }
  });
}

Var softmax_rows(const Var& x) {
  auto& tape = tape_of(x);
  Tensor out = ops::softmax_rows(x.value());
  const Var in[] = {x};
  return tape.record(std::move(out), in, [&tape, x](const Tensor& g, const Tensor& p) {
    const std::size_t n = p.rows();
    const std::size_t d = p.cols();
    Tensor& gx = tape.grad_buffer(x);
    for (std::size_t r = 0; r < n; ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < d; ++c) dot += g[r * d + c] * p[r * d + c];
      for (std::size_t c = 0; c < d; ++c) gx[r * d + c] += p[r * d + c] * (g[r * d + c] - dot);
    }
  });
}

Var gelu(const Var& x) {
  auto& tape = tape_of(x);
  Tensor out = ops::gelu(x.value());
  const Var in[] = {x};
  return tape.record(std::move(out), in, [&tape, x](const Tensor& g, const Tensor&) {
    Tensor& gx = tape.grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * ops::gelu_derivative(x.value()[i]);
  });
}

Var dropout(const Var& x, double rate, Rng& rng, bool training) {
  if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("dropout rate must lie in [0, 1)");
  if (!training || rate == 0.0) return x;
  auto& tape = tape_of(x);
  auto mask = ops::dropout_mask(x.value().size(), rate, rng);
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  const Var in[] = {x};
  return tape.record(std::move(out), in, [&tape, x, mask = std::move(mask)](const Tensor& g, const Tensor&) {
    Tensor& gx = tape.grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * mask[i];
  });
}

Var slice_rows(const Var& x, std::size_t begin, std::size_t end) {
  auto& tape = tape_of(x);
  const Tensor& xv = x.value();
  const std::size_t d = xv.cols();
  if (begin >= end || end > xv.rows()) throw std::out_of_range("slice_rows: bad range");
  Tensor out({end - begin, d});
  std::copy(xv.data().begin() + begin * d, xv.data().begin() + end * d, out.data().begin());
  const Var in[] = {x};
  return tape.record(std::move(out), in, [&tape, x, begin, d](const Tensor& g, const Tensor&) {
    Tensor& gx = tape.grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[begin * d + i] += g[i];
  });
}

Var slice_cols(const Var& x, std::size_t begin, std::size_t end) {
  auto& tape = tape_of(x);
  const Tensor& xv = x.value();
  const std::size_t n = xv.rows();
  const std::size_t d = xv.cols();
  if (begin >= end || end > d) throw std::out_of_range("slice_cols: bad range");
  const std::size_t w = end - begin;
  Tensor out({n, w});
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < w; ++c) out(r, c) = xv[r * d + begin + c];
  const Var in[] = {x};
  return tape.record(std::move(out), in, [&tape, x, begin, n, d, w](const Tensor& g, const Tensor&) {
    Tensor& gx = tape.grad_buffer(x);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < w; ++c) gx[r * d + begin + c] += g[r * w + c];
  });
}

Var concat_rows(const Var& top, const Var& bottom) {
  auto& tape = tape_of(top);
  const Tensor& a = top.value();
  const Tensor& b = bottom.value();
  if (a.cols() != b.cols()) throw std::invalid_argument("concat_rows: width mismatch");
  Tensor out({a.rows() + b.rows(), a.cols()});
  std::copy(a.data().begin(), a.data().end(), out.data().begin());
  std::copy(b.data().begin(), b.data().end(), out.data().begin() + a.size());
  const Var in[] = {top, bottom};
  const std::size_t split = a.size();
  return tape.record(std::move(out), in, [&tape, top, bottom, split](const Tensor& g, const Tensor&) {
    if (top.requires_grad()) {
      Tensor& gt = tape.grad_buffer(top);
      for (std::size_t i = 0; i < split; ++i) gt[i] += g[i];
    }
    if (bottom.requires_grad()) {
      Tensor& gb = tape.grad_buffer(bottom);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[split + i];
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  auto& tape = tape_of(parts.front());
  const std::size_t n = parts.front().value().rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.value().rows() != n) throw std::invalid_argument("concat_cols: row count mismatch");
    total += p.value().cols();
  }
  Tensor out({n, total});
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.value().cols();
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < w; ++c) out(r, offset + c) = p.value()[r * w + c];
    offset += w;
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return tape.record(std::move(out), inputs, [&tape, inputs, n, total](const Tensor& g, const Tensor&) {
    std::size_t off = 0;
    for (const auto& p : inputs) {
      const std::size_t w = p.value().cols();
      if (p.requires_grad()) {
        Tensor& gp = tape.grad_buffer(p);
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t c = 0; c < w; ++c) gp[r * w + c] += g[r * total + off + c];
      }
      off += w;
    }
  });
}

Var mean_rows(const Var& x, std::size_t begin, std::size_t end) {
  auto& tape = tape_of(x);
  const Tensor& xv = x.value();
  const std::size_t d = xv.cols();
  if (begin >= end || end > xv.rows()) throw std::out_of_range("mean_rows: bad range");
  const double inv = 1.0 / static_cast<double>(end - begin);
  Tensor out({1, d});
  for (std::size_t r = begin; r < end; ++r)
    for (std::size_t c = 0; c < d; ++c) out[c] += xv[r * d + c];
  for (auto& v : out.storage()) v *= inv;
  const Var in[] = {x};
  return tape.record(std::move(out), in, [&tape, x, begin, end, d, inv](const Tensor& g, const Tensor&) {
    Tensor& gx = tape.grad_buffer(x);
    for (std::size_t r = begin; r < end; ++r)
      for (std::size_t c = 0; c < d; ++c) gx[r * d + c] += g[c] * inv;
  });
}

Var gather_rows(const Var& table, std::span<const int> ids) {
  auto& tape = tape_of(table);
  const Tensor& tv = table.value();
  const std::size_t d = tv.cols();
  if (ids.empty()) throw std::invalid_argument("gather_rows: empty id list");
  Tensor out({ids.size(), d});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= tv.rows()) {
      throw std::out_of_range("gather_rows: id " + std::to_string(ids[i]) + " outside table of " +
                              std::to_string(tv.rows()) + " rows");
    }
    std::copy_n(tv.data().begin() + static_cast<std::size_t>(ids[i]) * d, d, out.data().begin() + i * d);
  }
  const Var in[] = {table};
  std::vector<int> rows(ids.begin(), ids.end());
  return tape.record(std::move(out), in, [&tape, table, rows = std::move(rows), d](const Tensor& g, const Tensor&) {
    Tensor& gt = tape.grad_buffer(table);
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t c = 0; c < d; ++c) gt[static_cast<std::size_t>(rows[i]) * d + c] += g[i * d + c];
  });
}

Var nll_from_logits(const Var& z, std::size_t target) {
  auto& tape = tape_of(z);
  const Tensor& zv = z.value();
  if (zv.rows() != 1) throw std::invalid_argument("nll_from_logits: expected a single row of logits");
  if (target >= zv.size()) {
    throw std::out_of_range("scene index " + std::to_string(target) + " out of range for " +
                            std::to_string(zv.size()) + " logits");
  }
  const double lse = ops::log_sum_exp(zv);
  const Var in[] = {z};
  return tape.record(Tensor({1}, lse - zv[target]), in, [&tape, z, target, lse](const Tensor& g, const Tensor&) {
    Tensor& gz = tape.grad_buffer(z);
    const Tensor& v = z.value();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double p = std::exp(v[i] - lse);
      gz[i] += g[0] * (p - (i == target ? 1.0 : 0.0));
    }
  });
}

}  // namespace ad
}  // namespace mvl
