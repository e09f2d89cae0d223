#include "binsim/autograd.hpp"

#include <algorithm>
#include <cmath>

#include "binsim/error.hpp"

namespace binsim::ag {
namespace {

void require(bool cond, const char* what) {
  if (!cond) throw ShapeError(what);
}

}  // namespace

const Matrix& Var::value() const { return tape_->value(*this); }

Var Tape::constant(Matrix value) {
  Node n;
  n.own = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::param(const Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var(this, it->second);
  Node n;
  n.external = &p.value;
  n.param = &p;
  nodes_.push_back(std::move(n));
  param_nodes_.emplace(&p, nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

Var Tape::push(Matrix value, Backward backward) {
  Node n;
  n.own = std::move(value);
  if (record_) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

const Matrix& Tape::value(const Var& v) const { return nodes_[v.id()].value(); }

Matrix& Tape::grad_buffer(const Var& v) {
  Node& n = nodes_[v.id()];
  if (!n.has_grad) {
    n.grad = Matrix::Zero(n.value().rows(), n.value().cols());
    n.has_grad = true;
  }
  return n.grad;
}

void Tape::accumulate(const Var& v, const Matrix& g) { grad_buffer(v) += g; }

void Tape::accumulate_col(const Var& v, Eigen::Index col, const Vector& g) {
  grad_buffer(v).col(col) += g;
}

void Tape::backward(const Var& root) {
  if (!record_) throw std::logic_error("backward on a non-recording tape");
  require(root.rows() == 1 && root.cols() == 1, "backward: root must be a scalar");
  grad_buffer(root)(0, 0) += 1.0;
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad) continue;
    if (n.param) {
      n.param->grad += n.grad;
    } else if (n.backward) {
      n.backward(*this, n.grad);
    }
  }
}

// ---------------------------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
  require(a.cols() == b.rows(), "matmul: inner dimensions differ");
  Tape& t = *a.tape();
  return t.push(a.value() * b.value(), [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g * t.value(b).transpose());
    t.accumulate(b, t.value(a).transpose() * g);
  });
}

Var add(const Var& a, const Var& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
  Tape& t = *a.tape();
  return t.push(a.value() + b.value(), [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var sub(const Var& a, const Var& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "sub: shape mismatch");
  Tape& t = *a.tape();
  return t.push(a.value() - b.value(), [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, -g);
  });
}

Var cmul(const Var& a, const Var& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "cmul: shape mismatch");
  Tape& t = *a.tape();
  return t.push(a.value().cwiseProduct(b.value()), [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g.cwiseProduct(t.value(b)));
    t.accumulate(b, g.cwiseProduct(t.value(a)));
  });
}

Var scale(const Var& a, double factor) {
  Tape& t = *a.tape();
  return t.push(a.value() * factor,
                [a, factor](Tape& t, const Matrix& g) { t.accumulate(a, g * factor); });
}

Var add_bias(const Var& a, const Var& bias) {
  require(bias.cols() == 1 && bias.rows() == a.rows(), "add_bias: bias must be rows x 1");
  Tape& t = *a.tape();
  Matrix out = a.value().colwise() + bias.value().col(0);
  return t.push(std::move(out), [a, bias](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(bias, g.rowwise().sum());
  });
}

Var relu(const Var& a) {
  Tape& t = *a.tape();
  Matrix out = a.value().cwiseMax(0.0);
  return t.push(std::move(out), [a](Tape& t, const Matrix& g) {
    t.accumulate(a, (t.value(a).array() > 0.0).cast<double>().matrix().cwiseProduct(g));
  });
}

Var tanh(const Var& a) {
  Tape& t = *a.tape();
  Matrix out = a.value().array().tanh().matrix();
  const std::size_t self = t.size();
  return t.push(std::move(out), [a, self](Tape& t, const Matrix& g) {
    const Matrix& y = t.value(Var(&t, self));
    t.accumulate(a, (g.array() * (1.0 - y.array().square())).matrix());
  });
}

Var sigmoid(const Var& a) {
  Tape& t = *a.tape();
  Matrix out = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  const std::size_t self = t.size();
  return t.push(std::move(out), [a, self](Tape& t, const Matrix& g) {
    const Matrix& y = t.value(Var(&t, self));
    t.accumulate(a, (g.array() * y.array() * (1.0 - y.array())).matrix());
  });
}

Var concat_rows(std::span<const Var> parts) {
  require(!parts.empty(), "concat_rows: no inputs");
  Tape& t = *parts.front().tape();
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  for (const Var& p : parts) {
    require(p.cols() == cols, "concat_rows: column counts differ");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  Eigen::Index r = 0;
  for (const Var& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return t.push(std::move(out), [inputs](Tape& t, const Matrix& g) {
    Eigen::Index r = 0;
    for (const Var& p : inputs) {
      const Eigen::Index n = p.rows();
      t.grad_buffer(p) += g.middleRows(r, n);
      r += n;
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  Tape& t = *parts.front().tape();
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    require(p.rows() == rows, "concat_cols: row counts differ");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Eigen::Index c = 0;
  for (const Var& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return t.push(std::move(out), [inputs](Tape& t, const Matrix& g) {
    Eigen::Index c = 0;
    for (const Var& p : inputs) {
      const Eigen::Index n = p.cols();
      t.grad_buffer(p) += g.middleCols(c, n);
      c += n;
    }
  });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  require(start >= 0 && count >= 0 && start + count <= a.cols(), "slice_cols: out of range");
  Tape& t = *a.tape();
  return t.push(a.value().middleCols(start, count), [a, start, count](Tape& t, const Matrix& g) {
    t.grad_buffer(a).middleCols(start, count) += g;
  });
}

Var max_cols(const Var& a) {
  require(a.cols() > 0, "max_cols: empty input");
  Tape& t = *a.tape();
  const Matrix& x = a.value();
  Matrix out(x.rows(), 1);
  std::vector<Eigen::Index> arg(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) out(r, 0) = x.row(r).maxCoeff(&arg[r]);
  return t.push(std::move(out), [a, arg = std::move(arg)](Tape& t, const Matrix& g) {
    Matrix& ga = t.grad_buffer(a);
    for (Eigen::Index r = 0; r < g.rows(); ++r) ga(r, arg[r]) += g(r, 0);
  });
}

Var sum(std::span<const Var> parts) {
  require(!parts.empty(), "sum: no inputs");
  Tape& t = *parts.front().tape();
  Matrix out = parts.front().value();
  for (std::size_t i = 1; i < parts.size(); ++i) {
    require(parts[i].rows() == out.rows() && parts[i].cols() == out.cols(), "sum: shape mismatch");
    out += parts[i].value();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return t.push(std::move(out), [inputs](Tape& t, const Matrix& g) {
    for (const Var& p : inputs) t.accumulate(p, g);
  });
}

Var spmm(const Var& a, std::shared_ptr<const SparseMatrix> s) {
  require(a.cols() == s->rows(), "spmm: inner dimensions differ");
  Tape& t = *a.tape();
  Matrix out = a.value() * (*s);
  return t.push(std::move(out), [a, s = std::move(s)](Tape& t, const Matrix& g) {
    t.grad_buffer(a) += g * s->transpose();
  });
}

Var dropout(const Var& a, double p, std::mt19937_64& rng) {
  if (p <= 0.0) return a;
  Tape& t = *a.tape();
  std::bernoulli_distribution keep(1.0 - p);
  Matrix mask(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask(i) = keep(rng) ? 1.0 / (1.0 - p) : 0.0;
  Matrix out = a.value().cwiseProduct(mask);
  return t.push(std::move(out), [a, mask = std::move(mask)](Tape& t, const Matrix& g) {
    t.accumulate(a, g.cwiseProduct(mask));
  });
}

Var lookup(const Var& table, std::span<const std::int32_t> ids) {
  Tape& t = *table.tape();
  const Matrix& e = table.value();
  Matrix out(e.rows(), static_cast<Eigen::Index>(ids.size()));
  for (std::size_t k = 0; k < ids.size(); ++k) {
    require(ids[k] >= 0 && ids[k] < e.cols(), "lookup: id out of range");
    out.col(static_cast<Eigen::Index>(k)) = e.col(ids[k]);
  }
  std::vector<std::int32_t> idv(ids.begin(), ids.end());
  return t.push(std::move(out), [table, idv = std::move(idv)](Tape& t, const Matrix& g) {
    Matrix& ge = t.grad_buffer(table);
    for (std::size_t k = 0; k < idv.size(); ++k) ge.col(idv[k]) += g.col(static_cast<Eigen::Index>(k));
  });
}

Var char_conv_maxpool(const Var& char_table, const Var& filters, const Var& bias,
                      const std::vector<std::vector<std::int32_t>>& words, Eigen::Index width) {
  const Matrix& emb = char_table.value();
  const Matrix& w = filters.value();
  const Eigen::Index dim = emb.rows();
  require(w.cols() == width * dim, "char_conv_maxpool: filter width mismatch");
  require(bias.rows() == w.rows() && bias.cols() == 1, "char_conv_maxpool: bias shape");
  const Eigen::Index count = w.rows();
  const auto n = static_cast<Eigen::Index>(words.size());

  Matrix out(count, n);
  // Winning window start for each (filter, word).
  Eigen::Matrix<Eigen::Index, Eigen::Dynamic, Eigen::Dynamic> arg(count, n);
  Vector window(width * dim);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& ids = words[k];
    const auto positions = static_cast<Eigen::Index>(ids.size()) - width + 1;
    require(positions >= 1, "char_conv_maxpool: word shorter than filter width");
    for (Eigen::Index p = 0; p < positions; ++p) {
      for (Eigen::Index j = 0; j < width; ++j) window.segment(j * dim, dim) = emb.col(ids[p + j]);
      Vector y = w * window + bias.value().col(0);
      for (Eigen::Index f = 0; f < count; ++f) {
        if (p == 0 || y(f) > out(f, k)) {
          out(f, k) = y(f);
          arg(f, k) = p;
        }
      }
    }
  }

  Tape& t = *char_table.tape();
  return t.push(std::move(out), [char_table, filters, bias, words, width, arg = std::move(arg)](
                                    Tape& t, const Matrix& g) {
    const Matrix& emb = t.value(char_table);
    const Matrix& w = t.value(filters);
    const Eigen::Index dim = emb.rows();
    Matrix& g_emb = t.grad_buffer(char_table);
    Matrix& g_w = t.grad_buffer(filters);
    Matrix& g_b = t.grad_buffer(bias);
    for (Eigen::Index k = 0; k < g.cols(); ++k) {
      const auto& ids = words[k];
      for (Eigen::Index f = 0; f < g.rows(); ++f) {
        const double gf = g(f, k);
        if (gf == 0.0) continue;
        const Eigen::Index p = arg(f, k);
        g_b(f, 0) += gf;
        for (Eigen::Index j = 0; j < width; ++j) {
          g_w.row(f).segment(j * dim, dim) += gf * emb.col(ids[p + j]).transpose();
          g_emb.col(ids[p + j]) += gf * w.row(f).segment(j * dim, dim).transpose();
        }
      }
    }
  });
}

Var lstm(const Var& x, const Var& w_in, const Var& w_rec, const Var& bias, bool reverse) {
  const Eigen::Index hidden = w_rec.cols();
  require(w_rec.rows() == 4 * hidden, "lstm: recurrent weights must be 4h x h");
  require(w_in.rows() == 4 * hidden && w_in.cols() == x.rows(), "lstm: input weights shape");
  require(bias.rows() == 4 * hidden && bias.cols() == 1, "lstm: bias shape");
  const Eigen::Index steps = x.cols();
  require(steps > 0, "lstm: empty sequence");

  Matrix pre = w_in.value() * x.value();
  pre.colwise() += bias.value().col(0);

  // Cached activations per position: gates (4h), cell, tanh(cell).
  auto gates = std::make_shared<Matrix>(4 * hidden, steps);
  auto cells = std::make_shared<Matrix>(hidden, steps);
  auto cells_tanh = std::make_shared<Matrix>(hidden, steps);
  Matrix out(hidden, steps);
  Vector h = Vector::Zero(hidden);
  Vector c = Vector::Zero(hidden);
  const Matrix& wr = w_rec.value();
  for (Eigen::Index s = 0; s < steps; ++s) {
    const Eigen::Index pos = reverse ? steps - 1 - s : s;
    Vector z = pre.col(pos) + wr * h;
    auto zi = z.segment(0, hidden).array();
    auto zf = z.segment(hidden, hidden).array();
    auto zo = z.segment(3 * hidden, hidden).array();
    zi = 1.0 / (1.0 + (-zi).exp());
    zf = 1.0 / (1.0 + (-zf).exp());
    zo = 1.0 / (1.0 + (-zo).exp());
    z.segment(2 * hidden, hidden) = z.segment(2 * hidden, hidden).array().tanh().matrix();
    c = z.segment(hidden, hidden).cwiseProduct(c) +
        z.segment(0, hidden).cwiseProduct(z.segment(2 * hidden, hidden));
    const Vector ct = c.array().tanh().matrix();
    h = z.segment(3 * hidden, hidden).cwiseProduct(ct);
    gates->col(pos) = z;
    cells->col(pos) = c;
    cells_tanh->col(pos) = ct;
    out.col(pos) = h;
  }

  Tape& t = *x.tape();
  const std::size_t self = t.size();
  return t.push(std::move(out), [=](Tape& t, const Matrix& g) {
    const Matrix& hs = t.value(Var(&t, self));
    const Matrix& wr = t.value(w_rec);
    Matrix dz_all(4 * hidden, steps);
    Matrix& g_rec = t.grad_buffer(w_rec);
    Vector dh_next = Vector::Zero(hidden);
    Vector dc_next = Vector::Zero(hidden);
    for (Eigen::Index s = steps; s-- > 0;) {
      const Eigen::Index pos = reverse ? steps - 1 - s : s;
      const bool first = s == 0;
      const Eigen::Index prev = reverse ? pos + 1 : pos - 1;
      const auto zi = gates->col(pos).segment(0, hidden).array();
      const auto zf = gates->col(pos).segment(hidden, hidden).array();
      const auto zg = gates->col(pos).segment(2 * hidden, hidden).array();
      const auto zo = gates->col(pos).segment(3 * hidden, hidden).array();
      const auto ct = cells_tanh->col(pos).array();

      const Vector dh = g.col(pos) + dh_next;
      const Eigen::ArrayXd dc =
          dh.array() * zo * (1.0 - ct.square()) + dc_next.array();
      Eigen::ArrayXd c_prev = Eigen::ArrayXd::Zero(hidden);
      if (!first) c_prev = cells->col(prev).array();

      auto dz = dz_all.col(pos);
      dz.segment(0, hidden) = (dc * zg * zi * (1.0 - zi)).matrix();
      dz.segment(hidden, hidden) = (dc * c_prev * zf * (1.0 - zf)).matrix();
      dz.segment(2 * hidden, hidden) = (dc * zi * (1.0 - zg.square())).matrix();
      dz.segment(3 * hidden, hidden) = (dh.array() * ct * zo * (1.0 - zo)).matrix();

      dc_next = (dc * zf).matrix();
      if (!first) {
        g_rec.noalias() += dz * hs.col(prev).transpose();
        dh_next.noalias() = wr.transpose() * dz;
      } else {
        dh_next.setZero();
      }
    }
    t.grad_buffer(w_in).noalias() += dz_all * t.value(x).transpose();
    t.grad_buffer(bias) += dz_all.rowwise().sum();
    t.grad_buffer(x).noalias() += t.value(w_in).transpose() * dz_all;
  });
}

Vector softmax(const Vector& logits) {
  const double m = logits.maxCoeff();
  Vector e = (logits.array() - m).exp().matrix();
  return e / e.sum();
}

Var softmax_xent(const Var& logits, int label) {
  require(logits.cols() == 1 && logits.rows() == 2, "softmax_xent: expects 2 x 1 logits");
  if (label != 0 && label != 1) throw std::invalid_argument("label must be 0 or 1");
  Tape& t = *logits.tape();
  const Vector z = logits.value().col(0);
  const double m = z.maxCoeff();
  const double lse = m + std::log((z.array() - m).exp().sum());
  Matrix out(1, 1);
  out(0, 0) = lse - z(label);
  return t.push(std::move(out), [logits, label](Tape& t, const Matrix& g) {
    Vector p = softmax(t.value(logits).col(0));
    p(label) -= 1.0;
    t.accumulate(logits, p * g(0, 0));
  });
}

}  // namespace binsim::ag
