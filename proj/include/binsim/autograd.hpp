#pragma once

// A small reverse-mode tape over dense Eigen matrices. Every value is a
// matrix; sequences and node sets are stored column-wise (dim x count).

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace binsim::ag {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

struct Parameter {
  std::string name;
  Matrix value;
  // Scratch gradient buffer written by recording tapes.
  mutable Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}

  void zero_grad() const { grad.setZero(value.rows(), value.cols()); }
  bool all_finite() const { return value.allFinite(); }
};

class Tape;

class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, const Matrix& grad)>;

  // A non-recording tape skips backward closures (inference).
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }

  Var constant(Matrix value);
  // Leaf bound to a parameter; one node per parameter per tape.
  Var param(const Parameter& p);
  Var push(Matrix value, Backward backward);

  const Matrix& value(const Var& v) const;
  // Adds `g` into the gradient of `v`.
  void accumulate(const Var& v, const Matrix& g);
  void accumulate_col(const Var& v, Eigen::Index col, const Vector& g);
  Matrix& grad_buffer(const Var& v);

  // Runs reverse accumulation from a 1x1 root.
  void backward(const Var& root);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix own;
    const Matrix* external = nullptr;
    Matrix grad;
    bool has_grad = false;
    Backward backward;
    const Parameter* param = nullptr;

    const Matrix& value() const { return external ? *external : own; }
  };

  bool record_;
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> param_nodes_;
};

// ---------------------------------------------------------------------------
// Operations

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var cmul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
// a + bias broadcast over columns; bias is rows x 1.
Var add_bias(const Var& a, const Var& bias);
Var relu(const Var& a);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
// Row-wise maximum over columns: rows x 1.
Var max_cols(const Var& a);
Var sum(std::span<const Var> parts);
// a * s for a constant sparse matrix s.
Var spmm(const Var& a, std::shared_ptr<const SparseMatrix> s);
// Inverted dropout. Identity when p == 0.
Var dropout(const Var& a, double p, std::mt19937_64& rng);

// Columns of `table` (dim x vocab) selected by ids.
Var lookup(const Var& table, std::span<const std::int32_t> ids);

// Char-level convolution followed by max-pooling over window positions.
// `words[k]` lists char ids of token k; each must have at least `width` ids.
// filters: count x (width * char_dim), bias: count x 1. Output: count x n.
Var char_conv_maxpool(const Var& char_table, const Var& filters, const Var& bias,
                      const std::vector<std::vector<std::int32_t>>& words, Eigen::Index width);

// One LSTM direction over the columns of x (in x T). Gates stacked i, f, g, o:
// w_in: 4h x in, w_rec: 4h x h, bias: 4h x 1. Output h x T, where column t
// holds the state after consuming input t (in scan order).
Var lstm(const Var& x, const Var& w_in, const Var& w_rec, const Var& bias, bool reverse);

// Two-class cross-entropy of softmax(logits) (2 x 1) against `label`.
Var softmax_xent(const Var& logits, int label);

Vector softmax(const Vector& logits);

}  // namespace binsim::ag
