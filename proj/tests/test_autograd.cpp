#include <doctest.h>

#include <functional>
#include <random>

#include "binsim/autograd.hpp"
#include "oracles.hpp"

using namespace binsim;
using ag::Matrix;
using ag::Var;
using binsim::testing::random_normal;

namespace {

using Op = std::function<Var(ag::Tape&, const std::vector<Var>&)>;

// Reduces the op output to a scalar with fixed random weights, then compares
// tape gradients of every input with central differences.
double op_grad_error(const Op& op, std::vector<Matrix> inputs, std::uint64_t seed = 3) {
  std::mt19937_64 rng(seed);
  std::vector<ag::Parameter> params;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    params.emplace_back("p" + std::to_string(i), inputs[i]);
  }
  Matrix probe;
  auto eval = [&](bool record) {
    ag::Tape tape(record);
    std::vector<Var> vars;
    for (const auto& p : params) vars.push_back(tape.param(p));
    Var out = op(tape, vars);
    if (probe.size() == 0) probe = random_normal(out.rows(), out.cols(), rng);
    Var s = ag::sum(std::vector<Var>{ag::cmul(out, tape.constant(probe))});
    Matrix ones = Matrix::Ones(1, out.rows());
    Var total = ag::matmul(tape.constant(ones), ag::matmul(s, tape.constant(Matrix::Ones(out.cols(), 1))));
    if (record) tape.backward(total);
    return total.value()(0, 0);
  };
  for (auto& p : params) p.zero_grad();
  eval(true);
  double worst = 0.0;
  const double h = 1e-6;
  for (auto& p : params) {
    for (Eigen::Index e = 0; e < p.value.size(); ++e) {
      const double saved = p.value(e);
      p.value(e) = saved + h;
      const double up = eval(false);
      p.value(e) = saved - h;
      const double down = eval(false);
      p.value(e) = saved;
      const double n = (up - down) / (2 * h);
      const double a = p.grad(e);
      worst = std::max(worst, std::fabs(a - n) / std::max({1e-4, std::fabs(a), std::fabs(n)}));
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("elementwise and linear ops") {
  std::mt19937_64 rng(1);
  const Matrix a = random_normal(3, 4, rng);
  const Matrix b = random_normal(3, 4, rng);
  const Matrix c = random_normal(4, 2, rng);
  const Matrix bias = random_normal(3, 1, rng);
  CHECK(op_grad_error([](ag::Tape&, const std::vector<Var>& v) { return ag::matmul(v[0], v[1]); },
                      {a, c}) < 1e-6);
  CHECK(op_grad_error([](ag::Tape&, const std::vector<Var>& v) { return ag::add(v[0], v[1]); },
                      {a, b}) < 1e-6);
  CHECK(op_grad_error([](ag::Tape&, const std::vector<Var>& v) { return ag::sub(v[0], v[1]); },
                      {a, b}) < 1e-6);
  CHECK(op_grad_error([](ag::Tape&, const std::vector<Var>& v) { return ag::cmul(v[0], v[1]); },
                      {a, b}) < 1e-6);
  CHECK(op_grad_error([](ag::Tape&, const std::vector<Var>& v) { return ag::scale(v[0], -2.5); },
                      {a}) < 1e-6);
  CHECK(op_grad_error(
            [](ag::Tape&, const std::vector<Var>& v) { return ag::add_bias(v[0], v[1]); },
            {a, bias}) < 1e-6);
  CHECK(op_grad_error([](ag::Tape&, const std::vector<Var>& v) { return ag::tanh(v[0]); }, {a}) <
        1e-6);
  CHECK(op_grad_error([](ag::Tape&, const std::vector<Var>& v) { return ag::sigmoid(v[0]); },
                      {a}) < 1e-6);
  CHECK(op_grad_error([](ag::Tape&, const std::vector<Var>& v) { return ag::relu(v[0]); }, {a}) <
        1e-6);
}

TEST_CASE("structural ops") {
  std::mt19937_64 rng(2);
  const Matrix a = random_normal(3, 4, rng);
  const Matrix b = random_normal(2, 4, rng);
  const Matrix c = random_normal(3, 2, rng);
  CHECK(op_grad_error(
            [](ag::Tape&, const std::vector<Var>& v) {
              return ag::concat_rows(std::vector<Var>{v[0], v[1], v[0]});
            },
            {a, b}) < 1e-6);
  CHECK(op_grad_error(
            [](ag::Tape&, const std::vector<Var>& v) {
              return ag::concat_cols(std::vector<Var>{v[0], v[1]});
            },
            {a, c}) < 1e-6);
  CHECK(op_grad_error(
            [](ag::Tape&, const std::vector<Var>& v) { return ag::slice_cols(v[0], 1, 2); }, {a}) <
        1e-6);
  CHECK(op_grad_error([](ag::Tape&, const std::vector<Var>& v) { return ag::max_cols(v[0]); },
                      {a}) < 1e-6);
  CHECK(op_grad_error(
            [](ag::Tape&, const std::vector<Var>& v) {
              return ag::sum(std::vector<Var>{v[0], v[0], v[1]});
            },
            {a, random_normal(3, 4, rng)}) < 1e-6);

  auto s = std::make_shared<ag::SparseMatrix>(4, 4);
  s->insert(0, 1) = 0.5;
  s->insert(2, 1) = 0.5;
  s->insert(3, 0) = 1.0;
  s->insert(1, 3) = 2.0;
  CHECK(op_grad_error([s](ag::Tape&, const std::vector<Var>& v) { return ag::spmm(v[0], s); },
                      {a}) < 1e-6);
  const std::vector<std::int32_t> ids{2, 0, 2, 1};
  CHECK(op_grad_error(
            [&](ag::Tape&, const std::vector<Var>& v) { return ag::lookup(v[0], ids); },
            {random_normal(3, 3, rng)}) < 1e-6);
}

TEST_CASE("lstm and char conv") {
  std::mt19937_64 rng(3);
  const Matrix x = random_normal(3, 5, rng);
  const Matrix w_in = random_normal(8, 3, rng, 0.5);
  const Matrix w_rec = random_normal(8, 2, rng, 0.5);
  const Matrix bias = random_normal(8, 1, rng, 0.5);
  for (bool reverse : {false, true}) {
    CHECK(op_grad_error(
              [reverse](ag::Tape&, const std::vector<Var>& v) {
                return ag::lstm(v[0], v[1], v[2], v[3], reverse);
              },
              {x, w_in, w_rec, bias}) < 1e-5);
  }
  const std::vector<std::vector<std::int32_t>> words{{2, 3, 1}, {4, 0}, {1, 2, 3, 4}};
  CHECK(op_grad_error(
            [&](ag::Tape&, const std::vector<Var>& v) {
              return ag::char_conv_maxpool(v[0], v[1], v[2], words, 2);
            },
            {random_normal(3, 5, rng), random_normal(4, 6, rng), random_normal(4, 1, rng)}) <
        1e-5);
}

TEST_CASE("lstm scan order") {
  std::mt19937_64 rng(4);
  const Matrix x = random_normal(3, 6, rng);
  ag::Parameter w_in("w_in", random_normal(8, 3, rng));
  ag::Parameter w_rec("w_rec", random_normal(8, 2, rng));
  ag::Parameter bias("b", random_normal(8, 1, rng));
  ag::Tape tape(false);
  const Matrix fwd = ag::lstm(tape.constant(x), tape.param(w_in), tape.param(w_rec),
                              tape.param(bias), false).value();
  const Matrix bwd = ag::lstm(tape.constant(x.rowwise().reverse()), tape.param(w_in),
                              tape.param(w_rec), tape.param(bias), true).value();
  CHECK((fwd - bwd.rowwise().reverse()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("softmax cross entropy") {
  ag::Tape tape;
  ag::Parameter z("z", (Matrix(2, 1) << 0.3, -1.2).finished());
  Var loss = ag::softmax_xent(tape.param(z), 1);
  const ag::Vector p = ag::softmax(z.value.col(0));
  CHECK(loss.value()(0, 0) == doctest::Approx(-std::log(p(1))));
  z.zero_grad();
  tape.backward(loss);
  CHECK(z.grad(0) == doctest::Approx(p(0)));
  CHECK(z.grad(1) == doctest::Approx(p(1) - 1.0));
  CHECK(op_grad_error(
            [](ag::Tape&, const std::vector<Var>& v) { return ag::softmax_xent(v[0], 0); },
            {Matrix(Matrix::Random(2, 1))}) < 1e-6);
}

TEST_CASE("dropout") {
  std::mt19937_64 rng(5);
  ag::Tape tape;
  Var x = tape.constant(Matrix::Ones(50, 40));
  CHECK(ag::dropout(x, 0.0, rng).value() == x.value());
  const Matrix d = ag::dropout(x, 0.5, rng).value();
  CHECK(d.mean() == doctest::Approx(1.0).epsilon(0.1));
  for (Eigen::Index i = 0; i < d.size(); ++i) CHECK((d(i) == 0.0 || d(i) == 2.0));
}
