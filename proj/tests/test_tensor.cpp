#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "ramen/gradcheck.hpp"
#include "ramen/tensor.hpp"

using namespace ramen;

namespace {

// Central-difference gradient computed in the test, independent of grad_check.
std::vector<double> numeric_grad(const std::function<double()>& value, Tensor param,
                                 double eps = 1e-6) {
  std::vector<double> g(param.numel());
  auto& vals = param.data();
  for (std::size_t i = 0; i < vals.size(); ++i) {
    const double saved = vals[i];
    vals[i] = saved + eps;
    const double up = value();
    vals[i] = saved - eps;
    const double down = value();
    vals[i] = saved;
    g[i] = (up - down) / (2.0 * eps);
  }
  return g;
}

std::vector<double> analytic_grad(const std::function<Tensor()>& loss, Tensor param) {
  param.zero_grad();
  Tape tape;
  Tensor l = loss();
  tape.backward(l);
  return param.grad();
}

Tensor random_tensor(std::vector<std::size_t> shape, std::uint64_t seed,
                     bool requires_grad = true) {
  std::mt19937_64 rng(seed);
  return Tensor::uniform(std::move(shape), -1.0, 1.0, rng, requires_grad);
}

void check_grads_close(const std::vector<double>& analytic, const std::vector<double>& numeric,
                       double tol = 1e-4) {
  REQUIRE(analytic.size() == numeric.size());
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double rel = std::abs(analytic[i] - numeric[i]) /
                       std::max({1.0, std::abs(analytic[i]), std::abs(numeric[i])});
    CAPTURE(i);
    CHECK(rel < tol);
  }
}

}  // namespace

TEST_SUITE("tensor") {

TEST_CASE("elementwise add") {
  Tensor a = Tensor::from_data({2}, {1, 2});
  Tensor b = Tensor::from_data({2}, {3, 4});
  Tensor c = ops::add(a, b);
  CHECK(c.at(0) == 4.0);
  CHECK(c.at(1) == 6.0);
}

TEST_CASE("softmax of constant row is uniform") {
  Tensor x = Tensor::from_data({3}, {0, 0, 0});
  Tensor y = ops::softmax(x);
  for (std::size_t i = 0; i < 3; ++i) CHECK(y.at(i) == 1.0 / 3.0);
}

TEST_CASE("matmul of ones") {
  Tensor a = Tensor::full({2, 3}, 1.0);
  Tensor b = Tensor::full({3, 2}, 1.0);
  Tensor c = ops::matmul(a, b);
  REQUIRE(c.shape() == std::vector<std::size_t>{2, 2});
  for (double v : c.data()) CHECK(v == 3.0);
}

TEST_CASE("shape mismatch names primitive and both shapes") {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({4, 2});
  CHECK_THROWS_WITH_AS(ops::matmul(a, b), "matmul: shape mismatch (2,3) vs (4,2)", ShapeError);
  CHECK_THROWS_AS(ops::add(a, b), ShapeError);
}

TEST_CASE("embedding gather rejects out-of-range ids") {
  Tensor table = Tensor::zeros({5, 3});
  CHECK_THROWS_AS(ops::embedding_gather(table, {0, 7}), std::out_of_range);
  CHECK_THROWS_AS(ops::embedding_gather(table, {-1}), std::out_of_range);
}

TEST_CASE("backward of sum(x*x)") {
  Tensor x = Tensor::from_data({3}, {1, 2, 3}, true);
  Tape tape;
  Tensor loss = ops::sum(ops::mul(x, x));
  tape.backward(loss);
  CHECK(x.grad() == std::vector<double>{2, 4, 6});
}

TEST_CASE("fan-out accumulates") {
  Tensor a = Tensor::from_data({4}, {0.5, -1, 2, 0}, true);
  Tape tape;
  Tensor loss = ops::sum(ops::add(a, a));
  tape.backward(loss);
  for (double g : a.grad()) CHECK(g == 2.0);
}

TEST_CASE("non-scalar loss rejected") {
  Tensor x = Tensor::from_data({2}, {1, 2}, true);
  Tape tape;
  Tensor y = ops::mul(x, x);
  CHECK_THROWS_AS(tape.backward(y), ShapeError);
}

TEST_CASE("branch order does not change gradients") {
  auto run = [](bool swap) {
    Tensor x = random_tensor({6}, 99);
    Tape tape;
    Tensor s, t;
    if (swap) {
      t = ops::tanh(x);
      s = ops::sigmoid(x);
    } else {
      s = ops::sigmoid(x);
      t = ops::tanh(x);
    }
    tape.backward(ops::sum(ops::mul(s, t)));
    return x.grad();
  };
  CHECK(run(false) == run(true));
}

TEST_CASE("backward is bit-reproducible") {
  auto run = [] {
    Tensor w = random_tensor({4, 4}, 7);
    Tensor x = random_tensor({4, 4}, 8);
    Tape tape;
    Tensor y = ops::matmul(w, ops::softmax(x));
    tape.backward(ops::sum(ops::mul(y, y)));
    return std::make_pair(w.grad(), x.grad());
  };
  auto [gw1, gx1] = run();
  auto [gw2, gx2] = run();
  CHECK(gw1 == gw2);
  CHECK(gx1 == gx2);
}

TEST_CASE("softmax rows are stochastic and positive") {
  Tensor x = random_tensor({5, 7}, 42, false);
  Tensor y = ops::softmax(x);
  for (std::size_t r = 0; r < 5; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < 7; ++c) {
      CHECK(y.at(r, c) > 0.0);
      s += y.at(r, c);
    }
    CHECK(std::abs(s - 1.0) < 1e-9);
  }
}

TEST_CASE("every primitive matches central differences") {
  auto check_unary = [](const char* name, std::function<Tensor(const Tensor&)> op,
                        std::vector<std::size_t> shape, double lo = -1.0, double hi = 1.0) {
    CAPTURE(name);
    std::mt19937_64 rng(mix_seed(31, shape.size()));
    Tensor x = Tensor::uniform(shape, lo, hi, rng, true);
    auto loss = [&] { return ops::sum(ops::mul(op(x), op(x))); };
    auto value = [&] { return loss().item(); };
    check_grads_close(analytic_grad(loss, x), numeric_grad(value, x));
  };

  check_unary("sigmoid", [](const Tensor& t) { return ops::sigmoid(t); }, {4});
  check_unary("tanh", [](const Tensor& t) { return ops::tanh(t); }, {3, 4});
  check_unary("relu", [](const Tensor& t) { return ops::relu(t); }, {9});
  check_unary("softmax", [](const Tensor& t) { return ops::softmax(t); }, {2, 5});
  check_unary("log_softmax", [](const Tensor& t) { return ops::log_softmax(t); }, {2, 5});
  check_unary("log", [](const Tensor& t) { return ops::log(t); }, {6}, 0.2, 1.2);
  check_unary("sqrt", [](const Tensor& t) { return ops::sqrt(t); }, {6}, 0.2, 1.2);
  check_unary("rsqrt", [](const Tensor& t) { return ops::rsqrt(t); }, {6}, 0.2, 1.2);
  check_unary("scale", [](const Tensor& t) { return ops::scale(t, -1.7); }, {5});
  check_unary("transpose", [](const Tensor& t) { return ops::transpose(t); }, {3, 2});
  check_unary("mean", [](const Tensor& t) { return ops::mean(t); }, {7});
  check_unary("mean_rows", [](const Tensor& t) { return ops::mean_rows(t); }, {4, 3});
  check_unary("slice_cols", [](const Tensor& t) { return ops::slice(t, 1, 1, 2); }, {3, 4});
  check_unary("slice_rows", [](const Tensor& t) { return ops::slice(t, 0, 1, 2); }, {4, 3});
  check_unary("row", [](const Tensor& t) { return ops::row(t, 2); }, {4, 3});
  check_unary("broadcast_row", [](const Tensor& t) { return ops::broadcast_row(t, 4); }, {5});

  // binary ops: check both inputs
  auto check_binary = [](const char* name,
                         std::function<Tensor(const Tensor&, const Tensor&)> op,
                         std::vector<std::size_t> sa, std::vector<std::size_t> sb) {
    CAPTURE(name);
    Tensor a = random_tensor(sa, 51);
    Tensor b = random_tensor(sb, 52);
    auto loss = [&] { return ops::sum(op(a, b)); };
    auto value = [&] { return loss().item(); };
    check_grads_close(analytic_grad(loss, a), numeric_grad(value, a));
    check_grads_close(analytic_grad(loss, b), numeric_grad(value, b));
  };

  check_binary("add", [](const Tensor& x, const Tensor& y) { return ops::add(x, y); }, {4}, {4});
  check_binary("sub", [](const Tensor& x, const Tensor& y) { return ops::sub(x, y); }, {4}, {4});
  check_binary("mul", [](const Tensor& x, const Tensor& y) { return ops::mul(x, y); }, {2, 3},
               {2, 3});
  check_binary("matmul",
               [](const Tensor& x, const Tensor& y) { return ops::matmul(x, y); }, {2, 3},
               {3, 4});
  check_binary("matvec", [](const Tensor& x, const Tensor& y) { return ops::matvec(x, y); },
               {3, 4}, {4});
  check_binary("concat_vec",
               [](const Tensor& x, const Tensor& y) { return ops::concat(x, y); }, {3}, {2});
  check_binary("concat_mat",
               [](const Tensor& x, const Tensor& y) { return ops::concat(x, y); }, {2, 3},
               {2, 2});

  // stack_rows and embedding_gather
  {
    Tensor a = random_tensor({3}, 61);
    Tensor b = random_tensor({2, 3}, 62);
    auto loss = [&] {
      Tensor s = ops::stack_rows({a, b, a});
      return ops::sum(ops::mul(s, s));
    };
    auto value = [&] { return loss().item(); };
    check_grads_close(analytic_grad(loss, a), numeric_grad(value, a));
    check_grads_close(analytic_grad(loss, b), numeric_grad(value, b));
  }
  {
    Tensor table = random_tensor({5, 3}, 63);
    std::vector<int> ids{1, 4, 1, 0};
    auto loss = [&] {
      Tensor e = ops::embedding_gather(table, ids);
      return ops::sum(ops::mul(e, e));
    };
    auto value = [&] { return loss().item(); };
    check_grads_close(analytic_grad(loss, table), numeric_grad(value, table));
  }
}

TEST_CASE("grad_check on sigmoid-sum is tight") {
  Tensor x = random_tensor({4}, 17);
  auto f = [&] { return ops::sum(ops::sigmoid(x)); };
  GradCheckReport report = grad_check(f, {{"x", x}});
  CHECK(report.all_ok);
  CHECK(report.max_rel_err < 1e-6);
}

TEST_CASE("grad_check on a constant function reports zero error") {
  Tensor x = random_tensor({4}, 18);
  auto f = [&] { return Tensor::scalar(3.5); };
  GradCheckReport report = grad_check(f, {{"x", x}});
  CHECK(report.all_ok);
  CHECK(report.max_rel_err == 0.0);
}

TEST_CASE("grad_check flags a broken gradient") {
  // sum(2x) evaluated, but analytic path computed from sum(x): rig by
  // checking x through a function whose value ignores half the dependence.
  Tensor x = random_tensor({3}, 19);
  Tensor detached = Tensor::from_data(x.shape(), x.data());  // same values, no grad
  auto f = [&] { return ops::sum(ops::add(x, detached)); };
  // value changes with x only through the first term, numeric sees d/dx = 1;
  // now sabotage: detached copies x at perturbed values
  auto f_bad = [&] {
    Tensor shadow = Tensor::from_data(x.shape(), x.data());
    return ops::sum(ops::add(x, shadow));  // numeric slope 2, analytic 1
  };
  (void)f;
  GradCheckReport report = grad_check(f_bad, {{"x", x}});
  CHECK_FALSE(report.all_ok);
  CHECK(report.max_rel_err > 0.3);
}

TEST_CASE("no recording without an active tape") {
  Tensor x = Tensor::from_data({2}, {1, 2}, true);
  Tensor y = ops::mul(x, x);
  CHECK_FALSE(y.requires_grad());
}

TEST_CASE("invalid shapes are rejected at construction") {
  CHECK_THROWS_AS(Tensor::zeros({0, 2}), ShapeError);
  CHECK_THROWS_AS(Tensor::from_data({3}, {1, 2}), ShapeError);
}

}  // TEST_SUITE
