#include <doctest.h>

#include <cmath>
#include <vector>

#include "crossdistil/errors.hpp"
#include "crossdistil/numgrad.hpp"
#include "crossdistil/rng.hpp"
#include "oracles.hpp"

using namespace crossdistil;
namespace ng = crossdistil::numgrad;
using ng::Tensor;

namespace {

Tensor random_tensor(Rng& rng, std::size_t rows, std::size_t cols, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(rows * cols);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor(rows, cols, std::move(v), true);
}

}  // namespace

TEST_CASE("forward values of basic ops") {
  CHECK(ng::sigmoid(Tensor::scalar(0.0)).item() == 0.5);
  CHECK(ng::reduce_mean(Tensor::column({1, 2, 3, 4})).item() == 2.5);
  CHECK(ng::reduce_sum(Tensor::column({1, 2, 3, 4})).item() == 10.0);

  const Tensor identity(2, 2, {1, 0, 0, 1});
  const Tensor a(2, 3, {1, -2, 3, 4.5, 5, -6});
  const Tensor prod = ng::matmul(identity, a);
  CHECK(prod.rows() == 2);
  CHECK(prod.cols() == 3);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(prod.values()[i] == a.values()[i]);

  const Tensor sm = ng::row_softmax(Tensor(1, 3, {0, 0, 0}));
  for (double v : sm.values()) CHECK(v == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("broadcast add of a bias row") {
  const Tensor x(2, 2, {1, 2, 3, 4});
  const Tensor b(1, 2, {10, 20});
  const Tensor y = ng::add(x, b);
  CHECK(y.at(0, 0) == 11);
  CHECK(y.at(1, 1) == 24);
  CHECK_THROWS_AS(ng::add(x, Tensor(1, 3, {1, 2, 3})), ConfigError);
}

TEST_CASE("shape mismatches are rejected") {
  CHECK_THROWS_AS(ng::matmul(Tensor(2, 3, std::vector<double>(6)), Tensor(2, 3, std::vector<double>(6))),
                  ConfigError);
  CHECK_THROWS_AS(ng::mul(Tensor(2, 1, {1, 2}), Tensor(1, 2, {1, 2})), ConfigError);
}

TEST_CASE("gradient of a sum is all ones") {
  Tensor x(2, 3, {1, 2, 3, 4, 5, 6}, true);
  ng::backward(ng::reduce_sum(x));
  for (double g : x.grad()) CHECK(g == 1.0);
}

TEST_CASE("sigmoid derivative at zero is one quarter") {
  Tensor x = Tensor::scalar(0.0, true);
  ng::backward(ng::sigmoid(x));
  CHECK(x.grad()[0] == 0.25);
}

TEST_CASE("backward requires a scalar loss") {
  Tensor x(2, 1, {1, 2}, true);
  CHECK_THROWS_AS(ng::backward(ng::sigmoid(x)), UsageError);
}

TEST_CASE("gradients accumulate across backward calls") {
  Tensor x(1, 2, {1, 2}, true);
  ng::backward(ng::reduce_sum(x));
  ng::backward(ng::reduce_sum(x));
  CHECK(x.grad()[0] == 2.0);
  x.zero_grad();
  CHECK(x.grad()[0] == 0.0);
}

TEST_CASE("detach copies values and blocks gradient") {
  Tensor x(1, 3, {0.5, -1, 2}, true);
  const Tensor d = ng::detach(x);
  CHECK_FALSE(d.requires_grad());
  for (std::size_t i = 0; i < 3; ++i) CHECK(d.values()[i] == x.values()[i]);

  Tensor w(1, 3, {1, 1, 1}, true);
  ng::backward(ng::reduce_sum(ng::mul(ng::mul(d, w), ng::sigmoid(d))));
  for (double g : x.grad()) CHECK(g == 0.0);
  for (double g : w.grad()) CHECK(g != 0.0);
}

TEST_CASE("no-grad guard records nothing") {
  Tensor x(1, 2, {1, 2}, true);
  Tensor y;
  {
    ng::NoGradGuard guard;
    CHECK_FALSE(ng::grad_enabled());
    y = ng::sigmoid(x);
  }
  CHECK(ng::grad_enabled());
  CHECK_FALSE(y.requires_grad());
  CHECK(y.is_leaf());
}

TEST_CASE("non-finite results raise NumericError") {
  CHECK_THROWS_AS(ng::log(Tensor::scalar(-1.0)), NumericError);
  CHECK_THROWS_AS(ng::exp(Tensor::scalar(1000.0)), NumericError);
}

TEST_CASE("stable scalar helpers at extremes") {
  CHECK(ng::stable_sigmoid(-800.0) >= 0.0);
  CHECK(ng::stable_sigmoid(800.0) == 1.0);
  CHECK(ng::stable_softplus(800.0) == 800.0);
  CHECK(ng::stable_softplus(-800.0) >= 0.0);
  CHECK(std::isfinite(ng::log_sigmoid(Tensor::scalar(-800.0)).item()));
}

TEST_CASE("composed cross-entropy matches finite differences") {
  Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor w = random_tensor(rng, 3, 1);
    const Tensor x = ng::detach(random_tensor(rng, 4, 3));
    const auto loss = [&] {
      // CE(1, s(w.x)) = softplus(-z)
      return ng::reduce_mean(ng::softplus(ng::neg(ng::matmul(x, w))));
    };
    const auto check = oracle::check_gradients(loss, {w}, 1e-5, 1e-5, 1e-9);
    CHECK_MESSAGE(check.ok(), check.first_failure);
  }
}

TEST_CASE("every op passes a finite-difference check") {
  Rng rng(5);
  Tensor a = random_tensor(rng, 3, 4);
  Tensor b = random_tensor(rng, 3, 4);
  Tensor m = random_tensor(rng, 4, 2);
  Tensor row = random_tensor(rng, 1, 4);
  Tensor pos = random_tensor(rng, 3, 4, 0.5, 2.0);
  const std::vector<std::size_t> idx{2, 0, 2, 1};

  const std::vector<std::pair<const char*, std::function<Tensor()>>> cases{
      {"matmul", [&] { return ng::reduce_sum(ng::mul(ng::matmul(a, m), ng::matmul(b, m))); }},
      {"add", [&] { return ng::reduce_sum(ng::sigmoid(ng::add(a, b))); }},
      {"add_broadcast", [&] { return ng::reduce_sum(ng::sigmoid(ng::add(a, row))); }},
      {"sub", [&] { return ng::reduce_sum(ng::sigmoid(ng::sub(a, b))); }},
      {"mul", [&] { return ng::reduce_sum(ng::mul(a, b)); }},
      {"log", [&] { return ng::reduce_sum(ng::log(pos)); }},
      {"exp", [&] { return ng::reduce_mean(ng::exp(a)); }},
      {"neg", [&] { return ng::reduce_sum(ng::sigmoid(ng::neg(a))); }},
      {"softplus", [&] { return ng::reduce_sum(ng::softplus(a)); }},
      {"log_sigmoid", [&] { return ng::reduce_sum(ng::log_sigmoid(a)); }},
      {"relu", [&] { return ng::reduce_sum(ng::mul(ng::relu(a), b)); }},
      {"concat", [&] { return ng::reduce_sum(ng::mul(ng::concat_cols(a, b), ng::concat_cols(std::vector<Tensor>{b, ng::sigmoid(a)}))); }},
      {"slice_cols", [&] { return ng::reduce_sum(ng::exp(ng::slice_cols(ng::matmul(a, m), 1, 1))); }},
      {"slice_rows", [&] { return ng::reduce_sum(ng::exp(ng::slice_rows(a, 1, 2))); }},
      {"row_gather", [&] { return ng::reduce_sum(ng::sigmoid(ng::row_gather(a, idx))); }},
      {"row_softmax", [&] { return ng::reduce_sum(ng::mul(ng::row_softmax(a), b)); }},
      {"scalar_scale", [&] { return ng::scalar_scale(ng::reduce_sum(ng::sigmoid(a)), -2.5); }},
  };
  for (const auto& [name, fn] : cases) {
    const auto check = oracle::check_gradients(fn, {a, b, m, row, pos});
    CHECK_MESSAGE(check.ok(), name << ": " << check.first_failure);
  }
}
