#include <doctest.h>

#include <cmath>

#include "crossdistil/errors.hpp"
#include "crossdistil/metrics.hpp"
#include "oracles.hpp"

using namespace crossdistil;

TEST_CASE("auc of a small example") {
  const std::vector<double> s{0.9, 0.8, 0.2};
  const std::vector<int> y{1, 0, 1};
  CHECK(auc(s, y) == 0.5);
}

TEST_CASE("auc of perfectly separated scores") {
  CHECK(auc(std::vector<double>{0.1, 0.2, 0.7, 0.9}, std::vector<int>{0, 0, 1, 1}) == 1.0);
}

TEST_CASE("auc tie modes") {
  const std::vector<double> s{0.5, 0.5};
  const std::vector<int> y{1, 0};
  CHECK(auc(s, y, TieMode::Half) == 0.5);
  CHECK(auc(s, y, TieMode::Strict) == 0.0);
}

TEST_CASE("auc matches pair enumeration") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> s(200);
    std::vector<int> y(200);
    for (std::size_t i = 0; i < 200; ++i) {
      s[i] = std::round(rng.uniform() * 50) / 50;  // coarse grid forces ties
      y[i] = rng.bernoulli(0.3) ? 1 : 0;
    }
    y[0] = 1;
    y[1] = 0;
    for (bool strict : {false, true}) {
      CHECK(std::abs(auc(s, y, strict ? TieMode::Strict : TieMode::Half) - oracle::brute_auc(s, y, strict)) < 1e-12);
    }
  }
}

TEST_CASE("auc is undefined with a single class or bad input") {
  CHECK_THROWS_AS(auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), UndefinedMetric);
  CHECK_THROWS_AS(auc(std::vector<double>{0.1}, std::vector<int>{1, 0}), ConfigError);
  CHECK_THROWS_AS(auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 2}), ConfigError);
}

TEST_CASE("ranking metrics are invariant under increasing transforms") {
  Rng rng(3);
  std::vector<double> s(100), s_exp(100), s_aff(100);
  std::vector<int> y(100), cls(100);
  for (std::size_t i = 0; i < 100; ++i) {
    s[i] = rng.uniform(-3, 3);
    s_exp[i] = std::exp(s[i]);
    s_aff[i] = 2.5 * s[i] - 7.0;
    cls[i] = static_cast<int>(rng.index(4));
    y[i] = cls[i] >= 2;
  }
  CHECK(auc(s_exp, y) == auc(s, y));
  CHECK(auc(s_aff, y) == auc(s, y));
  CHECK(multi_auc(s_exp, cls, 4) == multi_auc(s, cls, 4));
  CHECK(multi_auc(s_aff, cls, 4) == multi_auc(s, cls, 4));
}

TEST_CASE("multi-auc with two classes equals auc exactly") {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> s(60);
    std::vector<int> y(60);
    for (std::size_t i = 0; i < 60; ++i) {
      s[i] = rng.uniform();
      y[i] = rng.bernoulli(0.4) ? 1 : 0;
    }
    y[0] = 1;
    y[1] = 0;
    CHECK(multi_auc(s, y, 2) == auc(s, y));
  }
}

TEST_CASE("multi-auc of a perfect ranking is one") {
  std::vector<double> s;
  std::vector<int> cls;
  for (int i = 0; i < 40; ++i) {
    cls.push_back(i % 4);
    s.push_back(static_cast<double>(i % 4));
  }
  CHECK(multi_auc(s, cls, 4) == 1.0);
}

TEST_CASE("multi-auc matches the double-sum oracle") {
  Rng rng(19);
  for (int c : {3, 4}) {
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<double> s(200);
      std::vector<int> cls(200);
      for (std::size_t i = 0; i < 200; ++i) {
        cls[i] = static_cast<int>(rng.index(static_cast<std::size_t>(c)));
        s[i] = std::round((rng.uniform() + 0.2 * cls[i]) * 30) / 30;
      }
      CHECK(std::abs(multi_auc(s, cls, c) - oracle::brute_multi_auc(s, cls, c)) < 1e-12);
    }
  }
}

TEST_CASE("multi-auc skips empty classes and needs two") {
  const std::vector<double> s{0.1, 0.9, 0.4};
  CHECK(multi_auc(s, std::vector<int>{0, 3, 0}, 4) == 1.0);
  CHECK_THROWS_AS(multi_auc(s, std::vector<int>{2, 2, 2}, 4), UndefinedMetric);
  CHECK_THROWS_AS(multi_auc(s, std::vector<int>{0, 4, 1}, 4), ConfigError);
}

TEST_CASE("logloss examples") {
  CHECK(logloss(std::vector<int>{1}, std::vector<double>{1 - 1e-12}) < 1e-11);
  CHECK(logloss(std::vector<int>{1, 0}, std::vector<double>{0.5, 0.5}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(std::isfinite(logloss(std::vector<int>{1, 0}, std::vector<double>{0.0, 1.0})));
}

TEST_CASE("logloss matches direct summation") {
  Rng rng(44);
  std::vector<int> y(300);
  std::vector<double> p(300);
  double sum = 0.0;
  for (std::size_t i = 0; i < 300; ++i) {
    y[i] = rng.bernoulli(0.5);
    p[i] = rng.uniform(0.01, 0.99);
    sum += y[i] ? -std::log(p[i]) : -std::log(1 - p[i]);
  }
  CHECK(std::abs(logloss(y, p) - sum / 300.0) < 1e-12);
}

TEST_CASE("fine-grained classes per task") {
  CHECK(class_of(1, 1, Task::A) == 3);
  CHECK(class_of(1, 0, Task::A) == 2);
  CHECK(class_of(0, 1, Task::A) == 1);
  CHECK(class_of(0, 1, Task::B) == 2);
  CHECK(class_of(1, 0, Task::B) == 1);
  CHECK(class_of(0, 0, Task::A) == 0);
  CHECK(class_of(0, 0, Task::B) == 0);
}
