#include <catch2/catch_amalgamated.hpp>

#include "rcac/params.hpp"

using namespace rcac;

TEST_CASE("adam leaves values unchanged at zero gradient") {
  ParameterSet<double> ps;
  ps.create("w", {3}).data = {1.0, -2.0, 0.5};
  ps.zero_grads();
  ps.adam_step(1e-3);
  CHECK(ps.value("w").data == std::vector<double>{1.0, -2.0, 0.5});
}

TEST_CASE("first adam step magnitude is the learning rate") {
  // bias correction makes the first step exactly lr up to epsilon effects
  ParameterSet<double> ps;
  ps.create("w", {1}).data = {0.0};
  ps.grad("w").data = {1.0};
  ps.adam_step(1e-3);
  CHECK(std::abs(ps.value("w").data[0] + 1e-3) < 1e-10);
}

TEST_CASE("two identical gradients match a scalar adam recurrence") {
  // independent scalar oracle
  const double lr = 1e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8, g = 0.7;
  double m = 0, v = 0, x = 1.0;
  for (int t = 1; t <= 2; ++t) {
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    x -= lr * (m / (1 - std::pow(b1, t))) / (std::sqrt(v / (1 - std::pow(b2, t))) + eps);
  }

  ParameterSet<double> ps;
  ps.create("w", {1}).data = {1.0};
  for (int t = 0; t < 2; ++t) {
    ps.zero_grads();
    ps.grad("w").data[0] = g;
    ps.adam_step(lr);
  }
  CHECK(ps.value("w").data[0] == Catch::Approx(x).epsilon(1e-12));
  CHECK(ps.at("w").step == 2);
}

TEST_CASE("adam step count is monotonically non-decreasing") {
  ParameterSet<float> ps;
  ps.create("w", {2});
  int64_t last = ps.at("w").step;
  for (int i = 0; i < 5; ++i) {
    ps.adam_step(1e-3f);
    CHECK(ps.at("w").step >= last);
    last = ps.at("w").step;
  }
}

TEST_CASE("soft update endpoints and interpolation") {
  ParameterSet<double> target, online;
  target.create("w", {2}).fill(0.0);
  online.create("w", {2}).fill(1.0);

  SECTION("tau=1 copies online") {
    soft_update(target, online, 1.0);
    CHECK(target.value("w").data == std::vector<double>{1.0, 1.0});
  }
  SECTION("tau=0 leaves target unchanged") {
    soft_update(target, online, 0.0);
    CHECK(target.value("w").data == std::vector<double>{0.0, 0.0});
  }
  SECTION("tau=0.01 moves 1% of the gap") {
    soft_update(target, online, 0.01);
    CHECK(target.value("w").data[0] == Catch::Approx(0.01));
  }
}

TEST_CASE("soft update rejects mismatched parameter sets") {
  ParameterSet<double> target, online;
  target.create("w", {2});
  online.create("w", {3});
  CHECK_THROWS_AS(soft_update(target, online, 0.5), ConfigError);
}

TEST_CASE("gradients are untouched by the optimizer step") {
  ParameterSet<double> ps;
  ps.create("w", {2});
  ps.grad("w").data = {0.3, -0.4};
  ps.adam_step(1e-2);
  CHECK(ps.grad("w").data == std::vector<double>{0.3, -0.4});
}

TEST_CASE("duplicate parameter names are rejected") {
  ParameterSet<float> ps;
  ps.create("w", {1});
  CHECK_THROWS_AS(ps.create("w", {1}), ConfigError);
}
