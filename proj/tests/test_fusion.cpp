#include <catch2/catch_amalgamated.hpp>

#include "m2po/fusion.hpp"
#include "m2po/pairing.hpp"

using namespace m2po;

TEST_CASE("zscore of a constant vector is all zeros") {
  const auto z = zscore({5.0, 5.0, 5.0});
  CHECK(z == std::vector<double>{0.0, 0.0, 0.0});
}

TEST_CASE("zscore matches an independent mean/sigma computation") {
  // mean 20, population sigma sqrt(200/3) = 8.164966
  const auto z = zscore({10.0, 20.0, 30.0});
  CHECK(z[0] == Catch::Approx(-1.224745).margin(1e-6));
  CHECK(z[1] == Catch::Approx(0.0).margin(1e-12));
  CHECK(z[2] == Catch::Approx(1.224745).margin(1e-6));
}

TEST_CASE("zscore output is centered and unit-scaled") {
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(2 + rng.next_below(20));
    for (double& x : v) x = (rng.next_double() - 0.5) * 100.0;
    const auto z = zscore(v);
    double mean = 0.0, var = 0.0;
    for (double x : z) mean += x;
    mean /= static_cast<double>(z.size());
    CHECK(std::abs(mean) < 1e-12);
    for (double x : z) var += x * x;
    var /= static_cast<double>(z.size());
    if (var > 0.0) CHECK(var == Catch::Approx(1.0).margin(1e-9));
  }
}

TEST_CASE("zscore is invariant to positive affine transforms") {
  Rng rng(32);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(3 + rng.next_below(10));
    for (double& x : v) x = (rng.next_double() - 0.5) * 10.0;
    const double a = 0.1 + rng.next_double() * 5.0;
    const double b = (rng.next_double() - 0.5) * 50.0;
    std::vector<double> w(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) w[i] = a * v[i] + b;
    const auto zv = zscore(v);
    const auto zw = zscore(w);
    for (std::size_t i = 0; i < v.size(); ++i)
      CHECK(zw[i] == Catch::Approx(zv[i]).margin(1e-9));
  }
}

TEST_CASE("zscore requires K >= 2") {
  CHECK_THROWS_AS(zscore({1.0}), std::invalid_argument);
}

TEST_CASE("alpha_at reproduces the 0.1 -> 0.9 linear ramp") {
  CurriculumSchedule sched{0.1, 0.9, 1000};
  CHECK(alpha_at(0, sched) == 0.1);
  CHECK(alpha_at(1000, sched) == 0.9);
  CHECK(alpha_at(500, sched) == Catch::Approx(0.5).margin(1e-15));
  CHECK(alpha_at(2000, sched) == 0.9);  // clamps past the end
  CHECK_THROWS_AS(alpha_at(-1, sched), std::invalid_argument);
}

TEST_CASE("schedule invariants are enforced") {
  CHECK_THROWS_AS(alpha_at(0, CurriculumSchedule{0.9, 0.1, 10}),
                  std::invalid_argument);
  CHECK_THROWS_AS(alpha_at(0, CurriculumSchedule{0.1, 1.1, 10}),
                  std::invalid_argument);
  CHECK_THROWS_AS(alpha_at(0, CurriculumSchedule{0.1, 0.9, 0}),
                  std::invalid_argument);
}

TEST_CASE("fuse hits the curriculum limits exactly") {
  FusionInputs in;
  in.static_scores = {10.0, 20.0, 30.0, 15.0};
  in.dynamic_scores = {-4.0, -2.0, -9.0, -1.0};
  CHECK(fuse(in, 0.0) == zscore(in.static_scores));
  CHECK(fuse(in, 1.0) == zscore(in.dynamic_scores));
  CHECK_THROWS_AS(fuse(in, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(fuse(in, -0.1), std::invalid_argument);
}

TEST_CASE("opposed unit scores cancel at alpha one half") {
  // candidate 0: rs_hat=+1, rd_hat=-1
  FusionInputs in;
  in.static_scores = {2.0, 0.0};
  in.dynamic_scores = {-4.0, -2.0};
  const auto fused = fuse(in, 0.5);
  CHECK(fused[0] == Catch::Approx(0.0).margin(1e-12));
  CHECK(fused[1] == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("fused scores always have pool mean zero") {
  Rng rng(33);
  for (int trial = 0; trial < 200; ++trial) {
    FusionInputs in;
    const std::size_t k = 2 + rng.next_below(14);
    for (std::size_t i = 0; i < k; ++i) {
      in.static_scores.push_back(rng.next_double() * 200.0);
      in.dynamic_scores.push_back(-rng.next_double() * 30.0);
    }
    const auto fused = fuse(in, rng.next_double());
    double mean = 0.0;
    for (double v : fused) mean += v;
    CHECK(std::abs(mean / static_cast<double>(k)) < 1e-12);
  }
}

TEST_CASE("curriculum endpoints preserve the marginal rankings") {
  Rng rng(34);
  for (int trial = 0; trial < 100; ++trial) {
    FusionInputs in;
    const std::size_t k = 4 + rng.next_below(12);
    for (std::size_t i = 0; i < k; ++i) {
      in.static_scores.push_back(rng.next_double() * 200.0);
      in.dynamic_scores.push_back(-rng.next_double() * 30.0);
    }
    CHECK(rank_candidates(fuse(in, 0.0)) == rank_candidates(in.static_scores));
    CHECK(rank_candidates(fuse(in, 1.0)) == rank_candidates(in.dynamic_scores));
  }
}
