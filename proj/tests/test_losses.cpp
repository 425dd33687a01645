#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>
#include <vector>

#include "cmlab/losses.hpp"
#include "cmlab/rng.hpp"

using namespace cmlab;

namespace {

// Central-difference gradient used as the independent oracle throughout.
Vec fd_gradient(const LossSurface& s, const Vec& theta) {
  Vec g(theta.size());
  Vec probe(theta);
  for (std::size_t d = 0; d < theta.size(); ++d) {
    const double h = 1e-5 * std::max(1.0, std::abs(theta[d]));
    probe[d] = theta[d] + h;
    const double fp = s.value(probe);
    probe[d] = theta[d] - h;
    const double fm = s.value(probe);
    probe[d] = theta[d];
    g[d] = (fp - fm) / (2.0 * h);
  }
  return g;
}

double max_rel_vs_fd(const LossSurface& s, const Vec& theta) {
  const Vec a = s.gradient(theta);
  const Vec f = fd_gradient(s, theta);
  double worst = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d)
    worst = std::max(worst, std::abs(a[d] - f[d]) / std::max(1.0, std::abs(a[d])));
  return worst;
}

}  // namespace

TEST_CASE("ackley vanishes at the origin", "[losses]") {
  AckleyLoss f;
  CHECK(f.value({0.0, 0.0}) == Catch::Approx(0.0).margin(1e-14));
  CHECK(f.value({1.0, 1.0}) > 0.0);
}

TEST_CASE("levy vanishes at (1,1)", "[losses]") {
  Levy2DLoss f;
  CHECK(f.value({1.0, 1.0}) == Catch::Approx(0.0).margin(1e-14));
}

TEST_CASE("sharpflat values and both global minima", "[losses]") {
  SharpFlatLoss f(5.0, 1);
  CHECK(f.value({0.5}) == Catch::Approx(0.25));
  for (double s : {1.5, 5.0, 10.0, 100.0}) {
    for (int d : {1, 3, 10}) {
      SharpFlatLoss g(s, d);
      CHECK(g.value(Vec(d, 0.0)) == 0.0);
      CHECK(g.value(Vec(d, 1.0)) == 0.0);
    }
  }
  CHECK_THROWS_AS(SharpFlatLoss(1.0, 1), std::invalid_argument);
}

TEST_CASE("sharpflat gradient picks the active branch, ties to x^2", "[losses]") {
  SharpFlatLoss f(5.0, 1);
  CHECK(f.gradient({0.5})[0] == Catch::Approx(1.0));
  CHECK(f.gradient({0.9})[0] == Catch::Approx(2.0 * 5.0 * (0.9 - 1.0)));
  // At the kink both branches are equal; the x^2 branch wins.
  const double kink = f.kink_points()[0];
  CHECK(f.gradient({kink})[0] == Catch::Approx(2.0 * kink));
}

TEST_CASE("quadratic gradient is H theta", "[losses]") {
  QuadraticLoss f(Vec{1.0, 3.0});
  const Vec g = f.gradient({1.0, 1.0});
  CHECK(g[0] == Catch::Approx(1.0));
  CHECK(g[1] == Catch::Approx(3.0));
}

TEST_CASE("quadratic loss equals the bilinear form exactly", "[losses]") {
  SplitMix64 rng(3);
  const Vec diag{0.5, 2.0, 7.0};
  QuadraticLoss f(diag);
  for (int trial = 0; trial < 50; ++trial) {
    Vec theta(3);
    for (double& x : theta) x = rng.uniform(-4.0, 4.0);
    double direct = 0.0;
    for (int i = 0; i < 3; ++i) direct += theta[i] * diag[i] * theta[i];
    direct *= 0.5;
    CHECK(f.value(theta) == direct);
  }
}

TEST_CASE("dense quadratic matches diagonal on diagonal input", "[losses]") {
  QuadraticLoss dense(2, {1.0, 0.0, 0.0, 3.0});
  QuadraticLoss diag(Vec{1.0, 3.0});
  CHECK(dense.value({1.2, -0.4}) == Catch::Approx(diag.value({1.2, -0.4})));
  CHECK_THROWS_AS(QuadraticLoss(2, {1.0, 2.0, 3.0, 4.0}), std::invalid_argument);
}

TEST_CASE("ackley analytic gradient matches central differences", "[losses]") {
  AckleyLoss f;
  CHECK(max_rel_vs_fd(f, {1.3, -0.7}) < 1e-6);
  CHECK(max_rel_vs_fd(f, {0.1, 0.1}) < 1e-6);
}

TEST_CASE("gp analytic gradient matches central differences", "[losses]") {
  GoldsteinPriceLoss f;
  SplitMix64 rng(5);
  for (int i = 0; i < 20; ++i) {
    Vec theta{rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)};
    CHECK(max_rel_vs_fd(f, theta) < 1e-5);
  }
}

TEST_CASE("gp minimum sits at (0,-1) with value (log 3 - 8.693)/2.427", "[losses]") {
  GoldsteinPriceLoss f;
  CHECK(f.value({0.0, -1.0}) == Catch::Approx((std::log(3.0) - 8.693) / 2.427).epsilon(1e-12));
  CHECK(norm2(f.gradient({0.0, -1.0})) < 1e-12);
}

TEST_CASE("every surface passes seeded random gradient checks", "[losses]") {
  std::vector<std::unique_ptr<LossSurface>> surfaces;
  surfaces.push_back(std::make_unique<AckleyLoss>());
  surfaces.push_back(std::make_unique<GoldsteinPriceLoss>());
  surfaces.push_back(std::make_unique<Levy2DLoss>());
  surfaces.push_back(std::make_unique<AckleyRosenbrockLoss>());
  surfaces.push_back(std::make_unique<SharpFlatLoss>(25.0, 4));
  surfaces.push_back(std::make_unique<QuadraticLoss>(Vec{1.0, 10.0, 0.5}));
  for (const auto& s : surfaces) {
    SplitMix64 rng(17);
    const auto [lo, hi] = s->domain_bounds();
    const auto* sf = dynamic_cast<const SharpFlatLoss*>(s.get());
    for (int p = 0; p < 25; ++p) {
      Vec theta(static_cast<std::size_t>(s->dim()));
      for (double& x : theta) {
        for (;;) {
          x = rng.uniform(lo, hi);
          if (sf == nullptr) break;
          const auto k = sf->kink_points();
          if (std::abs(x - k[0]) > 1e-4 && std::abs(x - k[1]) > 1e-4) break;
        }
      }
      INFO(s->name());
      const GradReport rep = check_grad(*s, theta);
      CHECK(rep.max_rel_error < 1e-5);
    }
  }
}

TEST_CASE("check_grad frozen examples", "[losses]") {
  CHECK(check_grad(QuadraticLoss(Vec{2.0}), {1.0}).max_rel_error < 1e-9);
  SplitMix64 rng(9);
  Levy2DLoss levy;
  const Vec theta{rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0)};
  CHECK(check_grad(levy, theta).max_rel_error < 1e-6);
  CHECK(check_grad(AckleyLoss(), {0.1, 0.1}).max_rel_error < 1e-6);
}

TEST_CASE("hvp analytic forms", "[losses]") {
  QuadraticLoss q(Vec{1.0, 3.0});
  const Vec hv = q.hessian_vec({0.2, 0.4}, {0.0, 1.0});
  CHECK(hv[0] == 0.0);
  CHECK(hv[1] == 3.0);
  SharpFlatLoss f(10.0, 1);
  CHECK(f.hessian_vec({1.0}, {1.0})[0] == Catch::Approx(20.0));
  CHECK(f.hessian_vec({0.0}, {1.0})[0] == Catch::Approx(2.0));
}

TEST_CASE("fd hvp agrees with a second difference of the loss", "[losses]") {
  AckleyLoss f;
  const Vec theta{2.0, 2.0}, v{1.0, 0.0};
  const Vec hv = f.hessian_vec(theta, v);
  const double lhs = dot(v, hv);
  const double h = 1e-4;
  const Vec plus{theta[0] + h * v[0], theta[1] + h * v[1]};
  const Vec minus{theta[0] - h * v[0], theta[1] - h * v[1]};
  const double rhs = (f.value(plus) - 2.0 * f.value(theta) + f.value(minus)) / (h * h);
  CHECK(std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)) < 1e-3);
}

TEST_CASE("hvp is linear in v for analytic Hessians", "[losses]") {
  SplitMix64 rng(23);
  QuadraticLoss q(Vec{1.0, 3.0, 0.25});
  SharpFlatLoss f(7.0, 3);
  for (const LossSurface* s : {static_cast<const LossSurface*>(&q),
                               static_cast<const LossSurface*>(&f)}) {
    for (int trial = 0; trial < 20; ++trial) {
      Vec theta(3), v1(3), v2(3);
      for (double& x : theta) x = rng.uniform(-3.0, 3.0);
      for (double& x : v1) x = rng.uniform(-1.0, 1.0);
      for (double& x : v2) x = rng.uniform(-1.0, 1.0);
      const double a = rng.uniform(-2.0, 2.0), b = rng.uniform(-2.0, 2.0);
      Vec combo(3);
      for (int i = 0; i < 3; ++i) combo[i] = a * v1[i] + b * v2[i];
      const Vec left = s->hessian_vec(theta, combo);
      const Vec r1 = s->hessian_vec(theta, v1), r2 = s->hessian_vec(theta, v2);
      for (int i = 0; i < 3; ++i)
        CHECK(std::abs(left[i] - (a * r1[i] + b * r2[i])) < 1e-8);
    }
  }
}

TEST_CASE("dimension and domain errors", "[losses]") {
  AckleyLoss f;
  CHECK_THROWS_AS(f.value({1.0}), std::invalid_argument);
  CHECK_THROWS_AS(f.gradient({1.0, 2.0, 3.0}), std::invalid_argument);
  Levy2DLoss levy;
  CHECK_THROWS_AS(levy.value({1e300, 1e300}), std::domain_error);
}
