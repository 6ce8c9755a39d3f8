#include <doctest.h>

#include "gddm/assets.hpp"
#include "gddm/diffops.hpp"
#include "gddm/error.hpp"
#include "gddm/poisson.hpp"
#include "helpers.hpp"

using namespace gddm;

namespace {

Field smooth(std::size_t h, std::size_t w, std::uint64_t seed) {
  Rng rng(seed);
  return make_smooth_field(h, w, rng);
}

}  // namespace

TEST_SUITE("poisson") {
  TEST_CASE("homogeneous equation gives the anchor") {
    const auto sol = solve_poisson_neumann(Field(Shape{8, 8, 1}), 0.0);
    CHECK(max_abs(sol.image) == 0.0);
    CHECK(sol.residual_l2 == 0.0);
  }

  TEST_CASE("spectral round trip recovers smooth fields") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const Field x = smooth(64, 48, seed);
      const Field centred = x - Field(x.shape(), mean(x));
      const auto sol = solve_poisson_neumann(laplacian_fe(centred), mean(x));
      CAPTURE(seed);
      CHECK(norm2(sol.image - x) / norm2(x) <= 1e-8);
      CHECK(mean(sol.image) == doctest::Approx(mean(x)).epsilon(1e-12));
      CHECK(sol.residual_l2 >= 0.0);
      CHECK_FALSE(sol.compatibility_projected);
    }
  }

  TEST_CASE("spectral solve handles several channels and odd sizes") {
    const Field x = test::random_field(7, 5, 3, 2);
    const auto sol = solve_poisson_neumann(laplacian_fe(x), 0.0);
    for (std::size_t c = 0; c < 3; ++c) {
      const Field xc = channel(x, c);
      const Field sc = channel(sol.image, c);
      CHECK(greens_identity_check(sc, xc) <= 1e-10);
      CHECK(std::abs(mean(sc)) <= 1e-12);
    }
  }

  TEST_CASE("anchors shift the solution by a constant") {
    const Field y = laplacian_fe(smooth(32, 32, 2));
    const auto a = solve_poisson_neumann(y, 0.0);
    const auto b = solve_poisson_neumann(y, 3.0);
    const Field d = b.image - a.image;
    for (double v : d.data()) CHECK(std::abs(v - 3.0) <= 1e-12);
  }

  TEST_CASE("incompatible right-hand side is projected and flagged") {
    Field y = laplacian_fe(smooth(16, 16, 3));
    for (auto& v : y.data()) v += 0.01;
    const auto sol = solve_poisson_neumann(y, 0.0);
    CHECK(sol.compatibility_projected);
    CHECK(sol.rhs_mean_removed == doctest::Approx(0.01));
    CHECK(sol.residual_l2 <= 1e-10);
  }

  TEST_CASE("non-finite input raises") {
    Field y(Shape{4, 4, 1});
    y[3] = std::nan("");
    CHECK_THROWS_AS(solve_poisson_neumann(y, 0.0), InputError);
  }

  TEST_CASE("CG integrates an integrable gradient field") {
    const Field x = smooth(48, 40, 4);
    const auto sol = reconstruct_from_gradient(forward_gradient(x), mean(x), 1e-10, 2000);
    CHECK(sol.converged);
    CHECK(norm2(sol.image - x) / norm2(x) <= 1e-8);
    CHECK(mean(sol.image) == doctest::Approx(mean(x)).epsilon(1e-12));
  }

  TEST_CASE("CG meets the first-order optimality condition on non-integrable input") {
    const Field x = smooth(32, 32, 5);
    GradientField g = forward_gradient(x);
    g.gu += test::random_field(32, 32, 1, 6, 0.1);
    g.gv += test::random_field(32, 32, 1, 7, 0.1);
    const double tol = 1e-9;
    const auto sol = reconstruct_from_gradient(g, 0.0, tol, 5000);
    REQUIRE(sol.converged);
    const auto fit = forward_gradient(sol.image);
    const Field normal = divergence_adjoint(GradientField{fit.gu - g.gu, fit.gv - g.gv});
    CHECK(norm2(normal) <= 1.01 * tol * norm2(divergence_adjoint(g)));
  }

  TEST_CASE("CG energy is non-increasing") {
    const Field x = smooth(24, 24, 8);
    GradientField g = forward_gradient(x);
    g.gu += test::random_field(24, 24, 1, 9, 0.05);
    const auto sol = reconstruct_from_gradient(g, 0.0, CgOptions{1e-8, 1000, true});
    REQUIRE(sol.energy_history.size() == sol.iterations + 1);
    for (std::size_t i = 1; i < sol.energy_history.size(); ++i) {
      CHECK(sol.energy_history[i] <= sol.energy_history[i - 1] * (1 + 1e-12) + 1e-14);
    }
  }

  TEST_CASE("divergence-free gradient field reconstructs to the anchor") {
    const std::size_t n = 12;
    const GradientField g = curl_adjoint(test::random_field(n, n, 1, 10));
    REQUIRE(max_abs(divergence_adjoint(g)) <= 1e-13);
    const auto sol = reconstruct_from_gradient(g, 2.5, 1e-10, 100);
    CHECK(sol.converged);
    for (double v : sol.image.data()) CHECK(std::abs(v - 2.5) <= 1e-12);
  }

  TEST_CASE("zero gradient field gives the constant anchor") {
    const Field z(Shape{5, 5, 1});
    const auto sol = reconstruct_from_gradient(GradientField{z, z}, -1.0, 1e-8, 10);
    CHECK(sol.iterations <= 1);
    CHECK(sol.residual_l2 == 0.0);
    for (double v : sol.image.data()) CHECK(v == -1.0);
  }

  TEST_CASE("iteration cap is reported") {
    const Field x = smooth(64, 64, 11);
    const auto sol = reconstruct_from_gradient(forward_gradient(x), 0.0, 1e-12, 3);
    CHECK_FALSE(sol.converged);
    CHECK(sol.iterations == 3);
    CHECK_THROWS_AS(reconstruct_from_gradient(forward_gradient(x), 0.0, 0.0, 3), ParameterError);
  }

  TEST_CASE("Green's identity witness") {
    const Field x = smooth(20, 20, 12);
    CHECK(greens_identity_check(x, x + new_field(20, 20, 1, 5.0)) <= 1e-12);
    Field p = x;
    p(3, 4) += 1e-3;
    CHECK(greens_identity_check(x, p) > 0.0);

    const double tol = 1e-10;
    const Field y = laplacian_fe(x);
    const auto spectral = solve_poisson_neumann(y, 0.0);
    const auto cg = reconstruct_from_gradient(forward_gradient(x), 1.0, tol, 5000);
    CHECK(greens_identity_check(spectral.image, cg.image) <= 10 * tol * max_abs(spectral.image));
  }
}
