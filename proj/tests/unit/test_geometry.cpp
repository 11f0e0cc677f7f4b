#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "siprop/error.hpp"
#include "siprop/geometry.hpp"

using namespace siprop;

TEST_CASE("decomposition splits wy along eta") {
  std::mt19937_64 rng(1);
  const auto inst = oracle::random_instance(rng, 40, 4);
  const LassoFit fit = solve_ipw_lasso(inst.x, inst.wy, inst.lambda);
  REQUIRE(!fit.active.empty());
  const Vector eta = eta_vector(inst.x, fit.active, fit.active.front());
  const Decomposition dec = decompose(inst.w, inst.wy, eta);
  CHECK((dec.z + dec.d * dec.stat - inst.wy).lpNorm<Eigen::Infinity>() < 1e-10);
  CHECK(eta.dot(dec.d) == doctest::Approx(1.0));
  CHECK(dec.stat == doctest::Approx(eta.dot(inst.wy)));
  // z is uncorrelated with the statistic when Var(wy) is proportional to W^2.
  const Vector w2eta = inst.w.cwiseAbs2().cwiseProduct(eta);
  CHECK((w2eta - dec.d * eta.dot(w2eta)).lpNorm<Eigen::Infinity>() < 1e-10 * w2eta.lpNorm<Eigen::Infinity>());
  // eta picks out coordinate j of the least-squares fit on the model.
  const ModelBasis basis(inst.x, fit.active);
  const Vector ls = basis.gram_inv * basis.xm.transpose() * inst.wy;
  CHECK(dec.stat == doctest::Approx(ls[0]));
}

TEST_CASE("zero weights give a degenerate direction") {
  Matrix x(3, 1);
  x << 1, 2, 3;
  const Vector eta = eta_vector(x, {0}, 0);
  try {
    decompose(Vector::Zero(3), Vector::Ones(3), eta);
    FAIL("expected DegenerateDirection");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::DegenerateDirection);
  }
}

TEST_CASE("fast line geometry equals bounds from the explicit polyhedron") {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> pick_p(2, 7);
  for (int rep = 0; rep < 100; ++rep) {
    const auto inst = oracle::random_instance(rng, 50, pick_p(rng));
    const LassoFit fit = solve_ipw_lasso(inst.x, inst.wy, inst.lambda);
    if (fit.active.empty()) continue;
    const ModelBasis basis(inst.x, fit.active);
    const Decomposition dec = decompose(inst.w, inst.wy, eta_vector(basis, fit.active.back()));
    const LineGeometry geo(basis, inst.lambda, dec);
    const auto m = static_cast<Index>(fit.active.size());
    for (unsigned code = 0; code < (1U << m); ++code) {
      Vector s(m);
      for (Index k = 0; k < m; ++k) s[k] = ((code >> k) & 1U) ? 1.0 : -1.0;
      const TruncationBounds slow = truncation_bounds(selection_polyhedron(inst.x, fit.active, s, inst.lambda), dec);
      const TruncationBounds fast = geo.bounds(s);
      const double scale = 1.0 + std::abs(dec.stat);
      auto same = [&](double a, double b) { return (std::isinf(a) && a == b) || std::abs(a - b) <= 1e-8 * scale; };
      CHECK(same(slow.vminus, fast.vminus));
      CHECK(same(slow.vplus, fast.vplus));
    }
    const TruncationBounds obs = geo.bounds(fit.signs);
    CHECK(obs.vzero >= -1e-9);
    CHECK(dec.stat >= obs.vminus - 1e-8 * (1 + std::abs(dec.stat)));
    CHECK(dec.stat <= obs.vplus + 1e-8 * (1 + std::abs(dec.stat)));
  }
}

TEST_CASE("sign union region agrees with a grid of Lasso re-solves") {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> pick_p(2, 6);
  std::uniform_int_distribution<int> pick_n(20, 60);
  int disagreements = 0;
  for (int rep = 0; rep < 40; ++rep) {
    const auto inst = oracle::random_instance(rng, pick_n(rng), pick_p(rng));
    const LassoFit fit = solve_ipw_lasso(inst.x, inst.wy, inst.lambda);
    if (fit.active.empty()) continue;
    const ModelBasis basis(inst.x, fit.active);
    const Decomposition dec = decompose(inst.w, inst.wy, eta_vector(basis, fit.active.front()));
    const TruncationRegion region = sign_union_region(basis, inst.lambda, dec);
    CHECK((region.contains(dec.stat) || region.distance(dec.stat) < 1e-8 * (1 + std::abs(dec.stat))));
    const double span = 3.0 * (1.0 + std::abs(dec.stat));
    const auto check = oracle::grid_region_check(inst.x, fit.active, inst.lambda, dec.z, dec.d, region,
                                                 dec.stat - span, dec.stat + span, 400, 1e-6 * span);
    disagreements += check.disagreements;
  }
  CHECK(disagreements == 0);
}

TEST_CASE("observed-sign region is one piece of the union") {
  std::mt19937_64 rng(6);
  const auto inst = oracle::random_instance(rng, 60, 5);
  const LassoFit fit = solve_ipw_lasso(inst.x, inst.wy, inst.lambda);
  REQUIRE(!fit.active.empty());
  const ModelBasis basis(inst.x, fit.active);
  const Decomposition dec = decompose(inst.w, inst.wy, eta_vector(basis, fit.active.front()));
  const TruncationRegion obs = observed_sign_region(basis, inst.lambda, fit.signs, dec);
  const TruncationRegion uni = sign_union_region(basis, inst.lambda, dec);
  REQUIRE(obs.intervals().size() == 1);
  const Interval piece = obs.intervals().front();
  const double mid = std::isfinite(piece.lo) && std::isfinite(piece.hi) ? 0.5 * (piece.lo + piece.hi) : dec.stat;
  CHECK(uni.contains(mid));
}

TEST_CASE("union cap") {
  std::mt19937_64 rng(8);
  auto inst = oracle::random_instance(rng, 60, 5);
  const LassoFit fit = solve_ipw_lasso(inst.x, inst.wy, inst.lambda * 0.05);
  REQUIRE(fit.active.size() >= 2);
  const ModelBasis basis(inst.x, fit.active);
  const Decomposition dec = decompose(inst.w, inst.wy, eta_vector(basis, fit.active.front()));
  try {
    sign_union_region(basis, inst.lambda * 0.05, dec, 1);
    FAIL("expected UnionCapExceeded");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::UnionCapExceeded);
  }
}
