#include <doctest.h>

#include <cmath>
#include <random>

#include "siprop/inference.hpp"
#include "siprop/simulation.hpp"

using namespace siprop;

namespace {

Dataset sample(std::uint64_t seed, CovariateLaw law = CovariateLaw::Uniform01) {
  ScenarioConfig cfg;
  cfg.n = 300;
  cfg.law = law;
  cfg.f = NuisanceShape::F3;
  cfg.e = PropensityShape::E2;
  cfg.mu = EffectShape::M2;
  return generate_dataset(cfg, seed).first;
}

AnalysisConfig base_config() {
  AnalysisConfig cfg;
  cfg.sigma2 = 0.0625;
  cfg.lambda_multiplier = 2.0;
  cfg.delta = 0.5;
  return cfg;
}

void check_same_rows(const AnalysisResult& a, const AnalysisResult& b, double tol) {
  REQUIRE(a.rows.size() == b.rows.size());
  for (size_t k = 0; k < a.rows.size(); ++k) {
    CHECK(a.rows[k].variable == b.rows[k].variable);
    CHECK(a.rows[k].stat == doctest::Approx(b.rows[k].stat).epsilon(tol));
    CHECK(a.rows[k].selective.lower == doctest::Approx(b.rows[k].selective.lower).epsilon(tol));
    CHECK(a.rows[k].selective.upper == doctest::Approx(b.rows[k].selective.upper).epsilon(tol));
  }
}

}  // namespace

TEST_CASE("with an intercept, shifting a covariate changes nothing") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Dataset ds = sample(seed);
    const auto a = analyze(ds, Contrast::difference(), base_config());
    ds.x.col(2).array() += 7.5;
    const auto b = analyze(ds, Contrast::difference(), base_config());
    check_same_rows(a, b, 1e-7);
  }
}

TEST_CASE("with standardization, rescaling a covariate rescales its interval") {
  // Exact-match neighbourhoods on binary covariates are unaffected by the rescaling.
  AnalysisConfig cfg = base_config();
  cfg.standardize = true;
  cfg.delta = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Dataset ds = sample(seed, CovariateLaw::BernoulliHalf);
    const auto a = analyze(ds, Contrast::difference(), cfg);
    ds.x.col(1) *= 4.0;
    const auto b = analyze(ds, Contrast::difference(), cfg);
    REQUIRE(a.rows.size() == b.rows.size());
    for (size_t k = 0; k < a.rows.size(); ++k) {
      const double f = a.rows[k].variable == 1 ? 0.25 : 1.0;
      CHECK(b.rows[k].selective.lower == doctest::Approx(f * a.rows[k].selective.lower).epsilon(1e-7));
      CHECK(b.rows[k].selective.upper == doctest::Approx(f * a.rows[k].selective.upper).epsilon(1e-7));
    }
  }
}

TEST_CASE("reversing the contrast mirrors every interval") {
  Vector rev(2);
  rev << 1.0, -1.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Dataset ds = sample(seed);
    AnalysisConfig cfg = base_config();
    cfg.surrogate = SurrogateMethod::Plain;
    const auto a = analyze(ds, Contrast::difference(), cfg);
    const auto b = analyze(ds, Contrast(rev), cfg);
    REQUIRE(a.rows.size() == b.rows.size());
    for (size_t k = 0; k < a.rows.size(); ++k) {
      CHECK(b.rows[k].stat == doctest::Approx(-a.rows[k].stat).epsilon(1e-9));
      CHECK(b.rows[k].tau == doctest::Approx(-a.rows[k].tau).epsilon(1e-9));
      CHECK(b.rows[k].selective.lower == doctest::Approx(-a.rows[k].selective.upper).epsilon(1e-7));
      CHECK(b.rows[k].selective.upper == doctest::Approx(-a.rows[k].selective.lower).epsilon(1e-7));
    }
  }
}

TEST_CASE("selective interval is translation equivariant") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> unit;
  for (int rep = 0; rep < 50; ++rep) {
    const double lo = -2 + unit(rng);
    const double hi = lo + 0.2 + 3 * unit(rng);
    const TruncationRegion region({{lo, hi}, {hi + 1.0, hi + 2.0}});
    const double stat = lo + (hi - lo) * unit(rng);
    const double shift = -5 + 10 * unit(rng);
    const auto a = selective_interval(stat, 0.3, 0.5, region, 0.05);
    const auto b = selective_interval(stat + shift, 0.3, 0.5,
                                      TruncationRegion({{lo + shift, hi + shift}, {hi + 1.0 + shift, hi + 2.0 + shift}}),
                                      0.05);
    CHECK(b.lower == doctest::Approx(a.lower + shift).epsilon(1e-8));
    CHECK(b.upper == doctest::Approx(a.upper + shift).epsilon(1e-8));
  }
}

TEST_CASE("selective interval contains the naive interval's center shift in the untruncated limit") {
  // As the region grows the selective interval converges to the naive one.
  const double stat = 0.4;
  double prev_width = std::numeric_limits<double>::infinity();
  for (double half : {0.5, 1.0, 2.0, 4.0, 8.0}) {
    const auto si = selective_interval(stat, 0.0, 0.25, TruncationRegion({{stat - half, stat + half}}), 0.05);
    const double width = si.upper - si.lower;
    CHECK(width <= prev_width + 1e-12);
    prev_width = width;
  }
  const Interval nv = naive_interval(stat, 0.0, 0.25, 0.05);
  CHECK(prev_width == doctest::Approx(nv.hi - nv.lo).epsilon(1e-6));
}

TEST_CASE("exact-tie variance estimator ignores any function of X and T") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> gauss;
  const Dataset ds = sample(3, CovariateLaw::BernoulliHalf);
  Vector shifted = ds.y;
  for (Index i = 0; i < ds.n(); ++i) {
    shifted[i] += std::sin(ds.x.row(i).sum()) * 5.0 + 2.0 * ds.t(i, 1) + ds.x(i, 0) * ds.t(i, 0);
  }
  const auto a = estimate_error_variance(ds.y, ds.x, ds.t, 1e-9);
  const auto b = estimate_error_variance(shifted, ds.x, ds.t, 1e-9);
  CHECK(a.contributing > 0);
  CHECK(b.sigma2 == doctest::Approx(a.sigma2).epsilon(1e-9));
  CHECK(a.sigma2 >= 0.0);
}

TEST_CASE("pivot lies in [0,1] and rho is at least zeta across replicates") {
  ScenarioConfig cfg;
  cfg.n = 300;
  cfg.law = CovariateLaw::Uniform01;
  cfg.f = NuisanceShape::F2;
  cfg.e = PropensityShape::E2;
  cfg.mu = EffectShape::M1;
  cfg.lambda_multiplier = 1.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto [ds, truth] = generate_dataset(cfg, seed);
    const auto res = analyze(ds, Contrast::difference(), scenario_analysis_config(cfg));
    for (const auto& row : res.rows) {
      if (row.error) continue;
      CHECK(row.pivot_at_zero >= 0.0);
      CHECK(row.pivot_at_zero <= 1.0);
      CHECK(row.rho >= row.zeta);
      CHECK(row.selective.lower <= row.selective.upper);
    }
  }
}
