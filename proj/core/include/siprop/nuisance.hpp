#pragma once

#include <optional>
#include <vector>

#include "siprop/core_model.hpp"
#include "siprop/lasso.hpp"

namespace siprop {

struct LogisticFit {
  Vector coef;        // intercept first, then one slope per column of X
  Matrix covariance;  // inverse observed information
  Matrix propensity;  // n x 2, clipped
  int iterations = 0;
};

/// Binary logistic MLE of P(arm 1 | X) with an intercept, by Newton-Raphson.
LogisticFit fit_logistic(const Matrix& t, const Matrix& x, double clip = 1e-6);

Matrix fit_logistic_propensity(const Matrix& t, const Matrix& x);

/// Units within distance delta of each unit (itself excluded), restricted
/// to one arm.
struct NeighborhoodIndex {
  double delta = 0.0;
  Index arm = 0;
  std::vector<IndexList> members;

  size_t size(Index i) const { return members[static_cast<size_t>(i)].size(); }
};

NeighborhoodIndex build_neighborhoods(const Matrix& x, const Matrix& t, double delta, Index arm);

/// One index per arm, sharing a single pass over the pairwise distances.
std::vector<NeighborhoodIndex> build_all_neighborhoods(const Matrix& x, const Matrix& t, double delta);

enum class SurrogateMethod { Plain, Pooled };

struct Surrogates {
  Matrix ystar;       // n x H
  Matrix donors;      // n x H effective donor counts entering the variance term
  SurrogateMethod method = SurrogateMethod::Plain;
  Index fallbacks = 0;  // units whose empty neighbourhood was replaced by the nearest unit
};

/// Per-arm least squares, one column per arm. With `intercept` the first
/// row holds the arm intercepts.
Matrix arm_regressions(const Vector& y, const Matrix& x, const Matrix& t, bool intercept = false);

/// Counterfactual outcome surrogates. For the pooled method, `effect` holds
/// the fitted arm-2-minus-arm-1 effect at every unit (H = 2 only).
Surrogates counterfactual_surrogates(const Vector& y, const Matrix& x, const Matrix& t,
                                     const std::vector<NeighborhoodIndex>& nbhd,
                                     SurrogateMethod method,
                                     const std::optional<Vector>& effect = std::nullopt,
                                     bool intercept = false);

struct VarianceEstimate {
  double sigma2 = 0.0;
  Index contributing = 0;  // units with a nonempty neighbourhood
  bool all_empty() const { return contributing == 0; }
};

/// Nearest-neighbour difference estimator of the error variance; neighbours
/// share the unit's arm and lie strictly within delta.
VarianceEstimate estimate_error_variance(const Vector& y, const Matrix& x, const Matrix& t, double delta);

}  // namespace siprop
