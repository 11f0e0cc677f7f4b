#pragma once

#include <optional>
#include <string>
#include <vector>

#include "siprop/core_model.hpp"
#include "siprop/error.hpp"
#include "siprop/geometry.hpp"
#include "siprop/lasso.hpp"
#include "siprop/nuisance.hpp"
#include "siprop/truncnorm.hpp"

namespace siprop {

double normal_quantile(double prob);

/// sigma2 * sum_i w_i^2 eta_i^2.
double zeta(const Vector& eta, const Vector& w, double sigma2);
double zeta(const Matrix& x, const IndexList& model, Index j, const Vector& w, double sigma2);

/// Mean correction eta' sum_h c_h (W_h - I) ystar_h, W_h = diag(T_h / e_h).
double tau(const Vector& eta, const Matrix& ystar, const Matrix& t, const Matrix& e, const Contrast& c);
double tau(const Matrix& ystar, const Matrix& t, const Matrix& x, const IndexList& model, Index j,
           const Matrix& e, const Contrast& c);

/// zeta plus sigma2 * sum_h c_h^2 eta' K_h eta, K_h = diag((1/e_h - 1) / donors_h).
double rho(double zeta_val, const Vector& eta, double sigma2, const Matrix& donors, const Matrix& e,
           const Contrast& c);

double pivot(double stat, double center, double variance, const TruncationRegion& region);

struct SelectiveInterval {
  double lower;
  double upper;
  bool lower_saturated = false;  // CDF saturated; endpoint set to -inf
  bool upper_saturated = false;  // CDF saturated; endpoint set to +inf
};

SelectiveInterval selective_interval(double stat, double tau_val, double rho_val,
                                     const TruncationRegion& region, double alpha);

Interval naive_interval(double stat, double tau_val, double rho_val, double alpha);

enum class PropensitySource { Known, Logistic };
enum class NaiveCenter { Raw, Corrected };
enum class NaiveVariance { Zeta, Rho };

struct AnalysisConfig {
  std::optional<double> lambda;
  /// Used when lambda is unset: lambda = multiplier * sigma * sqrt(n log p).
  double lambda_multiplier = 1.0;
  double alpha = 0.05;
  /// Neighbourhood radius for the counterfactual surrogates; (p/2)^{1/2} if unset.
  std::optional<double> delta;
  std::optional<double> sigma2;
  /// Radius for the variance estimator; falls back to delta.
  std::optional<double> variance_delta;
  PropensitySource propensity = PropensitySource::Known;
  bool use_union = true;
  int union_cap = kDefaultUnionCap;
  SurrogateMethod surrogate = SurrogateMethod::Pooled;
  NaiveCenter naive_center = NaiveCenter::Raw;
  NaiveVariance naive_variance = NaiveVariance::Zeta;
  /// Fit an unpenalized intercept (columns of X centered before selection).
  bool intercept = true;
  /// Scale columns to unit standard deviation before selection; intervals are
  /// reported on the original scale.
  bool standardize = false;
  LassoOptions lasso;
};

/// Column centering and scaling applied before selection.
struct DesignTransform {
  Vector center;
  Vector scale;
  Matrix apply(const Matrix& x) const;
};

DesignTransform make_design_transform(const Matrix& x, bool intercept, bool standardize);

/// Naive interval according to the configured center and variance.
Interval naive_interval(double stat, double tau_val, double zeta_val, double rho_val, double alpha,
                        NaiveCenter center, NaiveVariance variance);

struct InferenceRow {
  Index variable = 0;
  std::string name;
  double stat = 0.0;
  double estimate = 0.0;  // stat - tau
  double tau = 0.0;
  double zeta = 0.0;
  double rho = 0.0;
  TruncationRegion region;
  bool union_region = false;  // false when only the observed signs were conditioned on
  double pivot_at_zero = 0.0;
  SelectiveInterval selective{0.0, 0.0};
  Interval naive;
  bool significant = false;        // 0 outside the selective interval
  bool naive_significant = false;  // 0 outside the naive interval
  Vector eta;
  std::optional<ErrorCode> error;
  std::string error_message;
};

enum class AnalysisStatus { Ok, NoSelection };

struct AnalysisResult {
  AnalysisStatus status = AnalysisStatus::Ok;
  double lambda = 0.0;
  double sigma2 = 0.0;
  bool sigma2_estimated = false;
  double delta = 0.0;
  DesignTransform design;
  double intercept = 0.0;  // fitted intercept on the weighted outcome (0 without one)
  SurrogateMethod surrogate = SurrogateMethod::Plain;
  Index surrogate_fallbacks = 0;
  LassoFit fit;
  std::vector<InferenceRow> rows;
};

/// Default Lasso penalty multiplier * sigma * sqrt(n log p).
double default_lambda(double multiplier, double sigma, Index n, Index p);

AnalysisResult analyze(const Dataset& ds, const Contrast& c, const AnalysisConfig& cfg);

}  // namespace siprop
