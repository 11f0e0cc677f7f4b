#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "siprop/inference.hpp"

namespace siprop {

enum class CovariateLaw { Uniform01, BernoulliHalf };
enum class NuisanceShape { F1, F2, F3 };
enum class PropensityShape { E1, E2 };
enum class EffectShape { M1, M2 };

struct ScenarioConfig {
  Index n = 1000;
  Index p = 5;
  CovariateLaw law = CovariateLaw::BernoulliHalf;
  NuisanceShape f = NuisanceShape::F1;
  PropensityShape e = PropensityShape::E1;
  EffectShape mu = EffectShape::M1;
  double sigma2 = 0.0625;
  /// k in lambda = k * sigma * sqrt(n log p); preset when unset.
  std::optional<double> lambda_multiplier;
  /// Neighbourhood radius; preset when unset.
  std::optional<double> delta;
  Index replications = 1000;
  std::uint64_t seed = 1;
  bool estimate_propensity = false;
  /// Knobs forwarded to analyze(); lambda, sigma2, delta and propensity are
  /// overwritten from the scenario.
  AnalysisConfig analysis;
};

double preset_delta(const ScenarioConfig& cfg);
double preset_lambda_multiplier(const ScenarioConfig& cfg);
double scenario_lambda(const ScenarioConfig& cfg);
double scenario_delta(const ScenarioConfig& cfg);
AnalysisConfig scenario_analysis_config(const ScenarioConfig& cfg);

/// Ground-truth components of the outcome model Y = T mu(X) + f(X) + eps.
struct Truth {
  Vector mu;
  Vector f;
  Vector e;  // P(treated | X)

  /// Mean of the observed outcome given (T, X).
  Vector outcome_mean(const Matrix& t) const;
  /// eta' W E[Y | T, X], the center of the oracle pivot.
  double kappa(const Vector& eta, const Vector& w, const Matrix& t) const;
};

double nuisance_value(NuisanceShape shape, const Eigen::Ref<const Vector>& x);
double propensity_value(PropensityShape shape, const Eigen::Ref<const Vector>& x);
double effect_value(EffectShape shape, const Eigen::Ref<const Vector>& x);

/// Counter-based per-replicate seed.
std::uint64_t replicate_seed(std::uint64_t base, std::uint64_t index);

std::pair<Dataset, Truth> generate_dataset(const ScenarioConfig& cfg, std::uint64_t seed);

/// Coefficients of the causal effect projected onto the model columns of the
/// fitted design (the estimands of the selective intervals).
Vector projected_true_coefficients(const Matrix& x, const IndexList& model, const Truth& truth,
                                   const Contrast& c);

struct VariableRecord {
  Index variable = 0;
  double truth = 0.0;
  bool truth_nonzero = false;
  SelectiveInterval selective{0.0, 0.0};
  Interval naive;
  bool si_covers = false;
  bool naive_covers = false;
  bool si_excludes_zero = false;
  bool naive_excludes_zero = false;
  std::optional<ErrorCode> error;
};

struct ReplicateRecord {
  Index index = 0;
  std::uint64_t seed = 0;
  Index model_size = 0;
  double lambda = 0.0;
  std::vector<VariableRecord> variables;
  std::optional<ErrorCode> error;  // whole-replicate failure
  std::string error_message;
};

ReplicateRecord run_replicate(const ScenarioConfig& cfg, std::uint64_t seed, Index index = 0);

/// Mean and sample standard deviation; sd is unset with fewer than two values.
struct Summary {
  double mean = 0.0;
  std::optional<double> sd;
  Index count = 0;
};

Summary summarize(const std::vector<double>& values);

struct MethodMetrics {
  Summary fcr;
  Summary tp;
  Summary fp;
  /// Per-variable rate at which 0 falls outside the interval, among
  /// replicates that selected the variable.
  std::vector<Summary> excludes_zero;
};

struct MetricsReport {
  Index replications = 0;
  Index contributing = 0;  // replicates with a nonempty model
  Index failed_replicates = 0;
  Index failed_variables = 0;
  Summary model_size;
  MethodMetrics si;
  MethodMetrics naive;
};

MetricsReport aggregate(const std::vector<ReplicateRecord>& records, Index p);

struct MonteCarloResult {
  MetricsReport metrics;
  std::vector<ReplicateRecord> records;
};

/// Runs cfg.replications replicates on `threads` workers (0 = hardware).
MonteCarloResult monte_carlo(const ScenarioConfig& cfg, unsigned threads = 1);

struct PivotCheckConfig {
  ScenarioConfig scenario;
  Index pivots = 2000;
  /// Shift of the oracle center in units of sqrt(zeta); nonzero values give a
  /// negative control.
  double center_shift_sd = 0.0;
  Index max_replicates = 200000;
  int bins = 20;
};

struct PivotCheckResult {
  std::vector<double> pivots;
  Index replicates_used = 0;
  double ks_statistic = 0.0;
  double ks_pvalue = 0.0;
  std::vector<Index> histogram;
};

/// Oracle pivot of the first selected variable in each replicate, centered at
/// kappa with the known-variance zeta.
std::optional<double> oracle_pivot(const ScenarioConfig& cfg, std::uint64_t seed, double center_shift_sd);

PivotCheckResult pivot_check(const PivotCheckConfig& cfg, unsigned threads = 1);

double ks_statistic_uniform(std::vector<double> values);
/// Asymptotic Kolmogorov p-value with the small-sample correction of Stephens.
double ks_pvalue(double statistic, Index n);

unsigned resolve_threads(unsigned requested);

std::string to_string(CovariateLaw v);
std::string to_string(NuisanceShape v);
std::string to_string(PropensityShape v);
std::string to_string(EffectShape v);

}  // namespace siprop
