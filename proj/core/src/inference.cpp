#include "siprop/inference.hpp"

#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <limits>

namespace siprop {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Maps stat onto the region when rounding in the bound computation left it
// a hair outside; anything farther away is a genuine inconsistency.
double settle_into(const TruncationRegion& region, double stat) {
  if (region.empty()) throw Error(ErrorCode::InvalidRegion, "empty truncation region");
  if (region.contains(stat)) return stat;
  const double gap = region.distance(stat);
  if (gap <= 1e-6 * (1.0 + std::abs(stat))) return region.nearest(stat);
  throw Error(ErrorCode::InvalidRegion,
              "statistic " + std::to_string(stat) + " lies outside " + describe(region));
}

TruncationRegion build_region(const ModelBasis& basis, double lambda, const Vector& signs,
                              const Decomposition& dec, bool use_union, int cap, bool& used_union) {
  const LineGeometry geo(basis, lambda, dec);
  const TruncationBounds obs = geo.bounds(signs);
  const double tol = 1e-6 * (1.0 + std::abs(dec.stat));
  if (obs.vzero < -1e-9 || dec.stat < obs.vminus - tol || dec.stat > obs.vplus + tol) {
    throw Error(ErrorCode::InvalidRegion, "observed data violate their own selection event");
  }
  const Index m = signs.size();
  used_union = use_union && m <= cap && m <= 30;
  if (!used_union) return TruncationRegion({Interval{obs.vminus, obs.vplus}});
  std::vector<Interval> pieces;
  Vector s(m);
  const unsigned long count = 1UL << m;
  for (unsigned long code = 0; code < count; ++code) {
    for (Index k = 0; k < m; ++k) s[k] = ((code >> k) & 1UL) ? 1.0 : -1.0;
    Interval iv;
    if (geo.piece(s, iv)) pieces.push_back(iv);
  }
  pieces.push_back({obs.vminus, obs.vplus});
  return TruncationRegion(std::move(pieces));
}

}  // namespace

double normal_quantile(double prob) {
  static const boost::math::normal_distribution<double> standard;
  return boost::math::quantile(standard, prob);
}

double zeta(const Vector& eta, const Vector& w, double sigma2) {
  if (!(sigma2 > 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma2 must be positive");
  return sigma2 * w.cwiseAbs2().dot(eta.cwiseAbs2());
}

double zeta(const Matrix& x, const IndexList& model, Index j, const Vector& w, double sigma2) {
  return zeta(eta_vector(x, model, j), w, sigma2);
}

double tau(const Vector& eta, const Matrix& ystar, const Matrix& t, const Matrix& e, const Contrast& c) {
  double acc = 0.0;
  for (Index h = 0; h < t.cols(); ++h) {
    if (c[h] == 0.0) continue;
    double part = 0.0;
    for (Index i = 0; i < eta.size(); ++i) part += eta[i] * (t(i, h) / e(i, h) - 1.0) * ystar(i, h);
    acc += c[h] * part;
  }
  return acc;
}

double tau(const Matrix& ystar, const Matrix& t, const Matrix& x, const IndexList& model, Index j,
           const Matrix& e, const Contrast& c) {
  return tau(eta_vector(x, model, j), ystar, t, e, c);
}

double rho(double zeta_val, const Vector& eta, double sigma2, const Matrix& donors, const Matrix& e,
           const Contrast& c) {
  double extra = 0.0;
  for (Index h = 0; h < e.cols(); ++h) {
    if (c[h] == 0.0) continue;
    double part = 0.0;
    for (Index i = 0; i < eta.size(); ++i) {
      if (!(donors(i, h) >= 1.0)) {
        throw Error(ErrorCode::EmptyNeighborhood, "unit " + std::to_string(i) + " has no donors");
      }
      part += eta[i] * eta[i] * (1.0 / e(i, h) - 1.0) / donors(i, h);
    }
    extra += c[h] * c[h] * part;
  }
  return zeta_val + sigma2 * extra;
}

double pivot(double stat, double center, double variance, const TruncationRegion& region) {
  return tn_union_cdf(stat, center, variance, region);
}

SelectiveInterval selective_interval(double stat, double tau_val, double rho_val,
                                     const TruncationRegion& region, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::InvalidArgument, "alpha must lie in (0,1)");
  const double x = settle_into(region, stat);
  SelectiveInterval out{-kInf, kInf};
  try {
    out.lower = invert_mean(x, rho_val, region, 1.0 - alpha / 2.0) - tau_val;
  } catch (const Error& err) {
    if (err.code() != ErrorCode::BracketFailure) throw;
    out.lower_saturated = true;
  }
  try {
    out.upper = invert_mean(x, rho_val, region, alpha / 2.0) - tau_val;
  } catch (const Error& err) {
    if (err.code() != ErrorCode::BracketFailure) throw;
    out.upper_saturated = true;
  }
  if (out.lower > out.upper) std::swap(out.lower, out.upper);
  return out;
}

Interval naive_interval(double stat, double tau_val, double rho_val, double alpha) {
  const double half = normal_quantile(1.0 - alpha / 2.0) * std::sqrt(rho_val);
  return {stat - tau_val - half, stat - tau_val + half};
}

Interval naive_interval(double stat, double tau_val, double zeta_val, double rho_val, double alpha,
                        NaiveCenter center, NaiveVariance variance) {
  return naive_interval(stat, center == NaiveCenter::Corrected ? tau_val : 0.0,
                        variance == NaiveVariance::Rho ? rho_val : zeta_val, alpha);
}

Matrix DesignTransform::apply(const Matrix& x) const {
  return (x.rowwise() - center.transpose()).array().rowwise() / scale.transpose().array();
}

DesignTransform make_design_transform(const Matrix& x, bool intercept, bool standardize) {
  DesignTransform d;
  const double n = static_cast<double>(x.rows());
  d.center = intercept ? Vector(x.colwise().mean().transpose()) : Vector::Zero(x.cols());
  d.scale = Vector::Ones(x.cols());
  if (standardize) {
    for (Index j = 0; j < x.cols(); ++j) {
      const double s = std::sqrt((x.col(j).array() - d.center[j]).square().sum() / n);
      if (s > 0.0 && std::isfinite(s)) d.scale[j] = s;
    }
  }
  return d;
}

double default_lambda(double multiplier, double sigma, Index n, Index p) {
  if (p < 2) throw Error(ErrorCode::InvalidArgument, "the default penalty needs p >= 2; pass lambda explicitly");
  const double lam = multiplier * sigma * std::sqrt(static_cast<double>(n) * std::log(static_cast<double>(p)));
  if (!(lam > 0.0) || !std::isfinite(lam)) {
    throw Error(ErrorCode::InvalidArgument, "default penalty is not positive; pass lambda explicitly");
  }
  return lam;
}

AnalysisResult analyze(const Dataset& ds, const Contrast& c, const AnalysisConfig& cfg) {
  validate_dataset(ds);
  if (c.size() != ds.arms()) throw Error(ErrorCode::DimensionMismatch, "contrast length differs from H");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw Error(ErrorCode::InvalidArgument, "alpha must lie in (0,1)");

  const Index n = ds.n();
  const Index p = ds.p();
  Matrix e;
  if (cfg.propensity == PropensitySource::Logistic) {
    e = fit_logistic_propensity(ds.t, ds.x);
  } else {
    if (!ds.e) throw Error(ErrorCode::MissingPropensity, "known propensities requested but none supplied");
    e = *ds.e;
  }
  const WeightedOutcome wo = compute_weighted_outcome(ds.y, ds.t, e, c);

  AnalysisResult res;
  res.delta = cfg.delta.value_or(std::sqrt(static_cast<double>(p) / 2.0));
  if (!(res.delta >= 0.0)) throw Error(ErrorCode::InvalidArgument, "delta must be nonnegative");
  if (cfg.sigma2) {
    if (!(*cfg.sigma2 > 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma2 must be positive");
    res.sigma2 = *cfg.sigma2;
  } else {
    const VarianceEstimate est =
        estimate_error_variance(ds.y, ds.x, ds.t, cfg.variance_delta.value_or(res.delta));
    if (est.all_empty() || !(est.sigma2 > 0.0)) {
      throw Error(ErrorCode::AllNeighborhoodsEmpty, "variance estimator has no neighbours; supply sigma2");
    }
    res.sigma2 = est.sigma2;
    res.sigma2_estimated = true;
  }
  res.lambda = cfg.lambda ? *cfg.lambda : default_lambda(cfg.lambda_multiplier, std::sqrt(res.sigma2), n, p);

  res.design = make_design_transform(ds.x, cfg.intercept, cfg.standardize);
  const Matrix xfit = res.design.apply(ds.x);
  // Centered columns are orthogonal to the constant, so the intercept
  // decouples from the penalized coefficients.
  res.intercept = cfg.intercept ? wo.wy.mean() : 0.0;
  res.fit = solve_ipw_lasso(xfit, wo.wy, res.lambda, cfg.lasso);
  if (res.fit.active.empty()) {
    res.status = AnalysisStatus::NoSelection;
    return res;
  }

  const ModelBasis basis(xfit, res.fit.active);
  const auto nbhd = build_all_neighborhoods(ds.x, ds.t, res.delta);
  const bool pooled_ok = cfg.surrogate == SurrogateMethod::Pooled && ds.arms() == 2 && c[1] != 0.0 &&
                         c[0] == -c[1];
  Surrogates sur;
  if (pooled_ok) {
    Vector beta_m(static_cast<Index>(basis.model.size()));
    for (size_t k = 0; k < basis.model.size(); ++k) beta_m[static_cast<Index>(k)] = res.fit.beta[basis.model[k]];
    const Vector effect = (basis.xm * beta_m).array() + res.intercept;
    sur = counterfactual_surrogates(ds.y, ds.x, ds.t, nbhd, SurrogateMethod::Pooled, Vector(effect / c[1]),
                                    cfg.intercept);
  } else {
    sur = counterfactual_surrogates(ds.y, ds.x, ds.t, nbhd, SurrogateMethod::Plain, std::nullopt, cfg.intercept);
  }
  res.surrogate = sur.method;
  res.surrogate_fallbacks = sur.fallbacks;

  for (size_t k = 0; k < basis.model.size(); ++k) {
    InferenceRow row;
    row.variable = basis.model[k];
    if (!ds.covariate_names.empty()) row.name = ds.covariate_names[static_cast<size_t>(row.variable)];
    try {
      // Direction for the coefficient on the original column scale.
      row.eta = eta_vector(basis, row.variable) / res.design.scale[row.variable];
      const Decomposition dec = decompose(wo.w, wo.wy, row.eta);
      row.stat = dec.stat;
      row.zeta = zeta(row.eta, wo.w, res.sigma2);
      row.tau = tau(row.eta, sur.ystar, ds.t, e, c);
      row.rho = rho(row.zeta, row.eta, res.sigma2, sur.donors, e, c);
      row.estimate = row.stat - row.tau;
      row.region = build_region(basis, res.lambda, res.fit.signs, dec, cfg.use_union, cfg.union_cap,
                                row.union_region);
      row.selective = selective_interval(row.stat, row.tau, row.rho, row.region, cfg.alpha);
      row.naive = naive_interval(row.stat, row.tau, row.zeta, row.rho, cfg.alpha, cfg.naive_center,
                                 cfg.naive_variance);
      row.significant = row.selective.lower > 0.0 || row.selective.upper < 0.0;
      row.naive_significant = row.naive.lo > 0.0 || row.naive.hi < 0.0;
      row.pivot_at_zero = pivot(settle_into(row.region, row.stat), row.tau, row.rho, row.region);
    } catch (const Error& err) {
      row.error = err.code();
      row.error_message = err.what();
    }
    res.rows.push_back(std::move(row));
  }
  return res;
}

}  // namespace siprop
