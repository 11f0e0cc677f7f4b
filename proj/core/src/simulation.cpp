#include "siprop/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <random>
#include <thread>

namespace siprop {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

double logistic(double v) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); }

// Runs body(i) for i in [begin, end) on a pool of workers; each index is
// processed exactly once and results are written by index.
template <typename Body>
void parallel_for(Index begin, Index end, unsigned threads, Body body) {
  const Index count = end - begin;
  if (count <= 0) return;
  const unsigned workers = static_cast<unsigned>(std::min<Index>(std::max(1u, threads), count));
  if (workers == 1) {
    for (Index i = begin; i < end; ++i) body(i);
    return;
  }
  std::atomic<Index> next{begin};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (Index i = next.fetch_add(1); i < end; i = next.fetch_add(1)) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

bool contains(double lo, double hi, double v) { return lo <= v && v <= hi; }

}  // namespace

unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("SIPROP_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::string to_string(CovariateLaw v) { return v == CovariateLaw::Uniform01 ? "uniform" : "bernoulli"; }
std::string to_string(NuisanceShape v) {
  return v == NuisanceShape::F1 ? "F1" : (v == NuisanceShape::F2 ? "F2" : "F3");
}
std::string to_string(PropensityShape v) { return v == PropensityShape::E1 ? "E1" : "E2"; }
std::string to_string(EffectShape v) { return v == EffectShape::M1 ? "M1" : "M2"; }

double preset_delta(const ScenarioConfig& cfg) {
  const double p = static_cast<double>(cfg.p);
  if (cfg.law == CovariateLaw::Uniform01) return std::sqrt(p / 6.0);
  return cfg.p == 5 ? 0.0 : std::sqrt(p / 2.0);
}

double preset_lambda_multiplier(const ScenarioConfig& cfg) {
  if (cfg.p != 5) return 2.0;
  if (cfg.mu == EffectShape::M2) return 5.0;
  return cfg.f == NuisanceShape::F1 ? 1.0 : 2.0;
}

double scenario_lambda(const ScenarioConfig& cfg) {
  return default_lambda(cfg.lambda_multiplier.value_or(preset_lambda_multiplier(cfg)), std::sqrt(cfg.sigma2),
                        cfg.n, cfg.p);
}

double scenario_delta(const ScenarioConfig& cfg) { return cfg.delta.value_or(preset_delta(cfg)); }

AnalysisConfig scenario_analysis_config(const ScenarioConfig& cfg) {
  AnalysisConfig a = cfg.analysis;
  a.lambda = scenario_lambda(cfg);
  a.sigma2 = cfg.sigma2;
  a.delta = scenario_delta(cfg);
  a.propensity = cfg.estimate_propensity ? PropensitySource::Logistic : PropensitySource::Known;
  return a;
}

double nuisance_value(NuisanceShape shape, const Eigen::Ref<const Vector>& x) {
  constexpr double pi = std::numbers::pi;
  switch (shape) {
    case NuisanceShape::F1:
      return 0.0;
    case NuisanceShape::F2:
      return 3.0 * x[0] + x[1] + x[2] + x[3] + x[4] - 3.5;
    case NuisanceShape::F3:
      return x[0] + 0.5 * x[1] + 0.5 * x[2] + pi * std::sin(pi * x[3]) / 32.0 + pi * std::sin(pi * x[4]) / 32.0 -
             1.125;
  }
  return 0.0;
}

double propensity_value(PropensityShape shape, const Eigen::Ref<const Vector>& x) {
  if (shape == PropensityShape::E1) return 0.5;
  return logistic(x[0] + 0.5 * x[1] + 0.5 * x[2] + 0.5 * x[3] + 0.5 * x[4] - 1.5);
}

double effect_value(EffectShape shape, const Eigen::Ref<const Vector>& x) {
  if (shape == EffectShape::M1) return 0.0;
  return 3.0 * x[0] + x[1] + x[2] + x[3] + x[4] - 3.5;
}

Vector Truth::outcome_mean(const Matrix& t) const { return t.col(1).cwiseProduct(mu) + f; }

double Truth::kappa(const Vector& eta, const Vector& w, const Matrix& t) const {
  return eta.dot(w.cwiseProduct(outcome_mean(t)));
}

std::uint64_t replicate_seed(std::uint64_t base, std::uint64_t index) {
  return splitmix64(splitmix64(base) ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
}

std::pair<Dataset, Truth> generate_dataset(const ScenarioConfig& cfg, std::uint64_t seed) {
  if (cfg.p < 5) throw Error(ErrorCode::InvalidArgument, "simulation designs need p >= 5");
  if (cfg.n < 2) throw Error(ErrorCode::InvalidArgument, "simulation designs need n >= 2");
  if (!(cfg.sigma2 >= 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma2 must be nonnegative");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  const double sigma = std::sqrt(cfg.sigma2);

  Dataset ds;
  Truth truth;
  ds.x.resize(cfg.n, cfg.p);
  for (Index i = 0; i < cfg.n; ++i) {
    for (Index j = 0; j < cfg.p; ++j) {
      const double u = unif(rng);
      ds.x(i, j) = cfg.law == CovariateLaw::Uniform01 ? u : (u < 0.5 ? 1.0 : 0.0);
    }
  }
  truth.mu.resize(cfg.n);
  truth.f.resize(cfg.n);
  truth.e.resize(cfg.n);
  std::vector<int> labels(static_cast<size_t>(cfg.n));
  ds.y.resize(cfg.n);
  for (Index i = 0; i < cfg.n; ++i) {
    const Vector xi = ds.x.row(i).transpose();
    truth.mu[i] = effect_value(cfg.mu, xi);
    truth.f[i] = nuisance_value(cfg.f, xi);
    truth.e[i] = propensity_value(cfg.e, xi);
    const int treated = unif(rng) < truth.e[i] ? 1 : 0;
    labels[static_cast<size_t>(i)] = treated;
    ds.y[i] = treated * truth.mu[i] + truth.f[i] + sigma * noise(rng);
  }
  ds.t = one_hot(labels, 2);
  Matrix e(cfg.n, 2);
  e.col(0) = Vector::Ones(cfg.n) - truth.e;
  e.col(1) = truth.e;
  ds.e = e;
  ds.covariate_names.reserve(static_cast<size_t>(cfg.p));
  for (Index j = 0; j < cfg.p; ++j) ds.covariate_names.push_back("x" + std::to_string(j + 1));
  return {std::move(ds), std::move(truth)};
}

Vector projected_true_coefficients(const Matrix& x, const IndexList& model, const Truth& truth,
                                   const Contrast& c) {
  if (c.size() != 2) throw Error(ErrorCode::InvalidContrast, "simulation truth is defined for two arms");
  // Arm means are f (arm 0) and mu + f (arm 1).
  const Vector effect = c[0] * truth.f + c[1] * (truth.mu + truth.f);
  const ModelBasis basis(x, model);
  return basis.gram_inv * (basis.xm.transpose() * effect);
}

ReplicateRecord run_replicate(const ScenarioConfig& cfg, std::uint64_t seed, Index index) {
  ReplicateRecord rec;
  rec.index = index;
  rec.seed = seed;
  try {
    auto [ds, truth] = generate_dataset(cfg, seed);
    const Contrast c = Contrast::difference();
    const AnalysisConfig acfg = scenario_analysis_config(cfg);
    const AnalysisResult res = analyze(ds, c, acfg);
    rec.lambda = res.lambda;
    rec.model_size = static_cast<Index>(res.fit.active.size());
    if (res.status == AnalysisStatus::NoSelection) return rec;
    const Vector effect = c[0] * truth.f + c[1] * (truth.mu + truth.f);
    const double scale = 1.0 + effect.cwiseAbs().maxCoeff();
    for (const auto& row : res.rows) {
      VariableRecord v;
      v.variable = row.variable;
      v.error = row.error;
      // The estimand is the projection of the effect along the same contrast
      // vector that defines the reported coefficient.
      if (row.eta.size() == ds.n()) {
        v.truth = row.eta.dot(effect);
        v.truth_nonzero = std::abs(v.truth) > 1e-8 * scale;
      }
      if (!row.error) {
        v.selective = row.selective;
        v.naive = row.naive;
        v.si_covers = contains(row.selective.lower, row.selective.upper, v.truth);
        v.naive_covers = contains(row.naive.lo, row.naive.hi, v.truth);
        v.si_excludes_zero = row.significant;
        v.naive_excludes_zero = row.naive_significant;
      }
      rec.variables.push_back(v);
    }
  } catch (const Error& err) {
    rec.error = err.code();
    rec.error_message = err.what();
    rec.variables.clear();
  }
  return rec;
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  s.count = static_cast<Index>(values.size());
  if (values.empty()) return s;
  double acc = 0.0;
  for (double v : values) acc += v;
  s.mean = acc / static_cast<double>(values.size());
  if (values.size() >= 2) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

MetricsReport aggregate(const std::vector<ReplicateRecord>& records, Index p) {
  MetricsReport rep;
  rep.replications = static_cast<Index>(records.size());
  std::vector<double> sizes, si_fcr, nv_fcr, si_tp, si_fp, nv_tp, nv_fp;
  std::vector<std::vector<double>> si_ex(static_cast<size_t>(p)), nv_ex(static_cast<size_t>(p));
  for (const auto& rec : records) {
    if (rec.error) {
      ++rep.failed_replicates;
      continue;
    }
    sizes.push_back(static_cast<double>(rec.model_size));
    double si_tp_r = 0, si_fp_r = 0, nv_tp_r = 0, nv_fp_r = 0;
    if (!rec.variables.empty()) {
      ++rep.contributing;
      double si_miss = 0, nv_miss = 0;
      for (const auto& v : rec.variables) {
        // A variable whose inference failed cannot be credited with coverage.
        if (v.error) ++rep.failed_variables;
        si_miss += v.si_covers ? 0.0 : 1.0;
        nv_miss += v.naive_covers ? 0.0 : 1.0;
        if (v.si_excludes_zero) (v.truth_nonzero ? si_tp_r : si_fp_r) += 1.0;
        if (v.naive_excludes_zero) (v.truth_nonzero ? nv_tp_r : nv_fp_r) += 1.0;
        if (!v.error && v.variable < p) {
          si_ex[static_cast<size_t>(v.variable)].push_back(v.si_excludes_zero ? 1.0 : 0.0);
          nv_ex[static_cast<size_t>(v.variable)].push_back(v.naive_excludes_zero ? 1.0 : 0.0);
        }
      }
      const double m = static_cast<double>(rec.variables.size());
      si_fcr.push_back(si_miss / m);
      nv_fcr.push_back(nv_miss / m);
    }
    si_tp.push_back(si_tp_r);
    si_fp.push_back(si_fp_r);
    nv_tp.push_back(nv_tp_r);
    nv_fp.push_back(nv_fp_r);
  }
  rep.model_size = summarize(sizes);
  rep.si.fcr = summarize(si_fcr);
  rep.naive.fcr = summarize(nv_fcr);
  rep.si.tp = summarize(si_tp);
  rep.si.fp = summarize(si_fp);
  rep.naive.tp = summarize(nv_tp);
  rep.naive.fp = summarize(nv_fp);
  for (Index j = 0; j < p; ++j) {
    rep.si.excludes_zero.push_back(summarize(si_ex[static_cast<size_t>(j)]));
    rep.naive.excludes_zero.push_back(summarize(nv_ex[static_cast<size_t>(j)]));
  }
  return rep;
}

MonteCarloResult monte_carlo(const ScenarioConfig& cfg, unsigned threads) {
  if (cfg.replications < 1) throw Error(ErrorCode::InvalidArgument, "need at least one replication");
  MonteCarloResult out;
  out.records.resize(static_cast<size_t>(cfg.replications));
  parallel_for(0, cfg.replications, resolve_threads(threads), [&](Index i) {
    out.records[static_cast<size_t>(i)] =
        run_replicate(cfg, replicate_seed(cfg.seed, static_cast<std::uint64_t>(i)), i);
  });
  out.metrics = aggregate(out.records, cfg.p);
  return out;
}

std::optional<double> oracle_pivot(const ScenarioConfig& cfg, std::uint64_t seed, double center_shift_sd) {
  auto [ds, truth] = generate_dataset(cfg, seed);
  const Contrast c = Contrast::difference();
  const AnalysisConfig acfg = scenario_analysis_config(cfg);
  AnalysisResult res;
  try {
    res = analyze(ds, c, acfg);
  } catch (const Error&) {
    return std::nullopt;
  }
  if (res.status == AnalysisStatus::NoSelection) return std::nullopt;
  const WeightedOutcome wo = compute_weighted_outcome(ds, c);
  for (const auto& row : res.rows) {
    if (row.error) continue;
    const double center = truth.kappa(row.eta, wo.w, ds.t) + center_shift_sd * std::sqrt(row.zeta);
    try {
      return pivot(row.stat, center, row.zeta, row.region);
    } catch (const Error&) {
      return std::nullopt;
    }
  }
  return std::nullopt;
}

PivotCheckResult pivot_check(const PivotCheckConfig& cfg, unsigned threads) {
  if (cfg.pivots < 1) throw Error(ErrorCode::InvalidArgument, "need at least one pivot");
  if (cfg.bins < 1) throw Error(ErrorCode::InvalidArgument, "need at least one histogram bin");
  const unsigned workers = resolve_threads(threads);
  PivotCheckResult out;
  Index next = 0;
  // Batches are evaluated in parallel but consumed strictly in replicate
  // order, so the collected pivots do not depend on the worker count.
  while (static_cast<Index>(out.pivots.size()) < cfg.pivots) {
    if (next >= cfg.max_replicates) {
      throw Error(ErrorCode::NoSelection, "replicate budget exhausted before collecting enough pivots");
    }
    const Index want = cfg.pivots - static_cast<Index>(out.pivots.size());
    const Index batch = std::min<Index>(std::max<Index>(want + want / 4 + 8, 16), cfg.max_replicates - next);
    std::vector<std::optional<double>> got(static_cast<size_t>(batch));
    parallel_for(0, batch, workers, [&](Index k) {
      got[static_cast<size_t>(k)] =
          oracle_pivot(cfg.scenario, replicate_seed(cfg.scenario.seed, static_cast<std::uint64_t>(next + k)),
                       cfg.center_shift_sd);
    });
    for (Index k = 0; k < batch && static_cast<Index>(out.pivots.size()) < cfg.pivots; ++k) {
      out.replicates_used = next + k + 1;
      if (got[static_cast<size_t>(k)]) out.pivots.push_back(*got[static_cast<size_t>(k)]);
    }
    next += batch;
  }
  out.ks_statistic = ks_statistic_uniform(out.pivots);
  out.ks_pvalue = ks_pvalue(out.ks_statistic, static_cast<Index>(out.pivots.size()));
  out.histogram.assign(static_cast<size_t>(cfg.bins), 0);
  for (double v : out.pivots) {
    const int b = std::clamp(static_cast<int>(v * cfg.bins), 0, cfg.bins - 1);
    ++out.histogram[static_cast<size_t>(b)];
  }
  return out;
}

double ks_statistic_uniform(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  double d = 0.0;
  for (size_t i = 0; i < values.size(); ++i) {
    const double v = std::clamp(values[i], 0.0, 1.0);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - v, v - static_cast<double>(i) / n});
  }
  return d;
}

double ks_pvalue(double statistic, Index n) {
  if (n < 1) return 1.0;
  const double rn = std::sqrt(static_cast<double>(n));
  const double lam = (rn + 0.12 + 0.11 / rn) * statistic;
  if (lam < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lam * lam);
    sum += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

}  // namespace siprop
