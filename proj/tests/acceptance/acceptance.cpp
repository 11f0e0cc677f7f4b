// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//
//   siprop_acceptance [--only 1,3,...] [--threads N] [--alt-threads M]
//
// Criterion 9 reruns criteria 2-5 with --alt-threads workers and compares the
// serialized outputs with the first pass byte for byte.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli/csv.hpp"
#include "cli/format.hpp"
#include "cli/report.hpp"
#include "oracles.hpp"
#include "siprop/geometry.hpp"
#include "siprop/inference.hpp"
#include "siprop/lasso.hpp"
#include "siprop/nuisance.hpp"
#include "siprop/simulation.hpp"
#include "siprop/truncnorm.hpp"

using namespace siprop;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string num(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::string interval_note(const char* what, double v, double lo, double hi) {
  return std::string(what) + "=" + num(v) + " in [" + num(lo) + "," + num(hi) + "]";
}

bool within(double v, double lo, double hi) { return v >= lo && v <= hi; }

// Serialized Monte Carlo output, compared across thread counts.
std::string serialize(const std::string& name, const ScenarioConfig& cfg, const MonteCarloResult& mc) {
  const cli::NamedScenario named{name, cfg};
  std::ostringstream out;
  cli::write_metrics_tsv(out, {{named, mc.metrics}});
  out << cli::metrics_json({{named, mc.metrics}}).dump() << '\n';
  cli::write_records_jsonl(out, name, mc.records);
  return out.str();
}

std::string serialize(const std::string& name, const PivotCheckConfig& cfg, const PivotCheckResult& res) {
  std::ostringstream out;
  out << cli::pivot_json({name, cfg.scenario}, cfg, res).dump() << '\n';
  for (double v : res.pivots) out << cli::fmt(v) << '\n';
  return out.str();
}

class Suite {
 public:
  Suite(unsigned threads, unsigned alt_threads) : threads_(threads), alt_threads_(alt_threads) {}

  Verdict selection_event() {
    std::mt19937_64 rng(1001);
    std::uniform_int_distribution<int> pick_n(20, 100);
    std::uniform_int_distribution<int> pick_p(2, 8);
    int membership_violations = 0;
    int rival_violations = 0;
    int grid_points = 0;
    int grid_selected = 0;
    int grid_disagreements = 0;
    int near_endpoint = 0;
    int nonempty = 0;
    for (int rep = 0; rep < 500; ++rep) {
      const auto inst = oracle::random_instance(rng, pick_n(rng), pick_p(rng));
      const LassoFit fit = solve_ipw_lasso(inst.x, inst.wy, inst.lambda);
      if (!event_membership(selection_polyhedron(inst.x, fit.active, fit.signs, inst.lambda), inst.wy, 1e-9)) {
        ++membership_violations;
      }
      // Neighbouring (M, s) pairs must not contain the data.
      const Index p = inst.x.cols();
      const Index m = static_cast<Index>(fit.active.size());
      auto rival = [&](const IndexList& model, const Vector& signs) {
        if (event_membership(selection_polyhedron(inst.x, model, signs, inst.lambda), inst.wy, 0.0)) {
          ++rival_violations;
        }
      };
      for (Index k = 0; k < m; ++k) {
        Vector flipped = fit.signs;
        flipped[k] = -flipped[k];
        rival(fit.active, flipped);
        IndexList fewer;
        Vector fewer_signs(m - 1);
        for (Index l = 0; l < m; ++l) {
          if (l == k) continue;
          fewer_signs[static_cast<Index>(fewer.size())] = fit.signs[l];
          fewer.push_back(fit.active[static_cast<size_t>(l)]);
        }
        rival(fewer, fewer_signs);
      }
      for (Index j : complement_of(fit.active, p)) {
        for (double s : {-1.0, 1.0}) {
          IndexList more = fit.active;
          more.push_back(j);
          std::vector<std::pair<Index, double>> pairs;
          for (Index k = 0; k < m; ++k) pairs.emplace_back(fit.active[static_cast<size_t>(k)], fit.signs[k]);
          pairs.emplace_back(j, s);
          std::sort(pairs.begin(), pairs.end());
          Vector more_signs(m + 1);
          for (size_t k = 0; k < pairs.size(); ++k) {
            more[k] = pairs[k].first;
            more_signs[static_cast<Index>(k)] = pairs[k].second;
          }
          rival(more, more_signs);
        }
      }
      if (fit.active.empty()) continue;
      ++nonempty;
      const ModelBasis basis(inst.x, fit.active);
      const Index j = fit.active[static_cast<size_t>(rep) % fit.active.size()];
      const Decomposition dec = decompose(inst.w, inst.wy, eta_vector(basis, j));
      const TruncationRegion region = sign_union_region(basis, inst.lambda, dec);
      const double span = 3.0 * (1.0 + std::abs(dec.stat));
      const auto check = oracle::grid_region_check(inst.x, fit.active, inst.lambda, dec.z, dec.d, region,
                                                   dec.stat - span, dec.stat + span, 2000, 1e-6);
      grid_points += check.points;
      grid_selected += check.selected;
      grid_disagreements += check.disagreements;
      near_endpoint += check.near_endpoint;
    }
    Verdict v;
    v.pass = membership_violations == 0 && rival_violations == 0 && grid_disagreements == 0;
    v.detail = "500 instances (" + std::to_string(nonempty) + " nonempty): membership violations=" +
               std::to_string(membership_violations) + ", rival memberships=" + std::to_string(rival_violations) +
               ", grid disagreements=" + std::to_string(grid_disagreements) + "/" + std::to_string(grid_points) +
               " (model reselected at " + std::to_string(grid_selected) +
               "; within 1e-6 of an endpoint: " + std::to_string(near_endpoint) + ")";
    return v;
  }

  static PivotCheckConfig pivot_config(double shift) {
    PivotCheckConfig pc;
    pc.scenario.n = 200;
    pc.scenario.p = 5;
    pc.scenario.law = CovariateLaw::Uniform01;
    pc.scenario.f = NuisanceShape::F3;
    pc.scenario.e = PropensityShape::E2;
    pc.scenario.mu = EffectShape::M2;
    pc.scenario.lambda_multiplier = 2.0;
    pc.scenario.seed = 2;
    pc.pivots = 2000;
    pc.center_shift_sd = shift;
    return pc;
  }

  Verdict pivot_uniformity(unsigned threads) {
    const PivotCheckConfig pc = pivot_config(0.0);
    const PivotCheckResult res = pivot_check(pc, threads);
    const PivotCheckConfig bad = pivot_config(1.0);
    const PivotCheckResult neg = pivot_check(bad, threads);
    record(threads, serialize("pivot", pc, res) + serialize("pivot-shifted", bad, neg));
    constexpr double kCritical = 0.0363;
    const bool uniform = res.pivots.size() == 2000 && res.ks_statistic < kCritical;
    const bool rejected = neg.ks_statistic > kCritical || neg.ks_pvalue < 0.01;
    Verdict v;
    v.pass = uniform && rejected;
    v.detail = "KS=" + num(res.ks_statistic) + " (< " + num(kCritical) + ", p=" + num(res.ks_pvalue) + ", " +
               std::to_string(res.pivots.size()) + " pivots from " + std::to_string(res.replicates_used) +
               " replicates); center shifted by 1 sd: KS=" + num(neg.ks_statistic) +
               " p=" + num(neg.ks_pvalue) + (rejected ? " rejected" : " NOT rejected");
    return v;
  }

  static ScenarioConfig table1(NuisanceShape f, double k) {
    ScenarioConfig cfg;
    cfg.law = CovariateLaw::BernoulliHalf;
    cfg.f = f;
    cfg.e = PropensityShape::E1;
    cfg.mu = EffectShape::M1;
    cfg.lambda_multiplier = k;
    cfg.delta = 0.0;
    cfg.replications = 300;
    cfg.seed = 3;
    return cfg;
  }

  Verdict fcr_control(unsigned threads) {
    const ScenarioConfig a = table1(NuisanceShape::F1, 1.0);
    const ScenarioConfig b = table1(NuisanceShape::F2, 2.0);
    const MonteCarloResult ra = monte_carlo(a, threads);
    const MonteCarloResult rb = monte_carlo(b, threads);
    record(threads, serialize("fcr-f1", a, ra) + serialize("fcr-f2", b, rb));
    const double si = ra.metrics.si.fcr.mean;
    const double naive = rb.metrics.naive.fcr.mean;
    Verdict v;
    v.pass = within(si, 0.005, 0.095) && naive >= 0.90;
    v.detail = interval_note("SI FCR", si, 0.005, 0.095) + " (|M|=" + num(ra.metrics.model_size.mean) + ", " +
               std::to_string(ra.metrics.contributing) + "/300 contributing); F2 naive FCR=" + num(naive) +
               " (>= 0.9)";
    return v;
  }

  Verdict detection(unsigned threads) {
    ScenarioConfig cfg;
    cfg.law = CovariateLaw::Uniform01;
    cfg.f = NuisanceShape::F1;
    cfg.e = PropensityShape::E1;
    cfg.mu = EffectShape::M2;
    cfg.lambda_multiplier = 5.0;
    cfg.delta = std::sqrt(5.0 / 6.0);
    cfg.replications = 300;
    cfg.seed = 4;
    const MonteCarloResult mc = monte_carlo(cfg, threads);
    record(threads, serialize("detection", cfg, mc));
    bool all = true;
    std::string rates;
    for (size_t j = 0; j < 5; ++j) {
      const Summary& s = mc.metrics.si.excludes_zero[j];
      all = all && s.count > 0 && s.mean >= 0.95;
      rates += (j ? "," : "") + num(s.mean);
    }
    const double fcr = mc.metrics.si.fcr.mean;
    Verdict v;
    v.pass = all && within(fcr, 0.01, 0.11);
    v.detail = "SI excludes 0: " + rates + " (each >= 0.95); " + interval_note("SI FCR", fcr, 0.01, 0.11) +
               "; |M|=" + num(mc.metrics.model_size.mean);
    return v;
  }

  Verdict screening(unsigned threads) {
    ScenarioConfig cfg;
    cfg.p = 25;
    cfg.law = CovariateLaw::Uniform01;
    cfg.f = NuisanceShape::F3;
    cfg.e = PropensityShape::E2;
    cfg.mu = EffectShape::M2;
    cfg.lambda_multiplier = 2.0;
    cfg.delta = std::sqrt(25.0 / 6.0);
    cfg.replications = 200;
    cfg.seed = 5;
    const MonteCarloResult mc = monte_carlo(cfg, threads);
    record(threads, serialize("screening", cfg, mc));
    const auto& si = mc.metrics.si;
    const double naive = mc.metrics.naive.fcr.mean;
    Verdict v;
    v.pass = si.tp.mean >= 4.7 && si.fp.mean <= 0.4 && within(si.fcr.mean, 0.01, 0.11) && naive >= 0.5;
    v.detail = "SI TP=" + num(si.tp.mean) + " (>= 4.7), FP=" + num(si.fp.mean) + " (<= 0.4), " +
               interval_note("FCR", si.fcr.mean, 0.01, 0.11) + "; naive FCR=" + num(naive) + " (>= 0.5); |M|=" +
               num(mc.metrics.model_size.mean) + ", failed variables=" + std::to_string(mc.metrics.failed_variables);
    return v;
  }

  Verdict variance_estimator() {
    ScenarioConfig cfg;
    cfg.n = 2000;
    cfg.law = CovariateLaw::BernoulliHalf;
    cfg.f = NuisanceShape::F3;
    const double delta = std::sqrt(5.0 / 2.0);
    double total = 0.0;
    int used = 0;
    for (std::uint64_t r = 0; r < 100; ++r) {
      const auto [ds, truth] = generate_dataset(cfg, replicate_seed(6, r));
      const VarianceEstimate est = estimate_error_variance(ds.y, ds.x, ds.t, delta);
      if (est.all_empty()) continue;
      total += est.sigma2;
      ++used;
    }
    const double mean = used ? total / used : std::nan("");
    const double rel = std::abs(mean - 0.0625) / 0.0625;
    Verdict v;
    v.pass = used == 100 && rel < 0.10;
    v.detail = "mean sigma2_hat=" + num(mean) + " vs 0.0625, relative error " + num(rel) + " (< 0.10) over " +
               std::to_string(used) + " replicates";
    return v;
  }

  Verdict numerical_core() {
    std::mt19937_64 rng(7007);
    std::uniform_real_distribution<double> unit;
    double cdf_err = 0.0;
    double inv_err = 0.0;
    for (int rep = 0; rep < 1000; ++rep) {
      const double mu = -5.0 + 10.0 * unit(rng);
      const double sd = 0.1 + 3.0 * unit(rng);
      const double x = mu + sd * (-6.0 + 12.0 * unit(rng));
      const TruncationRegion region = oracle::random_region(rng, mu, sd, x);
      const double got = tn_union_cdf(x, mu, sd * sd, region);
      cdf_err = std::max(cdf_err, std::abs(got - oracle::tn_cdf(x, mu, sd * sd, region)));
      if (got > 1e-6 && got < 1.0 - 1e-6) {
        inv_err = std::max(inv_err, std::abs(invert_mean(x, sd * sd, region, got) - mu) / std::max(1.0, sd));
      }
    }
    std::uniform_int_distribution<int> pick_n(10, 60);
    std::uniform_int_distribution<int> pick_p(1, 6);
    double lasso_err = 0.0;
    int support_mismatch = 0;
    int oracle_missing = 0;
    for (int rep = 0; rep < 300; ++rep) {
      const auto inst = oracle::random_instance(rng, pick_n(rng), pick_p(rng));
      const auto expected = oracle::exhaustive_lasso(inst.x, inst.wy, inst.lambda);
      if (!expected) {
        ++oracle_missing;
        continue;
      }
      const LassoFit fit = solve_ipw_lasso(inst.x, inst.wy, inst.lambda);
      const double scale = 1.0 + expected->lpNorm<Eigen::Infinity>();
      lasso_err = std::max(lasso_err, (fit.beta - *expected).lpNorm<Eigen::Infinity>() / scale);
      for (Index j = 0; j < fit.beta.size(); ++j) support_mismatch += (fit.beta[j] == 0.0) != ((*expected)[j] == 0.0);
    }
    double naive_gap = 0.0;
    for (int rep = 0; rep < 300; ++rep) {
      const double stat = -10.0 + 20.0 * unit(rng);
      const double tau = -2.0 + 4.0 * unit(rng);
      const double rho = 0.01 + 5.0 * unit(rng);
      const double alpha = 0.01 + 0.3 * unit(rng);
      const SelectiveInterval si = selective_interval(stat, tau, rho, TruncationRegion::whole_line(), alpha);
      const Interval nv = naive_interval(stat, tau, rho, alpha);
      naive_gap = std::max({naive_gap, std::abs(si.lower - nv.lo) / (1.0 + std::abs(nv.lo)),
                            std::abs(si.upper - nv.hi) / (1.0 + std::abs(nv.hi))});
    }
    Verdict v;
    v.pass = cdf_err < 1e-9 && inv_err < 1e-8 && lasso_err < 1e-6 && support_mismatch == 0 && oracle_missing == 0 &&
             naive_gap < 1e-9;
    v.detail = "CDF vs quadrature " + num(cdf_err, 3) + " (< 1e-9); invert round trip " + num(inv_err, 3) +
               " (< 1e-8); Lasso vs exhaustive " + num(lasso_err, 3) + " (< 1e-6, support mismatches " +
               std::to_string(support_mismatch + oracle_missing) + "); untruncated SI vs naive " +
               num(naive_gap, 3) + " (< 1e-9)";
    return v;
  }

  Verdict real_data() {
    const Dataset ds = cli::ingest_csv(std::string(SIPROP_TEST_DATA) + "/lalonde.csv");
    AnalysisConfig cfg;
    cfg.propensity = PropensitySource::Logistic;
    const AnalysisResult res = analyze(ds, Contrast::difference(), cfg);
    std::set<std::string> selected;
    std::map<std::string, bool> significant;
    std::string table;
    for (const auto& row : res.rows) {
      selected.insert(row.name);
      significant[row.name] = !row.error && row.significant;
      table += " " + row.name + "=" + num(row.estimate, 5) + "[" + num(row.selective.lower, 4) + "," +
               num(row.selective.upper, 4) + "]";
    }
    const std::set<std::string> expected = {"age", "educ", "re74", "re75", "u74"};
    const bool model_ok = selected == expected;
    const bool sig_ok = model_ok && significant["educ"] && significant["u74"] && !significant["age"] &&
                        !significant["re75"];
    Verdict v;
    v.pass = model_ok && sig_ok;
    v.detail = std::string("model ") + (model_ok ? "matches" : "differs") + ", significance pattern " +
               (sig_ok ? "matches" : "differs") + "; sigma2_hat=" + num(res.sigma2) + ", lambda=" +
               num(res.lambda) + ";" + table;
    return v;
  }

  Verdict determinism() {
    std::vector<std::string> first = std::move(outputs_[threads_]);
    outputs_.clear();
    pivot_uniformity(alt_threads_);
    fcr_control(alt_threads_);
    detection(alt_threads_);
    screening(alt_threads_);
    const std::vector<std::string>& second = outputs_[alt_threads_];
    size_t bytes = 0;
    int differing = 0;
    for (size_t k = 0; k < std::max(first.size(), second.size()); ++k) {
      if (k >= first.size() || k >= second.size() || first[k] != second[k]) ++differing;
      if (k < first.size()) bytes += first[k].size();
    }
    Verdict v;
    v.pass = first.size() == 4 && second.size() == 4 && differing == 0;
    v.detail = "criteria 2-5 with " + std::to_string(threads_) + " vs " + std::to_string(alt_threads_) +
               " workers: " + std::to_string(bytes) + " bytes compared, " + std::to_string(differing) +
               " of 4 outputs differ";
    return v;
  }

  void ensure_first_pass(const std::set<int>& ran) {
    if (!ran.count(2)) pivot_uniformity(threads_);
    if (!ran.count(3)) fcr_control(threads_);
    if (!ran.count(4)) detection(threads_);
    if (!ran.count(5)) screening(threads_);
  }

  unsigned threads() const { return threads_; }

 private:
  void record(unsigned threads, std::string text) { outputs_[threads].push_back(std::move(text)); }

  unsigned threads_;
  unsigned alt_threads_;
  std::map<unsigned, std::vector<std::string>> outputs_;
};

std::set<int> parse_list(const std::string& text) {
  std::set<int> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) out.insert(std::stoi(item));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  unsigned threads = 1;
  unsigned alt_threads = 3;
  for (int a = 1; a < argc; ++a) {
    const std::string arg = argv[a];
    if (arg == "--only" && a + 1 < argc) {
      only = parse_list(argv[++a]);
    } else if (arg == "--threads" && a + 1 < argc) {
      threads = static_cast<unsigned>(std::stoul(argv[++a]));
    } else if (arg == "--alt-threads" && a + 1 < argc) {
      alt_threads = static_cast<unsigned>(std::stoul(argv[++a]));
    } else {
      std::fprintf(stderr, "usage: %s [--only 1,2,...] [--threads N] [--alt-threads M]\n", argv[0]);
      return 2;
    }
  }
  if (threads == alt_threads) {
    std::fprintf(stderr, "--threads and --alt-threads must differ\n");
    return 2;
  }

  Suite suite(threads, alt_threads);
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"selection event equivalence", [&] { return suite.selection_event(); }},
      {"pivot uniformity", [&] { return suite.pivot_uniformity(suite.threads()); }},
      {"FCR control", [&] { return suite.fcr_control(suite.threads()); }},
      {"active-variable detection", [&] { return suite.detection(suite.threads()); }},
      {"p=25 screening", [&] { return suite.screening(suite.threads()); }},
      {"variance estimator", [&] { return suite.variance_estimator(); }},
      {"numerical core", [&] { return suite.numerical_core(); }},
      {"real-data workflow", [&] { return suite.real_data(); }},
      {"determinism across thread counts", [&] { return suite.determinism(); }},
  };

  int failures = 0;
  std::set<int> ran;
  for (size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!only.empty() && !only.count(id)) continue;
    if (id == 9) suite.ensure_first_pass(ran);
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[k].second();
    } catch (const std::exception& err) {
      v.pass = false;
      v.detail = std::string("exception: ") + err.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    ran.insert(id);
    failures += v.pass ? 0 : 1;
    std::printf("%s criterion %d (%s): %s [%.1fs]\n", v.pass ? "PASS" : "FAIL", id, criteria[k].first,
                v.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
