#include "cli/commands.hpp"

#include <CLI11.hpp>

#include <cerrno>
#include <charconv>
#include <cstring>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

#include "cli/csv.hpp"
#include "cli/format.hpp"
#include "cli/report.hpp"
#include "siprop/error.hpp"
#include "siprop/inference.hpp"
#include "siprop/simulation.hpp"

namespace siprop::cli {

namespace {

[[noreturn]] void usage(const std::string& what) { throw Error(ErrorCode::InvalidArgument, what); }

// Writes to the file at `path`, or to `fallback` when the path is empty.
void emit(const std::string& path, std::ostream& fallback, const std::function<void(std::ostream&)>& write) {
  if (path.empty()) {
    write(fallback);
    return;
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) usage("cannot open '" + path + "' for writing: " + std::strerror(errno));
  write(file);
  if (!file) usage("failed writing '" + path + "'");
}

double parse_double(const std::string& text, const std::string& what) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (text.empty() || ec != std::errc() || ptr != last) usage(what + ": '" + text + "' is not a number");
  return v;
}

Contrast parse_contrast(const std::string& text) {
  std::vector<double> coef;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) coef.push_back(parse_double(item, "--contrast"));
  if (coef.size() < 2) usage("--contrast needs at least two comma-separated coefficients");
  return Contrast(Eigen::Map<const Vector>(coef.data(), static_cast<Eigen::Index>(coef.size())));
}

struct ScenarioFlags {
  std::string law;
  std::string f;
  std::string e;
  std::string mu;
  std::optional<Index> n;
  std::optional<Index> p;
  std::optional<double> sigma2;
  std::optional<double> k;
  std::optional<double> delta;
  std::optional<std::uint64_t> seed;
  bool estimate_propensity = false;
  bool no_intercept = false;
  bool standardize = false;

  void add(CLI::App* app) {
    app->add_option("--law", law, "Covariate law")->check(CLI::IsMember({"uniform", "bernoulli"}));
    app->add_option("--f", f, "Nuisance shape")->check(CLI::IsMember({"F1", "F2", "F3"}));
    app->add_option("--e", e, "Propensity shape")->check(CLI::IsMember({"E1", "E2"}));
    app->add_option("--mu", mu, "Effect shape")->check(CLI::IsMember({"M1", "M2"}));
    app->add_option("--n", n, "Sample size");
    app->add_option("--p", p, "Number of covariates");
    app->add_option("--sigma2", sigma2, "Error variance");
    app->add_option("-k,--lambda-multiplier", k, "k in lambda = k sigma sqrt(n log p)");
    app->add_option("--delta", delta, "Neighbourhood radius");
    app->add_option("--seed", seed, "Base seed");
    app->add_flag("--estimate-propensity", estimate_propensity, "Fit a logistic propensity model");
    app->add_flag("--no-intercept", no_intercept, "Fit without an intercept");
    app->add_flag("--standardize", standardize, "Scale columns to unit sd before selection");
  }

  void apply(ScenarioConfig& c) const {
    if (!law.empty()) c.law = law == "uniform" ? CovariateLaw::Uniform01 : CovariateLaw::BernoulliHalf;
    if (!f.empty()) c.f = f == "F1" ? NuisanceShape::F1 : (f == "F2" ? NuisanceShape::F2 : NuisanceShape::F3);
    if (!e.empty()) c.e = e == "E1" ? PropensityShape::E1 : PropensityShape::E2;
    if (!mu.empty()) c.mu = mu == "M1" ? EffectShape::M1 : EffectShape::M2;
    if (n) c.n = *n;
    if (p) c.p = *p;
    if (sigma2) c.sigma2 = *sigma2;
    if (k) c.lambda_multiplier = *k;
    if (delta) c.delta = *delta;
    if (seed) c.seed = *seed;
    if (estimate_propensity) c.estimate_propensity = true;
    if (no_intercept) c.analysis.intercept = false;
    if (standardize) c.analysis.standardize = true;
  }
};

void check_scenario(const ScenarioConfig& c) {
  if (c.n < 2) usage("n must be at least 2");
  if (c.p < 5) usage("p must be at least 5");
  if (!(c.sigma2 > 0)) usage("sigma2 must be positive");
  if (c.lambda_multiplier && !(*c.lambda_multiplier > 0)) usage("lambda multiplier must be positive");
  if (c.delta && !(*c.delta >= 0)) usage("delta must be nonnegative");
}

struct AnalyzeFlags {
  std::string input;
  std::string output;
  std::string json;
  std::string outcome = "y";
  std::string treatment = "t";
  std::vector<std::string> filters;
  std::vector<std::string> ignore;
  double alpha = 0.05;
  std::optional<double> lambda;
  double lambda_multiplier = 1.0;
  std::optional<double> delta;
  std::optional<double> variance_delta;
  std::string sigma2 = "estimate";
  std::string propensity = "auto";
  std::string contrast;
  int union_cap = kDefaultUnionCap;
  bool no_union = false;
  bool no_intercept = false;
  bool standardize = false;
  std::string surrogate = "pooled";
  std::string naive_center = "raw";
  std::string naive_variance = "zeta";
};

int cmd_analyze(const AnalyzeFlags& a, std::ostream& out, std::ostream& err) {
  if (!(a.alpha > 0 && a.alpha < 1)) usage("--alpha must lie in (0, 1)");
  if (a.lambda && !(*a.lambda > 0)) usage("--lambda must be positive");
  if (!(a.lambda_multiplier > 0)) usage("--lambda-multiplier must be positive");
  if (a.delta && !(*a.delta >= 0)) usage("--delta must be nonnegative");
  if (a.variance_delta && !(*a.variance_delta > 0)) usage("--variance-delta must be positive");
  if (a.union_cap < 1) usage("--union-cap must be at least 1");

  CsvSchema schema;
  schema.outcome = a.outcome;
  schema.treatment = a.treatment;
  schema.ignore = a.ignore;
  for (const auto& f : a.filters) {
    const auto eq = f.find('=');
    if (eq == std::string::npos || eq == 0) usage("--filter expects column=value, got '" + f + "'");
    schema.filters.emplace_back(f.substr(0, eq), f.substr(eq + 1));
  }
  const Dataset ds = ingest_csv(a.input, schema);

  AnalysisConfig cfg;
  cfg.alpha = a.alpha;
  cfg.lambda = a.lambda;
  cfg.lambda_multiplier = a.lambda_multiplier;
  cfg.delta = a.delta;
  cfg.variance_delta = a.variance_delta;
  if (a.sigma2 != "estimate") {
    const double s2 = parse_double(a.sigma2, "--sigma2");
    if (!(s2 > 0)) usage("--sigma2 must be positive or 'estimate'");
    cfg.sigma2 = s2;
  }
  if (a.propensity == "logistic" || (a.propensity == "auto" && !ds.e)) {
    cfg.propensity = PropensitySource::Logistic;
  } else {
    cfg.propensity = PropensitySource::Known;
  }
  cfg.use_union = !a.no_union;
  cfg.union_cap = a.union_cap;
  cfg.intercept = !a.no_intercept;
  cfg.standardize = a.standardize;
  cfg.surrogate = a.surrogate == "plain" ? SurrogateMethod::Plain : SurrogateMethod::Pooled;
  cfg.naive_center = a.naive_center == "corrected" ? NaiveCenter::Corrected : NaiveCenter::Raw;
  cfg.naive_variance = a.naive_variance == "rho" ? NaiveVariance::Rho : NaiveVariance::Zeta;

  Contrast c = Contrast::difference();
  if (!a.contrast.empty()) {
    c = parse_contrast(a.contrast);
  } else if (ds.arms() != 2) {
    usage("data has " + std::to_string(ds.arms()) + " arms; pass --contrast");
  }

  const AnalysisResult result = analyze(ds, c, cfg);
  if (result.status == AnalysisStatus::NoSelection) err << "note: NoSelection, the Lasso selected no variables\n";
  emit(a.output, out, [&](std::ostream& os) { write_analysis_tsv(os, result); });
  if (!a.json.empty()) {
    emit(a.json, out, [&](std::ostream& os) { os << analysis_json(result, a.alpha).dump(2) << '\n'; });
  }
  return kOk;
}

struct SimulateFlags {
  ScenarioFlags scenario;
  std::string scenario_file;
  std::optional<Index> replications;
  unsigned threads = 0;
  std::string output;
  std::string json;
  std::string records;
};

int cmd_simulate(const SimulateFlags& s, std::ostream& out) {
  std::vector<NamedScenario> scenarios;
  if (!s.scenario_file.empty()) {
    std::ifstream in(s.scenario_file);
    if (!in) usage("cannot open scenario file '" + s.scenario_file + "'");
    Json doc;
    try {
      doc = Json::parse(in);
    } catch (const nlohmann::json::exception& ex) {
      usage("scenario file '" + s.scenario_file + "': " + ex.what());
    }
    scenarios = scenarios_from_json(doc);
  } else {
    scenarios.push_back({"", ScenarioConfig{}});
  }
  for (auto& sc : scenarios) {
    const bool unnamed = sc.name.empty() || sc.name == default_scenario_name(sc.config);
    s.scenario.apply(sc.config);
    if (s.replications) sc.config.replications = *s.replications;
    if (unnamed) sc.name = default_scenario_name(sc.config);
    check_scenario(sc.config);
    if (sc.config.replications < 1) usage("replications must be at least 1");
  }

  const unsigned threads = resolve_threads(s.threads);
  std::vector<ScenarioMetrics> runs;
  std::ofstream records;
  if (!s.records.empty()) {
    records.open(s.records, std::ios::binary);
    if (!records) usage("cannot open '" + s.records + "' for writing");
  }
  for (const auto& sc : scenarios) {
    MonteCarloResult mc = monte_carlo(sc.config, threads);
    if (records.is_open()) write_records_jsonl(records, sc.name, mc.records);
    runs.push_back({sc, std::move(mc.metrics)});
  }
  emit(s.output, out, [&](std::ostream& os) { write_metrics_tsv(os, runs); });
  if (!s.json.empty()) emit(s.json, out, [&](std::ostream& os) { os << metrics_json(runs).dump(2) << '\n'; });
  return kOk;
}

struct PivotFlags {
  ScenarioFlags scenario;
  Index pivots = 2000;
  double shift_sd = 0.0;
  int bins = 20;
  Index max_replicates = 200000;
  unsigned threads = 0;
  std::string output;
  std::string json;
};

int cmd_pivot_check(const PivotFlags& f, std::ostream& out, std::ostream& err) {
  if (f.pivots < 1) usage("--pivots must be at least 1");
  if (f.bins < 1) usage("--bins must be at least 1");
  if (f.max_replicates < 1) usage("--max-replicates must be at least 1");
  PivotCheckConfig cfg;
  auto& sc = cfg.scenario;
  sc.n = 200;
  sc.p = 5;
  sc.law = CovariateLaw::Uniform01;
  sc.f = NuisanceShape::F3;
  sc.e = PropensityShape::E2;
  sc.mu = EffectShape::M2;
  sc.lambda_multiplier = 2.0;
  f.scenario.apply(sc);
  check_scenario(sc);
  cfg.pivots = f.pivots;
  cfg.center_shift_sd = f.shift_sd;
  cfg.bins = f.bins;
  cfg.max_replicates = f.max_replicates;
  const NamedScenario named{default_scenario_name(sc), sc};

  const PivotCheckResult result = pivot_check(cfg, resolve_threads(f.threads));
  const double crit = ks_critical_1pct(static_cast<Index>(result.pivots.size()));
  err << "ks_statistic " << fmt(result.ks_statistic) << " p_value " << fmt(result.ks_pvalue) << " critical_1pct "
      << fmt(crit) << (result.ks_statistic < crit ? " uniform" : " rejected") << '\n';
  emit(f.output, out, [&](std::ostream& os) { write_pivot_tsv(os, result); });
  if (!f.json.empty()) emit(f.json, out, [&](std::ostream& os) { os << pivot_json(named, cfg, result).dump(2) << '\n'; });
  return kOk;
}

int report_error(std::ostream& err, const std::string& code, const std::string& cls, const std::string& message,
                 int status) {
  Json doc{{"error", code}, {"class", cls}, {"message", message}, {"exit_code", status}};
  err << doc.dump() << '\n';
  return status;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Selective inference for IPW-weighted Lasso effect models"};
  app.name("siprop");
  app.require_subcommand(1);

  AnalyzeFlags af;
  auto* analyze_cmd = app.add_subcommand("analyze", "Selective and naive intervals for a CSV dataset");
  analyze_cmd->add_option("-i,--input", af.input, "CSV with y, t, covariates and optional e1..eH")->required();
  analyze_cmd->add_option("-o,--output", af.output, "TSV table (default stdout)");
  analyze_cmd->add_option("--json", af.json, "JSON report with diagnostics");
  analyze_cmd->add_option("--outcome", af.outcome, "Outcome column (case-insensitive)");
  analyze_cmd->add_option("--treatment", af.treatment, "Treatment column (case-insensitive)");
  analyze_cmd->add_option("--filter", af.filters, "Keep rows where column=value")->take_all();
  analyze_cmd->add_option("--ignore", af.ignore, "Columns to exclude from the covariates")->take_all();
  analyze_cmd->add_option("--alpha", af.alpha, "Miscoverage level");
  analyze_cmd->add_option("--lambda", af.lambda, "Explicit Lasso penalty");
  analyze_cmd->add_option("-k,--lambda-multiplier", af.lambda_multiplier, "k in lambda = k sigma sqrt(n log p)");
  analyze_cmd->add_option("--delta", af.delta, "Neighbourhood radius (default sqrt(p/2))");
  analyze_cmd->add_option("--variance-delta", af.variance_delta, "Radius for the variance estimator");
  analyze_cmd->add_option("--sigma2", af.sigma2, "Known error variance or 'estimate'");
  analyze_cmd->add_option("--propensity", af.propensity, "columns, logistic, or auto")
      ->check(CLI::IsMember({"auto", "columns", "logistic"}));
  analyze_cmd->add_option("--contrast", af.contrast, "Comma-separated arm coefficients, e.g. --contrast=-1,1");
  analyze_cmd->add_option("--union-cap", af.union_cap, "Largest model for the sign-union region");
  analyze_cmd->add_flag("--no-union", af.no_union, "Condition on the observed signs only");
  analyze_cmd->add_flag("--no-intercept", af.no_intercept, "Fit without an intercept");
  analyze_cmd->add_flag("--standardize", af.standardize, "Scale columns to unit sd before selection");
  analyze_cmd->add_option("--surrogate", af.surrogate, "Counterfactual surrogate")
      ->check(CLI::IsMember({"pooled", "plain"}));
  analyze_cmd->add_option("--naive-center", af.naive_center, "Naive interval center")
      ->check(CLI::IsMember({"raw", "corrected"}));
  analyze_cmd->add_option("--naive-variance", af.naive_variance, "Naive interval variance")
      ->check(CLI::IsMember({"zeta", "rho"}));

  SimulateFlags sf;
  auto* simulate_cmd = app.add_subcommand("simulate", "Monte Carlo coverage audit");
  simulate_cmd->add_option("--scenario", sf.scenario_file, "JSON scenario file");
  sf.scenario.add(simulate_cmd);
  simulate_cmd->add_option("-R,--replications", sf.replications, "Replications per scenario");
  simulate_cmd->add_option("--threads", sf.threads, "Worker threads (0: SIPROP_THREADS or hardware)");
  simulate_cmd->add_option("-o,--output", sf.output, "Metrics TSV (default stdout)");
  simulate_cmd->add_option("--json", sf.json, "Metrics JSON");
  simulate_cmd->add_option("--records", sf.records, "Per-replicate JSON lines");

  PivotFlags pf;
  auto* pivot_cmd = app.add_subcommand("pivot-check", "Uniformity audit of the oracle pivot");
  pf.scenario.add(pivot_cmd);
  pivot_cmd->add_option("-R,--pivots", pf.pivots, "Number of pivots to collect");
  pivot_cmd->add_option("--shift-sd", pf.shift_sd, "Mis-specify the center by this many sd");
  pivot_cmd->add_option("--bins", pf.bins, "Histogram bins");
  pivot_cmd->add_option("--max-replicates", pf.max_replicates, "Replicate budget");
  pivot_cmd->add_option("--threads", pf.threads, "Worker threads (0: SIPROP_THREADS or hardware)");
  pivot_cmd->add_option("-o,--output", pf.output, "Histogram TSV (default stdout)");
  pivot_cmd->add_option("--json", pf.json, "JSON report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success&) {
    // CLI11 renders the help of the subcommand that was named, if any.
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& ex) {
    return report_error(err, "UsageError", "usage", ex.what(), kUsage);
  }

  try {
    if (analyze_cmd->parsed()) return cmd_analyze(af, out, err);
    if (simulate_cmd->parsed()) return cmd_simulate(sf, out);
    return cmd_pivot_check(pf, out, err);
  } catch (const Error& ex) {
    switch (classify(ex.code())) {
      case ErrorClass::Usage:
        return report_error(err, std::string(to_string(ex.code())), "usage", ex.what(), kUsage);
      case ErrorClass::Data:
        return report_error(err, std::string(to_string(ex.code())), "data", ex.what(), kDataError);
      case ErrorClass::Numerical:
        return report_error(err, std::string(to_string(ex.code())), "numerical", ex.what(), kNumericalError);
    }
  } catch (const std::exception& ex) {
    return report_error(err, "InternalError", "numerical", ex.what(), kNumericalError);
  }
  return kNumericalError;
}

}  // namespace siprop::cli
