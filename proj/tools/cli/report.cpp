#include "cli/report.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "cli/format.hpp"

namespace siprop::cli {

namespace {

Json num(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json num(const std::optional<double>& v) { return v ? num(*v) : Json(nullptr); }

std::string opt(const std::optional<double>& v) { return v ? fmt(*v) : "null"; }

Json summary_json(const Summary& s) { return Json{{"mean", num(s.mean)}, {"sd", num(s.sd)}, {"count", s.count}}; }

Json region_json(const TruncationRegion& region) {
  Json out = Json::array();
  for (const auto& piece : region.intervals()) out.push_back(Json::array({num(piece.lo), num(piece.hi)}));
  return out;
}

std::string row_name(const InferenceRow& row) {
  return row.name.empty() ? "x" + std::to_string(row.variable + 1) : row.name;
}

template <class Enum>
Enum parse_enum(const Json& obj, const char* key, Enum fallback,
                std::initializer_list<std::pair<const char*, Enum>> choices) {
  if (!obj.contains(key)) return fallback;
  const std::string text = obj.at(key).get<std::string>();
  for (const auto& [name, value] : choices) {
    if (text == name) return value;
  }
  throw Error(ErrorCode::InvalidArgument, std::string("scenario field '") + key + "' has unknown value '" + text + "'");
}

}  // namespace

void write_analysis_tsv(std::ostream& out, const AnalysisResult& result) {
  out << "variable\tsi_estimate\tsi_lower\tsi_upper\tnaive_estimate\tnaive_lower\tnaive_upper\tsi_significant\t"
         "naive_significant\n";
  for (const auto& row : result.rows) {
    if (row.error) {
      out << row_name(row) << "\tnan\tnan\tnan\t" << fmt(row.stat) << "\tnan\tnan\tnan\tnan\n";
      continue;
    }
    out << row_name(row) << '\t' << fmt(row.estimate) << '\t' << fmt(row.selective.lower) << '\t'
        << fmt(row.selective.upper) << '\t' << fmt(row.stat) << '\t' << fmt(row.naive.lo) << '\t'
        << fmt(row.naive.hi) << '\t' << (row.significant ? 1 : 0) << '\t' << (row.naive_significant ? 1 : 0) << '\n';
  }
}

Json analysis_json(const AnalysisResult& result, double alpha) {
  Json doc;
  doc["status"] = result.status == AnalysisStatus::Ok ? "ok" : "no_selection";
  if (result.status == AnalysisStatus::NoSelection) doc["note"] = "NoSelection: the Lasso selected no variables";
  doc["alpha"] = alpha;
  doc["lambda"] = num(result.lambda);
  doc["sigma2"] = num(result.sigma2);
  doc["sigma2_estimated"] = result.sigma2_estimated;
  doc["delta"] = num(result.delta);
  doc["intercept"] = num(result.intercept);
  doc["surrogate"] = result.surrogate == SurrogateMethod::Pooled ? "pooled" : "plain";
  doc["surrogate_fallbacks"] = result.surrogate_fallbacks;
  doc["kkt_residual"] = num(result.fit.kkt_residual);
  Json rows = Json::array();
  for (const auto& row : result.rows) {
    Json r;
    r["variable"] = row_name(row);
    r["index"] = row.variable;
    r["si_estimate"] = num(row.estimate);
    r["si_lower"] = num(row.selective.lower);
    r["si_upper"] = num(row.selective.upper);
    r["naive_estimate"] = num(row.stat);
    r["naive_lower"] = num(row.naive.lo);
    r["naive_upper"] = num(row.naive.hi);
    r["si_significant"] = row.significant;
    r["naive_significant"] = row.naive_significant;
    r["stat"] = num(row.stat);
    r["tau"] = num(row.tau);
    r["zeta"] = num(row.zeta);
    r["rho"] = num(row.rho);
    r["pivot_at_zero"] = num(row.pivot_at_zero);
    r["region"] = region_json(row.region);
    Json flags = Json::array();
    if (!row.union_region) flags.push_back("observed_signs_only");
    if (row.selective.lower_saturated) flags.push_back("lower_saturated");
    if (row.selective.upper_saturated) flags.push_back("upper_saturated");
    r["flags"] = flags;
    if (row.error) {
      r["error"] = std::string(to_string(*row.error));
      r["error_message"] = row.error_message;
    }
    rows.push_back(std::move(r));
  }
  doc["rows"] = std::move(rows);
  return doc;
}

std::string default_scenario_name(const ScenarioConfig& cfg) {
  return to_string(cfg.e) + "-" + to_string(cfg.f) + "-" + to_string(cfg.mu) + "-" + to_string(cfg.law) + "-p" +
         std::to_string(cfg.p) + "-n" + std::to_string(cfg.n);
}

NamedScenario scenario_from_json(const Json& obj) {
  if (!obj.is_object()) throw Error(ErrorCode::InvalidArgument, "scenario must be a JSON object");
  static const char* known[] = {"name",  "n",     "p",         "law",          "f",    "e",
                                "mu",    "sigma2", "k",        "delta",        "replications",
                                "seed",  "estimate_propensity", "union_cap", "intercept", "standardize"};
  for (const auto& [key, value] : obj.items()) {
    if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
      throw Error(ErrorCode::InvalidArgument, "unknown scenario field '" + key + "'");
    }
  }
  NamedScenario s;
  auto& c = s.config;
  try {
    c.n = obj.value("n", c.n);
    c.p = obj.value("p", c.p);
    c.law = parse_enum(obj, "law", c.law,
                       {{"uniform", CovariateLaw::Uniform01}, {"bernoulli", CovariateLaw::BernoulliHalf}});
    c.f = parse_enum(obj, "f", c.f, {{"F1", NuisanceShape::F1}, {"F2", NuisanceShape::F2}, {"F3", NuisanceShape::F3}});
    c.e = parse_enum(obj, "e", c.e, {{"E1", PropensityShape::E1}, {"E2", PropensityShape::E2}});
    c.mu = parse_enum(obj, "mu", c.mu, {{"M1", EffectShape::M1}, {"M2", EffectShape::M2}});
    c.sigma2 = obj.value("sigma2", c.sigma2);
    if (obj.contains("k")) c.lambda_multiplier = obj.at("k").get<double>();
    if (obj.contains("delta")) c.delta = obj.at("delta").get<double>();
    c.replications = obj.value("replications", c.replications);
    c.seed = obj.value("seed", c.seed);
    c.estimate_propensity = obj.value("estimate_propensity", c.estimate_propensity);
    c.analysis.union_cap = obj.value("union_cap", c.analysis.union_cap);
    c.analysis.intercept = obj.value("intercept", c.analysis.intercept);
    c.analysis.standardize = obj.value("standardize", c.analysis.standardize);
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::InvalidArgument, std::string("scenario: ") + ex.what());
  }
  s.name = obj.value("name", default_scenario_name(c));
  return s;
}

std::vector<NamedScenario> scenarios_from_json(const Json& doc) {
  const Json* list = &doc;
  if (doc.is_object() && doc.contains("scenarios")) list = &doc.at("scenarios");
  std::vector<NamedScenario> out;
  if (list->is_array()) {
    for (const auto& item : *list) out.push_back(scenario_from_json(item));
  } else {
    out.push_back(scenario_from_json(*list));
  }
  if (out.empty()) throw Error(ErrorCode::InvalidArgument, "scenario file lists no scenarios");
  return out;
}

Json scenario_to_json(const NamedScenario& s) {
  const auto& c = s.config;
  Json obj;
  obj["name"] = s.name;
  obj["n"] = c.n;
  obj["p"] = c.p;
  obj["law"] = to_string(c.law);
  obj["f"] = to_string(c.f);
  obj["e"] = to_string(c.e);
  obj["mu"] = to_string(c.mu);
  obj["sigma2"] = c.sigma2;
  obj["k"] = c.lambda_multiplier.value_or(preset_lambda_multiplier(c));
  obj["delta"] = scenario_delta(c);
  obj["replications"] = c.replications;
  obj["seed"] = c.seed;
  obj["estimate_propensity"] = c.estimate_propensity;
  obj["union_cap"] = c.analysis.union_cap;
  obj["intercept"] = c.analysis.intercept;
  obj["standardize"] = c.analysis.standardize;
  return obj;
}

void write_metrics_tsv(std::ostream& out, const std::vector<ScenarioMetrics>& runs) {
  out << "scenario\tmethod\treplications\tcontributing\tfailed_replicates\tfailed_variables\tmodel_size\t"
         "model_size_sd\tfcr\tfcr_sd\ttp\ttp_sd\tfp\tfp_sd\texcludes_zero\n";
  for (const auto& run : runs) {
    const auto& m = run.metrics;
    for (const auto* method : {&m.si, &m.naive}) {
      std::string excl;
      for (size_t j = 0; j < method->excludes_zero.size(); ++j) {
        if (j > 0) excl += ',';
        const auto& s = method->excludes_zero[j];
        excl += s.count > 0 ? fmt(s.mean) : "null";
      }
      out << run.scenario.name << '\t' << (method == &m.si ? "SI" : "Naive") << '\t' << m.replications << '\t'
          << m.contributing << '\t' << m.failed_replicates << '\t' << m.failed_variables << '\t'
          << fmt(m.model_size.mean) << '\t' << opt(m.model_size.sd) << '\t' << fmt(method->fcr.mean) << '\t'
          << opt(method->fcr.sd) << '\t' << fmt(method->tp.mean) << '\t' << opt(method->tp.sd) << '\t'
          << fmt(method->fp.mean) << '\t' << opt(method->fp.sd) << '\t' << excl << '\n';
    }
  }
}

Json metrics_json(const std::vector<ScenarioMetrics>& runs) {
  Json list = Json::array();
  for (const auto& run : runs) {
    const auto& m = run.metrics;
    Json entry;
    entry["scenario"] = scenario_to_json(run.scenario);
    entry["replications"] = m.replications;
    entry["contributing"] = m.contributing;
    entry["failed_replicates"] = m.failed_replicates;
    entry["failed_variables"] = m.failed_variables;
    entry["model_size"] = summary_json(m.model_size);
    for (const auto* method : {&m.si, &m.naive}) {
      Json mj;
      mj["fcr"] = summary_json(method->fcr);
      mj["tp"] = summary_json(method->tp);
      mj["fp"] = summary_json(method->fp);
      Json excl = Json::array();
      for (const auto& s : method->excludes_zero) excl.push_back(s.count > 0 ? summary_json(s) : Json(nullptr));
      mj["excludes_zero"] = std::move(excl);
      entry[method == &m.si ? "si" : "naive"] = std::move(mj);
    }
    list.push_back(std::move(entry));
  }
  return Json{{"runs", std::move(list)}};
}

void write_records_jsonl(std::ostream& out, const std::string& scenario,
                         const std::vector<ReplicateRecord>& records) {
  for (const auto& rec : records) {
    Json r;
    r["scenario"] = scenario;
    r["index"] = rec.index;
    r["seed"] = rec.seed;
    r["model_size"] = rec.model_size;
    r["lambda"] = num(rec.lambda);
    if (rec.error) {
      r["error"] = std::string(to_string(*rec.error));
      r["error_message"] = rec.error_message;
    }
    Json vars = Json::array();
    for (const auto& v : rec.variables) {
      Json vj;
      vj["variable"] = v.variable;
      vj["truth"] = num(v.truth);
      vj["truth_nonzero"] = v.truth_nonzero;
      vj["si"] = Json::array({num(v.selective.lower), num(v.selective.upper)});
      vj["naive"] = Json::array({num(v.naive.lo), num(v.naive.hi)});
      vj["si_covers"] = v.si_covers;
      vj["naive_covers"] = v.naive_covers;
      if (v.error) vj["error"] = std::string(to_string(*v.error));
      vars.push_back(std::move(vj));
    }
    r["variables"] = std::move(vars);
    out << r.dump() << '\n';
  }
}

double ks_critical_1pct(Index n) { return 1.628 / std::sqrt(static_cast<double>(n)); }

void write_pivot_tsv(std::ostream& out, const PivotCheckResult& result) {
  out << "bin_lower\tbin_upper\tcount\texpected\n";
  const auto bins = result.histogram.size();
  const double expected = static_cast<double>(result.pivots.size()) / static_cast<double>(bins);
  for (size_t b = 0; b < bins; ++b) {
    out << fmt(static_cast<double>(b) / static_cast<double>(bins)) << '\t'
        << fmt(static_cast<double>(b + 1) / static_cast<double>(bins)) << '\t' << result.histogram[b] << '\t'
        << fmt(expected) << '\n';
  }
}

Json pivot_json(const NamedScenario& scenario, const PivotCheckConfig& cfg, const PivotCheckResult& result) {
  Json doc;
  doc["scenario"] = scenario_to_json(scenario);
  doc["center_shift_sd"] = cfg.center_shift_sd;
  doc["pivots"] = result.pivots.size();
  doc["replicates_used"] = result.replicates_used;
  doc["ks_statistic"] = num(result.ks_statistic);
  doc["ks_pvalue"] = num(result.ks_pvalue);
  const double crit = ks_critical_1pct(static_cast<Index>(result.pivots.size()));
  doc["ks_critical_1pct"] = crit;
  doc["uniform_at_1pct"] = result.ks_statistic < crit;
  doc["histogram"] = result.histogram;
  return doc;
}

}  // namespace siprop::cli
