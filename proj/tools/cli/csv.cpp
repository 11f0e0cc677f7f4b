#include "cli/csv.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

#include "cli/format.hpp"
#include "siprop/error.hpp"

namespace siprop::cli {

namespace {

std::string trim(std::string s) {
  auto not_space = [](unsigned char ch) { return !std::isspace(ch); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return s;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') {
      quoted = !quoted;
      cur.push_back(ch);
    } else if (ch == ',' && !quoted) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(trim(cur));
  return out;
}

[[noreturn]] void schema_error(const std::string& source, const std::string& what) {
  throw Error(ErrorCode::SchemaError, source + ": " + what);
}

double parse_number(const std::string& text, const std::string& source, size_t row, const std::string& col) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (!text.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (text.empty() || ec != std::errc() || ptr != last) {
    schema_error(source, "row " + std::to_string(row) + ", column '" + col + "': '" + text + "' is not a number");
  }
  return v;
}

// Index of "eK" for propensity columns, 0 otherwise.
int propensity_column(const std::string& name) {
  const std::string l = lower(name);
  if (l.size() < 2 || l[0] != 'e') return 0;
  if (!std::all_of(l.begin() + 1, l.end(), [](unsigned char ch) { return std::isdigit(ch); })) return 0;
  return std::stoi(l.substr(1));
}

}  // namespace

Dataset ingest_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::SchemaError, path + ": cannot open file");
  return parse_csv(in, schema, path);
}

Dataset parse_csv(std::istream& in, const CsvSchema& schema, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) schema_error(source, "missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split(line);

  int y_col = -1;
  int t_col = -1;
  std::map<int, int> e_cols;  // arm number (1-based) -> column
  std::vector<int> x_cols;
  std::vector<std::pair<int, std::string>> filter_cols;
  for (const auto& [name, value] : schema.filters) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) schema_error(source, "filter column '" + name + "' not in header");
    filter_cols.emplace_back(static_cast<int>(it - header.begin()), value);
  }
  for (size_t c = 0; c < header.size(); ++c) {
    const std::string& name = header[c];
    const int col = static_cast<int>(c);
    if (name.empty()) schema_error(source, "empty column name at position " + std::to_string(c + 1));
    if (std::count(header.begin(), header.end(), name) > 1) schema_error(source, "duplicate column '" + name + "'");
    if (lower(name) == lower(schema.outcome)) {
      y_col = col;
    } else if (lower(name) == lower(schema.treatment)) {
      t_col = col;
    } else if (const int k = propensity_column(name); k > 0) {
      e_cols[k] = col;
    } else if (std::any_of(filter_cols.begin(), filter_cols.end(), [&](const auto& f) { return f.first == col; }) ||
               std::find(schema.ignore.begin(), schema.ignore.end(), name) != schema.ignore.end()) {
      continue;
    } else {
      x_cols.push_back(col);
    }
  }
  if (y_col < 0) schema_error(source, "missing outcome column '" + schema.outcome + "'");
  if (t_col < 0) schema_error(source, "missing treatment column '" + schema.treatment + "'");
  if (x_cols.empty()) schema_error(source, "no covariate columns");
  int arms_from_e = 0;
  if (!e_cols.empty()) {
    arms_from_e = static_cast<int>(e_cols.size());
    for (int k = 1; k <= arms_from_e; ++k) {
      if (!e_cols.count(k)) schema_error(source, "propensity columns must be e1..eH without gaps");
    }
  }

  std::vector<double> ys;
  std::vector<int> labels;
  std::vector<std::vector<double>> xs;
  std::vector<std::vector<double>> es;
  size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      schema_error(source, "row " + std::to_string(row) + " has " + std::to_string(cells.size()) + " fields, header has " +
                               std::to_string(header.size()));
    }
    bool keep = true;
    for (const auto& [col, value] : filter_cols) keep = keep && cells[static_cast<size_t>(col)] == value;
    if (!keep) continue;
    ys.push_back(parse_number(cells[static_cast<size_t>(y_col)], source, row, header[static_cast<size_t>(y_col)]));
    const double tv = parse_number(cells[static_cast<size_t>(t_col)], source, row, header[static_cast<size_t>(t_col)]);
    if (tv < 0 || tv != static_cast<double>(static_cast<int>(tv))) {
      schema_error(source, "row " + std::to_string(row) + ": treatment must be a nonnegative integer");
    }
    labels.push_back(static_cast<int>(tv));
    std::vector<double> xr;
    for (int c : x_cols) xr.push_back(parse_number(cells[static_cast<size_t>(c)], source, row, header[static_cast<size_t>(c)]));
    xs.push_back(std::move(xr));
    if (arms_from_e > 0) {
      std::vector<double> er;
      for (int k = 1; k <= arms_from_e; ++k) {
        const int c = e_cols.at(k);
        er.push_back(parse_number(cells[static_cast<size_t>(c)], source, row, header[static_cast<size_t>(c)]));
      }
      es.push_back(std::move(er));
    }
  }
  if (ys.empty()) schema_error(source, "no data rows (after filtering)");

  const int max_label = *std::max_element(labels.begin(), labels.end());
  int arms = std::max(2, max_label + 1);
  if (arms_from_e > 0) {
    if (max_label >= arms_from_e) {
      schema_error(source, "treatment value " + std::to_string(max_label) + " has no propensity column e" +
                               std::to_string(max_label + 1));
    }
    arms = arms_from_e;
  }

  Dataset ds;
  const auto n = static_cast<Eigen::Index>(ys.size());
  const auto p = static_cast<Eigen::Index>(x_cols.size());
  ds.y = Eigen::Map<const Vector>(ys.data(), n);
  ds.t = one_hot(labels, arms);
  ds.x.resize(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) ds.x(i, j) = xs[static_cast<size_t>(i)][static_cast<size_t>(j)];
  }
  if (!es.empty()) {
    Matrix e(n, arms);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index h = 0; h < arms; ++h) e(i, h) = es[static_cast<size_t>(i)][static_cast<size_t>(h)];
    }
    ds.e = e;
  }
  for (int c : x_cols) ds.covariate_names.push_back(header[static_cast<size_t>(c)]);
  validate_dataset(ds);
  return ds;
}

void write_csv(std::ostream& out, const Dataset& ds) {
  out << "y,t";
  for (Eigen::Index j = 0; j < ds.p(); ++j) {
    out << ',' << (ds.covariate_names.empty() ? "x" + std::to_string(j + 1) : ds.covariate_names[static_cast<size_t>(j)]);
  }
  if (ds.e) {
    for (Eigen::Index h = 0; h < ds.arms(); ++h) out << ",e" << (h + 1);
  }
  out << '\n';
  const auto labels = ds.arm_labels();
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    out << fmt(ds.y[i]) << ',' << labels[static_cast<size_t>(i)];
    for (Eigen::Index j = 0; j < ds.p(); ++j) out << ',' << fmt(ds.x(i, j));
    if (ds.e) {
      for (Eigen::Index h = 0; h < ds.arms(); ++h) out << ',' << fmt((*ds.e)(i, h));
    }
    out << '\n';
  }
}

}  // namespace siprop::cli
