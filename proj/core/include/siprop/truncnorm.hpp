#pragma once

#include <limits>
#include <string>
#include <vector>

namespace siprop {

struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
};

/// Finite union of disjoint closed intervals, sorted and with touching or
/// overlapping pieces merged.
class TruncationRegion {
 public:
  TruncationRegion() = default;
  explicit TruncationRegion(std::vector<Interval> pieces);
  static TruncationRegion whole_line();

  const std::vector<Interval>& intervals() const { return pieces_; }
  bool empty() const { return pieces_.empty(); }
  bool contains(double x) const;
  /// Distance from x to the nearest point of the region (0 inside).
  double distance(double x) const;
  /// Nearest point of the region to x.
  double nearest(double x) const;
  bool is_whole_line() const;
  /// Scales every endpoint by factor (> 0).
  TruncationRegion scaled(double factor) const;

 private:
  std::vector<Interval> pieces_;
};

/// log of the standard normal upper tail, log(1 - Phi(x)), stable for large x.
double log_normal_upper(double x);

/// log(Phi(b) - Phi(a)) for a <= b in standardized units.
double log_normal_mass(double a, double b);

/// CDF at x of N(mu, var) truncated to the closed interval.
double tn_cdf(double x, double mu, double var, const Interval& interval);

/// CDF at x of N(mu, var) truncated to the union region.
double tn_union_cdf(double x, double mu, double var, const TruncationRegion& region);

/// Finds mu with tn_union_cdf(x, mu, var, region) == target.
double invert_mean(double x, double var, const TruncationRegion& region, double target);

std::string describe(const TruncationRegion& region);

}  // namespace siprop
