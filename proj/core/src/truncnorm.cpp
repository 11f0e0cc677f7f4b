#include "siprop/truncnorm.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "siprop/error.hpp"

namespace siprop {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLogHalf = -0.69314718055994530942;
constexpr double kInvSqrt2 = 0.70710678118654752440;

// erfc(u) * exp(u^2) for u >= 2 by a continued fraction (modified Lentz).
double erfcx_large(double u) {
  constexpr double kInvSqrtPi = 0.56418958354775628695;
  constexpr double tiny = 1e-300;
  // erfcx(u) = (1/sqrt(pi)) / (u + (1/2)/(u + 1/(u + (3/2)/(u + ...))))
  double f = u;
  double c = u;
  double d = 0.0;
  for (int k = 1; k < 500; ++k) {
    const double ak = 0.5 * k;
    d = u + ak * d;
    if (std::abs(d) < tiny) d = tiny;
    c = u + ak / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = c * d;
    f *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return kInvSqrtPi / f;
}

// log(1 - exp(v)) for v <= 0.
double log1mexp(double v) {
  if (v == 0.0) return -kInf;
  return v > -0.69314718055994530942 ? std::log(-std::expm1(v)) : std::log1p(-std::exp(v));
}

double log_add(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

double upper_tail(double x) { return 0.5 * std::erfc(x * kInvSqrt2); }

}  // namespace

double log_normal_upper(double x) {
  if (std::isnan(x)) return x;
  if (x == kInf) return -kInf;
  if (x == -kInf) return 0.0;
  if (x < 0.0) return std::log1p(-upper_tail(-x));
  if (x < 5.0) return std::log(upper_tail(x));
  const double u = x * kInvSqrt2;
  return kLogHalf + std::log(erfcx_large(u)) - 0.5 * x * x;
}

double log_normal_mass(double a, double b) {
  if (!(a < b)) return -kInf;
  if (a >= 0.0) {
    const double la = log_normal_upper(a);
    const double lb = log_normal_upper(b);
    if (la == -kInf) return -kInf;
    return la + log1mexp(lb - la);
  }
  if (b <= 0.0) return log_normal_mass(-b, -a);
  // Straddles zero: both tails are at most one half, so no cancellation.
  return std::log1p(-(upper_tail(-a) + upper_tail(b)));
}

TruncationRegion::TruncationRegion(std::vector<Interval> pieces) {
  std::vector<Interval> kept;
  for (const auto& iv : pieces) {
    if (std::isnan(iv.lo) || std::isnan(iv.hi)) {
      throw Error(ErrorCode::InvalidRegion, "interval endpoint is NaN");
    }
    if (iv.lo <= iv.hi) kept.push_back(iv);
  }
  std::sort(kept.begin(), kept.end(), [](const Interval& l, const Interval& r) {
    return l.lo < r.lo || (l.lo == r.lo && l.hi < r.hi);
  });
  for (const auto& iv : kept) {
    if (!pieces_.empty() && iv.lo <= pieces_.back().hi) {
      pieces_.back().hi = std::max(pieces_.back().hi, iv.hi);
    } else {
      pieces_.push_back(iv);
    }
  }
}

TruncationRegion TruncationRegion::whole_line() { return TruncationRegion({Interval{}}); }

bool TruncationRegion::contains(double x) const {
  return std::any_of(pieces_.begin(), pieces_.end(),
                     [x](const Interval& iv) { return iv.lo <= x && x <= iv.hi; });
}

double TruncationRegion::distance(double x) const { return std::abs(nearest(x) - x); }

double TruncationRegion::nearest(double x) const {
  double best = x;
  double gap = kInf;
  for (const auto& iv : pieces_) {
    const double c = std::clamp(x, iv.lo, iv.hi);
    const double d = std::abs(c - x);
    if (d < gap) {
      gap = d;
      best = c;
    }
  }
  return best;
}

bool TruncationRegion::is_whole_line() const {
  return pieces_.size() == 1 && pieces_[0].lo == -kInf && pieces_[0].hi == kInf;
}

TruncationRegion TruncationRegion::scaled(double factor) const {
  std::vector<Interval> out;
  for (const auto& iv : pieces_) out.push_back({iv.lo * factor, iv.hi * factor});
  return TruncationRegion(out);
}

double tn_cdf(double x, double mu, double var, const Interval& interval) {
  return tn_union_cdf(x, mu, var, TruncationRegion({interval}));
}

double tn_union_cdf(double x, double mu, double var, const TruncationRegion& region) {
  if (!(var > 0.0) || !std::isfinite(var)) throw Error(ErrorCode::InvalidArgument, "variance must be positive");
  if (region.empty()) throw Error(ErrorCode::InvalidRegion, "empty truncation region");
  const double sd = std::sqrt(var);
  const double xs = (x - mu) / sd;
  double log_below = -kInf;
  double log_above = -kInf;
  for (const auto& iv : region.intervals()) {
    const double a = (iv.lo - mu) / sd;
    const double b = (iv.hi - mu) / sd;
    if (xs > a) log_below = log_add(log_below, log_normal_mass(a, std::min(b, xs)));
    if (xs < b) log_above = log_add(log_above, log_normal_mass(std::max(a, xs), b));
  }
  if (std::isnan(log_below) || std::isnan(log_above)) {
    throw Error(ErrorCode::ZeroMass, "region mass is not representable");
  }
  if (log_below == -kInf && log_above == -kInf) {
    throw Error(ErrorCode::ZeroMass, "region carries no Gaussian mass in log space");
  }
  if (log_below == -kInf) return 0.0;
  if (log_above == -kInf) return 1.0;
  return 1.0 / (1.0 + std::exp(log_above - log_below));
}

double invert_mean(double x, double var, const TruncationRegion& region, double target) {
  if (!(target > 0.0 && target < 1.0)) throw Error(ErrorCode::InvalidArgument, "target must lie in (0,1)");
  if (!(var > 0.0)) throw Error(ErrorCode::InvalidArgument, "variance must be positive");
  const double sd = std::sqrt(var);
  // The CDF decreases in mu: need F(lo) >= target >= F(hi).
  double half = 10.0 * sd;
  double lo = x - half;
  double hi = x + half;
  double f_lo = tn_union_cdf(x, lo, var, region);
  double f_hi = tn_union_cdf(x, hi, var, region);
  int doublings = 0;
  while (!(f_lo >= target && f_hi <= target)) {
    if (++doublings > 60) {
      throw Error(ErrorCode::BracketFailure, "CDF saturated before straddling the target");
    }
    half *= 2.0;
    if (f_lo < target) {
      lo = x - half;
      f_lo = tn_union_cdf(x, lo, var, region);
    }
    if (f_hi > target) {
      hi = x + half;
      f_hi = tn_union_cdf(x, hi, var, region);
    }
  }
  const double width_tol = 1e-10 * sd;
  double mid = 0.5 * (lo + hi);
  for (int iter = 0; iter < 400; ++iter) {
    mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double f = tn_union_cdf(x, mid, var, region);
    if (f > target) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < width_tol && std::abs(f - target) <= 1e-8) break;
  }
  return 0.5 * (lo + hi);
}

std::string describe(const TruncationRegion& region) {
  std::ostringstream os;
  os.precision(17);
  bool first = true;
  for (const auto& iv : region.intervals()) {
    if (!first) os << " U ";
    first = false;
    os << '[' << iv.lo << ", " << iv.hi << ']';
  }
  return os.str();
}

}  // namespace siprop
