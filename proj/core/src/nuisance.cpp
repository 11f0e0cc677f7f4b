#include "siprop/nuisance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "siprop/error.hpp"

namespace siprop {

namespace {

double log1pexp(double v) { return v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); }

double logistic_loglik(const Matrix& z, const Vector& label, const Vector& theta) {
  const Vector eta = z * theta;
  double ll = 0.0;
  for (Index i = 0; i < eta.size(); ++i) ll += label[i] * eta[i] - log1pexp(eta[i]);
  return ll;
}

Vector sigmoid(const Vector& eta) {
  Vector out(eta.size());
  for (Index i = 0; i < eta.size(); ++i) {
    out[i] = eta[i] >= 0 ? 1.0 / (1.0 + std::exp(-eta[i])) : std::exp(eta[i]) / (1.0 + std::exp(eta[i]));
  }
  return out;
}

// Calls visit(i, l) for every ordered pair i != l whose squared distance
// passes the test, in increasing (i, l) order.
template <typename Accept, typename Visit>
void scan_pairs(const Matrix& x, Accept accept, Visit visit) {
  const Matrix xt = x.transpose();  // columns are units
  const Index n = x.rows();
  for (Index i = 0; i < n; ++i) {
    for (Index l = i + 1; l < n; ++l) {
      const double d2 = (xt.col(i) - xt.col(l)).squaredNorm();
      if (accept(d2)) {
        visit(i, l);
        visit(l, i);
      }
    }
  }
}

// Nearest unit to i (excluding i) among those with eligible[l]; ties go to
// the smallest index.
Index nearest_unit(const Matrix& x, Index i, const std::vector<char>& eligible) {
  Index best = -1;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (Index l = 0; l < x.rows(); ++l) {
    if (l == i || !eligible[static_cast<size_t>(l)]) continue;
    const double d2 = (x.row(l) - x.row(i)).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = l;
    }
  }
  return best;
}

}  // namespace

LogisticFit fit_logistic(const Matrix& t, const Matrix& x, double clip) {
  if (t.cols() != 2) throw Error(ErrorCode::InvalidArgument, "logistic propensity requires H = 2");
  if (t.rows() != x.rows()) throw Error(ErrorCode::DimensionMismatch, "T and X row counts differ");
  const Index n = x.rows();
  const Vector label = t.col(1);
  const double treated = label.sum();
  if (treated < 1.0 || treated > static_cast<double>(n) - 1.0) {
    throw Error(ErrorCode::NoEligibleDonor, "an arm is empty");
  }
  Matrix z(n, x.cols() + 1);
  z.col(0).setOnes();
  z.rightCols(x.cols()) = x;

  LogisticFit fit;
  fit.coef = Vector::Zero(z.cols());
  fit.coef[0] = std::log(treated / (static_cast<double>(n) - treated));
  double ll = logistic_loglik(z, label, fit.coef);
  bool converged = false;
  for (int iter = 1; iter <= 100; ++iter) {
    fit.iterations = iter;
    const Vector prob = sigmoid(z * fit.coef);
    const Vector grad = z.transpose() * (label - prob);
    if (grad.cwiseAbs().maxCoeff() < 1e-8) {
      converged = true;
      break;
    }
    const Vector wts = prob.cwiseProduct(Vector::Ones(n) - prob);
    const Matrix info = z.transpose() * wts.asDiagonal() * z;
    Eigen::LDLT<Matrix> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-14) {
      throw Error(ErrorCode::Separation, "logistic information matrix is singular");
    }
    const Vector step = ldlt.solve(grad);
    double scale = 1.0;
    Vector next = fit.coef + step;
    double ll_next = logistic_loglik(z, label, next);
    while (ll_next < ll - 1e-12 * std::abs(ll) && scale > 1e-6) {
      scale *= 0.5;
      next = fit.coef + scale * step;
      ll_next = logistic_loglik(z, label, next);
    }
    fit.coef = next;
    ll = ll_next;
    if (!fit.coef.allFinite()) throw Error(ErrorCode::Separation, "logistic coefficients diverged");
  }
  const Vector prob = sigmoid(z * fit.coef);
  if ((prob - label).cwiseAbs().maxCoeff() < 1e-8) {
    throw Error(ErrorCode::Separation, "fitted probabilities reproduce the labels");
  }
  if (!converged) throw Error(ErrorCode::Separation, "Newton-Raphson did not converge in 100 iterations");

  const Vector wts = prob.cwiseProduct(Vector::Ones(n) - prob);
  const Matrix info = z.transpose() * wts.asDiagonal() * z;
  fit.covariance = info.ldlt().solve(Matrix::Identity(info.rows(), info.cols()));
  fit.propensity.resize(n, 2);
  for (Index i = 0; i < n; ++i) {
    const double p1 = std::clamp(prob[i], clip, 1.0 - clip);
    fit.propensity(i, 1) = p1;
    fit.propensity(i, 0) = 1.0 - p1;
  }
  return fit;
}

Matrix fit_logistic_propensity(const Matrix& t, const Matrix& x) { return fit_logistic(t, x).propensity; }

std::vector<NeighborhoodIndex> build_all_neighborhoods(const Matrix& x, const Matrix& t, double delta) {
  if (!(delta >= 0.0)) throw Error(ErrorCode::InvalidArgument, "delta must be nonnegative");
  const Index n = x.rows();
  std::vector<NeighborhoodIndex> out(static_cast<size_t>(t.cols()));
  std::vector<int> arm(static_cast<size_t>(n), -1);
  for (Index i = 0; i < n; ++i) {
    for (Index h = 0; h < t.cols(); ++h) {
      if (t(i, h) == 1.0) arm[static_cast<size_t>(i)] = static_cast<int>(h);
    }
  }
  for (Index h = 0; h < t.cols(); ++h) {
    out[static_cast<size_t>(h)].delta = delta;
    out[static_cast<size_t>(h)].arm = h;
    out[static_cast<size_t>(h)].members.assign(static_cast<size_t>(n), {});
  }
  const double d2max = delta * delta;
  scan_pairs(
      x, [&](double d2) { return d2 <= d2max; },
      [&](Index i, Index l) {
        const int h = arm[static_cast<size_t>(l)];
        if (h >= 0) out[static_cast<size_t>(h)].members[static_cast<size_t>(i)].push_back(l);
      });
  for (auto& nb : out) {
    for (auto& list : nb.members) std::sort(list.begin(), list.end());
  }
  return out;
}

NeighborhoodIndex build_neighborhoods(const Matrix& x, const Matrix& t, double delta, Index arm) {
  if (arm < 0 || arm >= t.cols()) throw Error(ErrorCode::InvalidArgument, "arm out of range");
  return std::move(build_all_neighborhoods(x, t, delta)[static_cast<size_t>(arm)]);
}

Matrix arm_regressions(const Vector& y, const Matrix& x_in, const Matrix& t, bool intercept) {
  Matrix x;
  if (intercept) {
    x.resize(x_in.rows(), x_in.cols() + 1);
    x.col(0).setOnes();
    x.rightCols(x_in.cols()) = x_in;
  } else {
    x = x_in;
  }
  const Index p = x.cols();
  Matrix coef(p, t.cols());
  for (Index h = 0; h < t.cols(); ++h) {
    IndexList rows;
    for (Index i = 0; i < x.rows(); ++i) {
      if (t(i, h) == 1.0) rows.push_back(i);
    }
    if (rows.empty()) {
      throw Error(ErrorCode::NoEligibleDonor, "arm " + std::to_string(h) + " has no units");
    }
    if (static_cast<Index>(rows.size()) < p) {
      throw Error(ErrorCode::ArmRankDeficient, "arm " + std::to_string(h) + " has fewer units than covariates");
    }
    Matrix xa(static_cast<Index>(rows.size()), p);
    Vector ya(static_cast<Index>(rows.size()));
    for (size_t k = 0; k < rows.size(); ++k) {
      xa.row(static_cast<Index>(k)) = x.row(rows[k]);
      ya[static_cast<Index>(k)] = y[rows[k]];
    }
    Eigen::ColPivHouseholderQR<Matrix> qr(xa);
    qr.setThreshold(1e-12);
    if (qr.rank() < p) {
      throw Error(ErrorCode::ArmRankDeficient, "arm " + std::to_string(h) + " design is rank deficient");
    }
    coef.col(h) = qr.solve(ya);
  }
  return coef;
}

Surrogates counterfactual_surrogates(const Vector& y, const Matrix& x, const Matrix& t,
                                     const std::vector<NeighborhoodIndex>& nbhd, SurrogateMethod method,
                                     const std::optional<Vector>& effect, bool intercept) {
  const Index n = x.rows();
  const Index arms = t.cols();
  if (static_cast<Index>(nbhd.size()) != arms) {
    throw Error(ErrorCode::DimensionMismatch, "need one neighbourhood index per arm");
  }
  if (method == SurrogateMethod::Pooled) {
    if (arms != 2) throw Error(ErrorCode::InvalidArgument, "pooled surrogates need exactly two arms");
    if (!effect || effect->size() != n) {
      throw Error(ErrorCode::InvalidArgument, "pooled surrogates need the fitted effect at every unit");
    }
  }
  const Matrix coef = arm_regressions(y, x, t, intercept);
  Matrix fitted = x * coef.bottomRows(x.cols());  // n x H
  if (intercept) fitted.rowwise() += coef.row(0);

  std::vector<int> label(static_cast<size_t>(n), -1);
  for (Index i = 0; i < n; ++i) {
    for (Index h = 0; h < arms; ++h) {
      if (t(i, h) == 1.0) label[static_cast<size_t>(i)] = static_cast<int>(h);
    }
  }

  Surrogates out;
  out.method = method;
  out.ystar.resize(n, arms);
  out.donors.resize(n, arms);

  if (method == SurrogateMethod::Plain) {
    for (Index h = 0; h < arms; ++h) {
      std::vector<char> eligible(static_cast<size_t>(n));
      for (Index l = 0; l < n; ++l) eligible[static_cast<size_t>(l)] = label[static_cast<size_t>(l)] == h;
      for (Index i = 0; i < n; ++i) {
        const IndexList* members = &nbhd[static_cast<size_t>(h)].members[static_cast<size_t>(i)];
        IndexList fallback;
        if (members->empty()) {
          const Index l = nearest_unit(x, i, eligible);
          if (l < 0) throw Error(ErrorCode::NoEligibleDonor, "arm " + std::to_string(h) + " has no donor");
          fallback.push_back(l);
          members = &fallback;
          ++out.fallbacks;
        }
        double acc = 0.0;
        for (Index l : *members) acc += y[l] - fitted(l, h);
        const double cnt = static_cast<double>(members->size());
        out.ystar(i, h) = fitted(i, h) + acc / cnt;
        out.donors(i, h) = cnt;
      }
    }
    return out;
  }

  // Pooled two-arm version: donors from the other arm are shifted by the
  // fitted effect so that both arms inform each surrogate.
  const Vector& eff = *effect;
  std::vector<char> anyone(static_cast<size_t>(n), 1);
  for (Index i = 0; i < n; ++i) {
    IndexList members = nbhd[0].members[static_cast<size_t>(i)];
    members.insert(members.end(), nbhd[1].members[static_cast<size_t>(i)].begin(),
                   nbhd[1].members[static_cast<size_t>(i)].end());
    if (members.empty()) {
      const Index l = nearest_unit(x, i, anyone);
      if (l < 0) throw Error(ErrorCode::NoEligibleDonor, "no donor available");
      members.push_back(l);
      ++out.fallbacks;
    }
    const double cnt = static_cast<double>(members.size());
    for (Index h = 0; h < 2; ++h) {
      double acc = 0.0;
      for (Index l : members) {
        const int g = label[static_cast<size_t>(l)];
        double shift = 0.0;
        if (g == 1 && h == 0) shift = -eff[l];
        if (g == 0 && h == 1) shift = eff[l];
        acc += y[l] + shift - fitted(l, h);
      }
      out.ystar(i, h) = fitted(i, h) + acc / cnt;
      out.donors(i, h) = cnt;
    }
  }
  return out;
}

VarianceEstimate estimate_error_variance(const Vector& y, const Matrix& x, const Matrix& t, double delta) {
  if (!(delta >= 0.0)) throw Error(ErrorCode::InvalidArgument, "delta must be nonnegative");
  const Index n = x.rows();
  std::vector<int> label(static_cast<size_t>(n), -1);
  for (Index i = 0; i < n; ++i) {
    for (Index h = 0; h < t.cols(); ++h) {
      if (t(i, h) == 1.0) label[static_cast<size_t>(i)] = static_cast<int>(h);
    }
  }
  std::vector<double> sum(static_cast<size_t>(n), 0.0);
  std::vector<Index> count(static_cast<size_t>(n), 0);
  const double d2max = delta * delta;
  scan_pairs(
      x, [&](double d2) { return d2 < d2max; },
      [&](Index i, Index l) {
        if (label[static_cast<size_t>(i)] != label[static_cast<size_t>(l)]) return;
        sum[static_cast<size_t>(i)] += y[l];
        ++count[static_cast<size_t>(i)];
      });
  VarianceEstimate est;
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    const Index k = count[static_cast<size_t>(i)];
    if (k == 0) continue;
    ++est.contributing;
    const double kd = static_cast<double>(k);
    const double diff = y[i] - sum[static_cast<size_t>(i)] / kd;
    total += kd / (1.0 + kd) * diff * diff;
  }
  est.sigma2 = total / static_cast<double>(n);
  return est;
}

}  // namespace siprop
