#include "siprop/lasso.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "siprop/error.hpp"

namespace siprop {

namespace {

double soft_threshold(double z, double lambda) {
  if (z > lambda) return z - lambda;
  if (z < -lambda) return z + lambda;
  return 0.0;
}

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

Matrix select_columns(const Matrix& x, const IndexList& cols) {
  Matrix out(x.rows(), static_cast<Index>(cols.size()));
  for (size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Index>(k)) = x.col(cols[k]);
  return out;
}

// Exact solve on the current support; returns false if signs or inactive
// KKT conditions do not hold for the re-solved coefficients.
bool polish_support(const Matrix& gram, const Vector& xty, double lambda, double tol, Vector& beta) {
  IndexList support;
  for (Index j = 0; j < beta.size(); ++j) {
    if (beta[j] != 0.0) support.push_back(j);
  }
  if (support.empty()) return true;
  const Index m = static_cast<Index>(support.size());
  Matrix g(m, m);
  Vector rhs(m);
  for (Index a = 0; a < m; ++a) {
    rhs[a] = xty[support[a]] - lambda * sign_of(beta[support[a]]);
    for (Index b = 0; b < m; ++b) g(a, b) = gram(support[a], support[b]);
  }
  Eigen::LDLT<Matrix> ldlt(g);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return false;
  Vector bm = ldlt.solve(rhs);
  if (!bm.allFinite()) return false;
  Vector candidate = Vector::Zero(beta.size());
  for (Index a = 0; a < m; ++a) {
    if (sign_of(bm[a]) != sign_of(beta[support[a]])) return false;
    candidate[support[a]] = bm[a];
  }
  const Vector corr = xty - gram * candidate;
  for (Index j = 0; j < beta.size(); ++j) {
    if (candidate[j] == 0.0 && std::abs(corr[j]) > lambda + tol) return false;
  }
  beta = candidate;
  return true;
}

}  // namespace

IndexList complement_of(const IndexList& model, Index p) {
  IndexList out;
  size_t k = 0;
  for (Index j = 0; j < p; ++j) {
    if (k < model.size() && model[k] == j) {
      ++k;
    } else {
      out.push_back(j);
    }
  }
  return out;
}

double lasso_objective(const Matrix& x, const Vector& wy, double lambda, const Vector& beta) {
  return 0.5 * (wy - x * beta).squaredNorm() + lambda * beta.lpNorm<1>();
}

double kkt_residual(const Matrix& x, const Vector& wy, double lambda, const Vector& beta) {
  const Vector g = x.transpose() * (x * beta - wy);
  double worst = 0.0;
  for (Index j = 0; j < beta.size(); ++j) {
    const double v = beta[j] != 0.0 ? std::abs(g[j] + lambda * sign_of(beta[j]))
                                    : std::max(0.0, std::abs(g[j]) - lambda);
    worst = std::max(worst, v);
  }
  return worst;
}

LassoFit solve_ipw_lasso(const Matrix& x, const Vector& wy, double lambda, const LassoOptions& opts) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw Error(ErrorCode::InvalidArgument, "lambda must be positive and finite");
  }
  if (x.rows() != wy.size()) throw Error(ErrorCode::DimensionMismatch, "X rows differ from wy length");

  const Index p = x.cols();
  const Matrix gram = x.transpose() * x;
  const Vector xty = x.transpose() * wy;
  const double wy_scale = wy.size() > 0 ? wy.cwiseAbs().maxCoeff() : 0.0;
  const double stop = opts.change_tol * (1.0 + wy_scale);
  const double kkt_tol = opts.kkt_tol * std::max(1.0, lambda);
  const double y_sq = 0.5 * wy.squaredNorm();

  LassoFit fit;
  fit.lambda = lambda;
  fit.beta = Vector::Zero(p);
  Vector corr = xty;  // X'(wy - X beta)

  auto objective = [&](const Vector& b) {
    return y_sq - b.dot(xty) + 0.5 * b.dot(gram * b) + lambda * b.lpNorm<1>();
  };

  bool converged = false;
  for (int sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (Index j = 0; j < p; ++j) {
      const double gjj = gram(j, j);
      if (gjj <= 0.0) continue;
      const double old = fit.beta[j];
      const double updated = soft_threshold(corr[j] + gjj * old, lambda) / gjj;
      const double delta = updated - old;
      if (delta != 0.0) {
        fit.beta[j] = updated;
        corr.noalias() -= gram.col(j) * delta;
        max_change = std::max(max_change, std::abs(delta));
      }
    }
    fit.sweeps = sweep;
    if (opts.trace_objective) fit.objective_trace.push_back(objective(fit.beta));
    if (max_change < stop) {
      // Refresh the running correlation to shed accumulated rounding before
      // deciding whether the sweep really converged.
      corr = xty - gram * fit.beta;
      if (opts.polish) {
        Vector polished = fit.beta;
        if (polish_support(gram, xty, lambda, kkt_tol, polished)) {
          fit.beta = polished;
          corr = xty - gram * fit.beta;
        }
      }
      if (kkt_residual(x, wy, lambda, fit.beta) <= kkt_tol) {
        converged = true;
        break;
      }
    }
  }

  fit.kkt_residual = kkt_residual(x, wy, lambda, fit.beta);
  if (!converged && fit.kkt_residual > kkt_tol) {
    throw Error(ErrorCode::NoConvergence, "coordinate descent hit the sweep limit with KKT residual " +
                                              std::to_string(fit.kkt_residual));
  }

  for (Index j = 0; j < p; ++j) {
    if (fit.beta[j] != 0.0) fit.active.push_back(j);
  }
  fit.signs = Vector(static_cast<Index>(fit.active.size()));
  for (size_t k = 0; k < fit.active.size(); ++k) {
    fit.signs[static_cast<Index>(k)] = sign_of(fit.beta[fit.active[k]]);
  }

  if (!fit.active.empty()) {
    const Vector g = x.transpose() * (wy - x * fit.beta);
    for (Index j = 0; j < p; ++j) {
      if (fit.beta[j] == 0.0 && gram(j, j) > 0.0 &&
          std::abs(std::abs(g[j]) - lambda) <= opts.tie_tol * lambda) {
        throw Error(ErrorCode::DegenerateSelection,
                    "inactive coordinate " + std::to_string(j) + " sits on the penalty boundary");
      }
    }
  }
  return fit;
}

ModelBasis::ModelBasis(const Matrix& x, const IndexList& m) : model(m) {
  if (!std::is_sorted(model.begin(), model.end()) ||
      std::adjacent_find(model.begin(), model.end()) != model.end()) {
    throw Error(ErrorCode::InvalidArgument, "model indices must be sorted and distinct");
  }
  for (Index j : model) {
    if (j < 0 || j >= x.cols()) throw Error(ErrorCode::InvalidArgument, "model index out of range");
  }
  complement = complement_of(model, x.cols());
  xm = select_columns(x, model);
  xc = select_columns(x, complement);
  if (model.empty()) return;
  const Matrix gram = xm.transpose() * xm;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > 1e12) {
    throw Error(ErrorCode::RankDeficient, "model Gram matrix is singular or has condition number above 1e12");
  }
  gram_inv = gram.ldlt().solve(Matrix::Identity(gram.rows(), gram.cols()));
}

Index ModelBasis::position(Index j) const {
  auto it = std::lower_bound(model.begin(), model.end(), j);
  if (it == model.end() || *it != j) {
    throw Error(ErrorCode::IndexNotInModel, "variable " + std::to_string(j) + " is not in the model");
  }
  return static_cast<Index>(it - model.begin());
}

SelectionEvent selection_polyhedron(const Matrix& x, const IndexList& model, const Vector& signs,
                                    double lambda) {
  if (!(lambda > 0.0)) throw Error(ErrorCode::InvalidArgument, "lambda must be positive");
  if (static_cast<Index>(model.size()) != signs.size()) {
    throw Error(ErrorCode::DimensionMismatch, "sign vector length differs from model size");
  }
  const ModelBasis basis(x, model);
  const Index n = x.rows();
  const Index m = static_cast<Index>(model.size());
  const Index q = static_cast<Index>(basis.complement.size());

  SelectionEvent ev;
  ev.model = model;
  ev.signs = signs;
  ev.a.resize(2 * q + m, n);
  ev.b.resize(2 * q + m);

  if (m == 0) {
    const Matrix xt = x.transpose() / lambda;
    ev.a.topRows(q) = xt;
    ev.a.middleRows(q, q) = -xt;
    ev.b.setOnes();
    return ev;
  }

  // (I - P_M) X_c, formed without the n x n projector.
  const Matrix xc_perp = basis.xc - basis.xm * (basis.gram_inv * (basis.xm.transpose() * basis.xc));
  const Matrix top = xc_perp.transpose() / lambda;
  const Matrix ginv_xmt = basis.gram_inv * basis.xm.transpose();
  const Vector qs = basis.xc.transpose() * (basis.xm * (basis.gram_inv * signs));
  const Vector gs = basis.gram_inv * signs;

  ev.a.topRows(q) = top;
  ev.a.middleRows(q, q) = -top;
  ev.a.bottomRows(m) = -(signs.asDiagonal() * ginv_xmt) / lambda;
  ev.b.head(q) = Vector::Ones(q) - qs;
  ev.b.segment(q, q) = Vector::Ones(q) + qs;
  ev.b.tail(m) = -(signs.cwiseProduct(gs));
  return ev;
}

bool event_membership(const SelectionEvent& ev, const Vector& wy, double slack) {
  if (ev.a.rows() == 0) return true;
  const Vector lhs = ev.a * wy;
  for (Index k = 0; k < lhs.size(); ++k) {
    if (!(lhs[k] <= ev.b[k] + slack)) return false;
  }
  return true;
}

}  // namespace siprop
