#pragma once

#include <vector>

#include "siprop/core_model.hpp"

namespace siprop {

using Index = Eigen::Index;
using IndexList = std::vector<Index>;

struct LassoOptions {
  int max_sweeps = 100000;
  /// Sweeps stop when the largest coefficient change falls below
  /// change_tol * (1 + max|wy|).
  double change_tol = 1e-10;
  /// Accepted KKT residual is kkt_tol * max(1, lambda).
  double kkt_tol = 1e-8;
  /// Re-solve the active block exactly once the support has settled.
  bool polish = true;
  /// Relative gap below which an inactive constraint counts as a tie.
  double tie_tol = 1e-12;
  /// Record the objective after every sweep (for diagnostics and tests).
  bool trace_objective = false;
};

struct LassoFit {
  Vector beta;
  IndexList active;
  Vector signs;
  double lambda = 0.0;
  double kkt_residual = 0.0;
  int sweeps = 0;
  std::vector<double> objective_trace;
};

/// Minimizes 0.5 * ||wy - X b||^2 + lambda * ||b||_1 by cyclic coordinate descent.
LassoFit solve_ipw_lasso(const Matrix& x, const Vector& wy, double lambda,
                         const LassoOptions& opts = {});

double lasso_objective(const Matrix& x, const Vector& wy, double lambda, const Vector& beta);

double kkt_residual(const Matrix& x, const Vector& wy, double lambda, const Vector& beta);

/// Column split of X into a model block and its complement, with the
/// inverse Gram matrix of the model block.
struct ModelBasis {
  IndexList model;
  IndexList complement;
  Matrix xm;
  Matrix xc;
  Matrix gram_inv;

  ModelBasis(const Matrix& x, const IndexList& model);

  /// Position of column j inside the model, or throws IndexNotInModel.
  Index position(Index j) const;
};

/// Affine description {A wy <= b} of the event that the Lasso selects (M, s).
struct SelectionEvent {
  IndexList model;
  Vector signs;
  Matrix a;
  Vector b;
};

SelectionEvent selection_polyhedron(const Matrix& x, const IndexList& model, const Vector& signs,
                                    double lambda);

bool event_membership(const SelectionEvent& ev, const Vector& wy, double slack = 1e-9);

/// Complement of a sorted index set within [0, p).
IndexList complement_of(const IndexList& model, Index p);

}  // namespace siprop
