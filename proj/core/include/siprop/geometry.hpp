#pragma once

#include "siprop/lasso.hpp"
#include "siprop/truncnorm.hpp"

namespace siprop {

/// Split of the weighted outcome along eta: wy = z + d * stat.
struct Decomposition {
  Vector eta;
  Vector d;
  Vector z;
  double stat = 0.0;
};

struct TruncationBounds {
  double vminus;
  double vplus;
  double vzero;
};

/// X_M (X_M'X_M)^{-1} e_j for j in the model.
Vector eta_vector(const ModelBasis& basis, Index j);
Vector eta_vector(const Matrix& x, const IndexList& model, Index j);

Decomposition decompose(const Vector& w, const Vector& wy, const Vector& eta);

/// Range of t for which A (z + d t) <= b, plus the slack of rows that do not
/// depend on t.
TruncationBounds truncation_bounds(const SelectionEvent& ev, const Decomposition& dec,
                                   double zero_tol = 1e-11);

/// Truncation bounds for every sign vector of a fixed model, without
/// materializing the n-column constraint matrices.
class LineGeometry {
 public:
  LineGeometry(const ModelBasis& basis, double lambda, const Decomposition& dec,
               double zero_tol = 1e-11);

  TruncationBounds bounds(const Vector& signs) const;
  /// [vminus, vplus] for the given signs, or nothing if the piece is empty
  /// or its t-free rows are violated.
  bool piece(const Vector& signs, Interval& out) const;

 private:
  double zero_tol_;
  Vector gz_, gd_, hz_, hd_;
  Matrix q_;         // X_c' X_M G
  Matrix gram_inv_;  // G
};

constexpr int kDefaultUnionCap = 12;

/// Union over all sign vectors of the line pieces that keep the model selected.
TruncationRegion sign_union_region(const ModelBasis& basis, double lambda, const Decomposition& dec,
                                   int union_cap = kDefaultUnionCap);
TruncationRegion sign_union_region(const Matrix& x, const IndexList& model, double lambda,
                                   const Decomposition& dec, int union_cap = kDefaultUnionCap);

/// Single-interval region for the observed signs only.
TruncationRegion observed_sign_region(const ModelBasis& basis, double lambda, const Vector& signs,
                                      const Decomposition& dec);

}  // namespace siprop
