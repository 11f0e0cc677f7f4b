#include "siprop/geometry.hpp"

#include <cmath>
#include <limits>

#include "siprop/error.hpp"

namespace siprop {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Folds one constraint row  ad * t <= r  into the running bounds.
void fold_row(double ad, double r, double zero_tol, TruncationBounds& tb) {
  if (ad < -zero_tol) {
    tb.vminus = std::max(tb.vminus, r / ad);
  } else if (ad > zero_tol) {
    tb.vplus = std::min(tb.vplus, r / ad);
  } else {
    tb.vzero = std::min(tb.vzero, r);
  }
}

}  // namespace

Vector eta_vector(const ModelBasis& basis, Index j) {
  const Index k = basis.position(j);
  return basis.xm * basis.gram_inv.col(k);
}

Vector eta_vector(const Matrix& x, const IndexList& model, Index j) {
  return eta_vector(ModelBasis(x, model), j);
}

Decomposition decompose(const Vector& w, const Vector& wy, const Vector& eta) {
  if (w.size() != eta.size() || wy.size() != eta.size()) {
    throw Error(ErrorCode::DimensionMismatch, "w, wy and eta lengths differ");
  }
  const Vector w2eta = w.cwiseAbs2().cwiseProduct(eta);
  const double denom = w2eta.dot(eta);
  if (!(denom > 0.0)) throw Error(ErrorCode::DegenerateDirection, "eta' W^2 eta is zero");
  Decomposition dec;
  dec.eta = eta;
  dec.d = w2eta / denom;
  dec.stat = eta.dot(wy);
  dec.z = wy - dec.d * dec.stat;
  return dec;
}

TruncationBounds truncation_bounds(const SelectionEvent& ev, const Decomposition& dec, double zero_tol) {
  TruncationBounds tb{-kInf, kInf, kInf};
  if (ev.a.rows() == 0) return tb;
  const Vector ad = ev.a * dec.d;
  const Vector az = ev.a * dec.z;
  for (Index k = 0; k < ad.size(); ++k) fold_row(ad[k], ev.b[k] - az[k], zero_tol, tb);
  return tb;
}

LineGeometry::LineGeometry(const ModelBasis& basis, double lambda, const Decomposition& dec,
                           double zero_tol)
    : zero_tol_(zero_tol), gram_inv_(basis.gram_inv) {
  if (basis.model.empty()) throw Error(ErrorCode::InvalidArgument, "line geometry needs a nonempty model");
  auto perp = [&](const Vector& v) -> Vector {
    return v - basis.xm * (basis.gram_inv * (basis.xm.transpose() * v));
  };
  gz_ = basis.xc.transpose() * perp(dec.z) / lambda;
  gd_ = basis.xc.transpose() * perp(dec.d) / lambda;
  hz_ = basis.gram_inv * (basis.xm.transpose() * dec.z) / lambda;
  hd_ = basis.gram_inv * (basis.xm.transpose() * dec.d) / lambda;
  q_ = basis.xc.transpose() * basis.xm * basis.gram_inv;
}

TruncationBounds LineGeometry::bounds(const Vector& s) const {
  TruncationBounds tb{-kInf, kInf, kInf};
  const Vector qs = q_ * s;
  const Vector gs = gram_inv_ * s;
  for (Index k = 0; k < gz_.size(); ++k) {
    fold_row(gd_[k], 1.0 - qs[k] - gz_[k], zero_tol_, tb);
    fold_row(-gd_[k], 1.0 + qs[k] + gz_[k], zero_tol_, tb);
  }
  for (Index k = 0; k < s.size(); ++k) {
    // -s_k (h_z + h_d t)_k <= -s_k (G s)_k
    fold_row(-s[k] * hd_[k], -s[k] * gs[k] + s[k] * hz_[k], zero_tol_, tb);
  }
  return tb;
}

bool LineGeometry::piece(const Vector& signs, Interval& out) const {
  const TruncationBounds tb = bounds(signs);
  if (!(tb.vminus < tb.vplus) || tb.vzero < 0.0) return false;
  out = {tb.vminus, tb.vplus};
  return true;
}

TruncationRegion sign_union_region(const ModelBasis& basis, double lambda, const Decomposition& dec,
                                   int union_cap) {
  const Index m = static_cast<Index>(basis.model.size());
  if (m > union_cap || m > 30) {
    throw Error(ErrorCode::UnionCapExceeded,
                "model size " + std::to_string(m) + " exceeds union cap " + std::to_string(union_cap));
  }
  const LineGeometry geo(basis, lambda, dec);
  std::vector<Interval> pieces;
  Vector s(m);
  const unsigned long count = 1UL << m;
  for (unsigned long code = 0; code < count; ++code) {
    for (Index k = 0; k < m; ++k) s[k] = ((code >> k) & 1UL) ? 1.0 : -1.0;
    Interval iv;
    if (geo.piece(s, iv)) pieces.push_back(iv);
  }
  return TruncationRegion(std::move(pieces));
}

TruncationRegion sign_union_region(const Matrix& x, const IndexList& model, double lambda,
                                   const Decomposition& dec, int union_cap) {
  return sign_union_region(ModelBasis(x, model), lambda, dec, union_cap);
}

TruncationRegion observed_sign_region(const ModelBasis& basis, double lambda, const Vector& signs,
                                      const Decomposition& dec) {
  const LineGeometry geo(basis, lambda, dec);
  Interval iv;
  if (!geo.piece(signs, iv)) return TruncationRegion();
  return TruncationRegion({iv});
}

}  // namespace siprop
