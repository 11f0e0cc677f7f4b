#include "siprop/core_model.hpp"

#include <cmath>
#include <string>

#include "siprop/error.hpp"

namespace siprop {

std::vector<int> Dataset::arm_labels() const {
  std::vector<int> labels(static_cast<size_t>(t.rows()), -1);
  for (Eigen::Index i = 0; i < t.rows(); ++i) {
    for (Eigen::Index h = 0; h < t.cols(); ++h) {
      if (t(i, h) == 1.0) labels[static_cast<size_t>(i)] = static_cast<int>(h);
    }
  }
  return labels;
}

Matrix one_hot(const std::vector<int>& labels, int arms) {
  Matrix t = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), arms);
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= arms) {
      throw Error(ErrorCode::InvalidAssignment,
                  "label " + std::to_string(labels[i]) + " at row " + std::to_string(i) +
                      " outside [0," + std::to_string(arms) + ")");
    }
    t(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  }
  return t;
}

Contrast::Contrast(Vector c) : c_(std::move(c)) {
  if (c_.size() < 2) throw Error(ErrorCode::InvalidContrast, "contrast needs at least two arms");
  if (!c_.allFinite()) throw Error(ErrorCode::InvalidContrast, "non-finite contrast entry");
  if (std::abs(c_.sum()) > 1e-12) throw Error(ErrorCode::InvalidContrast, "entries must sum to 0");
  if (c_.cwiseAbs().maxCoeff() == 0.0) throw Error(ErrorCode::InvalidContrast, "zero contrast");
}

Contrast Contrast::difference() {
  Vector c(2);
  c << -1.0, 1.0;
  return Contrast(c);
}

void validate_dataset(const Dataset& ds) {
  const auto n = ds.y.size();
  if (n < 2) throw Error(ErrorCode::DimensionMismatch, "need n >= 2");
  if (ds.x.cols() < 1) throw Error(ErrorCode::DimensionMismatch, "need p >= 1");
  if (ds.t.cols() < 2) throw Error(ErrorCode::DimensionMismatch, "need H >= 2");
  if (ds.x.rows() != n || ds.t.rows() != n) {
    throw Error(ErrorCode::DimensionMismatch, "X and T must have n rows");
  }
  if (!ds.covariate_names.empty() &&
      static_cast<Eigen::Index>(ds.covariate_names.size()) != ds.x.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "covariate name count differs from p");
  }
  if (!ds.y.allFinite() || !ds.x.allFinite()) {
    throw Error(ErrorCode::DimensionMismatch, "non-finite value in Y or X");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    int ones = 0;
    for (Eigen::Index h = 0; h < ds.t.cols(); ++h) {
      const double v = ds.t(i, h);
      if (v == 1.0) {
        ++ones;
      } else if (v != 0.0) {
        ones = -1;
        break;
      }
    }
    if (ones != 1) {
      throw Error(ErrorCode::InvalidAssignment, "row " + std::to_string(i) + " of T is not one-hot");
    }
  }
  if (ds.e) {
    const Matrix& e = *ds.e;
    if (e.rows() != n || e.cols() != ds.t.cols()) {
      throw Error(ErrorCode::DimensionMismatch, "propensity matrix must be n x H");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index h = 0; h < e.cols(); ++h) {
        const double v = e(i, h);
        if (!(v > 0.0 && v < 1.0)) {
          throw Error(ErrorCode::PositivityViolation,
                      "propensity at row " + std::to_string(i) + " outside (0,1)");
        }
      }
      if (std::abs(e.row(i).sum() - 1.0) > 1e-8) {
        throw Error(ErrorCode::PositivityViolation,
                    "propensities at row " + std::to_string(i) + " do not sum to 1");
      }
    }
  }
}

WeightedOutcome compute_weighted_outcome(const Vector& y, const Matrix& t, const Matrix& e,
                                         const Contrast& c) {
  if (c.size() != t.cols() || e.cols() != t.cols() || e.rows() != t.rows() || y.size() != t.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "contrast, T, e and Y disagree in shape");
  }
  WeightedOutcome out;
  out.w = Vector::Zero(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    double wi = 0.0;
    for (Eigen::Index h = 0; h < t.cols(); ++h) {
      if (t(i, h) != 0.0) wi += c[h] * t(i, h) / e(i, h);
    }
    out.w[i] = wi;
  }
  out.wy = out.w.cwiseProduct(y);
  return out;
}

WeightedOutcome compute_weighted_outcome(const Dataset& ds, const Contrast& c) {
  if (!ds.e) throw Error(ErrorCode::MissingPropensity, "dataset carries no propensities");
  return compute_weighted_outcome(ds.y, ds.t, *ds.e, c);
}

}  // namespace siprop
