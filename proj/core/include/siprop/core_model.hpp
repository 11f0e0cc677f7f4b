#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace siprop {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Observational data for an H-arm treatment comparison.
/// T is one-hot (n x H); e, when present, holds propensities per arm.
struct Dataset {
  Vector y;
  Matrix t;
  Matrix x;
  std::optional<Matrix> e;
  std::vector<std::string> covariate_names;

  Eigen::Index n() const { return y.size(); }
  Eigen::Index p() const { return x.cols(); }
  Eigen::Index arms() const { return t.cols(); }

  /// Arm index per unit (position of the 1 in each row of T).
  std::vector<int> arm_labels() const;
};

/// Builds a one-hot assignment matrix from integer labels in [0, arms).
Matrix one_hot(const std::vector<int>& labels, int arms);

class Contrast {
 public:
  explicit Contrast(Vector c);
  static Contrast difference();  // (-1, +1)

  const Vector& coefficients() const { return c_; }
  Eigen::Index size() const { return c_.size(); }
  double operator[](Eigen::Index h) const { return c_[h]; }

 private:
  Vector c_;
};

/// Diagonal of the IPW weight matrix and the weighted outcome.
struct WeightedOutcome {
  Vector w;
  Vector wy;
};

void validate_dataset(const Dataset& ds);

WeightedOutcome compute_weighted_outcome(const Dataset& ds, const Contrast& c);

/// Same as above with an explicit propensity matrix.
WeightedOutcome compute_weighted_outcome(const Vector& y, const Matrix& t, const Matrix& e,
                                         const Contrast& c);

}  // namespace siprop
