#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace neuroclean::ml {

/// Per-feature z-scoring fitted on training rows. Zero-variance features are
/// centred but not scaled.
struct Standardizer {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;

  static Standardizer fit(const Eigen::MatrixXd& x);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
};

struct MlrOptions {
  double l2 = 1.0;  // penalty 0.5 * l2 * ||W||^2 against the summed cross-entropy
  double tol = 1e-6;
  int max_iter = 500;
};

struct MlrModel {
  Eigen::MatrixXd weights;  // K x D
  Eigen::VectorXd biases;   // K
  std::vector<int> classes;  // label of each row of `weights`, ascending
  bool converged = false;
  int iterations = 0;
};

/// Multinomial logistic regression by full-batch gradient descent with
/// Barzilai-Borwein steps and Armijo backtracking, starting from zero
/// weights (so the result does not depend on the seed). Needs at least two
/// classes.
MlrModel train_mlr(const Eigen::MatrixXd& x, const std::vector<int>& y, std::uint64_t seed = 0,
                   const MlrOptions& options = {});

/// Rows are trials, columns follow model.classes.
Eigen::MatrixXd predict_proba(const MlrModel& model, const Eigen::MatrixXd& x);
std::vector<int> predict(const MlrModel& model, const Eigen::MatrixXd& x);

/// Features by descending L2 norm of their weight column; ties keep the
/// lower index first.
std::vector<int> rank_features(const MlrModel& model);

/// Label of the nearest training row (Euclidean); ties go to the lowest row.
int knn1_predict(const Eigen::MatrixXd& train_x, const std::vector<int>& train_y,
                 const Eigen::RowVectorXd& query);
std::vector<int> knn1_predict_rows(const Eigen::MatrixXd& train_x, const std::vector<int>& train_y,
                                   const Eigen::MatrixXd& queries);

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth);

}  // namespace neuroclean::ml
