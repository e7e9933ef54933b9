#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "neuroclean/mlr.hpp"
#include "neuroclean/recording.hpp"

namespace neuroclean::ml {

struct FeatureDataset {
  Eigen::MatrixXd x;               // trials x features
  std::vector<int> y;              // index into class_names
  std::vector<std::string> class_names;
  std::vector<std::int64_t> keys;  // stable trial identity
  std::string band_tag = "full";

  Eigen::Index n_trials() const { return x.rows(); }
};

/// Mean absolute amplitude of every channel over each trial. Class codes
/// follow the sorted label names.
FeatureDataset mean_spectral_amplitude(const EpochedData& epoched);

struct Band {
  std::string name;
  double lo_hz = 0.0;
  double hi_hz = 0.0;  // ignored for "full"
};

/// theta, alpha, beta, low_gamma, high_gamma, low_ripple, high_ripple,
/// multi_unit, full.
const std::vector<Band>& standard_bands();
const Band& band_by_name(const std::string& name);

/// Zero-phase Butterworth bandpass of the active channels. The upper edge is
/// dropped (highpass) when it reaches Nyquist; "full" returns the input.
Recording band_segment(const Recording& recording, const Band& band, int order = 4);

/// Random undersampling of every class to the minority count, rows returned
/// in key order. Throws ClassTooSmall if a class has fewer than 2 trials.
FeatureDataset balance_classes(const FeatureDataset& dataset, std::uint64_t seed);

struct SearchOptions {
  int repeats = 10;   // R
  int folds = 5;      // K
  double epsilon = 1e-3;
  int patience = 30;
  std::uint64_t seed = 0;
  /// Feature order to search; empty = rank with an MLR fitted on the data.
  std::vector<int> ranking;
};

struct SearchResult {
  std::vector<int> ranking;
  // Index d - 1 holds the mean accuracy with the top d features.
  std::vector<double> mlr_accuracy;
  std::vector<double> mlr_accuracy_shuffled;
  std::vector<double> knn_accuracy;
  std::vector<double> knn_accuracy_shuffled;
  int stop_d = 0;
};

/// Stratified K-fold assignment for one repetition. Depends only on the
/// seed, the repetition, the labels and the trial keys.
std::vector<int> stratified_folds(const FeatureDataset& dataset, int folds, std::uint64_t seed, int repetition);

SearchResult incremental_feature_search(const FeatureDataset& dataset, const SearchOptions& options);

/// Micro-averaged one-vs-rest ROC AUC from class probabilities (columns in
/// class-code order) by the Mann-Whitney rank statistic with average ranks.
/// Throws SingleClassTest when y holds only one class.
double roc_auc_ovr_micro(const Eigen::MatrixXd& probabilities, const std::vector<int>& y);
double roc_auc_ovr_micro(const MlrModel& model, const Eigen::MatrixXd& x, const std::vector<int>& y);

/// (fpr, tpr) points of the pooled one-vs-rest ROC curve, from (0,0) to (1,1).
std::vector<std::pair<double, double>> roc_curve_ovr_micro(const Eigen::MatrixXd& probabilities,
                                                           const std::vector<int>& y);

struct EvalOptions {
  int repeats = 100;
  double train_fraction = 0.8;
  std::vector<std::string> bands{"full"};
  std::uint64_t seed = 0;
  bool balance_before_split = true;
  /// Runs the incremental feature search on the first split's training set.
  bool run_search = false;
  SearchOptions search;
};

struct StepEvaluation {
  std::string stage;
  std::string band;
  std::vector<double> mlr_test_accuracy;
  std::vector<double> mlr_train_accuracy;
  std::vector<double> mlr_shuffled_test_accuracy;
  std::vector<double> knn_test_accuracy;
  std::vector<double> roc_auc;
  std::vector<std::pair<double, double>> roc_curve;  // first split
  std::optional<SearchResult> search;
  std::vector<std::string> warnings;

  double mean_test_accuracy() const;
};

/// For every (stage, band): band segment, epoch, features, balance, then
/// `repeats` stratified train/test splits with MLR, 1NN and a shuffled-label
/// MLR baseline.
std::vector<StepEvaluation> evaluate_pipeline_steps(
    const std::vector<std::pair<std::string, Recording>>& staged, const std::vector<Event>& events,
    const PipelineConfig& config, const EvalOptions& options);

Json to_json(const SearchResult& result);
Json to_json(const StepEvaluation& evaluation);

}  // namespace neuroclean::ml
