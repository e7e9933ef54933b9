#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "neuroclean/recording.hpp"

namespace neuroclean::ica {

struct Whitened {
  Matrix data;       // k x n, identity covariance
  Matrix whitening;  // k x m, D^{-1/2} E^T over the retained eigenpairs
  Matrix dewhitening;  // m x k, E D^{1/2}
  Eigen::VectorXd mean;
};

/// PCA whitening with covariance normalized by n. Eigenvalues below 1e-10
/// times the largest are dropped, as are any beyond `max_components`.
/// Throws InvalidArgument for fewer than 2 channels or n_samples <= n_channels,
/// RankZero for data without variance.
Whitened whiten(const Matrix& data, std::optional<int> max_components = std::nullopt);

struct ComponentDecomposition {
  Matrix sources;    // k x n, unit variance rows
  Matrix mixing;     // m x k
  Matrix unmixing;   // k x m
  Matrix whitening_matrix;
  Eigen::VectorXd mean_vector;
  /// Row r of the active data corresponds to channel channel_index_map[r].
  std::vector<int> channel_index_map;
  int n_channels_total = 0;
  bool converged = false;
  int iterations = 0;

  int n_components() const { return static_cast<int>(sources.rows()); }
};

/// Symmetric FastICA with the log-cosh contrast (g = tanh). Deterministic for a
/// given seed. Non-convergence is reported through `converged`, not thrown.
ComponentDecomposition fast_ica(const Matrix& data, std::optional<int> n_components,
                                std::uint64_t seed, double tol = 1e-4, int max_iter = 200);

/// Runs fast_ica on the active channels of a recording.
ComponentDecomposition decompose(const Recording& recording, const PipelineConfig& config);

/// Mixes sources back to a full-size channel matrix (masked channels zero).
Matrix remix(const ComponentDecomposition& decomposition, const Matrix& sources);

/// Normalized Amari index of a square gain matrix P = W A: 0 when P is a
/// scaled permutation, at most 1.
double amari_index(const Matrix& p);

}  // namespace neuroclean::ica
