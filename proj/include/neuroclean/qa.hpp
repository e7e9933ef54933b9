#pragma once

#include <optional>
#include <vector>

#include "neuroclean/recording.hpp"

namespace neuroclean::qa {

/// 10 log10(P(after) / P(before - after)) over channels active in both
/// recordings. A zero residual gives +inf, a zero output -inf.
/// Throws ShapeMismatch.
double snr_db(const Recording& before, const Recording& after);

/// Mean over active channels of the Pearson correlation between ln PSD and
/// ln(1/f) across the 1/f fit band. Channels with a constant log spectrum
/// contribute 0.
double one_over_f_similarity(const Recording& recording);

enum class Aggregation { Max, Mean };

struct ArtifactProbabilityOptions {
  Aggregation aggregation = Aggregation::Max;
  /// Aggregated robust z at which the probability is 0.5.
  double threshold = 2.0;
};

/// Per-component artifact probability from the raw MARA feature matrix
/// (components x 5). Robust z-scores (median / 1.4826 MAD) of the skewness,
/// lambda and fit-error columns are aggregated in absolute value and mapped
/// through logistic(agg - threshold). Throws DegeneratePopulation for fewer
/// than 3 components.
std::vector<double> artifact_probability(const Matrix& features,
                                         const ArtifactProbabilityOptions& options = {});

struct Retention {
  double channels_retained_fraction = 1.0;
  double components_rejected_fraction = 0.0;
};

/// Counts the union of rejected indices across the reports of one run.
Retention retention_ratios(const std::vector<StageReport>& reports, int n_channels, int n_components);

}  // namespace neuroclean::qa
