#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace neuroclean::dsp {

/// splitmix64 finalizer of (a, b); derives independent sub-seeds.
std::uint64_t seed_mix(std::uint64_t a, std::uint64_t b);

double mean(std::span<const double> x);

/// Variance with the given delta degrees of freedom (0 = population, 1 = sample).
double variance(std::span<const double> x, int ddof = 0);

/// Pearson product-moment correlation. Throws ConstantInput if either side
/// has zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

/// Biased-moment sample skewness m3 / m2^1.5. Throws ConstantInput.
double skewness(std::span<const double> x);

double median(std::vector<double> x);

/// Percentile q in [0, 100] with linear interpolation between order statistics.
double percentile(std::vector<double> x, double q);

/// Median absolute deviation around the median (unscaled).
double mad(std::span<const double> x);

}  // namespace neuroclean::dsp
