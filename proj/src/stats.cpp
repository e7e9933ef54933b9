#include "neuroclean/stats.hpp"

#include <algorithm>
#include <cmath>

#include "neuroclean/error.hpp"

namespace neuroclean::dsp {

std::uint64_t seed_mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double mean(std::span<const double> x) {
  if (x.empty()) throw Error(ErrorCode::InvalidArgument, "mean of empty input");
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double variance(std::span<const double> x, int ddof) {
  if (x.size() <= static_cast<std::size_t>(ddof)) {
    throw Error(ErrorCode::InvalidArgument, "too few samples for variance");
  }
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - static_cast<std::size_t>(ddof));
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw Error(ErrorCode::InvalidArgument, "pearson needs equal lengths >= 2");
  }
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorCode::ConstantInput, "pearson of constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double skewness(std::span<const double> x) {
  if (x.size() < 3) throw Error(ErrorCode::InvalidArgument, "skewness needs >= 3 samples");
  const double m = mean(x);
  double m2 = 0.0, m3 = 0.0;
  for (double v : x) {
    const double d = v - m;
    m2 += d * d;
    m3 += d * d * d;
  }
  const auto n = static_cast<double>(x.size());
  m2 /= n;
  m3 /= n;
  // Relative test: float noise on a constant vector leaves m2 ~ 1e-32 * m^2.
  if (m2 <= 1e-28 * (m * m) || m2 == 0.0) {
    throw Error(ErrorCode::ConstantInput, "skewness of constant input");
  }
  return m3 / std::pow(m2, 1.5);
}

double median(std::vector<double> x) { return percentile(std::move(x), 50.0); }

double percentile(std::vector<double> x, double q) {
  if (x.empty()) throw Error(ErrorCode::InvalidArgument, "percentile of empty input");
  if (!(q >= 0.0 && q <= 100.0)) throw Error(ErrorCode::InvalidArgument, "percentile out of range");
  std::sort(x.begin(), x.end());
  const double pos = q / 100.0 * static_cast<double>(x.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, x.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return x[lo] + frac * (x[hi] - x[lo]);
}

double mad(std::span<const double> x) {
  const double med = median({x.begin(), x.end()});
  std::vector<double> dev;
  dev.reserve(x.size());
  for (double v : x) dev.push_back(std::abs(v - med));
  return median(std::move(dev));
}

}  // namespace neuroclean::dsp
