#include "neuroclean/ica.hpp"

#include <cmath>
#include <random>

#include "neuroclean/error.hpp"

namespace neuroclean::ica {

namespace {

// (W W^T)^{-1/2} W, which leaves W with orthonormal rows.
Eigen::MatrixXd symmetric_decorrelation(const Eigen::MatrixXd& w) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(w * w.transpose());
  const Eigen::VectorXd d = es.eigenvalues().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose() * w;
}

}  // namespace

Whitened whiten(const Matrix& data, std::optional<int> max_components) {
  const Eigen::Index m = data.rows();
  const Eigen::Index n = data.cols();
  if (m < 2) throw Error(ErrorCode::InvalidArgument, "whitening needs at least two channels");
  if (n <= m) throw Error(ErrorCode::InvalidArgument, "whitening needs more samples than channels");

  Whitened out;
  out.mean = data.rowwise().mean();
  const Matrix centered = data.colwise() - out.mean;
  Eigen::MatrixXd cov = (centered * centered.transpose()) / static_cast<double>(n);
  cov = 0.5 * (cov + cov.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  const double top = es.eigenvalues().maxCoeff();
  if (!(top > 0.0)) throw Error(ErrorCode::RankZero, "data has no variance to whiten");

  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = m - 1; i >= 0; --i) {
    if (es.eigenvalues()(i) > 1e-10 * top) keep.push_back(i);
  }
  if (max_components && *max_components > 0 && static_cast<std::size_t>(*max_components) < keep.size()) {
    keep.resize(static_cast<std::size_t>(*max_components));
  }
  const auto k = static_cast<Eigen::Index>(keep.size());
  out.whitening.resize(k, m);
  out.dewhitening.resize(m, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    Eigen::VectorXd e = es.eigenvectors().col(keep[static_cast<std::size_t>(j)]);
    Eigen::Index arg = 0;
    e.cwiseAbs().maxCoeff(&arg);
    if (e(arg) < 0.0) e = -e;
    const double lambda = es.eigenvalues()(keep[static_cast<std::size_t>(j)]);
    out.whitening.row(j) = e.transpose() / std::sqrt(lambda);
    out.dewhitening.col(j) = e * std::sqrt(lambda);
  }
  out.data = out.whitening * centered;
  return out;
}

ComponentDecomposition fast_ica(const Matrix& data, std::optional<int> n_components,
                                std::uint64_t seed, double tol, int max_iter) {
  if (!(tol > 0.0) || max_iter < 1) throw Error(ErrorCode::InvalidArgument, "invalid ICA tolerance");
  const Whitened wh = whiten(data, n_components);
  const Eigen::Index k = wh.data.rows();
  const Eigen::Index n = wh.data.cols();
  const Eigen::MatrixXd z = wh.data;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd w(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j) w(i, j) = gauss(rng);
  w = symmetric_decorrelation(w);

  ComponentDecomposition out;
  for (int it = 1; it <= max_iter; ++it) {
    const Eigen::MatrixXd g = (w * z).array().tanh().matrix();
    const Eigen::VectorXd g_prime = (1.0 - g.array().square()).rowwise().mean();
    Eigen::MatrixXd w_new = (g * z.transpose()) / static_cast<double>(n) - g_prime.asDiagonal() * w;
    w_new = symmetric_decorrelation(w_new);
    const double lim = (1.0 - (w_new * w.transpose()).diagonal().array().abs()).abs().maxCoeff();
    w = w_new;
    out.iterations = it;
    if (lim < tol) {
      out.converged = true;
      break;
    }
  }

  out.sources = w * z;
  out.unmixing = w * wh.whitening;
  out.mixing = wh.dewhitening * w.transpose();
  out.whitening_matrix = wh.whitening;
  out.mean_vector = wh.mean;
  out.n_channels_total = static_cast<int>(data.rows());
  for (int c = 0; c < data.rows(); ++c) out.channel_index_map.push_back(c);
  return out;
}

ComponentDecomposition decompose(const Recording& recording, const PipelineConfig& config) {
  const auto channels = recording.active_channels();
  Matrix active(static_cast<Eigen::Index>(channels.size()), recording.n_samples());
  for (std::size_t i = 0; i < channels.size(); ++i) active.row(static_cast<Eigen::Index>(i)) = recording.data.row(channels[i]);
  auto dec = fast_ica(active, std::nullopt, config.random_seed, config.ica_tol, config.ica_max_iter);
  dec.channel_index_map = channels;
  dec.n_channels_total = static_cast<int>(recording.n_channels());
  return dec;
}

Matrix remix(const ComponentDecomposition& dec, const Matrix& sources) {
  if (sources.rows() != dec.mixing.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "source count differs from the mixing matrix");
  }
  const Matrix active = (dec.mixing * sources).colwise() + dec.mean_vector;
  Matrix out = Matrix::Zero(dec.n_channels_total, sources.cols());
  for (std::size_t i = 0; i < dec.channel_index_map.size(); ++i) {
    out.row(dec.channel_index_map[i]) = active.row(static_cast<Eigen::Index>(i));
  }
  return out;
}

double amari_index(const Matrix& p_in) {
  const Eigen::Index k = p_in.rows();
  if (k != p_in.cols() || k < 2) throw Error(ErrorCode::ShapeMismatch, "Amari index needs a square matrix, k >= 2");
  const Eigen::MatrixXd p = p_in.cwiseAbs();
  double rows = 0.0, cols = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) rows += p.row(i).sum() / p.row(i).maxCoeff() - 1.0;
  for (Eigen::Index j = 0; j < k; ++j) cols += p.col(j).sum() / p.col(j).maxCoeff() - 1.0;
  return (rows + cols) / (2.0 * static_cast<double>(k) * static_cast<double>(k - 1));
}

}  // namespace neuroclean::ica
