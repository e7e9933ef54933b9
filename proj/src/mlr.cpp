#include "neuroclean/mlr.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "neuroclean/error.hpp"

namespace neuroclean::ml {

namespace {

struct Objective {
  const Eigen::MatrixXd& x;
  const Eigen::MatrixXd& onehot;
  double l2;

  // Mean cross-entropy plus (l2 / 2n) ||W||^2; the gradient goes to gw, gb.
  double eval(const Eigen::MatrixXd& w, const Eigen::VectorXd& b, Eigen::MatrixXd* gw,
              Eigen::VectorXd* gb) const {
    const auto n = static_cast<double>(x.rows());
    Eigen::MatrixXd z = (x * w.transpose()).rowwise() + b.transpose();
    const Eigen::VectorXd zmax = z.rowwise().maxCoeff();
    z.colwise() -= zmax;
    Eigen::MatrixXd p = z.array().exp().matrix();
    const Eigen::VectorXd norm = p.rowwise().sum();
    const Eigen::VectorXd lse = norm.array().log().matrix();
    double loss = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      loss += lse(i) - (z.row(i).array() * onehot.row(i).array()).sum();
    }
    loss = loss / n + 0.5 * l2 / n * w.squaredNorm();
    if (gw) {
      p.array().colwise() /= norm.array();
      const Eigen::MatrixXd diff = p - onehot;
      *gw = diff.transpose() * x / n + (l2 / n) * w;
      *gb = diff.colwise().sum().transpose() / n;
    }
    return loss;
  }
};

double inf_norm(const Eigen::MatrixXd& gw, const Eigen::VectorXd& gb) {
  return std::max(gw.cwiseAbs().maxCoeff(), gb.size() ? gb.cwiseAbs().maxCoeff() : 0.0);
}

}  // namespace

Standardizer Standardizer::fit(const Eigen::MatrixXd& x) {
  Standardizer s;
  s.mean = x.colwise().mean();
  s.scale = ((x.rowwise() - s.mean).array().square().colwise().mean()).sqrt().matrix();
  for (Eigen::Index j = 0; j < s.scale.size(); ++j) {
    if (!(s.scale(j) > 1e-12 * std::max(1.0, std::abs(s.mean(j))))) s.scale(j) = 1.0;
  }
  return s;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& x) const {
  return (x.rowwise() - mean).array().rowwise() / scale.array();
}

MlrModel train_mlr(const Eigen::MatrixXd& x, const std::vector<int>& y, std::uint64_t /*seed*/,
                   const MlrOptions& options) {
  if (static_cast<std::size_t>(x.rows()) != y.size() || y.empty()) {
    throw Error(ErrorCode::ShapeMismatch, "one label per training row required");
  }
  MlrModel model;
  model.classes = y;
  std::sort(model.classes.begin(), model.classes.end());
  model.classes.erase(std::unique(model.classes.begin(), model.classes.end()), model.classes.end());
  if (model.classes.size() < 2) throw Error(ErrorCode::InvalidArgument, "MLR needs at least two classes");
  const auto k = static_cast<Eigen::Index>(model.classes.size());
  Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(x.rows(), k);
  for (std::size_t i = 0; i < y.size(); ++i) {
    const auto pos = std::lower_bound(model.classes.begin(), model.classes.end(), y[i]) - model.classes.begin();
    onehot(static_cast<Eigen::Index>(i), pos) = 1.0;
  }

  const Objective obj{x, onehot, options.l2};
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(k, x.cols());
  Eigen::VectorXd b = Eigen::VectorXd::Zero(k);
  Eigen::MatrixXd gw, gw_new;
  Eigen::VectorXd gb, gb_new;
  double f = obj.eval(w, b, &gw, &gb);
  double step = 1.0;
  for (int it = 1; it <= options.max_iter; ++it) {
    model.iterations = it - 1;
    const double gnorm = inf_norm(gw, gb);
    if (gnorm < options.tol) {
      model.converged = true;
      break;
    }
    const double g2 = gw.squaredNorm() + gb.squaredNorm();
    double t = step;
    Eigen::MatrixXd w_new;
    Eigen::VectorXd b_new;
    double f_new = 0.0;
    for (int bt = 0; bt < 60; ++bt) {
      w_new = w - t * gw;
      b_new = b - t * gb;
      f_new = obj.eval(w_new, b_new, nullptr, nullptr);
      if (f_new <= f - 1e-4 * t * g2) break;
      t *= 0.5;
    }
    obj.eval(w_new, b_new, &gw_new, &gb_new);
    // Barzilai-Borwein step for the next iteration.
    const double ss = (w_new - w).squaredNorm() + (b_new - b).squaredNorm();
    const double sy = ((w_new - w).array() * (gw_new - gw).array()).sum() +
                      (b_new - b).dot(gb_new - gb);
    step = (sy > 0.0) ? std::clamp(ss / sy, 1e-6, 1e6) : std::min(2.0 * t, 1e6);
    w = std::move(w_new);
    b = std::move(b_new);
    gw = std::move(gw_new);
    gb = std::move(gb_new);
    f = f_new;
    model.iterations = it;
  }
  if (!model.converged && inf_norm(gw, gb) < options.tol) model.converged = true;
  model.weights = w;
  model.biases = b;
  return model;
}

Eigen::MatrixXd predict_proba(const MlrModel& model, const Eigen::MatrixXd& x) {
  if (x.cols() != model.weights.cols()) throw Error(ErrorCode::ShapeMismatch, "feature count mismatch");
  Eigen::MatrixXd z = (x * model.weights.transpose()).rowwise() + model.biases.transpose();
  const Eigen::VectorXd zmax = z.rowwise().maxCoeff();
  z.colwise() -= zmax;
  Eigen::MatrixXd p = z.array().exp().matrix();
  p.array().colwise() /= p.rowwise().sum().array();
  return p;
}

std::vector<int> predict(const MlrModel& model, const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd p = predict_proba(model, x);
  std::vector<int> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    Eigen::Index arg = 0;
    p.row(i).maxCoeff(&arg);
    out[static_cast<std::size_t>(i)] = model.classes[static_cast<std::size_t>(arg)];
  }
  return out;
}

std::vector<int> rank_features(const MlrModel& model) {
  const Eigen::VectorXd importance = model.weights.colwise().norm().transpose();
  std::vector<int> idx(static_cast<std::size_t>(importance.size()));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int c) { return importance(a) > importance(c); });
  return idx;
}

int knn1_predict(const Eigen::MatrixXd& train_x, const std::vector<int>& train_y,
                 const Eigen::RowVectorXd& query) {
  if (train_x.rows() == 0 || static_cast<std::size_t>(train_x.rows()) != train_y.size()) {
    throw Error(ErrorCode::InvalidArgument, "1NN needs a non-empty labelled training set");
  }
  Eigen::Index best = 0;
  double best_d = (train_x.row(0) - query).squaredNorm();
  for (Eigen::Index i = 1; i < train_x.rows(); ++i) {
    const double d = (train_x.row(i) - query).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return train_y[static_cast<std::size_t>(best)];
}

std::vector<int> knn1_predict_rows(const Eigen::MatrixXd& train_x, const std::vector<int>& train_y,
                                   const Eigen::MatrixXd& queries) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(queries.rows()));
  for (Eigen::Index i = 0; i < queries.rows(); ++i) out.push_back(knn1_predict(train_x, train_y, Eigen::RowVectorXd(queries.row(i))));
  return out;
}

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.size() != truth.size() || truth.empty()) throw Error(ErrorCode::ShapeMismatch, "accuracy size mismatch");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

}  // namespace neuroclean::ml
