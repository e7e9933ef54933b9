#include "neuroclean/ml_eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "neuroclean/epoch.hpp"
#include "neuroclean/error.hpp"
#include "neuroclean/iir.hpp"
#include "neuroclean/stats.hpp"

namespace neuroclean::ml {

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) { return dsp::seed_mix(a, b); }
std::uint64_t mix(std::uint64_t a, std::uint64_t b, std::uint64_t c) { return mix(mix(a, b), c); }

// Row indices grouped by class, each group in key order.
std::vector<std::vector<std::size_t>> rows_by_class(const FeatureDataset& ds) {
  const std::size_t k = ds.class_names.size();
  std::vector<std::vector<std::size_t>> out(k);
  for (std::size_t i = 0; i < ds.y.size(); ++i) out[static_cast<std::size_t>(ds.y[i])].push_back(i);
  for (auto& g : out) {
    std::sort(g.begin(), g.end(), [&](std::size_t a, std::size_t b) { return ds.keys[a] < ds.keys[b]; });
  }
  return out;
}

FeatureDataset take_rows(const FeatureDataset& ds, std::vector<std::size_t> rows) {
  std::sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) { return ds.keys[a] < ds.keys[b]; });
  FeatureDataset out;
  out.class_names = ds.class_names;
  out.band_tag = ds.band_tag;
  out.x.resize(static_cast<Eigen::Index>(rows.size()), ds.x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.x.row(static_cast<Eigen::Index>(i)) = ds.x.row(static_cast<Eigen::Index>(rows[i]));
    out.y.push_back(ds.y[rows[i]]);
    out.keys.push_back(ds.keys[rows[i]]);
  }
  return out;
}

// Labels permuted among the trials, taken in key order.
std::vector<int> shuffled_labels(const FeatureDataset& ds, std::uint64_t seed) {
  std::vector<std::size_t> order(ds.y.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ds.keys[a] < ds.keys[b]; });
  std::vector<int> labels;
  for (std::size_t i : order) labels.push_back(ds.y[i]);
  std::mt19937_64 rng(seed);
  std::shuffle(labels.begin(), labels.end(), rng);
  std::vector<int> out(ds.y.size());
  for (std::size_t j = 0; j < order.size(); ++j) out[order[j]] = labels[j];
  return out;
}

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& x, const std::vector<std::size_t>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

std::vector<int> select(const std::vector<int>& y, const std::vector<std::size_t>& rows) {
  std::vector<int> out;
  for (std::size_t r : rows) out.push_back(y[r]);
  return out;
}

struct FoldScores {
  double mlr = 0.0;
  double knn = 0.0;
};

FoldScores cross_validate(const Eigen::MatrixXd& x, const std::vector<int>& y, const std::vector<int>& folds,
                          int n_folds) {
  FoldScores acc;
  int used = 0;
  for (int f = 0; f < n_folds; ++f) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < y.size(); ++i) (folds[i] == f ? test : train).push_back(i);
    if (test.empty() || train.empty()) continue;
    const auto ytr = select(y, train), yte = select(y, test);
    const Eigen::MatrixXd xtr_raw = select_rows(x, train);
    const auto scaler = Standardizer::fit(xtr_raw);
    const Eigen::MatrixXd xtr = scaler.apply(xtr_raw);
    const Eigen::MatrixXd xte = scaler.apply(select_rows(x, test));
    std::vector<int> distinct = ytr;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    acc.mlr += distinct.size() >= 2 ? accuracy(predict(train_mlr(xtr, ytr), xte), yte)
                                    : accuracy(std::vector<int>(yte.size(), distinct[0]), yte);
    acc.knn += accuracy(knn1_predict_rows(xtr, ytr, xte), yte);
    ++used;
  }
  if (used == 0) throw Error(ErrorCode::InvalidArgument, "cross-validation produced no usable fold");
  acc.mlr /= used;
  acc.knn /= used;
  return acc;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

FeatureDataset mean_spectral_amplitude(const EpochedData& epoched) {
  if (epoched.trials.empty()) throw Error(ErrorCode::InvalidArgument, "no trials");
  FeatureDataset ds;
  for (const auto& t : epoched.trials) ds.class_names.push_back(t.label);
  std::sort(ds.class_names.begin(), ds.class_names.end());
  ds.class_names.erase(std::unique(ds.class_names.begin(), ds.class_names.end()), ds.class_names.end());
  const Eigen::Index channels = epoched.trials.front().data.rows();
  ds.x.resize(static_cast<Eigen::Index>(epoched.trials.size()), channels);
  for (std::size_t i = 0; i < epoched.trials.size(); ++i) {
    const auto& t = epoched.trials[i];
    if (t.data.rows() != channels) throw Error(ErrorCode::ShapeMismatch, "trials differ in channel count");
    ds.x.row(static_cast<Eigen::Index>(i)) = t.data.cwiseAbs().rowwise().mean().transpose();
    ds.y.push_back(static_cast<int>(std::lower_bound(ds.class_names.begin(), ds.class_names.end(), t.label) -
                                    ds.class_names.begin()));
    ds.keys.push_back(t.key);
  }
  return ds;
}

const std::vector<Band>& standard_bands() {
  static const std::vector<Band> bands{
      {"theta", 4.0, 7.0},         {"alpha", 8.0, 15.0},         {"beta", 15.0, 30.0},
      {"low_gamma", 30.0, 70.0},   {"high_gamma", 70.0, 100.0},  {"low_ripple", 100.0, 150.0},
      {"high_ripple", 150.0, 200.0}, {"multi_unit", 200.0, 500.0}, {"full", 0.0, 0.0}};
  return bands;
}

const Band& band_by_name(const std::string& name) {
  for (const auto& b : standard_bands()) {
    if (b.name == name) return b;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown band '" + name + "'");
}

Recording band_segment(const Recording& recording, const Band& band, int order) {
  if (band.name == "full") return recording;
  const double fs = recording.sampling_rate_hz;
  std::optional<double> hi = band.hi_hz;
  if (band.hi_hz >= fs / 2.0) hi.reset();
  return dsp::filtfilt(dsp::design_butterworth(order, band.lo_hz, hi, fs), recording);
}

FeatureDataset balance_classes(const FeatureDataset& ds, std::uint64_t seed) {
  if (ds.class_names.size() < 2) throw Error(ErrorCode::InvalidArgument, "balancing needs at least two classes");
  auto groups = rows_by_class(ds);
  std::size_t minority = ds.y.size();
  for (std::size_t c = 0; c < groups.size(); ++c) {
    if (groups[c].size() < 2) {
      throw Error(ErrorCode::ClassTooSmall, "class '" + ds.class_names[c] + "' has fewer than 2 trials");
    }
    minority = std::min(minority, groups[c].size());
  }
  std::vector<std::size_t> keep;
  for (std::size_t c = 0; c < groups.size(); ++c) {
    std::mt19937_64 rng(mix(seed, c, 0xba1a));
    std::shuffle(groups[c].begin(), groups[c].end(), rng);
    keep.insert(keep.end(), groups[c].begin(), groups[c].begin() + static_cast<std::ptrdiff_t>(minority));
  }
  return take_rows(ds, keep);
}

std::vector<int> stratified_folds(const FeatureDataset& ds, int folds, std::uint64_t seed, int repetition) {
  if (folds < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 folds");
  auto groups = rows_by_class(ds);
  std::vector<int> out(ds.y.size(), 0);
  std::size_t offset = 0;
  for (std::size_t c = 0; c < groups.size(); ++c) {
    std::mt19937_64 rng(mix(seed, static_cast<std::uint64_t>(repetition), c));
    std::shuffle(groups[c].begin(), groups[c].end(), rng);
    for (std::size_t j = 0; j < groups[c].size(); ++j) {
      out[groups[c][j]] = static_cast<int>((j + offset) % static_cast<std::size_t>(folds));
    }
    offset += groups[c].size();
  }
  return out;
}

SearchResult incremental_feature_search(const FeatureDataset& ds, const SearchOptions& options) {
  if (options.repeats < 1 || options.patience < 1) throw Error(ErrorCode::InvalidArgument, "invalid search options");
  SearchResult res;
  const auto d_max = static_cast<int>(ds.x.cols());
  if (options.ranking.empty()) {
    const auto scaler = Standardizer::fit(ds.x);
    res.ranking = rank_features(train_mlr(scaler.apply(ds.x), ds.y, options.seed));
  } else {
    res.ranking = options.ranking;
  }
  if (static_cast<int>(res.ranking.size()) != d_max) throw Error(ErrorCode::ShapeMismatch, "ranking length differs from feature count");

  std::vector<std::vector<int>> folds, shuffled;
  for (int r = 0; r < options.repeats; ++r) {
    folds.push_back(stratified_folds(ds, options.folds, options.seed, r));
    shuffled.push_back(shuffled_labels(ds, mix(options.seed, static_cast<std::uint64_t>(r), 0x5eed)));
  }
  for (int d = 1; d <= d_max; ++d) {
    Eigen::MatrixXd xd(ds.x.rows(), d);
    for (int j = 0; j < d; ++j) xd.col(j) = ds.x.col(res.ranking[static_cast<std::size_t>(j)]);
    double mlr = 0.0, mlr_s = 0.0, knn = 0.0, knn_s = 0.0;
    for (int r = 0; r < options.repeats; ++r) {
      const auto real = cross_validate(xd, ds.y, folds[static_cast<std::size_t>(r)], options.folds);
      const auto fake = cross_validate(xd, shuffled[static_cast<std::size_t>(r)], folds[static_cast<std::size_t>(r)], options.folds);
      mlr += real.mlr;
      knn += real.knn;
      mlr_s += fake.mlr;
      knn_s += fake.knn;
    }
    const double reps = options.repeats;
    res.mlr_accuracy.push_back(mlr / reps);
    res.knn_accuracy.push_back(knn / reps);
    res.mlr_accuracy_shuffled.push_back(mlr_s / reps);
    res.knn_accuracy_shuffled.push_back(knn_s / reps);
    res.stop_d = d;
    if (d > options.patience) {
      const auto& a = res.mlr_accuracy;
      const double recent = *std::max_element(a.end() - options.patience, a.end());
      if (recent - a[static_cast<std::size_t>(d - options.patience - 1)] < options.epsilon) break;
    }
  }
  return res;
}

double roc_auc_ovr_micro(const Eigen::MatrixXd& prob, const std::vector<int>& y) {
  if (static_cast<std::size_t>(prob.rows()) != y.size()) throw Error(ErrorCode::ShapeMismatch, "one label per row");
  std::vector<int> distinct = y;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 2) throw Error(ErrorCode::SingleClassTest, "test labels contain a single class");

  struct Item {
    double score;
    bool positive;
  };
  std::vector<Item> items;
  for (Eigen::Index i = 0; i < prob.rows(); ++i)
    for (Eigen::Index k = 0; k < prob.cols(); ++k) items.push_back({prob(i, k), y[static_cast<std::size_t>(i)] == k});
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.score < b.score; });
  double rank_sum = 0.0, n_pos = 0.0;
  for (std::size_t i = 0; i < items.size();) {
    std::size_t j = i;
    while (j < items.size() && items[j].score == items[i].score) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) {
      if (items[t].positive) {
        rank_sum += avg_rank;
        n_pos += 1.0;
      }
    }
    i = j;
  }
  const double n_neg = static_cast<double>(items.size()) - n_pos;
  return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

double roc_auc_ovr_micro(const MlrModel& model, const Eigen::MatrixXd& x, const std::vector<int>& y) {
  std::vector<int> cols;
  for (int label : y) {
    const auto it = std::find(model.classes.begin(), model.classes.end(), label);
    if (it == model.classes.end()) throw Error(ErrorCode::InvalidArgument, "test label unknown to the model");
    cols.push_back(static_cast<int>(it - model.classes.begin()));
  }
  return roc_auc_ovr_micro(predict_proba(model, x), cols);
}

std::vector<std::pair<double, double>> roc_curve_ovr_micro(const Eigen::MatrixXd& prob, const std::vector<int>& y) {
  std::vector<std::pair<double, bool>> items;
  for (Eigen::Index i = 0; i < prob.rows(); ++i)
    for (Eigen::Index k = 0; k < prob.cols(); ++k) items.emplace_back(prob(i, k), y[static_cast<std::size_t>(i)] == k);
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  double pos = 0.0;
  for (const auto& it : items) pos += it.second ? 1.0 : 0.0;
  const double neg = static_cast<double>(items.size()) - pos;
  std::vector<std::pair<double, double>> curve{{0.0, 0.0}};
  double tp = 0.0, fp = 0.0;
  for (std::size_t i = 0; i < items.size();) {
    std::size_t j = i;
    while (j < items.size() && items[j].first == items[i].first) {
      (items[j].second ? tp : fp) += 1.0;
      ++j;
    }
    curve.emplace_back(neg > 0 ? fp / neg : 0.0, pos > 0 ? tp / pos : 0.0);
    i = j;
  }
  return curve;
}

double StepEvaluation::mean_test_accuracy() const { return mean_of(mlr_test_accuracy); }

std::vector<StepEvaluation> evaluate_pipeline_steps(
    const std::vector<std::pair<std::string, Recording>>& staged, const std::vector<Event>& events,
    const PipelineConfig& config, const EvalOptions& options) {
  if (options.repeats < 1 || !(options.train_fraction > 0.0 && options.train_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "invalid evaluation options");
  }
  std::vector<StepEvaluation> out;
  for (const auto& [stage, recording] : staged) {
    for (const auto& band_name : options.bands) {
      const Band& band = band_by_name(band_name);
      StepEvaluation ev;
      ev.stage = stage;
      ev.band = band.name;
      if (band.name != "full" && band.lo_hz >= recording.sampling_rate_hz / 2.0) {
        ev.warnings.push_back("band lies above Nyquist, skipped");
        out.push_back(std::move(ev));
        continue;
      }
      auto ds = mean_spectral_amplitude(epoch(band_segment(recording, band), events, config.epoch_len_p));
      ds.band_tag = band.name;
      if (options.balance_before_split) ds = balance_classes(ds, options.seed);
      const auto groups = rows_by_class(ds);

      for (int s = 0; s < options.repeats; ++s) {
        std::vector<std::size_t> train, test;
        for (std::size_t c = 0; c < groups.size(); ++c) {
          auto g = groups[c];
          if (g.size() < 2) throw Error(ErrorCode::ClassTooSmall, "class '" + ds.class_names[c] + "' has fewer than 2 trials");
          std::mt19937_64 rng(mix(options.seed, static_cast<std::uint64_t>(s), c + 0x5b11));
          std::shuffle(g.begin(), g.end(), rng);
          auto n_train = static_cast<std::size_t>(std::llround(options.train_fraction * static_cast<double>(g.size())));
          n_train = std::clamp<std::size_t>(n_train, 1, g.size() - 1);
          train.insert(train.end(), g.begin(), g.begin() + static_cast<std::ptrdiff_t>(n_train));
          test.insert(test.end(), g.begin() + static_cast<std::ptrdiff_t>(n_train), g.end());
        }
        auto train_ds = take_rows(ds, train);
        if (!options.balance_before_split) train_ds = balance_classes(train_ds, mix(options.seed, static_cast<std::uint64_t>(s)));
        const auto test_ds = take_rows(ds, test);

        const auto scaler = Standardizer::fit(train_ds.x);
        const Eigen::MatrixXd xtr = scaler.apply(train_ds.x);
        const Eigen::MatrixXd xte = scaler.apply(test_ds.x);
        const auto model = train_mlr(xtr, train_ds.y, options.seed);
        ev.mlr_test_accuracy.push_back(accuracy(predict(model, xte), test_ds.y));
        ev.mlr_train_accuracy.push_back(accuracy(predict(model, xtr), train_ds.y));
        ev.knn_test_accuracy.push_back(accuracy(knn1_predict_rows(xtr, train_ds.y, xte), test_ds.y));
        ev.roc_auc.push_back(roc_auc_ovr_micro(model, xte, test_ds.y));
        const auto fake = shuffled_labels(train_ds, mix(options.seed, static_cast<std::uint64_t>(s), 0x5ade));
        ev.mlr_shuffled_test_accuracy.push_back(accuracy(predict(train_mlr(xtr, fake, options.seed), xte), test_ds.y));

        if (s == 0) {
          ev.roc_curve = roc_curve_ovr_micro(predict_proba(model, xte), test_ds.y);
          if (options.run_search) {
            auto so = options.search;
            so.seed = options.seed;
            so.ranking = rank_features(model);
            ev.search = incremental_feature_search(train_ds, so);
          }
        }
      }
      out.push_back(std::move(ev));
    }
  }
  return out;
}

Json to_json(const SearchResult& r) {
  return Json{{"ranking", r.ranking},
              {"stop_d", r.stop_d},
              {"mlr_accuracy", r.mlr_accuracy},
              {"mlr_accuracy_shuffled", r.mlr_accuracy_shuffled},
              {"knn_accuracy", r.knn_accuracy},
              {"knn_accuracy_shuffled", r.knn_accuracy_shuffled}};
}

Json to_json(const StepEvaluation& ev) {
  Json curve = Json::array();
  for (const auto& [fpr, tpr] : ev.roc_curve) curve.push_back({fpr, tpr});
  Json j{{"stage", ev.stage},
         {"band", ev.band},
         {"mean_mlr_test_accuracy", mean_of(ev.mlr_test_accuracy)},
         {"mean_mlr_train_accuracy", mean_of(ev.mlr_train_accuracy)},
         {"mean_mlr_shuffled_test_accuracy", mean_of(ev.mlr_shuffled_test_accuracy)},
         {"mean_knn_test_accuracy", mean_of(ev.knn_test_accuracy)},
         {"mean_roc_auc", mean_of(ev.roc_auc)},
         {"mlr_test_accuracy", ev.mlr_test_accuracy},
         {"mlr_train_accuracy", ev.mlr_train_accuracy},
         {"mlr_shuffled_test_accuracy", ev.mlr_shuffled_test_accuracy},
         {"knn_test_accuracy", ev.knn_test_accuracy},
         {"roc_auc", ev.roc_auc},
         {"roc_curve", curve},
         {"search", ev.search ? to_json(*ev.search) : Json()},
         {"warnings", ev.warnings}};
  return j;
}

}  // namespace neuroclean::ml
