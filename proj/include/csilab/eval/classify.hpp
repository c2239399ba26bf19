#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "csilab/core/rng.hpp"
#include "csilab/core/stats.hpp"
#include "csilab/eval/variant.hpp"

namespace csilab::eval {

/// 1-nearest neighbour under Euclidean distance over flattened examples; ties go to the lower
/// training index.
inline std::vector<int> knn_classify(const Tensor3& train, const std::vector<int>& train_labels, const Tensor3& test) {
  if (train.n == 0) throw DegenerateError("nearest-neighbour classifier has an empty training set");
  if (!train.same_shape_per_example(test)) throw ValidationError("train and test feature shapes differ");
  if (train_labels.size() != train.n) throw ValidationError("label count differs from training examples");
  const std::size_t d = train.example_size();
  std::vector<int> pred(test.n);
  for (std::size_t i = 0; i < test.n; ++i) {
    const double* q = &test.data[i * d];
    double best = INFINITY;
    std::size_t arg = 0;
    for (std::size_t j = 0; j < train.n; ++j) {
      const double* r = &train.data[j * d];
      double s = 0.0;
      for (std::size_t l = 0; l < d && s < best; ++l) {
        const double diff = q[l] - r[l];
        s += diff * diff;
      }
      if (s < best) {
        best = s;
        arg = j;
      }
    }
    pred[i] = train_labels[arg];
  }
  return pred;
}

inline double accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (pred.size() != truth.size() || pred.empty()) throw ValidationError("prediction and label counts differ");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == truth[i];
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

/// rows: true class, columns: predicted class.
inline std::vector<std::vector<int>> confusion(const std::vector<int>& pred, const std::vector<int>& truth, int n_classes) {
  std::vector<std::vector<int>> m(static_cast<std::size_t>(n_classes), std::vector<int>(static_cast<std::size_t>(n_classes), 0));
  for (std::size_t i = 0; i < pred.size(); ++i) ++m[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(pred[i])];
  return m;
}

/// Fold id per example. Each class is shuffled and dealt round-robin, continuing the deal
/// across classes so fold sizes stay balanced.
inline std::vector<int> stratified_folds(const std::vector<int>& labels, int n_classes, int folds, Engine& eng) {
  std::vector<int> fold(labels.size(), -1);
  int next = 0;
  for (int c = 0; c < n_classes; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == c) members.push_back(i);
    }
    if (static_cast<int>(members.size()) < folds) {
      throw ConfigError("class " + std::to_string(c) + " has fewer examples than folds");
    }
    std::shuffle(members.begin(), members.end(), eng);
    for (auto i : members) {
      fold[i] = next;
      next = (next + 1) % folds;
    }
  }
  return fold;
}

struct CvReport {
  std::vector<double> accuracies;  // repeat-major
  double mean = 0.0;
  double std = 0.0;
};

/// Stratified k-fold CV repeated with a fresh shuffle per repeat; the variant's statistics are
/// fitted on each training split only.
inline CvReport repeated_stratified_cv(const LabeledDataset& d, const Variant& v, int folds, int repeats,
                                       std::uint64_t seed, FitMode mode = FitMode::train_only) {
  validate_dataset(d);
  if (folds < 2 || repeats < 1) throw ConfigError("CV needs folds >= 2 and repeats >= 1");
  CvReport r;
  for (int rep = 0; rep < repeats; ++rep) {
    Engine eng = make_engine(substream(seed, "cv", static_cast<std::uint64_t>(rep)));
    const auto fold = stratified_folds(d.labels, d.n_classes, folds, eng);
    for (int f = 0; f < folds; ++f) {
      std::vector<std::size_t> tr, te;
      for (std::size_t i = 0; i < fold.size(); ++i) (fold[i] == f ? te : tr).push_back(i);
      const auto train = subset(d, tr), test = subset(d, te);
      const auto p = prepare(train, test, v, mode);
      r.accuracies.push_back(accuracy(knn_classify(p.train, train.labels, p.test), test.labels));
    }
  }
  r.mean = stats::mean(r.accuracies);
  r.std = stats::stddev(r.accuracies);
  return r;
}

}  // namespace csilab::eval
