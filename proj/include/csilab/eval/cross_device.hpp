#pragma once

#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "csilab/eval/classify.hpp"

namespace csilab::eval {

struct PairResult {
  std::string train_device;
  std::string test_device;
  double accuracy = 0.0;
  std::vector<std::vector<int>> confusion;
};

struct VariantMatrix {
  std::string variant;
  std::vector<PairResult> pairs;  // row-major over (train, test)

  double min_off_diagonal() const {
    double m = 1.0;
    for (const auto& p : pairs) {
      if (p.train_device != p.test_device) m = std::min(m, p.accuracy);
    }
    return m;
  }
  std::vector<double> off_diagonal() const {
    std::vector<double> v;
    for (const auto& p : pairs) {
      if (p.train_device != p.test_device) v.push_back(p.accuracy);
    }
    return v;
  }
};

struct CrossDeviceResult {
  std::vector<std::string> devices;
  std::vector<VariantMatrix> variants;
};

/// Trains on every example of one device and tests on every example of another. The diagonal
/// uses a stratified 80/20 split. Standardization is fitted per device and per partition.
inline CrossDeviceResult cross_device_experiment(const std::vector<LabeledDataset>& datasets,
                                                 const std::vector<Variant>& variants, std::uint64_t seed,
                                                 double train_share = 0.8) {
  if (datasets.size() < 2) throw ConfigError("cross-device experiment needs at least 2 receivers");
  for (const auto& d : datasets) {
    validate_dataset(d);
    if (d.labels != datasets.front().labels) throw ValidationError("receiver datasets are not aligned");
    if (!d.features.same_shape_per_example(datasets.front().features)) {
      throw ConfigError("receivers report different tone counts; cross-device comparison needs equal shapes");
    }
  }
  const auto& labels = datasets.front().labels;
  const int n_classes = datasets.front().n_classes;
  const int folds = std::max(2, static_cast<int>(std::lround(1.0 / (1.0 - train_share))));
  Engine eng = make_engine(substream(seed, "diagonal_split"));
  const auto fold = stratified_folds(labels, n_classes, folds, eng);
  std::vector<std::size_t> tr, te;
  for (std::size_t i = 0; i < fold.size(); ++i) (fold[i] == 0 ? te : tr).push_back(i);

  CrossDeviceResult out;
  for (const auto& d : datasets) out.devices.push_back(d.receiver_id);
  for (const auto& v : variants) {
    VariantMatrix m;
    m.variant = v.name;
    for (std::size_t a = 0; a < datasets.size(); ++a) {
      for (std::size_t b = 0; b < datasets.size(); ++b) {
        const bool diag = a == b;
        const auto train = diag ? subset(datasets[a], tr) : datasets[a];
        const auto test = diag ? subset(datasets[b], te) : datasets[b];
        const auto p = prepare(train, test, v, FitMode::per_partition);
        const auto pred = knn_classify(p.train, train.labels, p.test);
        PairResult pr;
        pr.train_device = datasets[a].receiver_id;
        pr.test_device = datasets[b].receiver_id;
        pr.accuracy = accuracy(pred, test.labels);
        pr.confusion = confusion(pred, test.labels, n_classes);
        m.pairs.push_back(std::move(pr));
      }
    }
    out.variants.push_back(std::move(m));
  }
  return out;
}

inline nlohmann::ordered_json to_json(const CrossDeviceResult& r) {
  nlohmann::ordered_json j;
  j["devices"] = r.devices;
  auto vs = nlohmann::ordered_json::array();
  for (const auto& m : r.variants) {
    nlohmann::ordered_json jv;
    jv["variant"] = m.variant;
    auto ps = nlohmann::ordered_json::array();
    for (const auto& p : m.pairs) {
      nlohmann::ordered_json jp;
      jp["train"] = p.train_device;
      jp["test"] = p.test_device;
      jp["accuracy"] = p.accuracy;
      jp["confusion"] = p.confusion;
      ps.push_back(std::move(jp));
    }
    jv["pairs"] = std::move(ps);
    jv["min_off_diagonal"] = m.min_off_diagonal();
    vs.push_back(std::move(jv));
  }
  j["variants"] = std::move(vs);
  return j;
}

/// Long-format confusion counts: variant,train,test,true,pred,count.
inline std::string confusion_csv(const CrossDeviceResult& r) {
  std::ostringstream os;
  os << "variant,train,test,true,pred,count\n";
  for (const auto& m : r.variants) {
    for (const auto& p : m.pairs) {
      for (std::size_t t = 0; t < p.confusion.size(); ++t) {
        for (std::size_t q = 0; q < p.confusion[t].size(); ++q) {
          os << m.variant << ',' << p.train_device << ',' << p.test_device << ',' << t << ',' << q << ','
             << p.confusion[t][q] << '\n';
        }
      }
    }
  }
  return os.str();
}

}  // namespace csilab::eval
