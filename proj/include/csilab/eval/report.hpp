#pragma once

#include <string>

#include <json.hpp>

#include "csilab/eval/bootstrap.hpp"
#include "csilab/eval/classify.hpp"

namespace csilab::eval {

/// CV accuracies of one receiver and variant with a BCa interval on their mean.
struct EvalReport {
  std::string receiver;
  std::string variant;
  CvReport cv;
  BootstrapInterval ci;
};

inline EvalReport evaluate(const LabeledDataset& d, const Variant& v, int folds, int repeats, std::size_t n_boot,
                           std::uint64_t seed) {
  EvalReport r;
  r.receiver = d.receiver_id;
  r.variant = v.name;
  r.cv = repeated_stratified_cv(d, v, folds, repeats, seed);
  r.ci = bootstrap_bca(r.cv.accuracies, n_boot, 0.5, 99.5, substream(seed, "bca"));
  return r;
}

inline nlohmann::ordered_json to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["receiver"] = r.receiver;
  j["variant"] = r.variant;
  j["accuracies"] = r.cv.accuracies;
  j["mean"] = r.cv.mean;
  j["std"] = r.cv.std;
  j["ci"] = {{"lo", r.ci.lo}, {"hi", r.ci.hi}, {"lo_pct", r.ci.lo_pct}, {"hi_pct", r.ci.hi_pct},
             {"z0", r.ci.z0}, {"acceleration", r.ci.acceleration}, {"degenerate", r.ci.degenerate}};
  return j;
}

}  // namespace csilab::eval
