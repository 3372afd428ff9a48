#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "gliakit/error.hpp"
#include "gliakit/schema.hpp"
#include "gliakit/volume.hpp"

namespace gliakit {

enum class FusionMode { majority_vote, prob_mean };

struct FusionConfig {
  FusionMode mode = FusionMode::majority_vote;
  /// Labels in decreasing preference for tie resolution; empty means the
  /// default ET > NETC > SNFH > RC > background, restricted to the schema.
  std::vector<Label> tie_priority;
  /// Per-input positive weights; empty means equal weighting.
  std::vector<double> weights;
};

namespace ensemble_detail {

inline std::vector<Label> effective_priority(const FusionConfig& cfg, const std::vector<Label>& universe,
                                             const char* what) {
  std::vector<Label> prio = cfg.tie_priority;
  if (prio.empty()) {
    for (Label l : {kEt, kNetc, kSnfh, kRc, kBackground})
      if (std::find(universe.begin(), universe.end(), l) != universe.end()) prio.push_back(l);
    for (Label l : universe)
      if (std::find(prio.begin(), prio.end(), l) == prio.end()) prio.push_back(l);
  } else {
    std::vector<Label> sorted_prio = prio, sorted_universe = universe;
    std::sort(sorted_prio.begin(), sorted_prio.end());
    std::sort(sorted_universe.begin(), sorted_universe.end());
    if (sorted_prio != sorted_universe)
      throw ValidationError(std::string(what) + ": tie_priority must be a permutation of the label set");
  }
  return prio;
}

inline std::array<int, 256> priority_ranks(const std::vector<Label>& prio) {
  std::array<int, 256> rank;
  rank.fill(256);
  for (std::size_t i = 0; i < prio.size(); ++i) rank[prio[i]] = static_cast<int>(i);
  return rank;
}

inline std::vector<double> effective_weights(const FusionConfig& cfg, std::size_t n, const char* what) {
  if (cfg.weights.empty()) return std::vector<double>(n, 1.0);
  if (cfg.weights.size() != n)
    throw ValidationError(std::string(what) + ": got " + std::to_string(cfg.weights.size()) + " weights for " +
                          std::to_string(n) + " inputs");
  double sum = 0.0;
  for (double w : cfg.weights) {
    if (!(w >= 0.0)) throw ValidationError(std::string(what) + ": weights must be nonnegative");
    sum += w;
  }
  if (!(sum > 0.0)) throw ValidationError(std::string(what) + ": at least one weight must be positive");
  return cfg.weights;
}

}  // namespace ensemble_detail

/// Weighted plurality vote over label maps; ties go to the preferred label.
inline LabelMap vote(const std::vector<LabelMap>& inputs, const FusionConfig& cfg = {}) {
  if (inputs.size() < 2) throw ValidationError("vote: need at least 2 inputs");
  for (std::size_t i = 1; i < inputs.size(); ++i) {
    require_same_grid(inputs[0].geometry, inputs[i].geometry, "vote input " + std::to_string(i));
    if (!(inputs[0].schema == inputs[i].schema))
      throw ValidationError("vote: input " + std::to_string(i) + " uses a different schema");
  }
  const auto weights = ensemble_detail::effective_weights(cfg, inputs.size(), "vote");
  const auto prio = ensemble_detail::effective_priority(cfg, inputs[0].schema.labels(), "vote");
  const auto rank = ensemble_detail::priority_ranks(prio);

  LabelMap out;
  out.geometry = inputs[0].geometry;
  out.schema = inputs[0].schema;
  out.data.resize(out.geometry.voxel_count());
  std::array<double, 256> tally;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    tally.fill(0.0);
    for (std::size_t k = 0; k < inputs.size(); ++k) tally[inputs[k].data[i]] += weights[k];
    Label best = inputs[0].data[i];
    for (std::size_t k = 1; k < inputs.size(); ++k) {
      const Label l = inputs[k].data[i];
      if (tally[l] > tally[best] || (tally[l] == tally[best] && rank[l] < rank[best])) best = l;
    }
    out.data[i] = best;
  }
  return out;
}

/// Argmax of the weighted mean probability vector; ties go to the preferred
/// label. All inputs must share one channel order.
inline LabelMap prob_mean(const std::vector<ProbMap>& inputs, const LabelSchema& schema,
                          const FusionConfig& cfg = {}) {
  if (inputs.size() < 2) throw ValidationError("prob_mean: need at least 2 inputs");
  for (std::size_t i = 1; i < inputs.size(); ++i) {
    require_same_grid(inputs[0].geometry, inputs[i].geometry, "prob_mean input " + std::to_string(i));
    if (inputs[0].channels != inputs[i].channels)
      throw ValidationError("prob_mean: input " + std::to_string(i) + " has a different channel order");
  }
  for (Label l : inputs[0].channels)
    if (!schema.contains(l))
      throw ValidationError("prob_mean: channel label " + std::to_string(int(l)) + " is not in schema '" +
                            schema.name + "'");
  const auto weights = ensemble_detail::effective_weights(cfg, inputs.size(), "prob_mean");
  const auto prio = ensemble_detail::effective_priority(cfg, inputs[0].channels, "prob_mean");
  const auto rank = ensemble_detail::priority_ranks(prio);
  const std::size_t nc = inputs[0].channels.size();

  LabelMap out;
  out.geometry = inputs[0].geometry;
  out.schema = schema;
  out.data.resize(out.geometry.voxel_count());
  std::vector<double> mean(nc);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    for (std::size_t c = 0; c < nc; ++c) {
      double acc = 0.0;
      for (std::size_t k = 0; k < inputs.size(); ++k)
        acc += weights[k] * static_cast<double>(inputs[k].data[c][i]);
      mean[c] = acc;
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < nc; ++c) {
      const Label lc = inputs[0].channels[c], lb = inputs[0].channels[best];
      if (mean[c] > mean[best] || (mean[c] == mean[best] && rank[lc] < rank[lb])) best = c;
    }
    out.data[i] = inputs[0].channels[best];
  }
  return out;
}

}  // namespace gliakit
