#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "gliakit/error.hpp"
#include "gliakit/volume.hpp"

namespace gliakit {

struct LossWeights {
  double w_dice = 1.0;
  double w_focal = 1.0;
  double w_bbox = 0.1;
  double w_inertia = 0.1;
  double focal_gamma = 2.0;
  double epsilon = 1e-5;

  void validate() const {
    for (double w : {w_dice, w_focal, w_bbox, w_inertia})
      if (!(w >= 0.0)) throw ValidationError("loss weights must be nonnegative");
    if (!(w_dice > 0.0 || w_focal > 0.0 || w_bbox > 0.0 || w_inertia > 0.0))
      throw ValidationError("at least one loss weight must be positive");
    if (!(focal_gamma >= 0.0)) throw ValidationError("focal_gamma must be >= 0");
    if (!(epsilon > 0.0)) throw ValidationError("epsilon must be > 0");
  }
};

namespace loss_detail {

inline std::array<int, 256> channel_lookup(const ProbMap& pred) {
  std::array<int, 256> lut;
  lut.fill(-1);
  for (std::size_t c = 0; c < pred.channels.size(); ++c) lut[pred.channels[c]] = static_cast<int>(c);
  return lut;
}

inline void check_pair(const ProbMap& pred, const LabelMap& gt, const char* what) {
  require_same_grid(pred.geometry, gt.geometry, what);
  const auto lut = channel_lookup(pred);
  for (std::size_t i = 0; i < gt.data.size(); ++i)
    if (lut[gt.data[i]] < 0)
      throw ValidationError(std::string(what) + ": ground-truth label " + std::to_string(int(gt.data[i])) +
                            " has no prediction channel");
}

inline std::vector<std::size_t> foreground_channels(const ProbMap& pred, const char* what) {
  std::vector<std::size_t> fg;
  for (std::size_t c = 0; c < pred.channels.size(); ++c)
    if (pred.channels[c] != kBackground) fg.push_back(c);
  if (fg.empty()) throw ValidationError(std::string(what) + ": prediction has no foreground channels");
  return fg;
}

}  // namespace loss_detail

/// Soft Dice loss: 1 minus the mean foreground-channel Dice coefficient.
inline double dice_loss(const ProbMap& pred, const LabelMap& gt, const LossWeights& w = {}) {
  w.validate();
  loss_detail::check_pair(pred, gt, "dice_loss");
  const auto fg = loss_detail::foreground_channels(pred, "dice_loss");
  double mean_dice = 0.0;
  for (std::size_t c : fg) {
    const Label label = pred.channels[c];
    const auto& p = pred.data[c];
    double inter = 0.0, sum_p = 0.0;
    std::int64_t sum_g = 0;
    for (std::size_t i = 0; i < gt.data.size(); ++i) {
      const double pv = static_cast<double>(p[i]);
      sum_p += pv;
      if (gt.data[i] == label) {
        inter += pv;
        ++sum_g;
      }
    }
    mean_dice += (2.0 * inter + w.epsilon) / (sum_p + static_cast<double>(sum_g) + w.epsilon);
  }
  mean_dice /= static_cast<double>(fg.size());
  return 1.0 - mean_dice;
}

/// Focal loss: mean over voxels of -(1-p_t)^gamma * log(p_t), with the true-
/// class probability clamped to [1e-7, 1-1e-7]. gamma 0 is plain cross-entropy.
inline double focal_loss(const ProbMap& pred, const LabelMap& gt, const LossWeights& w = {}) {
  w.validate();
  loss_detail::check_pair(pred, gt, "focal_loss");
  if (!pred.normalized) throw ValidationError("focal_loss: prediction must be normalized (softmax-like channels)");
  pred.validate();
  const auto lut = loss_detail::channel_lookup(pred);
  double sum = 0.0;
  for (std::size_t i = 0; i < gt.data.size(); ++i) {
    const auto& p = pred.data[static_cast<std::size_t>(lut[gt.data[i]])];
    double pt = static_cast<double>(p[i]);
    pt = std::min(1.0 - 1e-7, std::max(1e-7, pt));
    const double factor = w.focal_gamma == 0.0 ? 1.0 : std::pow(1.0 - pt, w.focal_gamma);
    sum += -factor * std::log(pt);
  }
  return sum / static_cast<double>(gt.data.size());
}

/// Normalized L1 distance between axis-aligned bounding boxes of the
/// thresholded prediction and the ground truth, per foreground class.
inline double bbox_loss(const ProbMap& pred, const LabelMap& gt, const LossWeights& w = {},
                        double threshold = 0.5) {
  w.validate();
  loss_detail::check_pair(pred, gt, "bbox_loss");
  const auto fg = loss_detail::foreground_channels(pred, "bbox_loss");
  const auto& dims = gt.geometry.dims;
  double total = 0.0;
  for (std::size_t c : fg) {
    const Label label = pred.channels[c];
    const auto& p = pred.data[c];
    int plo[3] = {dims[0], dims[1], dims[2]}, phi[3] = {-1, -1, -1};
    int glo[3] = {dims[0], dims[1], dims[2]}, ghi[3] = {-1, -1, -1};
    for (int z = 0; z < dims[2]; ++z)
      for (int y = 0; y < dims[1]; ++y)
        for (int x = 0; x < dims[0]; ++x) {
          const std::size_t i = gt.geometry.index(x, y, z);
          const int v[3] = {x, y, z};
          if (static_cast<double>(p[i]) >= threshold)
            for (int a = 0; a < 3; ++a) {
              plo[a] = std::min(plo[a], v[a]);
              phi[a] = std::max(phi[a], v[a]);
            }
          if (gt.data[i] == label)
            for (int a = 0; a < 3; ++a) {
              glo[a] = std::min(glo[a], v[a]);
              ghi[a] = std::max(ghi[a], v[a]);
            }
        }
    const bool p_empty = phi[0] < 0, g_empty = ghi[0] < 0;
    if (p_empty && g_empty) continue;  // both empty contributes 0
    if (p_empty != g_empty) {
      total += 1.0;
      continue;
    }
    double acc = 0.0;
    for (int a = 0; a < 3; ++a) {
      acc += std::abs(static_cast<double>(plo[a] - glo[a])) / static_cast<double>(dims[a]);
      acc += std::abs(static_cast<double>(phi[a] - ghi[a])) / static_cast<double>(dims[a]);
    }
    total += acc / 6.0;
  }
  return total / static_cast<double>(fg.size());
}

namespace loss_detail {

struct Moments {
  double mass = 0.0;
  std::array<double, 3> centroid{};
  std::array<double, 9> inertia{};  // row-major second central moments / mass
};

template <typename MassFn>
inline Moments moments(const Geometry& g, MassFn&& mass_at) {
  Moments m;
  double sx = 0.0, sy = 0.0, sz = 0.0;
  for (int z = 0; z < g.dims[2]; ++z)
    for (int y = 0; y < g.dims[1]; ++y)
      for (int x = 0; x < g.dims[0]; ++x) {
        const double mv = mass_at(g.index(x, y, z));
        m.mass += mv;
        sx += mv * x;
        sy += mv * y;
        sz += mv * z;
      }
  if (m.mass <= 0.0) return m;
  m.centroid = {sx / m.mass, sy / m.mass, sz / m.mass};
  for (int z = 0; z < g.dims[2]; ++z)
    for (int y = 0; y < g.dims[1]; ++y)
      for (int x = 0; x < g.dims[0]; ++x) {
        const double mv = mass_at(g.index(x, y, z));
        if (mv == 0.0) continue;
        const double d[3] = {x - m.centroid[0], y - m.centroid[1], z - m.centroid[2]};
        for (int a = 0; a < 3; ++a)
          for (int b = 0; b < 3; ++b) m.inertia[static_cast<std::size_t>(3 * a + b)] += mv * d[a] * d[b];
      }
  for (double& v : m.inertia) v /= m.mass;
  return m;
}

inline double frobenius(const std::array<double, 9>& t) {
  double s = 0.0;
  for (double v : t) s += v * v;
  return std::sqrt(s);
}

}  // namespace loss_detail

/// Relative Frobenius distance between second-central-moment tensors of the
/// soft prediction and the binary ground truth, per foreground class.
inline double inertia_loss(const ProbMap& pred, const LabelMap& gt, const LossWeights& w = {}) {
  w.validate();
  loss_detail::check_pair(pred, gt, "inertia_loss");
  const auto fg = loss_detail::foreground_channels(pred, "inertia_loss");
  double total = 0.0;
  for (std::size_t c : fg) {
    const Label label = pred.channels[c];
    const auto& p = pred.data[c];
    const auto mp = loss_detail::moments(gt.geometry, [&](std::size_t i) { return static_cast<double>(p[i]); });
    const auto mg = loss_detail::moments(gt.geometry, [&](std::size_t i) { return gt.data[i] == label ? 1.0 : 0.0; });
    const bool p_empty = mp.mass <= 0.0, g_empty = mg.mass <= 0.0;
    if (p_empty && g_empty) continue;  // both empty contributes 0
    if (p_empty != g_empty) {
      total += 1.0;
      continue;
    }
    std::array<double, 9> diff;
    for (std::size_t k = 0; k < 9; ++k) diff[k] = mp.inertia[k] - mg.inertia[k];
    total += loss_detail::frobenius(diff) / (loss_detail::frobenius(mg.inertia) + w.epsilon);
  }
  return total / static_cast<double>(fg.size());
}

struct LossBreakdown {
  double dice = 0.0;
  double focal = 0.0;
  double bbox = 0.0;
  double inertia = 0.0;
  double total = 0.0;
};

/// Weighted composite loss with a per-term breakdown. Terms with zero weight
/// are still evaluated so the breakdown is complete.
inline LossBreakdown total_loss(const ProbMap& pred, const LabelMap& gt, const LossWeights& w = {}) {
  w.validate();
  LossBreakdown b;
  b.dice = dice_loss(pred, gt, w);
  b.focal = focal_loss(pred, gt, w);
  b.bbox = bbox_loss(pred, gt, w);
  b.inertia = inertia_loss(pred, gt, w);
  b.total = w.w_dice * b.dice + w.w_focal * b.focal + w.w_bbox * b.bbox + w.w_inertia * b.inertia;
  return b;
}

}  // namespace gliakit
