// Copyright 2026 The semfuse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SEMFUSE__LOSSES_HPP_
#define SEMFUSE__LOSSES_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "semfuse/errors.hpp"
#include "semfuse/geometry.hpp"
#include "semfuse/types.hpp"

namespace semfuse::losses
{

/// Loss value and its gradient with respect to the inputs (same layout as the input).
struct LossValue
{
  double value = 0.0;
  std::vector<double> grad;
};

/// -alpha (1 - p)^gamma ln p, with d/dp.
inline LossValue focal_loss(double p, double alpha = 0.25, double gamma = 2.0)
{
  if (!(p > 0.0 && p <= 1.0)) {
    throw DomainError("focal loss: probability must be in (0, 1]");
  }
  if (!(alpha >= 0.0) || !(gamma >= 0.0)) {
    throw DomainError("focal loss: alpha and gamma must be non-negative");
  }
  const double q = 1.0 - p;
  const double lp = std::log(p);
  const double mod = std::pow(q, gamma);
  double dmod = 0.0;  // d/dp (1 - p)^gamma
  if (gamma != 0.0 && q > 0.0) {
    dmod = -gamma * std::pow(q, gamma - 1.0);
  }
  LossValue out;
  out.value = -alpha * mod * lp;
  out.grad = {-alpha * (dmod * lp + mod / p)};
  return out;
}

inline LossValue smooth_l1(double residual, double beta = 1.0)
{
  if (!(beta > 0.0)) {
    throw DomainError("smooth L1: beta must be positive");
  }
  const double a = std::abs(residual);
  LossValue out;
  if (a < beta) {
    out.value = 0.5 * residual * residual / beta;
    out.grad = {residual / beta};
  } else {
    out.value = a - 0.5 * beta;
    out.grad = {residual > 0.0 ? 1.0 : -1.0};
  }
  return out;
}

/// -w[target] ln probs[target]; gradient with respect to probs.
inline LossValue weighted_cross_entropy(std::span<const double> probs, std::size_t target, std::span<const double> weights)
{
  if (target >= probs.size() || weights.size() != probs.size()) {
    throw DomainError("cross-entropy: target or weights do not match the class count");
  }
  const double p = probs[target];
  if (!(p > 0.0)) {
    throw DomainError("cross-entropy: zero probability at the target class");
  }
  LossValue out;
  out.value = -weights[target] * std::log(p);
  out.grad.assign(probs.size(), 0.0);
  out.grad[target] = -weights[target] / p;
  return out;
}

/// Weighted mean over points: sum_i w[y_i] (-ln p_i[y_i]) / sum_i w[y_i].
/// `probs` is row-major N x k.
inline LossValue weighted_cross_entropy_mean(
  std::span<const double> probs, std::size_t num_classes, std::span<const std::size_t> labels,
  std::span<const double> weights)
{
  if (num_classes == 0 || probs.size() != labels.size() * num_classes || weights.size() != num_classes) {
    throw DomainError("cross-entropy: shape mismatch");
  }
  LossValue out;
  out.grad.assign(probs.size(), 0.0);
  double wsum = 0.0;
  for (const auto y : labels) {
    if (y >= num_classes) {
      throw DomainError("cross-entropy: label out of range");
    }
    wsum += weights[y];
  }
  if (labels.empty() || wsum <= 0.0) {
    return out;
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto term = weighted_cross_entropy(probs.subspan(i * num_classes, num_classes), labels[i], weights);
    out.value += term.value / wsum;
    out.grad[i * num_classes + labels[i]] = term.grad[labels[i]] / wsum;
  }
  return out;
}

/// Lovasz extension of the Jaccard loss over each class present in `labels`, averaged.
/// `probs` is row-major N x k.
inline LossValue lovasz_softmax(std::span<const double> probs, std::size_t num_classes, std::span<const std::size_t> labels)
{
  if (num_classes == 0 || probs.size() != labels.size() * num_classes) {
    throw DomainError("lovasz: shape mismatch");
  }
  const std::size_t n = labels.size();
  LossValue out;
  out.grad.assign(probs.size(), 0.0);

  std::vector<double> errors(n);
  std::vector<std::size_t> order(n);
  std::vector<double> weights(n);
  std::size_t present = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    std::size_t fg_total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (labels[i] >= num_classes) {
        throw DomainError("lovasz: label out of range");
      }
      const bool fg = labels[i] == c;
      fg_total += fg ? 1 : 0;
      errors[i] = std::abs((fg ? 1.0 : 0.0) - probs[i * num_classes + c]);
    }
    if (fg_total == 0) {
      continue;
    }
    ++present;
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return errors[a] > errors[b]; });

    // Jaccard gradient along the sorted errors.
    const auto gts = static_cast<double>(fg_total);
    double cum_fg = 0.0;
    double cum_bg = 0.0;
    double prev = 0.0;
    double loss_c = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t i = order[j];
      const bool fg = labels[i] == c;
      (fg ? cum_fg : cum_bg) += 1.0;
      const double jaccard = 1.0 - (gts - cum_fg) / (gts + cum_bg);
      weights[i] = jaccard - prev;
      prev = jaccard;
      loss_c += errors[i] * weights[i];
    }
    out.value += loss_c;
    for (std::size_t i = 0; i < n; ++i) {
      const bool fg = labels[i] == c;
      out.grad[i * num_classes + c] += fg ? -weights[i] : weights[i];
    }
  }
  if (present > 0) {
    out.value /= static_cast<double>(present);
    for (auto & g : out.grad) {
      g /= static_cast<double>(present);
    }
  }
  return out;
}

/// Segmentation objective: weighted cross-entropy (mean) plus Lovasz-softmax, unit weights.
inline LossValue total_seg_loss(
  std::span<const double> probs, std::size_t num_classes, std::span<const std::size_t> labels,
  std::span<const double> weights)
{
  LossValue wce = weighted_cross_entropy_mean(probs, num_classes, labels, weights);
  const LossValue lov = lovasz_softmax(probs, num_classes, labels);
  wce.value += lov.value;
  for (std::size_t i = 0; i < wce.grad.size(); ++i) {
    wce.grad[i] += lov.grad[i];
  }
  return wce;
}

/// Direction bin of a ground-truth heading relative to its anchor.
inline bool direction_target(double gt_yaw, double anchor_yaw)
{
  return geometry::normalize_angle(gt_yaw - anchor_yaw) >= 0.0;
}

/// Two-bin softmax cross-entropy; gradient with respect to the logits.
inline LossValue direction_loss(const std::array<double, 2> & logits, bool gt_direction)
{
  const double m = std::max(logits[0], logits[1]);
  const double e0 = std::exp(logits[0] - m);
  const double e1 = std::exp(logits[1] - m);
  const double lse = m + std::log(e0 + e1);
  const std::size_t t = gt_direction ? 1 : 0;
  LossValue out;
  out.value = lse - logits[t];
  out.grad = {e0 / (e0 + e1), e1 / (e0 + e1)};
  out.grad[t] -= 1.0;
  return out;
}

enum class ProposalLabel { Negative, Positive };

/// Positive iff the best 3D IoU with any ground truth reaches `threshold` (inclusive).
inline std::vector<ProposalLabel> assign_proposal_labels(
  std::span<const Box3D> proposals, std::span<const Box3D> gts, double threshold = 0.55)
{
  std::vector<ProposalLabel> out;
  out.reserve(proposals.size());
  for (const auto & p : proposals) {
    double best = 0.0;
    for (const auto & g : gts) {
      best = std::max(best, geometry::iou_3d(p, g));
    }
    out.push_back(best >= threshold ? ProposalLabel::Positive : ProposalLabel::Negative);
  }
  return out;
}

}  // namespace semfuse::losses

#endif  // SEMFUSE__LOSSES_HPP_
