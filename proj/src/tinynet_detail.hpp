#pragma once

#include <span>
#include <vector>

#include "nrbdoor/tinynet.hpp"

namespace nrb::detail {

/// Everything after the max-pool, kept for the backward pass.
struct HeadState {
  std::vector<std::size_t> winner;  // argmax point per feature
  std::vector<double> pooled;       // kFeatureDim
  std::vector<double> z_pre;        // kHeadDim
  std::vector<double> z;            // kHeadDim
  std::vector<double> logits;       // num_classes
};

HeadState head_forward(const ClassifierParams& params, const kernels::PointActivations& acts,
                       std::size_t n_points);

/// Writes d(loss)/d(params) into `grad` (overwritten, must be sized) and,
/// when `input_grads` is non-null, d(loss)/d(points). Returns the loss.
double backprop(const ClassifierParams& params, std::span<const Vec3> points,
                const kernels::PointActivations& acts, const HeadState& head, int label,
                ClassifierParams& grad, std::vector<Vec3>* input_grads);

}  // namespace nrb::detail
