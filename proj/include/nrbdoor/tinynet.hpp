#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nrbdoor/geom3d.hpp"
#include "nrbdoor/synthdata.hpp"

namespace nrb {

// Layer widths of the point classifier: shared MLP 3 -> 32 -> 64, max-pool
// over points, head 64 -> 32 -> num_classes.
inline constexpr std::size_t kInputDim = 3;
inline constexpr std::size_t kHidden1 = 32;
inline constexpr std::size_t kFeatureDim = 64;
inline constexpr std::size_t kHeadDim = 32;

/// All weights in one contiguous buffer. Weight matrices are row-major
/// (out x in).
class ClassifierParams {
 public:
  ClassifierParams() = default;
  /// Zero-filled parameters for `num_classes` outputs.
  explicit ClassifierParams(int num_classes);

  int num_classes() const { return num_classes_; }
  static std::size_t count_for(int num_classes);

  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }

  std::span<double> w1() { return slice(0, kHidden1 * kInputDim); }
  std::span<double> b1() { return slice(off_b1(), kHidden1); }
  std::span<double> w2() { return slice(off_w2(), kFeatureDim * kHidden1); }
  std::span<double> b2() { return slice(off_b2(), kFeatureDim); }
  std::span<double> w3() { return slice(off_w3(), kHeadDim * kFeatureDim); }
  std::span<double> b3() { return slice(off_b3(), kHeadDim); }
  std::span<double> w4() { return slice(off_w4(), classes() * kHeadDim); }
  std::span<double> b4() { return slice(off_b4(), classes()); }

  std::span<const double> w1() const { return cslice(0, kHidden1 * kInputDim); }
  std::span<const double> b1() const { return cslice(off_b1(), kHidden1); }
  std::span<const double> w2() const { return cslice(off_w2(), kFeatureDim * kHidden1); }
  std::span<const double> b2() const { return cslice(off_b2(), kFeatureDim); }
  std::span<const double> w3() const { return cslice(off_w3(), kHeadDim * kFeatureDim); }
  std::span<const double> b3() const { return cslice(off_b3(), kHeadDim); }
  std::span<const double> w4() const { return cslice(off_w4(), classes() * kHeadDim); }
  std::span<const double> b4() const { return cslice(off_b4(), classes()); }

  friend bool operator==(const ClassifierParams&, const ClassifierParams&) = default;

 private:
  std::size_t classes() const { return static_cast<std::size_t>(num_classes_); }
  static constexpr std::size_t off_b1() { return kHidden1 * kInputDim; }
  static constexpr std::size_t off_w2() { return off_b1() + kHidden1; }
  static constexpr std::size_t off_b2() { return off_w2() + kFeatureDim * kHidden1; }
  static constexpr std::size_t off_w3() { return off_b2() + kFeatureDim; }
  static constexpr std::size_t off_b3() { return off_w3() + kHeadDim * kFeatureDim; }
  static constexpr std::size_t off_w4() { return off_b3() + kHeadDim; }
  std::size_t off_b4() const { return off_w4() + classes() * kHeadDim; }

  std::span<double> slice(std::size_t off, std::size_t n) { return {data_.data() + off, n}; }
  std::span<const double> cslice(std::size_t off, std::size_t n) const {
    return {data_.data() + off, n};
  }

  int num_classes_ = 0;
  std::vector<double> data_;
};

struct GradientBundle {
  ClassifierParams param_grads;
  std::vector<Vec3> input_grads;  // dL/dx per point
};

struct TrainConfig {
  double learning_rate = 2e-2;
  std::size_t batch_size = 8;
  std::size_t epochs = 100;
  double momentum = 0.9;
  std::uint64_t seed = 0;
  std::optional<std::size_t> step_budget;
};

void validate(const TrainConfig& cfg);

/// Per-sample random pose changes applied inside the training loop.
struct Augmentation {
  bool random_rotation = false;
  bool random_scale = false;
  double scale_lo = 0.8;
  double scale_hi = 1.2;
  std::uint64_t seed = 0;

  bool enabled() const { return random_rotation || random_scale; }
};

struct EpochStats {
  std::size_t epoch = 0;
  std::size_t steps = 0;
  double mean_loss = 0.0;
  double accuracy = 0.0;
};

struct TrainResult {
  ClassifierParams params;
  std::vector<EpochStats> history;
};

/// Uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)) weights, zero biases.
ClassifierParams init_params(int num_classes, std::uint64_t seed);

std::vector<double> forward(const ClassifierParams& params, const PointCloud& cloud);

/// Log-sum-exp stabilized softmax cross-entropy.
double cross_entropy(std::span<const double> logits, int label);

struct LossAndGrad {
  double loss = 0.0;
  GradientBundle grad;
};

/// Exact reverse-mode gradients of cross_entropy(forward(cloud), label).
/// Max-pool routes each feature's gradient to its argmax point, lowest index
/// on ties.
LossAndGrad backward(const ClassifierParams& params, const PointCloud& cloud, int label);

/// Index of the largest logit, lowest index on ties.
int argmax(std::span<const double> logits);
int predict(const ClassifierParams& params, const PointCloud& cloud);

/// Samples must carry clouds; throws InvalidArgument otherwise.
TrainResult train(const ClassifierParams& params, const LabeledDataset& dataset,
                  const TrainConfig& config, const Augmentation& aug = {});

double evaluate(const ClassifierParams& params, const LabeledDataset& dataset);

/// Predicted label per sample, in dataset order.
std::vector<int> predict_all(const ClassifierParams& params, const LabeledDataset& dataset);

/// Header line "tinynet v1 classes=<C> count=<N>" then N little-endian
/// float64 values.
std::string serialize_params(const ClassifierParams& params);
ClassifierParams deserialize_params(std::string_view bytes);

namespace kernels {

/// Per-point activations of the shared MLP, both post-ReLU, row-major
/// (points x width).
struct PointActivations {
  std::vector<double> h1;  // n x kHidden1
  std::vector<double> h2;  // n x kFeatureDim
};

/// Parallel over points.
void point_mlp(const ClassifierParams& params, std::span<const Vec3> points, PointActivations& out);

/// Mean loss and summed-then-averaged parameter gradient over a minibatch.
/// Per-sample gradients are computed in parallel and reduced in index order,
/// so the result does not depend on the thread count.
struct BatchGradient {
  double mean_loss = 0.0;
  std::size_t correct = 0;
  ClassifierParams grad;
};
BatchGradient batch_gradient(const ClassifierParams& params, std::span<const PointCloud* const> clouds,
                             std::span<const int> labels);

std::vector<int> predict_many(const ClassifierParams& params, std::span<const PointCloud* const> clouds);

namespace serial {

void point_mlp(const ClassifierParams& params, std::span<const Vec3> points, PointActivations& out);
BatchGradient batch_gradient(const ClassifierParams& params, std::span<const PointCloud* const> clouds,
                             std::span<const int> labels);
std::vector<int> predict_many(const ClassifierParams& params, std::span<const PointCloud* const> clouds);

}  // namespace serial
}  // namespace kernels

}  // namespace nrb
