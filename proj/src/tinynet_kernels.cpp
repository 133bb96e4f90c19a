#include <algorithm>
#include <cmath>

#include "nrbdoor/error.hpp"
#include "nrbdoor/tinynet.hpp"
#include "tinynet_detail.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace nrb {

namespace {

bool in_parallel() {
#ifdef _OPENMP
  return omp_in_parallel() != 0;
#else
  return false;
#endif
}

// Below this many points the fork/join costs more than the work.
constexpr long kMinPointsForThreads = 512;

inline void point_row(const ClassifierParams& params, const Vec3& p, double* h1, double* h2) {
  const auto w1 = params.w1();
  const auto b1 = params.b1();
  const auto w2 = params.w2();
  const auto b2 = params.b2();
  for (std::size_t j = 0; j < kHidden1; ++j) {
    const double a = w1[3 * j] * p.x + w1[3 * j + 1] * p.y + w1[3 * j + 2] * p.z + b1[j];
    h1[j] = a > 0.0 ? a : 0.0;
  }
  for (std::size_t k = 0; k < kFeatureDim; ++k) {
    const double* row = w2.data() + k * kHidden1;
    double a = b2[k];
    for (std::size_t j = 0; j < kHidden1; ++j) a += row[j] * h1[j];
    h2[k] = a > 0.0 ? a : 0.0;
  }
}

void resize_acts(kernels::PointActivations& out, std::size_t n) {
  out.h1.resize(n * kHidden1);
  out.h2.resize(n * kFeatureDim);
}

// Everything that can throw is checked here, outside the parallel regions.
void validate_clouds(std::span<const PointCloud* const> clouds) {
  for (const auto* c : clouds)
    if (c == nullptr || c->points.empty()) throw InvalidArgument("empty point cloud in batch");
}

void validate_batch(const ClassifierParams& params, std::span<const PointCloud* const> clouds,
                    std::span<const int> labels) {
  if (clouds.size() != labels.size()) throw InvalidArgument("batch clouds/labels size mismatch");
  if (clouds.empty()) throw InvalidArgument("empty batch");
  validate_clouds(clouds);
  for (int l : labels)
    if (l < 0 || l >= params.num_classes()) throw InvalidArgument("batch label out of range");
}

// One sample's loss and gradient, using the given point kernel.
template <typename PointKernel>
double sample_gradient(const ClassifierParams& params, const PointCloud& cloud, int label,
                       ClassifierParams& grad, bool& correct, PointKernel&& kernel) {
  kernels::PointActivations acts;
  kernel(params, cloud.points, acts);
  const auto head = detail::head_forward(params, acts, cloud.size());
  correct = argmax(head.logits) == label;
  return detail::backprop(params, cloud.points, acts, head, label, grad, nullptr);
}

// Ordered reduction shared by both batch variants.
kernels::BatchGradient reduce(const ClassifierParams& params, std::vector<ClassifierParams>& per_sample,
                              const std::vector<double>& losses, const std::vector<char>& correct) {
  kernels::BatchGradient out{0.0, 0, ClassifierParams(params.num_classes())};
  auto acc = out.grad.flat();
  for (std::size_t s = 0; s < per_sample.size(); ++s) {
    const auto g = per_sample[s].flat();
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += g[k];
    out.mean_loss += losses[s];
    out.correct += correct[s] ? 1 : 0;
  }
  const double inv = 1.0 / static_cast<double>(per_sample.size());
  for (double& v : acc) v *= inv;
  out.mean_loss *= inv;
  return out;
}

}  // namespace

namespace kernels {

void point_mlp(const ClassifierParams& params, std::span<const Vec3> points, PointActivations& out) {
  const auto n = static_cast<long>(points.size());
  resize_acts(out, points.size());
#pragma omp parallel for schedule(static) if (n >= kMinPointsForThreads && !in_parallel())
  for (long i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    point_row(params, points[u], out.h1.data() + u * kHidden1, out.h2.data() + u * kFeatureDim);
  }
}

BatchGradient batch_gradient(const ClassifierParams& params, std::span<const PointCloud* const> clouds,
                             std::span<const int> labels) {
  validate_batch(params, clouds, labels);
  const auto n = static_cast<long>(clouds.size());
  std::vector<ClassifierParams> per_sample(clouds.size(), ClassifierParams(params.num_classes()));
  std::vector<double> losses(clouds.size());
  std::vector<char> correct(clouds.size());
#pragma omp parallel for schedule(dynamic)
  for (long s = 0; s < n; ++s) {
    const auto u = static_cast<std::size_t>(s);
    bool ok = false;
    losses[u] = sample_gradient(params, *clouds[u], labels[u], per_sample[u], ok,
                                [](const auto& p, auto pts, auto& a) { point_mlp(p, pts, a); });
    correct[u] = ok;
  }
  return reduce(params, per_sample, losses, correct);
}

std::vector<int> predict_many(const ClassifierParams& params, std::span<const PointCloud* const> clouds) {
  validate_clouds(clouds);
  const auto n = static_cast<long>(clouds.size());
  std::vector<int> out(clouds.size());
#pragma omp parallel for schedule(dynamic)
  for (long s = 0; s < n; ++s) out[static_cast<std::size_t>(s)] = predict(params, *clouds[static_cast<std::size_t>(s)]);
  return out;
}

namespace serial {

void point_mlp(const ClassifierParams& params, std::span<const Vec3> points, PointActivations& out) {
  resize_acts(out, points.size());
  for (std::size_t i = 0; i < points.size(); ++i)
    point_row(params, points[i], out.h1.data() + i * kHidden1, out.h2.data() + i * kFeatureDim);
}

BatchGradient batch_gradient(const ClassifierParams& params, std::span<const PointCloud* const> clouds,
                             std::span<const int> labels) {
  validate_batch(params, clouds, labels);
  std::vector<ClassifierParams> per_sample(clouds.size(), ClassifierParams(params.num_classes()));
  std::vector<double> losses(clouds.size());
  std::vector<char> correct(clouds.size());
  for (std::size_t s = 0; s < clouds.size(); ++s) {
    bool ok = false;
    losses[s] = sample_gradient(params, *clouds[s], labels[s], per_sample[s], ok,
                                [](const auto& p, auto pts, auto& a) { serial::point_mlp(p, pts, a); });
    correct[s] = ok;
  }
  return reduce(params, per_sample, losses, correct);
}

std::vector<int> predict_many(const ClassifierParams& params, std::span<const PointCloud* const> clouds) {
  validate_clouds(clouds);
  std::vector<int> out;
  out.reserve(clouds.size());
  for (const auto* c : clouds) {
    PointActivations acts;
    serial::point_mlp(params, c->points, acts);
    out.push_back(argmax(detail::head_forward(params, acts, c->size()).logits));
  }
  return out;
}

}  // namespace serial
}  // namespace kernels

}  // namespace nrb
