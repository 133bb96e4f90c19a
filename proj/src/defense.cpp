#include "nrbdoor/defense.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nrbdoor/error.hpp"

namespace nrb {

void validate(const DefenseConfig& cfg) {
  if (!std::isfinite(cfg.beta)) throw InvalidArgument("beta must be finite");
  if (!(cfg.r_clamp > 0.0)) throw InvalidArgument("r_clamp must be positive");
}

namespace {

double median_of(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<long>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<long>(mid));
  return 0.5 * (lo + hi);
}

void check_clouds(const LabeledDataset& ds) {
  for (const auto& s : ds.samples)
    if (!s.cloud || s.cloud->points.empty())
      throw InvalidArgument("sample '" + s.id + "' has no point cloud");
}

double fraction_equal(const std::vector<int>& pred, const std::vector<int>& want) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == want[i] ? 1 : 0;
  return pred.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(pred.size());
}

std::vector<int> predict_defended(const ClassifierParams& params, const std::vector<DropResult>& defended) {
  std::vector<const PointCloud*> clouds;
  for (const auto& d : defended) {
    if (d.survivors.points.empty()) throw InvalidArgument("SP-defense dropped every point of a sample");
    clouds.push_back(&d.survivors);
  }
  return kernels::predict_many(params, clouds);
}

}  // namespace

Vec3 cloud_center(const PointCloud& cloud, CenterMode mode) {
  validate(cloud);
  if (mode == CenterMode::kMean) {
    Vec3 c{};
    for (const auto& p : cloud.points) c = c + p;
    return c * (1.0 / static_cast<double>(cloud.size()));
  }
  std::vector<double> xs, ys, zs;
  for (const auto& p : cloud.points) {
    xs.push_back(p.x);
    ys.push_back(p.y);
    zs.push_back(p.z);
  }
  return {median_of(xs), median_of(ys), median_of(zs)};
}

SaliencyMap saliency_map(const ClassifierParams& params, const PointCloud& cloud, int label,
                         const DefenseConfig& cfg) {
  validate(cfg);
  const auto lg = backward(params, cloud, label);
  SaliencyMap map;
  map.center = cloud_center(cloud, cfg.center);
  const std::size_t n = cloud.size();
  map.scores.resize(n);
  map.radial_grad.resize(n);
  map.radius.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 d = cloud.points[i] - map.center;
    const double r = std::max(d.norm(), cfg.r_clamp);
    const double dl_dr = lg.grad.input_grads[i].dot(d) / r;
    map.radius[i] = r;
    map.radial_grad[i] = dl_dr;
    map.scores[i] = -dl_dr * std::pow(r, 1.0 + cfg.beta);
  }
  return map;
}

DropResult drop_top_q(const PointCloud& cloud, const SaliencyMap& map, std::size_t q) {
  if (map.scores.size() != cloud.size()) throw InvalidArgument("saliency map does not match cloud");
  if (q > cloud.size())
    throw InvalidArgument("cannot drop " + std::to_string(q) + " of " + std::to_string(cloud.size()) +
                          " points");
  std::vector<std::size_t> order(cloud.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return map.scores[a] > map.scores[b]; });
  DropResult out;
  out.dropped.assign(order.begin(), order.begin() + static_cast<long>(q));
  std::vector<char> gone(cloud.size(), 0);
  for (auto i : out.dropped) gone[i] = 1;
  for (std::size_t i = 0; i < cloud.size(); ++i)
    if (!gone[i]) out.survivors.points.push_back(cloud.points[i]);
  return out;
}

DropResult sp_defend(const ClassifierParams& params, const PointCloud& cloud, const DefenseConfig& cfg) {
  validate(cfg);
  if (cfg.q >= cloud.size())
    throw InvalidArgument("SP-defense would drop every point (q=" + std::to_string(cfg.q) + ")");
  if (cfg.drop == DropMode::kSingleShot) {
    const int label = predict(params, cloud);
    return drop_top_q(cloud, saliency_map(params, cloud, label, cfg), cfg.q);
  }
  // Iterative: track original indices of the shrinking cloud.
  DropResult out{cloud, {}};
  std::vector<std::size_t> alive(cloud.size());
  std::iota(alive.begin(), alive.end(), std::size_t{0});
  for (std::size_t step = 0; step < cfg.q; ++step) {
    const int label = predict(params, out.survivors);
    const auto one = drop_top_q(out.survivors, saliency_map(params, out.survivors, label, cfg), 1);
    out.dropped.push_back(alive[one.dropped.front()]);
    alive.erase(alive.begin() + static_cast<long>(one.dropped.front()));
    out.survivors = one.survivors;
  }
  return out;
}

std::vector<DropResult> sp_defend_all(const ClassifierParams& params, const LabeledDataset& dataset,
                                      const DefenseConfig& cfg) {
  validate(cfg);
  check_clouds(dataset);
  for (const auto& s : dataset.samples)
    if (cfg.q >= s.cloud->size())
      throw InvalidArgument("SP-defense would drop every point of sample '" + s.id + "'");
  std::vector<DropResult> out(dataset.size());
  const auto n = static_cast<long>(dataset.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    out[u] = sp_defend(params, *dataset.samples[u].cloud, cfg);
  }
  return out;
}

DefenseReport sp_defense_eval(const ClassifierParams& params, const LabeledDataset& clean_test,
                              const LabeledDataset& poisoned_test, int target, const DefenseConfig& cfg) {
  if (clean_test.samples.empty() || poisoned_test.samples.empty())
    throw InvalidArgument("sp_defense_eval needs non-empty clean and poisoned test sets");
  std::vector<int> clean_labels, targets(poisoned_test.size(), target);
  for (const auto& s : clean_test.samples) clean_labels.push_back(s.label);

  DefenseReport r;
  r.asr_before = fraction_equal(predict_all(params, poisoned_test), targets);
  r.bac_before = fraction_equal(predict_all(params, clean_test), clean_labels);
  r.asr_after = fraction_equal(predict_defended(params, sp_defend_all(params, poisoned_test, cfg)), targets);
  r.bac_after = fraction_equal(predict_defended(params, sp_defend_all(params, clean_test, cfg)), clean_labels);
  return r;
}

ClassifierParams augmented_train(const ClassifierParams& params, const LabeledDataset& dataset,
                                 const TrainConfig& train_cfg, const Augmentation& aug) {
  return train(params, dataset, train_cfg, aug).params;
}

}  // namespace nrb
