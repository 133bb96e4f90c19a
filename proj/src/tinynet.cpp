#include "nrbdoor/tinynet.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

#include "nrbdoor/error.hpp"
#include "nrbdoor/rng.hpp"
#include "tinynet_detail.hpp"

namespace nrb {

ClassifierParams::ClassifierParams(int num_classes)
    : num_classes_(num_classes), data_(count_for(num_classes), 0.0) {
  if (num_classes < 2) throw InvalidArgument("classifier needs at least 2 classes");
}

std::size_t ClassifierParams::count_for(int num_classes) {
  const auto c = static_cast<std::size_t>(num_classes);
  return kHidden1 * kInputDim + kHidden1 + kFeatureDim * kHidden1 + kFeatureDim +
         kHeadDim * kFeatureDim + kHeadDim + c * kHeadDim + c;
}

void validate(const TrainConfig& cfg) {
  if (!(cfg.learning_rate > 0.0)) throw InvalidArgument("learning_rate must be positive");
  if (cfg.batch_size < 1) throw InvalidArgument("batch_size must be at least 1");
  if (cfg.epochs < 1) throw InvalidArgument("epochs must be at least 1");
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0))
    throw InvalidArgument("momentum must be in [0, 1)");
}

ClassifierParams init_params(int num_classes, std::uint64_t seed) {
  ClassifierParams p(num_classes);
  Rng rng(seed);
  auto fill = [&](std::span<double> w, std::size_t fan_in) {
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    for (double& v : w) v = rng.uniform(-bound, bound);
  };
  fill(p.w1(), kInputDim);
  fill(p.w2(), kHidden1);
  fill(p.w3(), kFeatureDim);
  fill(p.w4(), kHeadDim);
  return p;
}

namespace detail {

HeadState head_forward(const ClassifierParams& params, const kernels::PointActivations& acts,
                       std::size_t n_points) {
  HeadState h;
  h.winner.assign(kFeatureDim, 0);
  h.pooled.assign(kFeatureDim, 0.0);
  for (std::size_t k = 0; k < kFeatureDim; ++k) h.pooled[k] = acts.h2[k];
  for (std::size_t i = 1; i < n_points; ++i) {
    const double* row = acts.h2.data() + i * kFeatureDim;
    for (std::size_t k = 0; k < kFeatureDim; ++k)
      if (row[k] > h.pooled[k]) {
        h.pooled[k] = row[k];
        h.winner[k] = i;
      }
  }
  const auto w3 = params.w3();
  const auto b3 = params.b3();
  h.z_pre.assign(kHeadDim, 0.0);
  h.z.assign(kHeadDim, 0.0);
  for (std::size_t j = 0; j < kHeadDim; ++j) {
    double a = b3[j];
    for (std::size_t k = 0; k < kFeatureDim; ++k) a += w3[j * kFeatureDim + k] * h.pooled[k];
    h.z_pre[j] = a;
    h.z[j] = a > 0.0 ? a : 0.0;
  }
  const auto w4 = params.w4();
  const auto b4 = params.b4();
  const auto c = static_cast<std::size_t>(params.num_classes());
  h.logits.assign(c, 0.0);
  for (std::size_t o = 0; o < c; ++o) {
    double a = b4[o];
    for (std::size_t j = 0; j < kHeadDim; ++j) a += w4[o * kHeadDim + j] * h.z[j];
    h.logits[o] = a;
  }
  return h;
}

double backprop(const ClassifierParams& params, std::span<const Vec3> points,
                const kernels::PointActivations& acts, const HeadState& head, int label,
                ClassifierParams& grad, std::vector<Vec3>* input_grads) {
  const auto c = static_cast<std::size_t>(params.num_classes());
  std::fill(grad.flat().begin(), grad.flat().end(), 0.0);

  // Softmax cross-entropy gradient.
  const double mx = *std::max_element(head.logits.begin(), head.logits.end());
  double denom = 0.0;
  for (double l : head.logits) denom += std::exp(l - mx);
  const double loss = mx + std::log(denom) - head.logits[static_cast<std::size_t>(label)];
  std::vector<double> d_logits(c);
  for (std::size_t o = 0; o < c; ++o) d_logits[o] = std::exp(head.logits[o] - mx) / denom;
  d_logits[static_cast<std::size_t>(label)] -= 1.0;

  // Output layer.
  const auto w4 = params.w4();
  auto gw4 = grad.w4();
  auto gb4 = grad.b4();
  std::vector<double> d_zpre(kHeadDim, 0.0);
  for (std::size_t o = 0; o < c; ++o) {
    gb4[o] = d_logits[o];
    for (std::size_t j = 0; j < kHeadDim; ++j) {
      gw4[o * kHeadDim + j] = d_logits[o] * head.z[j];
      d_zpre[j] += w4[o * kHeadDim + j] * d_logits[o];
    }
  }
  for (std::size_t j = 0; j < kHeadDim; ++j)
    if (!(head.z_pre[j] > 0.0)) d_zpre[j] = 0.0;

  // Hidden head layer.
  const auto w3 = params.w3();
  auto gw3 = grad.w3();
  auto gb3 = grad.b3();
  std::vector<double> d_pooled(kFeatureDim, 0.0);
  for (std::size_t j = 0; j < kHeadDim; ++j) {
    gb3[j] = d_zpre[j];
    if (d_zpre[j] == 0.0) continue;
    for (std::size_t k = 0; k < kFeatureDim; ++k) {
      gw3[j * kFeatureDim + k] = d_zpre[j] * head.pooled[k];
      d_pooled[k] += w3[j * kFeatureDim + k] * d_zpre[j];
    }
  }

  // Max-pool: route to the winning point; ReLU gate on that point's feature.
  // Group by point so each winner is processed once.
  std::vector<std::size_t> order(kFeatureDim);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return head.winner[a] < head.winner[b]; });

  if (input_grads) input_grads->assign(points.size(), Vec3{});
  const auto w1 = params.w1();
  const auto w2 = params.w2();
  auto gw1 = grad.w1();
  auto gb1 = grad.b1();
  auto gw2 = grad.w2();
  auto gb2 = grad.b2();
  std::vector<double> d_pre2(kFeatureDim);
  std::vector<double> d_pre1(kHidden1);
  std::size_t pos = 0;
  while (pos < order.size()) {
    const std::size_t p = head.winner[order[pos]];
    std::fill(d_pre2.begin(), d_pre2.end(), 0.0);
    bool any = false;
    for (; pos < order.size() && head.winner[order[pos]] == p; ++pos) {
      const std::size_t k = order[pos];
      if (acts.h2[p * kFeatureDim + k] > 0.0 && d_pooled[k] != 0.0) {
        d_pre2[k] = d_pooled[k];
        any = true;
      }
    }
    if (!any) continue;
    const double* h1 = acts.h1.data() + p * kHidden1;
    std::fill(d_pre1.begin(), d_pre1.end(), 0.0);
    for (std::size_t k = 0; k < kFeatureDim; ++k) {
      const double d = d_pre2[k];
      if (d == 0.0) continue;
      gb2[k] += d;
      for (std::size_t j = 0; j < kHidden1; ++j) {
        gw2[k * kHidden1 + j] += d * h1[j];
        d_pre1[j] += w2[k * kHidden1 + j] * d;
      }
    }
    const Vec3& x = points[p];
    Vec3 dx{};
    for (std::size_t j = 0; j < kHidden1; ++j) {
      if (!(h1[j] > 0.0)) continue;
      const double d = d_pre1[j];
      gb1[j] += d;
      gw1[3 * j] += d * x.x;
      gw1[3 * j + 1] += d * x.y;
      gw1[3 * j + 2] += d * x.z;
      dx = dx + Vec3{w1[3 * j], w1[3 * j + 1], w1[3 * j + 2]} * d;
    }
    if (input_grads) (*input_grads)[p] = dx;
  }
  return loss;
}

}  // namespace detail

std::vector<double> forward(const ClassifierParams& params, const PointCloud& cloud) {
  if (cloud.points.empty()) throw InvalidArgument("forward: empty point cloud");
  kernels::PointActivations acts;
  kernels::point_mlp(params, cloud.points, acts);
  return detail::head_forward(params, acts, cloud.size()).logits;
}

double cross_entropy(std::span<const double> logits, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size())
    throw InvalidArgument("cross_entropy: label out of range");
  const double mx = *std::max_element(logits.begin(), logits.end());
  double denom = 0.0;
  for (double l : logits) denom += std::exp(l - mx);
  return mx + std::log(denom) - logits[static_cast<std::size_t>(label)];
}

LossAndGrad backward(const ClassifierParams& params, const PointCloud& cloud, int label) {
  if (cloud.points.empty()) throw InvalidArgument("backward: empty point cloud");
  if (label < 0 || label >= params.num_classes()) throw InvalidArgument("backward: label out of range");
  kernels::PointActivations acts;
  kernels::point_mlp(params, cloud.points, acts);
  const auto head = detail::head_forward(params, acts, cloud.size());
  LossAndGrad out{0.0, {ClassifierParams(params.num_classes()), {}}};
  out.loss = detail::backprop(params, cloud.points, acts, head, label, out.grad.param_grads,
                              &out.grad.input_grads);
  return out;
}

int argmax(std::span<const double> logits) {
  std::size_t best = 0;
  for (std::size_t o = 1; o < logits.size(); ++o)
    if (logits[o] > logits[best]) best = o;
  return static_cast<int>(best);
}

int predict(const ClassifierParams& params, const PointCloud& cloud) {
  return argmax(forward(params, cloud));
}

namespace {

std::vector<const PointCloud*> clouds_of(const LabeledDataset& ds) {
  std::vector<const PointCloud*> out;
  out.reserve(ds.size());
  for (const auto& s : ds.samples) {
    if (!s.cloud) throw InvalidArgument("sample '" + s.id + "' has no point cloud");
    if (s.cloud->points.empty()) throw InvalidArgument("sample '" + s.id + "' has an empty cloud");
    out.push_back(&*s.cloud);
  }
  return out;
}

PointCloud augment(const PointCloud& cloud, const Augmentation& aug, std::uint64_t stream) {
  Rng rng(stream);
  Mat3 m = Mat3::identity();
  if (aug.random_rotation) {
    constexpr double two_pi = 2.0 * 3.14159265358979323846;
    const double ax = rng.uniform(0.0, two_pi), ay = rng.uniform(0.0, two_pi),
                 az = rng.uniform(0.0, two_pi);
    m = euler_rotation(ax, ay, az).matrix();
  }
  if (aug.random_scale) {
    const double s = rng.uniform(aug.scale_lo, aug.scale_hi);
    for (double& v : m.m) v *= s;
  }
  return apply_linear(cloud, m);
}

}  // namespace

TrainResult train(const ClassifierParams& params, const LabeledDataset& dataset,
                  const TrainConfig& config, const Augmentation& aug) {
  validate(config);
  if (dataset.samples.empty()) throw InvalidArgument("train: empty dataset");
  const auto clouds = clouds_of(dataset);
  for (const auto& s : dataset.samples)
    if (s.label < 0 || s.label >= params.num_classes())
      throw InvalidArgument("train: sample '" + s.id + "' label out of range");

  TrainResult result{params, {}};
  const std::size_t budget = config.step_budget.value_or(static_cast<std::size_t>(-1));
  if (budget == 0) return result;

  auto weights = result.params.flat();
  std::vector<double> velocity(weights.size(), 0.0);
  std::vector<std::size_t> order(dataset.size());
  std::size_t steps = 0;

  for (std::size_t epoch = 0; epoch < config.epochs && steps < budget; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(config.seed, {0, epoch}));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle_rng.below(i))]);

    EpochStats stats{epoch, 0, 0.0, 0.0};
    std::size_t seen = 0, correct = 0;
    for (std::size_t start = 0; start < order.size() && steps < budget; start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      std::vector<const PointCloud*> batch;
      std::vector<PointCloud> augmented;
      std::vector<int> labels;
      if (aug.enabled()) {
        augmented.reserve(stop - start);
        for (std::size_t k = start; k < stop; ++k)
          augmented.push_back(augment(*clouds[order[k]], aug,
                                      derive_seed(aug.seed, {epoch, order[k]})));
      }
      for (std::size_t k = start; k < stop; ++k) {
        batch.push_back(aug.enabled() ? &augmented[k - start] : clouds[order[k]]);
        labels.push_back(dataset.samples[order[k]].label);
      }
      const auto g = kernels::batch_gradient(result.params, batch, labels);
      const auto gf = g.grad.flat();
      for (std::size_t k = 0; k < weights.size(); ++k) {
        velocity[k] = config.momentum * velocity[k] + gf[k];
        weights[k] -= config.learning_rate * velocity[k];
      }
      ++steps;
      ++stats.steps;
      stats.mean_loss += g.mean_loss * static_cast<double>(batch.size());
      seen += batch.size();
      correct += g.correct;
    }
    stats.mean_loss /= static_cast<double>(seen);
    stats.accuracy = static_cast<double>(correct) / static_cast<double>(seen);
    result.history.push_back(stats);
  }
  return result;
}

std::vector<int> predict_all(const ClassifierParams& params, const LabeledDataset& dataset) {
  const auto clouds = clouds_of(dataset);
  return kernels::predict_many(params, clouds);
}

double evaluate(const ClassifierParams& params, const LabeledDataset& dataset) {
  if (dataset.samples.empty()) throw InvalidArgument("evaluate: empty dataset");
  const auto pred = predict_all(params, dataset);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == dataset.samples[i].label ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

namespace {

constexpr std::string_view kParamsMagic = "tinynet v1";

std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xFF) << (8 * (7 - i));
    return r;
  }
  return v;
}

}  // namespace

std::string serialize_params(const ClassifierParams& params) {
  std::ostringstream header;
  header << kParamsMagic << " classes=" << params.num_classes() << " count=" << params.flat().size()
         << "\n";
  std::string out = header.str();
  for (double v : params.flat()) {
    const std::uint64_t bits = to_le(std::bit_cast<std::uint64_t>(v));
    char buf[8];
    std::memcpy(buf, &bits, 8);
    out.append(buf, 8);
  }
  return out;
}

ClassifierParams deserialize_params(std::string_view bytes) {
  const auto nl = bytes.find('\n');
  if (nl == std::string_view::npos) throw ParseError(1, "missing parameter header line");
  std::istringstream header{std::string(bytes.substr(0, nl))};
  std::string magic, version, classes_tok, count_tok;
  header >> magic >> version >> classes_tok >> count_tok;
  if (magic + " " + version != kParamsMagic || classes_tok.rfind("classes=", 0) != 0 ||
      count_tok.rfind("count=", 0) != 0)
    throw ParseError(1, "bad parameter header");
  int classes = 0;
  std::size_t count = 0;
  try {
    classes = std::stoi(classes_tok.substr(8));
    count = std::stoul(count_tok.substr(6));
  } catch (const std::exception&) {
    throw ParseError(1, "bad parameter header numbers");
  }
  if (classes < 2 || count != ClassifierParams::count_for(classes))
    throw ParseError(1, "parameter count does not match class count");
  const auto body = bytes.substr(nl + 1);
  if (body.size() != count * 8)
    throw ParseError(2, "expected " + std::to_string(count * 8) + " payload bytes, found " +
                            std::to_string(body.size()));
  ClassifierParams p(classes);
  auto flat = p.flat();
  for (std::size_t k = 0; k < count; ++k) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, body.data() + 8 * k, 8);
    flat[k] = std::bit_cast<double>(to_le(bits));
    if (!std::isfinite(flat[k])) throw ParseError(2, "non-finite parameter value");
  }
  return p;
}

}  // namespace nrb
