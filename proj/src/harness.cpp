#include "nrbdoor/harness.hpp"

#include <chrono>
#include <cmath>
#include <functional>

#include "nrbdoor/dataset_io.hpp"
#include "nrbdoor/error.hpp"
#include "nrbdoor/rng.hpp"

namespace nrb {

double asr(const ClassifierParams& params, const PoisonedTestSet& poisoned_test, int target,
           bool exclude_target_class) {
  const auto& ds = poisoned_test.data;
  if (poisoned_test.original_labels.size() != ds.size())
    throw InvalidArgument("poisoned test set is missing its original-label sidecar");
  const auto pred = predict_all(params, ds);
  std::size_t hits = 0, total = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (exclude_target_class && poisoned_test.original_labels[i] == target) continue;
    ++total;
    hits += pred[i] == target ? 1 : 0;
  }
  if (total == 0) throw InvalidArgument("ASR evaluation set is empty after filtering");
  return static_cast<double>(hits) / static_cast<double>(total);
}

double bac(const ClassifierParams& params, const LabeledDataset& clean_test) {
  return evaluate(params, clean_test);
}

std::string to_string(TriggerKind k) {
  switch (k) {
    case TriggerKind::kNrbdoor: return "nrbdoor";
    case TriggerKind::kFixedMatrix: return "matrix";
    case TriggerKind::kCleanRotation: return "clean_rotation";
    case TriggerKind::kBall: return "ball";
  }
  return "?";
}

TriggerKind trigger_kind_from_string(const std::string& s) {
  if (s == "nrbdoor") return TriggerKind::kNrbdoor;
  if (s == "matrix") return TriggerKind::kFixedMatrix;
  if (s == "clean_rotation") return TriggerKind::kCleanRotation;
  if (s == "ball") return TriggerKind::kBall;
  throw InvalidArgument("unknown trigger kind '" + s + "'");
}

SeedConfig seeds_from_master(std::uint64_t master) {
  SeedConfig s;
  s.data = derive_seed(master, {1});
  s.init = derive_seed(master, {2});
  s.train = derive_seed(master, {3});
  s.poison = derive_seed(master, {4});
  s.selection = derive_seed(master, {5});
  s.trigger = derive_seed(master, {6});
  return s;
}

ExperimentConfig default_experiment_config() { return ExperimentConfig{}; }

void validate(const ExperimentConfig& cfg) {
  if (cfg.data_dir) {
    if (!std::filesystem::is_directory(*cfg.data_dir))
      throw IoError("dataset directory '" + cfg.data_dir->string() + "' does not exist");
  } else {
    validate(cfg.synth);
    if (cfg.target >= cfg.synth.num_classes) throw InvalidArgument("target must be a valid class index");
  }
  if (!(cfg.alpha > 0.0 && cfg.alpha <= 1.0)) throw InvalidArgument("alpha must be in (0, 1]");
  if (cfg.target < 0) throw InvalidArgument("target must be a valid class index");
  quantize_gamma(cfg.gamma);
  validate(cfg.train);
  validate(cfg.defense);
  if (cfg.trigger.kind == TriggerKind::kFixedMatrix) {
    if (!cfg.trigger.matrix) throw InvalidArgument("matrix trigger needs a matrix");
    NoisyRotation::from_matrix(*cfg.trigger.matrix);
  }
  if (cfg.trigger.kind == TriggerKind::kBall) validate(cfg.trigger.ball);
  if (cfg.augmentation.enabled() &&
      !(cfg.augmentation.scale_lo > 0.0 && cfg.augmentation.scale_lo <= cfg.augmentation.scale_hi))
    throw InvalidArgument("augmentation scale range must satisfy 0 < lo <= hi");
}

namespace {

using Clock = std::chrono::steady_clock;

// Runs one stage, records its duration and prefixes errors with its name.
template <typename Fn>
auto stage(std::vector<StageTiming>& timing, const std::string& name, Fn&& fn) {
  const auto start = Clock::now();
  auto record = [&] {
    timing.push_back({name, std::chrono::duration<double>(Clock::now() - start).count()});
  };
  try {
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      record();
    } else {
      auto result = fn();
      record();
      return result;
    }
  } catch (const InvalidArgument& e) {
    throw InvalidArgument("stage '" + name + "': " + e.what());
  } catch (const DegenerateGeometry& e) {
    throw DegenerateGeometry("stage '" + name + "': " + e.what());
  } catch (const StructureIncompatible& e) {
    throw StructureIncompatible("stage '" + name + "': " + e.what());
  } catch (const ParseError& e) {
    throw ParseError(e.line(), "stage '" + name + "': " + e.what());
  } catch (const IoError& e) {
    throw IoError("stage '" + name + "': " + e.what());
  }
}

std::vector<ClassAccuracy> per_class_accuracy(const ClassifierParams& params, const LabeledDataset& test) {
  const auto pred = predict_all(params, test);
  std::vector<ClassAccuracy> out;
  for (const auto& name : test.class_names) out.push_back({name, 0.0, 0});
  std::vector<std::size_t> hits(out.size(), 0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto c = static_cast<std::size_t>(test.samples[i].label);
    ++out[c].count;
    hits[c] += pred[i] == test.samples[i].label ? 1 : 0;
  }
  for (std::size_t c = 0; c < out.size(); ++c)
    out[c].accuracy = out[c].count ? static_cast<double>(hits[c]) / static_cast<double>(out[c].count) : 0.0;
  return out;
}

}  // namespace

std::pair<LabeledDataset, LabeledDataset> load_experiment_data(const ExperimentConfig& cfg) {
  if (cfg.data_dir) return read_dataset(*cfg.data_dir);
  SynthConfig sc = cfg.synth;
  sc.seed = cfg.seeds.data;
  return make_dataset(sc);
}

ClassifierParams train_victim(const ExperimentConfig& cfg, const LabeledDataset& data) {
  const auto init = init_params(static_cast<int>(data.num_classes()), cfg.seeds.init);
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seeds.train;
  Augmentation aug = cfg.augmentation;
  aug.seed = derive_seed(cfg.seeds.trigger, {7});
  return augmented_train(init, data, tc, aug);
}

CleanBaseline train_clean_baseline(const ExperimentConfig& cfg, const LabeledDataset& train,
                                   const LabeledDataset& test) {
  CleanBaseline b{train_victim(cfg, train), 0.0};
  b.obac = bac(b.params, test);
  return b;
}

Trigger fixed_trigger(const ExperimentConfig& cfg) {
  switch (cfg.trigger.kind) {
    case TriggerKind::kFixedMatrix:
      if (!cfg.trigger.matrix) throw InvalidArgument("matrix trigger needs a matrix");
      return NrbdoorTrigger{NoisyRotation::from_matrix(*cfg.trigger.matrix)};
    case TriggerKind::kCleanRotation:
      return CleanRotationTrigger{random_clean_rotation(cfg.trigger.rotation_seed)};
    case TriggerKind::kBall:
      return BallTrigger{cfg.trigger.ball, derive_seed(cfg.seeds.trigger, {11})};
    case TriggerKind::kNrbdoor:
      break;
  }
  throw InvalidArgument("nrbdoor trigger is chosen by selection, not fixed");
}

ExperimentReport run_attack_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  std::vector<StageTiming> timing;
  auto [train, test] = stage(timing, "data", [&] { return load_experiment_data(cfg); });
  auto report = run_attack_experiment(cfg, train, test);
  report.timing.insert(report.timing.begin(), timing.begin(), timing.end());
  return report;
}

ExperimentReport run_attack_experiment(const ExperimentConfig& cfg, const LabeledDataset& train,
                                       const LabeledDataset& test,
                                       const std::optional<CleanBaseline>& baseline) {
  validate(cfg);
  if (static_cast<std::size_t>(cfg.target) >= train.num_classes())
    throw InvalidArgument("target " + std::to_string(cfg.target) + " is not a class of the dataset");

  ExperimentReport r;
  r.alpha = cfg.alpha;
  r.target = cfg.target;
  r.trigger = to_string(cfg.trigger.kind);
  r.iterations = cfg.selection.iterations;
  r.candidates = cfg.selection.candidates;
  r.seeds = cfg.seeds;

  const CleanBaseline clean = baseline ? *baseline : stage(r.timing, "clean_train", [&] {
    return train_clean_baseline(cfg, train, test);
  });
  r.obac = clean.obac;

  const Trigger trigger = stage(r.timing, "trigger", [&]() -> Trigger {
    switch (cfg.trigger.kind) {
      case TriggerKind::kNrbdoor: {
        SelectionConfig sc = cfg.selection;
        sc.gamma = cfg.gamma;
        sc.alpha = cfg.alpha;
        sc.target = cfg.target;
        sc.seed = cfg.seeds.selection;
        auto sel = select_pattern(train, test, sc, cfg.warm_start_selection ? &clean.params : nullptr);
        r.selection = std::move(sel.report);
        return NrbdoorTrigger{sel.pattern};
      }
      default:
        return fixed_trigger(cfg);
    }
  });
  if (!std::holds_alternative<BallTrigger>(trigger)) r.pattern = trigger_matrix(trigger);
  r.gamma = noise_level(r.pattern);

  const std::uint64_t poison_seed = r.selection && cfg.reuse_selection_subset
                                        ? r.selection->chosen_poison_seed()
                                        : cfg.seeds.poison;
  auto [poisoned, manifest] = stage(r.timing, "poison", [&] {
    return poison_train(train, trigger, cfg.alpha, cfg.target, poison_seed);
  });
  r.poisoned_count = manifest.poisoned.size();

  const auto infected = stage(r.timing, "infected_train", [&] { return train_victim(cfg, poisoned); });

  stage(r.timing, "metrics", [&] {
    const auto triggered = poison_test(test, trigger, cfg.target);
    r.bac = bac(infected, test);
    r.asr = asr(infected, triggered, cfg.target, cfg.exclude_target_class);
    r.per_class = per_class_accuracy(infected, test);
    if (cfg.run_defense) r.defense = sp_defense_eval(infected, test, triggered.data, cfg.target, cfg.defense);
  });
  return r;
}

SweepAxis sweep_axis_from_string(const std::string& s) {
  if (s == "gamma") return SweepAxis::kGamma;
  if (s == "alpha") return SweepAxis::kAlpha;
  if (s == "K") return SweepAxis::kIterations;
  if (s == "M") return SweepAxis::kCandidates;
  if (s == "target") return SweepAxis::kTarget;
  throw InvalidArgument("unknown sweep axis '" + s + "' (expected gamma, alpha, K, M or target)");
}

std::string to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::kGamma: return "gamma";
    case SweepAxis::kAlpha: return "alpha";
    case SweepAxis::kIterations: return "K";
    case SweepAxis::kCandidates: return "M";
    case SweepAxis::kTarget: return "target";
  }
  return "?";
}

std::vector<ExperimentReport> sweep(const ExperimentConfig& cfg, SweepAxis axis, const std::vector<double>& values) {
  if (values.empty()) throw InvalidArgument("sweep needs at least one value");
  std::vector<ExperimentConfig> points;
  for (double v : values) {
    ExperimentConfig c = cfg;
    auto as_count = [&](const char* what) {
      if (!(v >= 0.0) || v != std::floor(v))
        throw InvalidArgument(std::string(what) + " values must be non-negative integers");
      return static_cast<std::size_t>(v);
    };
    switch (axis) {
      case SweepAxis::kGamma: c.gamma = v; break;
      case SweepAxis::kAlpha: c.alpha = v; break;
      case SweepAxis::kIterations: c.selection.iterations = as_count("K"); break;
      case SweepAxis::kCandidates: c.selection.candidates = as_count("M"); break;
      case SweepAxis::kTarget: c.target = static_cast<int>(as_count("target")); break;
    }
    validate(c);
    points.push_back(std::move(c));
  }

  std::vector<StageTiming> shared;
  auto [train, test] = stage(shared, "data", [&] { return load_experiment_data(cfg); });
  const auto baseline = stage(shared, "clean_train", [&] { return train_clean_baseline(cfg, train, test); });

  std::vector<ExperimentReport> out;
  for (const auto& c : points) {
    auto r = run_attack_experiment(c, train, test, baseline);
    r.timing.insert(r.timing.begin(), shared.begin(), shared.end());
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace nrb
