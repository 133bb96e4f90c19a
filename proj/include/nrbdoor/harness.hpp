#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "nrbdoor/defense.hpp"
#include "nrbdoor/poison.hpp"
#include "nrbdoor/selection.hpp"
#include "nrbdoor/synthdata.hpp"
#include "nrbdoor/tinynet.hpp"

namespace nrb {

/// Fraction of triggered test samples classified as `target`. With
/// `exclude_target_class`, samples whose ground truth already is the target
/// are skipped; an empty remainder is an InvalidArgument.
double asr(const ClassifierParams& params, const PoisonedTestSet& poisoned_test, int target,
           bool exclude_target_class = false);

/// Benign accuracy on an untouched test split.
double bac(const ClassifierParams& params, const LabeledDataset& clean_test);

/// Which trigger an experiment plants.
enum class TriggerKind {
  kNrbdoor,        // pattern chosen by select_pattern
  kFixedMatrix,    // given noisy rotation, no selection
  kCleanRotation,  // random_clean_rotation(seed)
  kBall            // point-attaching ball
};

std::string to_string(TriggerKind k);
TriggerKind trigger_kind_from_string(const std::string& s);

struct TriggerSpec {
  TriggerKind kind = TriggerKind::kNrbdoor;
  std::optional<Mat3> matrix;  // kFixedMatrix
  std::uint64_t rotation_seed = 0;  // kCleanRotation
  BallTriggerSpec ball;
};

struct SeedConfig {
  std::uint64_t data = 0;       // synthetic dataset
  std::uint64_t init = 1;       // classifier initialization
  std::uint64_t train = 2;      // minibatch order
  std::uint64_t poison = 3;     // poisoned-subset draw
  std::uint64_t selection = 4;  // candidate generation and selection
  std::uint64_t trigger = 5;    // ball sampling, augmentation
};

/// Applies one master seed to every stage.
SeedConfig seeds_from_master(std::uint64_t master);

struct ExperimentConfig {
  SynthConfig synth;
  std::optional<std::filesystem::path> data_dir;  // overrides synth when set
  TriggerSpec trigger;
  double gamma = 0.4;
  double alpha = 0.05;
  int target = 1;
  SelectionConfig selection;  // gamma/alpha/target/seed are taken from the fields above
  /// Scoring runs continue from the clean victim model instead of a fresh
  /// initialization.
  bool warm_start_selection = true;
  /// Poison the training split with the alpha-subset that the chosen
  /// candidate was scored on, instead of a fresh draw from seeds.poison.
  bool reuse_selection_subset = false;
  TrainConfig train;
  DefenseConfig defense;
  bool run_defense = false;
  Augmentation augmentation;  // seed is taken from seeds.trigger
  SeedConfig seeds;
  bool exclude_target_class = false;
};

/// Defaults used by the CLI and the acceptance suite.
ExperimentConfig default_experiment_config();

void validate(const ExperimentConfig& cfg);

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct ClassAccuracy {
  std::string name;
  double accuracy = 0.0;
  std::size_t count = 0;
};

struct ExperimentReport {
  double obac = 0.0;
  double bac = 0.0;
  double asr = 0.0;
  double gamma = 0.0;
  double alpha = 0.0;
  int target = 0;
  std::string trigger;
  Mat3 pattern = Mat3::identity();
  std::size_t poisoned_count = 0;
  std::size_t iterations = 0;  // K
  std::size_t candidates = 0;  // M
  SeedConfig seeds;
  std::vector<ClassAccuracy> per_class;  // infected model on the clean test split
  std::optional<SelectionReport> selection;
  std::optional<DefenseReport> defense;
  std::vector<StageTiming> timing;  // excluded from determinism checks
};

/// A trained classifier plus its clean-data accuracy, reusable across the
/// points of a sweep.
struct CleanBaseline {
  ClassifierParams params;
  double obac = 0.0;
};

/// Loads or generates the train/test splits named by the config.
std::pair<LabeledDataset, LabeledDataset> load_experiment_data(const ExperimentConfig& cfg);

/// Initializes and trains a classifier with the config's train settings,
/// seeds and augmentation.
ClassifierParams train_victim(const ExperimentConfig& cfg, const LabeledDataset& data);

/// The trigger of a matrix, clean-rotation or ball experiment.
Trigger fixed_trigger(const ExperimentConfig& cfg);

CleanBaseline train_clean_baseline(const ExperimentConfig& cfg, const LabeledDataset& train,
                                   const LabeledDataset& test);

/// Full pipeline: data, clean model, trigger selection, poisoning, infected
/// model, metrics. Stage failures are rethrown with the stage name.
ExperimentReport run_attack_experiment(const ExperimentConfig& cfg);

/// Same, on preloaded data and an optional precomputed clean baseline.
ExperimentReport run_attack_experiment(const ExperimentConfig& cfg, const LabeledDataset& train,
                                       const LabeledDataset& test,
                                       const std::optional<CleanBaseline>& baseline = std::nullopt);

enum class SweepAxis { kGamma, kAlpha, kIterations, kCandidates, kTarget };

SweepAxis sweep_axis_from_string(const std::string& s);
std::string to_string(SweepAxis a);

/// One experiment per value on a shared dataset and clean baseline.
std::vector<ExperimentReport> sweep(const ExperimentConfig& cfg, SweepAxis axis, const std::vector<double>& values);

// Serialization ------------------------------------------------------------

/// Rates (oBAc, BAc, ASR, per-class, defense) are rounded to 4 decimals.
nlohmann::json report_to_json(const ExperimentReport& r);
ExperimentReport report_from_json(const nlohmann::json& j);

/// CSV with header "oBAc,BAc,ASR,gamma,alpha,seed,target,K,M,trigger,poisoned".
std::string reports_to_csv(const std::vector<ExperimentReport>& reports);

enum class ReportFormat { kJson, kCsv };

/// JSON: one object for a single report, an array otherwise.
void emit_report(const std::vector<ExperimentReport>& reports, ReportFormat format,
                 const std::filesystem::path& path);
void emit_report(const ExperimentReport& report, ReportFormat format, const std::filesystem::path& path);

/// Parses every field of ExperimentConfig from JSON; absent fields keep
/// their defaults, unknown fields are an error.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

nlohmann::json manifest_to_json(const PoisonManifest& m);
nlohmann::json selection_to_json(const SelectionReport& r);

double round4(double v);

}  // namespace nrb
