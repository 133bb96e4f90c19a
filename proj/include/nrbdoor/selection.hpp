#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "nrbdoor/pattern.hpp"
#include "nrbdoor/synthdata.hpp"
#include "nrbdoor/tinynet.hpp"

namespace nrb {

/// Which candidate each selection iteration scores.
enum class CandidateOrder {
  kRandom,     // seeded uniform draw per iteration
  kRoundRobin  // iteration k scores candidate k mod M
};

/// What happens to a candidate's score when it is scored again.
enum class ScoreUpdate { kOverwrite, kAverage };

struct SelectionConfig {
  std::size_t iterations = 5;   // K
  std::size_t candidates = 20;  // M
  double alpha = 0.05;
  int target = 1;
  std::size_t short_step_budget = 200;
  double gamma = 0.4;
  std::uint64_t seed = 0;
  std::array<double, 9> cell_weights = PatternConfig::default_cell_weights();
  /// Optimizer settings for the short scoring runs; epochs and step_budget
  /// are overridden by short_step_budget.
  TrainConfig scoring_train{};
  CandidateOrder order = CandidateOrder::kRandom;
  ScoreUpdate update = ScoreUpdate::kOverwrite;
};

void validate(const SelectionConfig& cfg);

/// Pattern-generation settings implied by a selection config.
PatternConfig pattern_config(const SelectionConfig& cfg);

struct CandidateScore {
  double q_a = 0.0;  // attack success on the triggered test split
  double q_s = 0.0;  // benign accuracy on the clean test split
};

struct SelectionStep {
  std::size_t iteration = 0;
  std::size_t candidate = 0;
  double q_a = 0.0;
  double q_s = 0.0;
  std::uint64_t poison_seed = 0;  // seed of the alpha-subset this step poisoned
};

struct SelectionReport {
  std::vector<NoiseMatrix> candidates;
  std::vector<double> scores;
  std::vector<bool> evaluated;
  std::size_t chosen = 0;
  std::vector<SelectionStep> steps;

  /// Subset seed of the last step that scored the chosen candidate.
  std::uint64_t chosen_poison_seed() const;
};

/// Seed of the alpha-subset that score_candidate poisons for `run_seed`.
std::uint64_t scoring_poison_seed(std::uint64_t run_seed);

/// Seed that iteration `k` of select_pattern passes to score_candidate.
std::uint64_t iteration_seed(const SelectionConfig& cfg, std::size_t k);

/// Poisons an alpha-subset of train (drawn from run_seed) with N + I,
/// trains a fresh classifier for short_step_budget updates and measures
/// q_a and q_s on the test split.
/// `start` is the classifier each scoring run begins from; when null a
/// fresh initialization (seeded from cfg.seed) is used.
CandidateScore score_candidate(const NoiseMatrix& candidate, const LabeledDataset& train,
                               const LabeledDataset& test, const SelectionConfig& cfg,
                               std::uint64_t run_seed, const ClassifierParams* start = nullptr);

/// Index of the highest score, lowest index on ties.
std::size_t argmax_score(const std::vector<double>& scores);

struct SelectionResult {
  NoisyRotation pattern;
  SelectionReport report;
};

SelectionResult select_pattern(const LabeledDataset& train, const LabeledDataset& test,
                               const SelectionConfig& cfg, const ClassifierParams* start = nullptr);

}  // namespace nrb
