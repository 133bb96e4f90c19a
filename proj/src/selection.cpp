#include "nrbdoor/selection.hpp"

#include "nrbdoor/error.hpp"
#include "nrbdoor/poison.hpp"
#include "nrbdoor/rng.hpp"

namespace nrb {

namespace {

// Stream tags under the selection seed.
constexpr std::uint64_t kTagCandidates = 1;
constexpr std::uint64_t kTagPick = 2;
constexpr std::uint64_t kTagRun = 3;
constexpr std::uint64_t kTagInit = 4;

}  // namespace

void validate(const SelectionConfig& cfg) {
  if (cfg.iterations < 1) throw InvalidArgument("selection needs K >= 1 iterations");
  if (cfg.candidates < 1) throw InvalidArgument("selection needs M >= 1 candidates");
  if (!(cfg.alpha > 0.0 && cfg.alpha <= 1.0)) throw InvalidArgument("alpha must be in (0, 1]");
  if (cfg.target < 0) throw InvalidArgument("target label must be non-negative");
  validate(pattern_config(cfg));
  validate(cfg.scoring_train);
}

PatternConfig pattern_config(const SelectionConfig& cfg) {
  PatternConfig p;
  p.gamma = cfg.gamma;
  p.num_candidates = cfg.candidates;
  p.cell_weights = cfg.cell_weights;
  p.seed = derive_seed(cfg.seed, {kTagCandidates});
  return p;
}

std::uint64_t iteration_seed(const SelectionConfig& cfg, std::size_t k) {
  return derive_seed(cfg.seed, {kTagRun, k});
}

std::uint64_t scoring_poison_seed(std::uint64_t run_seed) { return derive_seed(run_seed, {0}); }

std::uint64_t SelectionReport::chosen_poison_seed() const {
  for (auto it = steps.rbegin(); it != steps.rend(); ++it)
    if (it->candidate == chosen) return it->poison_seed;
  throw InvalidArgument("chosen candidate was never scored");
}

CandidateScore score_candidate(const NoiseMatrix& candidate, const LabeledDataset& train,
                               const LabeledDataset& test, const SelectionConfig& cfg,
                               std::uint64_t run_seed, const ClassifierParams* start) {
  if (start && static_cast<std::size_t>(start->num_classes()) != train.class_names.size())
    throw InvalidArgument("starting classifier has " + std::to_string(start->num_classes()) +
                          " outputs for " + std::to_string(train.class_names.size()) + " classes");
  const Trigger trigger = NrbdoorTrigger{compose(candidate)};
  auto [poisoned, manifest] = poison_train(train, trigger, cfg.alpha, cfg.target, scoring_poison_seed(run_seed));

  TrainConfig tc = cfg.scoring_train;
  tc.seed = derive_seed(run_seed, {1});
  tc.step_budget = cfg.short_step_budget;
  // Enough epochs that the step budget is what stops training.
  const std::size_t steps_per_epoch = (poisoned.size() + tc.batch_size - 1) / tc.batch_size;
  tc.epochs = (cfg.short_step_budget + steps_per_epoch - 1) / steps_per_epoch + 1;

  // Every scoring run starts from the same initialization so scores compare.
  const auto init = start ? *start
                          : init_params(static_cast<int>(train.num_classes()), derive_seed(cfg.seed, {kTagInit}));
  const auto trained = nrb::train(init, poisoned, tc).params;
  const auto triggered = poison_test(test, trigger, cfg.target);
  return {evaluate(trained, triggered.data), evaluate(trained, test)};
}

std::size_t argmax_score(const std::vector<double>& scores) {
  if (scores.empty()) throw InvalidArgument("argmax of an empty score vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;
  return best;
}

SelectionResult select_pattern(const LabeledDataset& train, const LabeledDataset& test,
                               const SelectionConfig& cfg, const ClassifierParams* start) {
  validate(cfg);
  if (start && static_cast<std::size_t>(start->num_classes()) != train.num_classes())
    throw InvalidArgument("starting classifier does not match the dataset's class count");
  if (static_cast<std::size_t>(cfg.target) >= train.num_classes())
    throw InvalidArgument("target label is not a valid class");
  // Scoring runs execute inside a parallel region and must not throw.
  for (const auto* ds : {&train, &test}) {
    if (ds->samples.empty()) throw InvalidArgument("selection needs non-empty train and test splits");
    for (const auto& s : ds->samples)
      if (!s.cloud || s.cloud->points.empty())
        throw InvalidArgument("sample '" + s.id + "' has no point cloud");
  }

  SelectionReport report;
  report.candidates = generate_candidates(pattern_config(cfg));
  const std::size_t m = report.candidates.size();
  report.scores.assign(m, 0.0);
  report.evaluated.assign(m, false);

  // Candidate picks are fixed up front so scoring runs can go in parallel.
  std::vector<std::size_t> picks(cfg.iterations);
  Rng pick_rng(derive_seed(cfg.seed, {kTagPick}));
  for (std::size_t k = 0; k < cfg.iterations; ++k)
    picks[k] = cfg.order == CandidateOrder::kRoundRobin ? k % m
                                                        : static_cast<std::size_t>(pick_rng.below(m));

  std::vector<CandidateScore> results(cfg.iterations);
  const auto iters = static_cast<long>(cfg.iterations);
#pragma omp parallel for schedule(dynamic)
  for (long k = 0; k < iters; ++k) {
    const auto u = static_cast<std::size_t>(k);
    results[u] = score_candidate(report.candidates[picks[u]], train, test, cfg, iteration_seed(cfg, u), start);
  }

  std::vector<std::size_t> visits(m, 0);
  for (std::size_t k = 0; k < cfg.iterations; ++k) {
    const std::size_t c = picks[k];
    const double s = results[k].q_a + results[k].q_s;
    if (cfg.update == ScoreUpdate::kAverage && visits[c] > 0)
      report.scores[c] = (report.scores[c] * static_cast<double>(visits[c]) + s) /
                         static_cast<double>(visits[c] + 1);
    else
      report.scores[c] = s;
    ++visits[c];
    report.evaluated[c] = true;
    report.steps.push_back({k, c, results[k].q_a, results[k].q_s, scoring_poison_seed(iteration_seed(cfg, k))});
  }
  report.chosen = argmax_score(report.scores);
  return {compose(report.candidates[report.chosen]), std::move(report)};
}

}  // namespace nrb
