#include <set>

#include "doctest.h"
#include "nrbdoor/error.hpp"
#include "nrbdoor/selection.hpp"
#include "support.hpp"

using namespace nrb;

namespace {

struct Fixture {
  LabeledDataset train, test;
  SelectionConfig cfg;

  Fixture() {
    auto d = make_dataset(nrbtest::tiny_synth(5));
    train = std::move(d.first);
    test = std::move(d.second);
    cfg.alpha = 0.2;
    cfg.short_step_budget = 6;
    cfg.scoring_train.batch_size = 4;
    cfg.seed = 17;
  }
};

}  // namespace

TEST_CASE("argmax_score breaks ties toward the lowest index") {
  CHECK(argmax_score({0.5, 1.5, 1.5, 0.2}) == 1);
  CHECK(argmax_score({2.0}) == 0);
  CHECK(argmax_score({0.0, 0.0, 0.0}) == 0);
  CHECK_THROWS_AS(argmax_score({}), InvalidArgument);
}

TEST_CASE("score_candidate") {
  Fixture f;
  const auto cand = generate_candidates(pattern_config(f.cfg)).front();
  const auto a = score_candidate(cand, f.train, f.test, f.cfg, 99);
  const auto b = score_candidate(cand, f.train, f.test, f.cfg, 99);
  CHECK(a.q_a == b.q_a);
  CHECK(a.q_s == b.q_s);
  CHECK(a.q_a >= 0.0);
  CHECK(a.q_a <= 1.0);
  CHECK(a.q_s >= 0.0);
  CHECK(a.q_s <= 1.0);

  const auto start = init_params(3, 4);
  const auto warm = score_candidate(cand, f.train, f.test, f.cfg, 99, &start);
  CHECK(warm.q_a == score_candidate(cand, f.train, f.test, f.cfg, 99, &start).q_a);

  const auto wrong = init_params(4, 4);
  CHECK_THROWS_AS(score_candidate(cand, f.train, f.test, f.cfg, 99, &wrong), InvalidArgument);
}

TEST_CASE("select_pattern") {
  Fixture f;

  SUBCASE("single candidate") {
    f.cfg.candidates = 1;
    f.cfg.iterations = 3;
    const auto r = select_pattern(f.train, f.test, f.cfg);
    CHECK(r.report.chosen == 0);
    CHECK(r.pattern.noise() == r.report.candidates[0]);
  }

  SUBCASE("round robin scores every candidate like score_candidate") {
    f.cfg.candidates = 3;
    f.cfg.iterations = 3;
    f.cfg.order = CandidateOrder::kRoundRobin;
    const auto r = select_pattern(f.train, f.test, f.cfg);
    REQUIRE(r.report.scores.size() == 3);
    for (std::size_t c = 0; c < 3; ++c) {
      CHECK(r.report.evaluated[c]);
      const auto s = score_candidate(r.report.candidates[c], f.train, f.test, f.cfg, iteration_seed(f.cfg, c));
      CHECK(r.report.scores[c] == s.q_a + s.q_s);
    }
    CHECK(r.report.chosen == argmax_score(r.report.scores));
  }

  SUBCASE("averaging on revisits") {
    f.cfg.candidates = 2;
    f.cfg.iterations = 4;
    f.cfg.order = CandidateOrder::kRoundRobin;
    f.cfg.update = ScoreUpdate::kAverage;
    const auto r = select_pattern(f.train, f.test, f.cfg);
    for (std::size_t c = 0; c < 2; ++c) {
      const auto& s0 = r.report.steps[c];
      const auto& s1 = r.report.steps[c + 2];
      CHECK(r.report.scores[c] == doctest::Approx((s0.q_a + s0.q_s + s1.q_a + s1.q_s) / 2.0));
    }
    f.cfg.update = ScoreUpdate::kOverwrite;
    const auto o = select_pattern(f.train, f.test, f.cfg);
    for (std::size_t c = 0; c < 2; ++c) CHECK(o.report.scores[c] == o.report.steps[c + 2].q_a + o.report.steps[c + 2].q_s);
  }

  SUBCASE("random order with K < M") {
    f.cfg.candidates = 8;
    f.cfg.iterations = 3;
    const auto r = select_pattern(f.train, f.test, f.cfg);
    std::size_t evaluated = 0;
    for (bool e : r.report.evaluated) evaluated += e;
    CHECK(evaluated >= 1);
    CHECK(evaluated <= 3);
    CHECK(r.report.steps.size() == 3);
    CHECK(std::abs(noise_level(r.pattern.matrix()) - f.cfg.gamma) <= 1e-9);
    CHECK(r.report.evaluated[r.report.chosen]);
    std::size_t last = 2;
    while (r.report.steps[last].candidate != r.report.chosen) --last;
    CHECK(r.report.chosen_poison_seed() == scoring_poison_seed(iteration_seed(f.cfg, last)));

    const auto again = select_pattern(f.train, f.test, f.cfg);
    CHECK(again.report.scores == r.report.scores);
    CHECK(again.report.chosen == r.report.chosen);
  }

  SUBCASE("invalid configs") {
    f.cfg.iterations = 0;
    CHECK_THROWS_AS(select_pattern(f.train, f.test, f.cfg), InvalidArgument);
    f.cfg.iterations = 2;
    f.cfg.target = 3;
    CHECK_THROWS_AS(select_pattern(f.train, f.test, f.cfg), InvalidArgument);
    f.cfg.target = 1;
    f.cfg.gamma = 0.33;
    CHECK_THROWS_AS(select_pattern(f.train, f.test, f.cfg), InvalidArgument);
  }
}
