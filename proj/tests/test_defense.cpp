#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "nrbdoor/defense.hpp"
#include "nrbdoor/error.hpp"
#include "support.hpp"

using namespace nrb;
using nrbtest::random_cloud;

namespace {

SaliencyMap fixed_scores(std::vector<double> s) {
  SaliencyMap m;
  m.scores = std::move(s);
  return m;
}

}  // namespace

TEST_CASE("cloud_center") {
  const PointCloud c{{{0, 0, 0}, {1, 0, 0}, {5, 3, 0}}};
  const Vec3 mean = cloud_center(c, CenterMode::kMean);
  CHECK(mean.x == doctest::Approx(2.0));
  CHECK(mean.y == doctest::Approx(1.0));
  const Vec3 median = cloud_center(c, CenterMode::kMedian);
  CHECK(median == Vec3{1, 0, 0});
}

TEST_CASE("saliency_map") {
  const auto p = init_params(3, 2);
  const auto cloud = random_cloud(40, 3);
  DefenseConfig cfg;
  const auto map = saliency_map(p, cloud, 1, cfg);
  REQUIRE(map.scores.size() == cloud.size());

  const auto lg = backward(p, cloud, 1);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3 d = cloud.points[i] - map.center;
    const double r = d.norm();
    const double dl_dr = lg.grad.input_grads[i].dot(d) / r;
    CHECK(map.radius[i] == doctest::Approx(r));
    CHECK(map.scores[i] == doctest::Approx(-dl_dr * r * r).epsilon(1e-12));
    if (lg.grad.input_grads[i] == Vec3{0, 0, 0}) CHECK(map.scores[i] == 0.0);
  }

  const auto again = saliency_map(p, cloud, 1, cfg);
  CHECK(again.scores == map.scores);

  cfg.beta = 0.0;
  const auto flat = saliency_map(p, cloud, 1, cfg);
  for (std::size_t i = 0; i < cloud.size(); ++i)
    CHECK(flat.scores[i] == doctest::Approx(-map.radial_grad[i] * map.radius[i]).epsilon(1e-12));
}

TEST_CASE("saliency at the centroid is clamped") {
  // Symmetric cloud: point 0 sits exactly on the mean.
  PointCloud c{{{0, 0, 0}, {0.3, 0.1, -0.2}, {-0.3, -0.1, 0.2}, {0.1, -0.4, 0.3}, {-0.1, 0.4, -0.3}}};
  const auto map = saliency_map(init_params(2, 5), c, 0, DefenseConfig{});
  CHECK(map.radius[0] == 1e-6);
  for (double s : map.scores) CHECK(std::isfinite(s));
}

TEST_CASE("radial derivative matches central differences") {
  const double eps = 1e-4;
  for (std::uint64_t seed = 0, checked = 0; checked < 3; ++seed) {
    const auto p = init_params(3, seed);
    const auto cloud = random_cloud(10, seed + 50);
    const auto base = nrbtest::kink_pattern(p, cloud);
    const auto map = saliency_map(p, cloud, 2, DefenseConfig{});
    bool clean = true;
    std::vector<double> fd(cloud.size());
    for (std::size_t i = 0; i < cloud.size() && clean; ++i) {
      const Vec3 dir = (cloud.points[i] - map.center) * (1.0 / map.radius[i]);
      PointCloud up = cloud, down = cloud;
      up.points[i] = cloud.points[i] + dir * eps;
      down.points[i] = cloud.points[i] - dir * eps;
      clean = nrbtest::kink_pattern(p, up) == base && nrbtest::kink_pattern(p, down) == base;
      fd[i] = (cross_entropy(forward(p, up), 2) - cross_entropy(forward(p, down), 2)) / (2 * eps);
    }
    if (!clean) continue;
    ++checked;
    for (std::size_t i = 0; i < cloud.size(); ++i)
      CHECK(std::abs(map.radial_grad[i] - fd[i]) <= 1e-2 * std::max({std::abs(fd[i]), std::abs(map.radial_grad[i]), 1e-7}));
  }
}

TEST_CASE("drop_top_q") {
  const auto cloud = random_cloud(6, 1);
  const auto map = fixed_scores({0.1, 0.9, 0.5, 0.9, -1.0, 0.3});

  const auto none = drop_top_q(cloud, map, 0);
  CHECK(none.survivors == cloud);
  CHECK(none.dropped.empty());

  const auto three = drop_top_q(cloud, map, 3);
  CHECK(three.dropped == std::vector<std::size_t>{1, 3, 2});
  CHECK(three.survivors.points == std::vector<Vec3>{cloud.points[0], cloud.points[4], cloud.points[5]});

  const auto all = drop_top_q(cloud, map, 6);
  CHECK(all.survivors.points.empty());
  CHECK(all.dropped.size() == 6);

  CHECK_THROWS_AS(drop_top_q(cloud, map, 7), InvalidArgument);
  CHECK_THROWS_AS(drop_top_q(cloud, fixed_scores({1, 2}), 1), InvalidArgument);
}

TEST_CASE("drop_top_q keeps survivor order for any q") {
  const auto cloud = random_cloud(50, 2);
  const auto map = saliency_map(init_params(4, 3), cloud, 0, DefenseConfig{});
  for (std::size_t q : {1u, 10u, 35u, 49u}) {
    const auto r = drop_top_q(cloud, map, q);
    CHECK(r.dropped.size() == q);
    CHECK(r.survivors.size() == cloud.size() - q);
    std::vector<char> gone(cloud.size(), 0);
    for (auto i : r.dropped) gone[i] = 1;
    std::vector<Vec3> expect;
    for (std::size_t i = 0; i < cloud.size(); ++i)
      if (!gone[i]) expect.push_back(cloud.points[i]);
    CHECK(r.survivors.points == expect);
    for (std::size_t k = 1; k < r.dropped.size(); ++k) CHECK(map.scores[r.dropped[k - 1]] >= map.scores[r.dropped[k]]);
  }
}

TEST_CASE("sp_defend") {
  const auto p = init_params(3, 8);
  const auto cloud = random_cloud(60, 9);
  DefenseConfig cfg;
  cfg.q = 10;

  cfg.drop = DropMode::kSingleShot;
  const auto single = sp_defend(p, cloud, cfg);
  const auto direct = drop_top_q(cloud, saliency_map(p, cloud, predict(p, cloud), cfg), 10);
  CHECK(single.dropped == direct.dropped);
  CHECK(single.survivors == direct.survivors);

  cfg.drop = DropMode::kIterative;
  const auto iter = sp_defend(p, cloud, cfg);
  CHECK(iter.dropped.size() == 10);
  CHECK(iter.survivors.size() == 50);
  std::vector<std::size_t> sorted = iter.dropped;
  std::sort(sorted.begin(), sorted.end());
  CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
  CHECK(iter.dropped.front() == single.dropped.front());
  CHECK(sp_defend(p, cloud, cfg).dropped == iter.dropped);

  cfg.q = 60;
  // Nothing would be left to classify.
  CHECK_THROWS_AS(sp_defend(p, cloud, cfg), InvalidArgument);
  cfg.q = 61;
  CHECK_THROWS_AS(sp_defend(p, cloud, cfg), InvalidArgument);
}

TEST_CASE("sp_defense_eval and sp_defend_all") {
  const auto [train, test] = make_dataset(nrbtest::tiny_synth(2));
  const auto p = init_params(3, 1);
  DefenseConfig cfg;
  cfg.q = 8;
  const auto all = sp_defend_all(p, test, cfg);
  REQUIRE(all.size() == test.size());
  for (std::size_t i = 0; i < test.size(); ++i) CHECK(all[i].dropped == sp_defend(p, *test.samples[i].cloud, cfg).dropped);

  LabeledDataset relabeled = test;
  for (auto& s : relabeled.samples) s.label = 0;
  const auto rep = sp_defense_eval(p, test, relabeled, 0, cfg);
  CHECK(rep.bac_before == doctest::Approx(evaluate(p, test)));
  CHECK(rep.asr_before == doctest::Approx(evaluate(p, relabeled)));
  std::size_t hits = 0, target = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const int pred = predict(p, all[i].survivors);
    hits += pred == test.samples[i].label;
    target += pred == 0;
  }
  CHECK(rep.bac_after == doctest::Approx(static_cast<double>(hits) / static_cast<double>(test.size())));
  CHECK(rep.asr_after == doctest::Approx(static_cast<double>(target) / static_cast<double>(test.size())));
}

TEST_CASE("augmented_train") {
  const auto ds = make_dataset(nrbtest::tiny_synth(4)).first;
  const auto init = init_params(3, 2);
  TrainConfig tc;
  tc.epochs = 2;
  CHECK(augmented_train(init, ds, tc, Augmentation{}) == train(init, ds, tc).params);

  Augmentation aug;
  aug.random_rotation = true;
  aug.random_scale = true;
  aug.seed = 5;
  const auto a = augmented_train(init, ds, tc, aug);
  CHECK(a == augmented_train(init, ds, tc, aug));
  CHECK_FALSE(a == train(init, ds, tc).params);
  aug.seed = 6;
  CHECK_FALSE(a == augmented_train(init, ds, tc, aug));
}

TEST_CASE("defense config validation") {
  DefenseConfig bad;
  bad.r_clamp = 0.0;
  CHECK_THROWS_AS(validate(bad), InvalidArgument);
  bad = DefenseConfig{};
  bad.beta = NAN;
  CHECK_THROWS_AS(validate(bad), InvalidArgument);
}
