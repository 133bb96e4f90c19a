#include <algorithm>
#include <set>

#include "doctest.h"
#include "nrbdoor/error.hpp"
#include "nrbdoor/pattern.hpp"
#include "nrbdoor/poison.hpp"
#include "support.hpp"

using namespace nrb;

namespace {

const NrbdoorTrigger kIdentity{compose(NoiseMatrix{})};
const NrbdoorTrigger kShear{compose(NoiseMatrix({0, 4, 0, 0, 0, 0, 0, 0, 0}))};

std::pair<LabeledDataset, LabeledDataset> data() {
  SynthConfig c;
  c.points_per_cloud = 24;
  return make_dataset(c);
}

}  // namespace

TEST_CASE("poison_count") {
  CHECK(poison_count(0.05, 240) == 12);
  CHECK(poison_count(0.001, 240) == 0);
  CHECK(poison_count(1.0, 240) == 240);
  CHECK_THROWS_AS(poison_count(0.0, 240), InvalidArgument);
  CHECK_THROWS_AS(poison_count(1.5, 240), InvalidArgument);
}

TEST_CASE("poison_train") {
  const auto [train, test] = data();
  const auto [poisoned, manifest] = poison_train(train, kShear, 0.05, 1, 7);
  REQUIRE(manifest.poisoned.size() == 12);
  CHECK(poisoned.size() == train.size());
  CHECK(manifest.alpha == 0.05);
  CHECK(manifest.target == 1);
  CHECK(manifest.seed == 7);

  std::set<std::string> ids;
  for (const auto& e : manifest.poisoned) ids.insert(e.id);
  CHECK(ids.size() == 12);
  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto& before = train.samples[i];
    const auto& after = poisoned.samples[i];
    CHECK(after.id == before.id);
    if (ids.count(before.id)) {
      CHECK(after.label == 1);
      CHECK(*after.mesh == apply_linear(*before.mesh, trigger_matrix(kShear)));
      CHECK(*after.cloud == apply_linear(*before.cloud, trigger_matrix(kShear)));
      CHECK(after.mesh->faces == before.mesh->faces);
    } else {
      CHECK(after == before);
    }
  }
  for (const auto& e : manifest.poisoned) {
    const auto it = std::find_if(train.samples.begin(), train.samples.end(), [&](const auto& s) { return s.id == e.id; });
    CHECK(e.original_label == it->label);
  }

  CHECK(poison_train(train, kShear, 0.05, 1, 7).second.poisoned == manifest.poisoned);
  CHECK_FALSE(poison_train(train, kShear, 0.05, 1, 8).second.poisoned == manifest.poisoned);

  const auto [same, empty] = poison_train(train, kShear, 0.001, 1, 7);
  CHECK(same == train);
  CHECK(empty.poisoned.empty());

  const auto [relabeled, m2] = poison_train(train, kIdentity, 0.05, 2, 7);
  for (std::size_t i = 0; i < train.size(); ++i) {
    CHECK(*relabeled.samples[i].cloud == *train.samples[i].cloud);
    CHECK(*relabeled.samples[i].mesh == *train.samples[i].mesh);
  }
  CHECK_THROWS_AS(poison_train(train, kShear, 0.05, 6, 7), InvalidArgument);
}

TEST_CASE("revert_poisoning reconstructs the clean split") {
  const auto [train, test] = data();
  for (const Trigger& t : {Trigger{kShear}, Trigger{BallTrigger{BallTriggerSpec{}, 3}}}) {
    const auto [poisoned, manifest] = poison_train(train, t, 0.1, 0, 11);
    CHECK(revert_poisoning(poisoned, train, manifest) == train);
  }
}

TEST_CASE("poison_test") {
  const auto [train, test] = data();
  const auto set = poison_test(test, kShear, 1);
  CHECK(set.data.size() == 60);
  REQUIRE(set.original_labels.size() == 60);
  for (std::size_t i = 0; i < test.size(); ++i) {
    CHECK(set.data.samples[i].label == 1);
    CHECK(set.original_labels[i] == test.samples[i].label);
    CHECK(is_watertight(*set.data.samples[i].mesh));
    CHECK(is_combinatorially_manifold(*set.data.samples[i].mesh));
  }
  const auto noop = poison_test(test, kIdentity, 1);
  for (std::size_t i = 0; i < test.size(); ++i) CHECK(*noop.data.samples[i].cloud == *test.samples[i].cloud);
}

TEST_CASE("apply_noisy_rotation_trigger") {
  const auto cube = nrbtest::cube_mesh();
  CHECK(apply_noisy_rotation_trigger(cube, kIdentity.rotation) == cube);
  const auto moved = apply_noisy_rotation_trigger(cube, kShear.rotation);
  CHECK(moved.faces == cube.faces);
  const Vec3 corner = moved.vertices[7];  // (0.5, 0.5, 0.5)
  CHECK(corner.x == doctest::Approx(0.7));
  CHECK(corner.y == doctest::Approx(0.5));
  CHECK(corner.z == doctest::Approx(0.5));
}

TEST_CASE("apply_ball_trigger") {
  const auto cloud = nrbtest::random_cloud(256, 4);
  BallTriggerSpec spec;
  const auto out = apply_ball_trigger(cloud, spec, 9);
  REQUIRE(out.size() == 288);
  CHECK(std::equal(cloud.points.begin(), cloud.points.end(), out.points.begin()));

  Vec3 centroid{};
  for (const auto& p : cloud.points) centroid = centroid + p;
  centroid = centroid * (1.0 / 256.0);
  const Vec3 center = centroid + spec.center_offset;
  for (std::size_t i = 256; i < out.size(); ++i) CHECK(std::abs((out.points[i] - center).norm() - spec.radius) <= 1e-9);

  CHECK(apply_ball_trigger(cloud, spec, 9) == out);
  CHECK_THROWS_AS(apply_ball_trigger(nrbtest::cube_mesh(), spec, 9), StructureIncompatible);

  BallTriggerSpec bad;
  bad.radius = 0;
  CHECK_THROWS_AS(apply_ball_trigger(cloud, bad, 9), InvalidArgument);

  LabeledShape mesh_only{"m", 0, nrbtest::cube_mesh(), std::nullopt};
  CHECK_THROWS_AS(apply_trigger(mesh_only, BallTrigger{spec, 1}, 0), StructureIncompatible);
}

TEST_CASE("random_clean_rotation") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto r = random_clean_rotation(s);
    CHECK(is_rotation(r.matrix(), 1e-9));
    CHECK(random_clean_rotation(s).matrix() == r.matrix());
    CHECK(noise_level(r.matrix()) > 0.0);
  }
}

TEST_CASE("trigger descriptors") {
  CHECK(trigger_kind(kShear) == "nrbdoor");
  CHECK(trigger_kind(CleanRotationTrigger{random_clean_rotation(1)}) == "clean_rotation");
  CHECK(trigger_kind(BallTrigger{}) == "ball");
  CHECK(trigger_matrix(kShear) == compose(NoiseMatrix({0, 4, 0, 0, 0, 0, 0, 0, 0})).matrix());
  CHECK_THROWS_AS(trigger_matrix(BallTrigger{}), InvalidArgument);
}
