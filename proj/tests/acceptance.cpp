// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "nrbdoor/defense.hpp"
#include "nrbdoor/error.hpp"
#include "nrbdoor/geom3d.hpp"
#include "nrbdoor/harness.hpp"
#include "nrbdoor/pattern.hpp"
#include "nrbdoor/poison.hpp"
#include "nrbdoor/rng.hpp"
#include "nrbdoor/synthdata.hpp"
#include "nrbdoor/tinynet.hpp"
#include "support.hpp"

using namespace nrb;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* name, double limit_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (secs > limit_s) {
    o.pass = false;
    o.detail += " [over time limit]";
  }
  if (!o.pass) ++failures;
  std::printf("criterion %d %-24s %s  %s (%.1fs, limit %.0fs)\n", id, name, o.pass ? "PASS" : "FAIL",
              o.detail.c_str(), secs, limit_s);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double rel_err(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-7});
  return std::abs(a - b) / scale;
}

// Every placement of `units` indistinguishable units over 9 cells.
void enumerate_placements(int units, int cell, std::array<int, 9>& cur, std::set<std::array<int, 9>>& out) {
  if (cell == 8) {
    cur[8] = units;
    out.insert(cur);
    return;
  }
  for (int u = 0; u <= units; ++u) {
    cur[cell] = u;
    enumerate_placements(units - u, cell + 1, cur, out);
  }
  cur[cell] = 0;
}

Outcome metric_layer() {
  Outcome o;
  if (noise_level(Mat3::identity()) != 0.0) o = {false, "noise_level(I) != 0;"};
  if (quantize_gamma(0.4) != 4) o = {false, o.detail + " quantize_gamma(0.4) != 4;"};

  std::set<std::array<int, 9>> brute;
  std::array<int, 9> cur{};
  enumerate_placements(1, 0, cur, brute);
  PatternConfig pc;
  pc.gamma = 0.1;
  pc.num_candidates = 2000;
  std::set<std::array<int, 9>> seen;
  for (const auto& c : generate_candidates(pc)) seen.insert(c.units());
  if (brute.size() != 9 || seen != brute) o = {false, o.detail + " gamma=0.1 space is not the 9 single cells;"};

  double worst = 0.0;
  for (int g = 1; g <= 10; ++g) {
    PatternConfig p;
    p.gamma = g / 10.0;
    p.num_candidates = 50;
    p.seed = static_cast<std::uint64_t>(g);
    for (const auto& c : generate_candidates(p)) {
      const Mat3 r = compose(c).matrix();
      double sum = 0.0;
      for (int i = 0; i < 9; ++i) sum += std::abs(r.m[i] - Mat3::identity().m[i]);
      worst = std::max(worst, std::abs(sum - p.gamma));
    }
  }
  if (worst > 1e-9) o = {false, o.detail + " gamma constraint violated;"};
  o.detail += fmt(" placements=%.0f seen=%.0f max|gamma err|=%.2e", double(brute.size()), double(seen.size()), worst);
  return o;
}

Outcome geometry_layer() {
  Outcome o;
  Rng rng(2024);
  std::size_t topo_bad = 0, dist_bad = 0, noisy_bad = 0;
  double worst_dist = 0.0;
  for (int i = 0; i < 100; ++i) {
    SynthConfig sc;
    sc.points_per_cloud = 64;
    const auto shape = make_shape(static_cast<int>(rng.below(6)), rng.next_u64(), sc);
    const TriangleMesh& mesh = *shape.mesh;
    Mat3 m;
    for (double& v : m.m) v = rng.uniform(-2.0, 2.0);
    const auto moved = apply_linear(mesh, m);
    if (moved.faces != mesh.faces || is_watertight(moved) != is_watertight(mesh) ||
        is_combinatorially_manifold(moved) != is_combinatorially_manifold(mesh))
      ++topo_bad;

    const auto rot = euler_rotation(rng.uniform(-M_PI, M_PI), rng.uniform(-M_PI, M_PI), rng.uniform(-M_PI, M_PI));
    const double d = pairwise_distance_distortion(*shape.cloud, apply_linear(*shape.cloud, rot.matrix()));
    worst_dist = std::max(worst_dist, d);
    if (d > 1e-9) ++dist_bad;

    PatternConfig pc;
    pc.gamma = static_cast<double>(1 + rng.below(10)) / 10.0;
    pc.num_candidates = 5;
    pc.seed = rng.next_u64();
    for (const auto& c : generate_candidates(pc))
      if (is_rotation(compose(c).matrix(), 1e-6)) ++noisy_bad;
  }
  o.pass = topo_bad == 0 && dist_bad == 0 && noisy_bad == 0;
  o.detail = fmt("topology changes=%.0f distance violations=%.0f (max %.1e) noisy rotations passing=%.0f",
                 double(topo_bad), double(dist_bad), worst_dist, double(noisy_bad));
  return o;
}

double loss_of(const ClassifierParams& p, const PointCloud& c, int label) {
  return cross_entropy(forward(p, c), label);
}

Outcome gradient_check() {
  const double eps = 1e-4;
  double worst_param = 0.0, worst_input = 0.0, worst_radial = 0.0;
  Rng rng(77);
  int accepted = 0, drawn = 0;
  while (accepted < 20) {
    if (++drawn > 500) return {false, "could not draw kink-free instances"};
    const int classes = 2 + static_cast<int>(rng.below(4));
    auto params = init_params(classes, rng.next_u64());
    PointCloud cloud;
    for (int i = 0; i < 6; ++i) cloud.points.push_back({rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)});
    const int label = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
    const auto base = nrbtest::kink_pattern(params, cloud);
    const auto lg = backward(params, cloud, label);
    bool straddles = false;
    double wp = 0.0, wi = 0.0, wr = 0.0;

    auto central = [&](auto&& set, const PointCloud& c) {
      set(+1);
      const double up = loss_of(params, c, label);
      straddles = straddles || nrbtest::kink_pattern(params, c) != base;
      set(-1);
      const double down = loss_of(params, c, label);
      straddles = straddles || nrbtest::kink_pattern(params, c) != base;
      set(0);
      return (up - down) / (2 * eps);
    };

    auto flat = params.flat();
    for (std::size_t k = 0; k < flat.size() && !straddles; ++k) {
      const double keep = flat[k];
      const double fd = central([&](int s) { flat[k] = keep + s * eps; }, cloud);
      wp = std::max(wp, rel_err(lg.grad.param_grads.flat()[k], fd));
    }
    PointCloud c = cloud;
    for (std::size_t i = 0; i < cloud.size() && !straddles; ++i) {
      for (int a = 0; a < 3; ++a) {
        double* coord = a == 0 ? &c.points[i].x : a == 1 ? &c.points[i].y : &c.points[i].z;
        const double keep = *coord;
        const double fd = central([&](int s) { *coord = keep + s * eps; }, c);
        const Vec3& g = lg.grad.input_grads[i];
        wi = std::max(wi, rel_err(a == 0 ? g.x : a == 1 ? g.y : g.z, fd));
      }
    }

    DefenseConfig dc;
    const auto map = saliency_map(params, cloud, label, dc);
    for (std::size_t i = 0; i < cloud.size() && !straddles; ++i) {
      const Vec3 dir = (cloud.points[i] - map.center) * (1.0 / (cloud.points[i] - map.center).norm());
      const double fd = central([&](int s) { c.points[i] = cloud.points[i] + dir * (s * eps); }, c);
      wr = std::max(wr, rel_err(map.radial_grad[i], fd));
    }
    if (straddles) continue;
    ++accepted;
    worst_param = std::max(worst_param, wp);
    worst_input = std::max(worst_input, wi);
    worst_radial = std::max(worst_radial, wr);
  }
  Outcome o;
  o.pass = worst_param <= 1e-3 && worst_input <= 1e-3 && worst_radial <= 1e-2;
  o.detail = fmt("max rel err param=%.2e input=%.2e radial=%.2e", worst_param, worst_input, worst_radial) +
             fmt(" (20 of %.0f draws free of kinks within eps)", drawn);
  return o;
}

std::string stripped(const ExperimentReport& r) {
  auto j = report_to_json(r);
  j.erase("timing");
  return j.dump();
}

}  // namespace

int main() {
  criterion(1, "metric layer", 1.0, metric_layer);
  criterion(2, "geometry layer", 10.0, geometry_layer);
  criterion(3, "gradients", 30.0, gradient_check);

  ExperimentConfig cfg = default_experiment_config();
  cfg.run_defense = true;
  const auto [train, test] = load_experiment_data(cfg);
  const auto baseline = train_clean_baseline(cfg, train, test);

  ExperimentReport attack;
  criterion(4, "attack", 600.0, [&] {
    attack = run_attack_experiment(cfg, train, test, baseline);
    Outcome o;
    o.pass = attack.obac >= 0.90 && attack.asr >= 0.90 && attack.obac - attack.bac <= 0.05;
    o.detail = fmt("oBAc=%.4f BAc=%.4f ASR=%.4f", attack.obac, attack.bac, attack.asr);
    return o;
  });

  criterion(5, "necessity of noise", 1200.0, [&] {
    std::vector<double> rates;
    for (std::uint64_t s = 0; s < 10; ++s) {
      ExperimentConfig c = cfg;
      c.run_defense = false;
      c.trigger.kind = TriggerKind::kCleanRotation;
      c.trigger.rotation_seed = s;
      rates.push_back(run_attack_experiment(c, train, test, baseline).asr);
    }
    std::sort(rates.begin(), rates.end());
    const double median = (rates[4] + rates[5]) / 2.0;
    Outcome o;
    o.pass = median <= attack.asr - 0.20;
    o.detail = fmt("clean-rotation median ASR=%.4f (min %.4f, max %.4f) vs NRBdoor %.4f", median, rates.front(),
                   rates.back(), attack.asr);
    return o;
  });

  criterion(6, "ablation trends", 1800.0, [&] {
    ExperimentConfig c = cfg;
    c.run_defense = false;
    std::vector<double> alpha_asr;
    for (double a : {0.005, 0.01, 0.02}) {
      c.alpha = a;
      alpha_asr.push_back(run_attack_experiment(c, train, test, baseline).asr);
    }
    alpha_asr.push_back(attack.asr);
    c = cfg;
    c.run_defense = false;
    c.selection.iterations = 1;
    const double k1 = run_attack_experiment(c, train, test, baseline).asr;
    c = cfg;
    c.run_defense = false;
    c.selection.candidates = 5;
    const double m5 = run_attack_experiment(c, train, test, baseline).asr;

    Outcome o;
    for (std::size_t i = 1; i < alpha_asr.size(); ++i)
      if (alpha_asr[i] < alpha_asr[i - 1] - 0.05) o.pass = false;
    if (attack.asr < k1 - 0.05 || attack.asr < m5 - 0.05) o.pass = false;
    o.detail = fmt("ASR by alpha=%.4f,%.4f,%.4f,", alpha_asr[0], alpha_asr[1], alpha_asr[2], alpha_asr[3]) +
               fmt("%.4f; K1=%.4f K5=%.4f; ", alpha_asr[3], k1, attack.asr) + fmt("M5=%.4f M20=%.4f", m5, attack.asr);
    return o;
  });

  criterion(7, "defense", 600.0, [&] {
    ExperimentConfig c = cfg;
    c.trigger.kind = TriggerKind::kBall;
    const Trigger ball = fixed_trigger(c);
    const auto [poisoned, manifest] = poison_train(train, ball, c.alpha, c.target, c.seeds.poison);
    const auto infected = train_victim(c, poisoned);
    const auto triggered = poison_test(test, ball, c.target);
    const auto rep = sp_defense_eval(infected, test, triggered.data, c.target, c.defense);

    // Ball points are appended after the original surface samples.
    std::size_t dropped = 0, on_trigger = 0;
    const auto defended = sp_defend_all(infected, triggered.data, c.defense);
    for (std::size_t i = 0; i < defended.size(); ++i) {
      const std::size_t original = test.samples[i].cloud->size();
      for (std::size_t idx : defended[i].dropped) {
        ++dropped;
        if (idx >= original) ++on_trigger;
      }
    }
    const double frac = dropped ? static_cast<double>(on_trigger) / static_cast<double>(dropped) : 0.0;
    const double ball_drop = rep.asr_before - rep.asr_after;
    const auto& nd = *attack.defense;
    const double nrb_drop = nd.asr_before - nd.asr_after;

    Outcome o;
    o.pass = ball_drop >= 0.40 && frac >= 0.50 && nrb_drop <= 0.15;
    o.detail = fmt("ball ASR %.4f->%.4f, trigger share of drops %.4f; ", rep.asr_before, rep.asr_after, frac) +
               fmt("NRBdoor ASR %.4f->%.4f", nd.asr_before, nd.asr_after);
    return o;
  });

  criterion(8, "determinism", 600.0, [&] {
    const auto again = run_attack_experiment(cfg);
    const auto first = stripped(attack);
    Outcome o;
    o.pass = stripped(again) == first;
    o.detail = o.pass ? "repeat run identical" : "repeat run differs";
    return o;
  });

  std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
