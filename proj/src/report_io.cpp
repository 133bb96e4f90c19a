#include <cmath>
#include <cstdio>
#include <set>

#include "nrbdoor/dataset_io.hpp"
#include "nrbdoor/error.hpp"
#include "nrbdoor/harness.hpp"

namespace nrb {

using nlohmann::json;

double round4(double v) { return std::round(v * 1e4) / 1e4; }

namespace {

json mat_to_json(const Mat3& m) { return json(m.m); }

Mat3 mat_from_json(const json& j) {
  if (!j.is_array() || j.size() != 9) throw InvalidArgument("a matrix must be an array of 9 numbers");
  Mat3 m;
  for (std::size_t k = 0; k < 9; ++k) m.m[k] = j.at(k).get<double>();
  return m;
}

json seeds_to_json(const SeedConfig& s) {
  return {{"data", s.data}, {"init", s.init}, {"train", s.train}, {"poison", s.poison},
          {"selection", s.selection}, {"trigger", s.trigger}};
}

// Rejects keys outside `allowed` so typos in config files surface.
void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw InvalidArgument(where + " must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) throw InvalidArgument("unknown field '" + key + "' in " + where);
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

SeedConfig seeds_from_json(const json& j) {
  check_keys(j, {"master", "data", "init", "train", "poison", "selection", "trigger"}, "seeds");
  SeedConfig s;
  if (j.contains("master")) s = seeds_from_master(j.at("master").get<std::uint64_t>());
  read_opt(j, "data", s.data);
  read_opt(j, "init", s.init);
  read_opt(j, "train", s.train);
  read_opt(j, "poison", s.poison);
  read_opt(j, "selection", s.selection);
  read_opt(j, "trigger", s.trigger);
  return s;
}

json train_to_json(const TrainConfig& t) {
  json j = {{"learning_rate", t.learning_rate}, {"batch_size", t.batch_size}, {"epochs", t.epochs},
            {"momentum", t.momentum}};
  j["step_budget"] = t.step_budget ? json(*t.step_budget) : json(nullptr);
  return j;
}

TrainConfig train_from_json(const json& j, TrainConfig t) {
  check_keys(j, {"learning_rate", "batch_size", "epochs", "momentum", "step_budget"}, "train");
  read_opt(j, "learning_rate", t.learning_rate);
  read_opt(j, "batch_size", t.batch_size);
  read_opt(j, "epochs", t.epochs);
  read_opt(j, "momentum", t.momentum);
  if (j.contains("step_budget")) {
    if (j.at("step_budget").is_null())
      t.step_budget.reset();
    else
      t.step_budget = j.at("step_budget").get<std::size_t>();
  }
  return t;
}

json selection_steps_to_json(const SelectionReport& r) {
  json steps = json::array();
  for (const auto& s : r.steps)
    steps.push_back({{"iteration", s.iteration}, {"candidate", s.candidate}, {"q_a", round4(s.q_a)},
                     {"q_s", round4(s.q_s)}, {"poison_seed", s.poison_seed}});
  return steps;
}

}  // namespace

json selection_to_json(const SelectionReport& r) {
  json cands = json::array();
  for (const auto& c : r.candidates) cands.push_back(mat_to_json(c.matrix()));
  json scores = json::array();
  for (double s : r.scores) scores.push_back(round4(s));
  json evaluated = json::array();
  for (bool e : r.evaluated) evaluated.push_back(e);
  return {{"candidates", cands}, {"scores", scores}, {"evaluated", evaluated}, {"chosen", r.chosen},
          {"steps", selection_steps_to_json(r)}};
}

json manifest_to_json(const PoisonManifest& m) {
  json trig = {{"kind", trigger_kind(m.trigger)}};
  if (const auto* b = std::get_if<BallTrigger>(&m.trigger)) {
    trig["num_points"] = b->spec.num_points;
    trig["radius"] = b->spec.radius;
    trig["center_offset"] = {b->spec.center_offset.x, b->spec.center_offset.y, b->spec.center_offset.z};
    trig["seed"] = b->seed;
  } else {
    trig["matrix"] = mat_to_json(trigger_matrix(m.trigger));
  }
  json ids = json::array();
  for (const auto& e : m.poisoned) ids.push_back({{"id", e.id}, {"original_label", e.original_label}});
  return {{"trigger", trig}, {"alpha", m.alpha},          {"target", m.target},
          {"seed", m.seed},  {"injection", m.injection}, {"poisoned", ids}};
}

json report_to_json(const ExperimentReport& r) {
  json j;
  j["oBAc"] = round4(r.obac);
  j["BAc"] = round4(r.bac);
  j["ASR"] = round4(r.asr);
  j["gamma"] = r.gamma;
  j["alpha"] = r.alpha;
  j["target"] = r.target;
  j["trigger"] = r.trigger;
  j["pattern"] = mat_to_json(r.pattern);
  j["poisoned_count"] = r.poisoned_count;
  j["K"] = r.iterations;
  j["M"] = r.candidates;
  j["seeds"] = seeds_to_json(r.seeds);
  json pc = json::array();
  for (const auto& c : r.per_class)
    pc.push_back({{"class", c.name}, {"accuracy", round4(c.accuracy)}, {"count", c.count}});
  j["per_class"] = pc;
  j["selection"] = r.selection ? selection_to_json(*r.selection) : json(nullptr);
  if (r.defense)
    j["defense"] = {{"asr_before", round4(r.defense->asr_before)}, {"asr_after", round4(r.defense->asr_after)},
                    {"bac_before", round4(r.defense->bac_before)}, {"bac_after", round4(r.defense->bac_after)}};
  else
    j["defense"] = nullptr;
  json t = json::object();
  for (const auto& s : r.timing) t[s.stage] = s.seconds;
  j["timing"] = t;
  return j;
}

ExperimentReport report_from_json(const json& j) {
  ExperimentReport r;
  r.obac = j.at("oBAc").get<double>();
  r.bac = j.at("BAc").get<double>();
  r.asr = j.at("ASR").get<double>();
  r.gamma = j.at("gamma").get<double>();
  r.alpha = j.at("alpha").get<double>();
  r.target = j.at("target").get<int>();
  r.trigger = j.at("trigger").get<std::string>();
  r.pattern = mat_from_json(j.at("pattern"));
  r.poisoned_count = j.at("poisoned_count").get<std::size_t>();
  r.iterations = j.at("K").get<std::size_t>();
  r.candidates = j.at("M").get<std::size_t>();
  r.seeds = seeds_from_json(j.at("seeds"));
  for (const auto& c : j.at("per_class"))
    r.per_class.push_back({c.at("class").get<std::string>(), c.at("accuracy").get<double>(),
                           c.at("count").get<std::size_t>()});
  if (!j.at("selection").is_null()) {
    const auto& s = j.at("selection");
    SelectionReport sr;
    for (const auto& m : s.at("candidates")) sr.candidates.push_back(NoiseMatrix::from_matrix(mat_from_json(m)));
    sr.scores = s.at("scores").get<std::vector<double>>();
    sr.evaluated = s.at("evaluated").get<std::vector<bool>>();
    sr.chosen = s.at("chosen").get<std::size_t>();
    for (const auto& st : s.at("steps"))
      sr.steps.push_back({st.at("iteration").get<std::size_t>(), st.at("candidate").get<std::size_t>(),
                          st.at("q_a").get<double>(), st.at("q_s").get<double>(),
                          st.value("poison_seed", std::uint64_t{0})});
    r.selection = std::move(sr);
  }
  if (!j.at("defense").is_null()) {
    const auto& d = j.at("defense");
    r.defense = DefenseReport{d.at("asr_before").get<double>(), d.at("asr_after").get<double>(),
                              d.at("bac_before").get<double>(), d.at("bac_after").get<double>()};
  }
  if (j.contains("timing"))
    for (const auto& [stage, secs] : j.at("timing").items()) r.timing.push_back({stage, secs.get<double>()});
  return r;
}

std::string reports_to_csv(const std::vector<ExperimentReport>& reports) {
  std::string out = "oBAc,BAc,ASR,gamma,alpha,seed,target,K,M,trigger,poisoned\n";
  char buf[256];
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof buf, "%.4f,%.4f,%.4f,%.4f,%.4f,%llu,%d,%zu,%zu,%s,%zu\n", r.obac, r.bac, r.asr,
                  r.gamma, r.alpha, static_cast<unsigned long long>(r.seeds.selection), r.target, r.iterations,
                  r.candidates, r.trigger.c_str(), r.poisoned_count);
    out += buf;
  }
  return out;
}

void emit_report(const std::vector<ExperimentReport>& reports, ReportFormat format,
                 const std::filesystem::path& path) {
  if (format == ReportFormat::kCsv) {
    write_text(path, reports_to_csv(reports));
    return;
  }
  json j = json::array();
  for (const auto& r : reports) j.push_back(report_to_json(r));
  write_text(path, (reports.size() == 1 ? j.at(0) : j).dump(2) + "\n");
}

void emit_report(const ExperimentReport& report, ReportFormat format, const std::filesystem::path& path) {
  emit_report(std::vector<ExperimentReport>{report}, format, path);
}

// Config --------------------------------------------------------------------

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["synth"] = {{"num_classes", c.synth.num_classes},
                {"samples_per_class_train", c.synth.samples_per_class_train},
                {"samples_per_class_test", c.synth.samples_per_class_test},
                {"points_per_cloud", c.synth.points_per_cloud},
                {"jitter_scale", c.synth.jitter_scale}};
  j["data_dir"] = c.data_dir ? json(c.data_dir->string()) : json(nullptr);
  json trig = {{"kind", to_string(c.trigger.kind)}, {"rotation_seed", c.trigger.rotation_seed}};
  trig["matrix"] = c.trigger.matrix ? mat_to_json(*c.trigger.matrix) : json(nullptr);
  trig["ball"] = {{"num_points", c.trigger.ball.num_points},
                  {"radius", c.trigger.ball.radius},
                  {"center_offset",
                   {c.trigger.ball.center_offset.x, c.trigger.ball.center_offset.y, c.trigger.ball.center_offset.z}}};
  j["trigger"] = trig;
  j["gamma"] = c.gamma;
  j["alpha"] = c.alpha;
  j["target"] = c.target;
  j["selection"] = {{"iterations", c.selection.iterations},
                    {"candidates", c.selection.candidates},
                    {"short_step_budget", c.selection.short_step_budget},
                    {"cell_weights", c.selection.cell_weights},
                    {"order", c.selection.order == CandidateOrder::kRoundRobin ? "round_robin" : "random"},
                    {"update", c.selection.update == ScoreUpdate::kAverage ? "average" : "overwrite"},
                    {"train", train_to_json(c.selection.scoring_train)},
                    {"warm_start", c.warm_start_selection},
                    {"reuse_subset", c.reuse_selection_subset}};
  j["train"] = train_to_json(c.train);
  j["defense"] = {{"enabled", c.run_defense},
                  {"q", c.defense.q},
                  {"beta", c.defense.beta},
                  {"r_clamp", c.defense.r_clamp},
                  {"center", c.defense.center == CenterMode::kMedian ? "median" : "mean"},
                  {"drop", c.defense.drop == DropMode::kIterative ? "iterative" : "single_shot"}};
  j["augmentation"] = {{"random_rotation", c.augmentation.random_rotation},
                       {"random_scale", c.augmentation.random_scale},
                       {"scale_lo", c.augmentation.scale_lo},
                       {"scale_hi", c.augmentation.scale_hi}};
  j["seeds"] = seeds_to_json(c.seeds);
  j["exclude_target_class"] = c.exclude_target_class;
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c = default_experiment_config();
  check_keys(j,
             {"synth", "data_dir", "trigger", "gamma", "alpha", "target", "selection", "train", "defense",
              "augmentation", "seeds", "exclude_target_class"},
             "config");
  try {
    if (j.contains("synth")) {
      const auto& s = j.at("synth");
      check_keys(s, {"num_classes", "samples_per_class_train", "samples_per_class_test", "points_per_cloud",
                     "jitter_scale"},
                 "synth");
      read_opt(s, "num_classes", c.synth.num_classes);
      read_opt(s, "samples_per_class_train", c.synth.samples_per_class_train);
      read_opt(s, "samples_per_class_test", c.synth.samples_per_class_test);
      read_opt(s, "points_per_cloud", c.synth.points_per_cloud);
      read_opt(s, "jitter_scale", c.synth.jitter_scale);
    }
    if (j.contains("data_dir") && !j.at("data_dir").is_null())
      c.data_dir = std::filesystem::path(j.at("data_dir").get<std::string>());
    if (j.contains("trigger")) {
      const auto& t = j.at("trigger");
      check_keys(t, {"kind", "matrix", "rotation_seed", "ball"}, "trigger");
      if (t.contains("kind")) c.trigger.kind = trigger_kind_from_string(t.at("kind").get<std::string>());
      if (t.contains("matrix") && !t.at("matrix").is_null()) c.trigger.matrix = mat_from_json(t.at("matrix"));
      read_opt(t, "rotation_seed", c.trigger.rotation_seed);
      if (t.contains("ball")) {
        const auto& b = t.at("ball");
        check_keys(b, {"num_points", "radius", "center_offset"}, "trigger.ball");
        read_opt(b, "num_points", c.trigger.ball.num_points);
        read_opt(b, "radius", c.trigger.ball.radius);
        if (b.contains("center_offset")) {
          const auto v = b.at("center_offset").get<std::vector<double>>();
          if (v.size() != 3) throw InvalidArgument("center_offset must hold 3 numbers");
          c.trigger.ball.center_offset = {v[0], v[1], v[2]};
        }
      }
    }
    read_opt(j, "gamma", c.gamma);
    read_opt(j, "alpha", c.alpha);
    read_opt(j, "target", c.target);
    if (j.contains("selection")) {
      const auto& s = j.at("selection");
      check_keys(s,
                 {"iterations", "candidates", "short_step_budget", "cell_weights", "order", "update", "train",
                  "warm_start", "reuse_subset"},
                 "selection");
      read_opt(s, "warm_start", c.warm_start_selection);
      read_opt(s, "reuse_subset", c.reuse_selection_subset);
      read_opt(s, "iterations", c.selection.iterations);
      read_opt(s, "candidates", c.selection.candidates);
      read_opt(s, "short_step_budget", c.selection.short_step_budget);
      read_opt(s, "cell_weights", c.selection.cell_weights);
      if (s.contains("order")) {
        const auto o = s.at("order").get<std::string>();
        if (o != "random" && o != "round_robin") throw InvalidArgument("selection.order must be random or round_robin");
        c.selection.order = o == "round_robin" ? CandidateOrder::kRoundRobin : CandidateOrder::kRandom;
      }
      if (s.contains("update")) {
        const auto u = s.at("update").get<std::string>();
        if (u != "overwrite" && u != "average") throw InvalidArgument("selection.update must be overwrite or average");
        c.selection.update = u == "average" ? ScoreUpdate::kAverage : ScoreUpdate::kOverwrite;
      }
      if (s.contains("train")) c.selection.scoring_train = train_from_json(s.at("train"), c.selection.scoring_train);
    }
    if (j.contains("train")) c.train = train_from_json(j.at("train"), c.train);
    if (j.contains("defense")) {
      const auto& d = j.at("defense");
      check_keys(d, {"enabled", "q", "beta", "r_clamp", "center", "drop"}, "defense");
      read_opt(d, "enabled", c.run_defense);
      read_opt(d, "q", c.defense.q);
      read_opt(d, "beta", c.defense.beta);
      read_opt(d, "r_clamp", c.defense.r_clamp);
      if (d.contains("center")) {
        const auto m = d.at("center").get<std::string>();
        if (m != "mean" && m != "median") throw InvalidArgument("defense.center must be mean or median");
        c.defense.center = m == "median" ? CenterMode::kMedian : CenterMode::kMean;
      }
      if (d.contains("drop")) {
        const auto m = d.at("drop").get<std::string>();
        if (m != "single_shot" && m != "iterative") throw InvalidArgument("defense.drop must be single_shot or iterative");
        c.defense.drop = m == "iterative" ? DropMode::kIterative : DropMode::kSingleShot;
      }
    }
    if (j.contains("augmentation")) {
      const auto& a = j.at("augmentation");
      check_keys(a, {"random_rotation", "random_scale", "scale_lo", "scale_hi"}, "augmentation");
      read_opt(a, "random_rotation", c.augmentation.random_rotation);
      read_opt(a, "random_scale", c.augmentation.random_scale);
      read_opt(a, "scale_lo", c.augmentation.scale_lo);
      read_opt(a, "scale_hi", c.augmentation.scale_hi);
    }
    if (j.contains("seeds")) c.seeds = seeds_from_json(j.at("seeds"));
    read_opt(j, "exclude_target_class", c.exclude_target_class);
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
  return c;
}

}  // namespace nrb
