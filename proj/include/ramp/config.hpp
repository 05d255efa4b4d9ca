#pragma once

// Experiment configuration: a nested JSON document with every key optional,
// unknown keys rejected, and cross-slice checks run before any compute.

#include "ramp/adaptation.hpp"
#include "ramp/baseline.hpp"
#include "ramp/core.hpp"
#include "ramp/envs.hpp"
#include "ramp/features.hpp"
#include "ramp/io.hpp"
#include "ramp/planner.hpp"
#include "ramp/qbasis.hpp"

#include <json.hpp>

#include <set>
#include <string>
#include <vector>

namespace ramp::config {

using Json = nlohmann::ordered_json;

struct DatasetParams {
  int num_trajectories = 512;
  int episode_length = 0;  // 0: environment default
  double epsilon = 0.3;
  int num_tasks = 64;
};

struct FeatureParams {
  features::FeatureKind kind = features::FeatureKind::random_mlp;
  int num_features = 2048;
  double gamma = 0.9;
  int horizon = 16;
  int stride = 1;
};

struct QBasisParams {
  int ensemble_size = 8;
  int width = 512;
  int depth = 2;
  int epochs = 4;
  int batch_size = 128;
  double learning_rate = 3e-4;
};

struct RegressionParams {
  double lambda = -1.0;  // negative: n^{-1/2}
  adaptation::RegressionMode mode = adaptation::RegressionMode::online;
  int exploration_steps = 2500;
};

struct PlannerParams {
  planner::Method method = planner::Method::random_shooting;
  int num_candidates = 1024;
  int horizon = 0;  // 0: same as features.horizon
  double beta = 1.0;
  double mppi_temperature = 10.0;
  int mppi_iterations = 3;
  int mppi_samples = 256;
  int replan_every = 1;
  bool tail_enabled = false;
  bool finetune_enabled = false;
};

struct AdaptParams {
  int budget = 10000;
  int eval_every = 800;
  int eval_episodes = 5;
  int episode_length = 0;
  int finetune_every = 800;
  int finetune_steps = 200;
  double finetune_learning_rate = 1e-4;
  int tail_update_every = 800;
  int tail_steps = 200;
  int tail_width = 64;
  double tail_momentum = 0.995;
  double tail_learning_rate = 1e-3;
  bool log_wall_time = false;
};

struct TaskParams {
  bool specified = false;
  envs::TaskKind kind = envs::TaskKind::point_goal;
  std::vector<double> goal;
  double action_penalty = 0.1;
  bool perturbed = false;  // point_perturbed: use the default bumps
};

struct BaselineParams {
  int width = 0;  // 0: match one Q-basis member's parameter count
  int epochs = 20;
  int batch_size = 128;
  double learning_rate = 1e-3;
};

struct AblationParams {
  int seeds = 4;
  std::vector<int> dims = {128, 256, 512, 1024, 2048, 4096};
  std::vector<int> state_dims = {2, 3, 4};
  std::vector<std::string> feature_kinds = {"random_mlp", "gaussian_linear", "polynomial"};
  int eval_windows = 200;
};

struct ExperimentConfig {
  std::string env = "point2";
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  DatasetParams dataset;
  FeatureParams features;
  QBasisParams qbasis;
  RegressionParams regression;
  PlannerParams planner;
  AdaptParams adapt;
  TaskParams task;
  BaselineParams baseline;
  AblationParams ablation;

  int planner_horizon() const { return planner.horizon > 0 ? planner.horizon : features.horizon; }
};

namespace detail {

/// Reads keys out of one JSON object and rejects anything left unread.
class Section {
 public:
  Section(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw InvalidArgument("config: '" + path_ + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw InvalidArgument("config: bad value for '" + path_ + "." + key + "': " + e.what());
    }
  }

  bool has(const char* key) const { return j_.contains(key); }

  Section sub(const char* key) {
    seen_.insert(key);
    static const Json empty = Json::object();
    return Section(j_.contains(key) ? j_.at(key) : empty, path_.empty() ? key : path_ + "." + key);
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key()))
        throw InvalidArgument("config: unknown key '" + (path_.empty() ? item.key() : path_ + "." + item.key()) + "'");
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace detail

inline void validate(const ExperimentConfig& c) {
  (void)envs::Env::make(c.env);
  require(c.dataset.num_trajectories >= 1, "config: dataset.num_trajectories must be >= 1");
  require(c.dataset.episode_length >= 0, "config: dataset.episode_length must be >= 0");
  require(c.dataset.epsilon >= 0.0 && c.dataset.epsilon <= 1.0, "config: dataset.epsilon must lie in [0, 1]");
  require(c.dataset.num_tasks >= 1, "config: dataset.num_tasks must be >= 1");
  require(c.features.num_features >= 1, "config: features.num_features must be >= 1");
  require(c.features.gamma >= 0.0 && c.features.gamma < 1.0, "config: features.gamma must lie in [0, 1)");
  require(c.features.horizon >= 1, "config: features.horizon must be >= 1");
  require(c.features.stride >= 1, "config: features.stride must be >= 1");
  if (c.planner.horizon != 0 && c.planner.horizon != c.features.horizon)
    throw InvalidArgument("config: planner.horizon (" + std::to_string(c.planner.horizon) +
                          ") does not match features.horizon (" + std::to_string(c.features.horizon) + ")");
  const int ep = c.dataset.episode_length > 0 ? c.dataset.episode_length : envs::Env::make(c.env).spec().episode_length;
  require(c.features.horizon <= ep, "config: features.horizon exceeds the dataset episode length");
  require(c.qbasis.ensemble_size >= 1 && c.qbasis.width >= 1 && c.qbasis.depth >= 1, "config: bad qbasis shape");
  require(c.qbasis.epochs >= 0 && c.qbasis.batch_size >= 1 && c.qbasis.learning_rate >= 0.0, "config: bad qbasis training");
  require(c.regression.exploration_steps >= 0, "config: regression.exploration_steps must be >= 0");
  require(c.adapt.budget >= 0, "config: adapt.budget must be >= 0");
  require(c.baseline.width >= 0 && c.baseline.epochs >= 0 && c.baseline.batch_size >= 1, "config: bad baseline");
  require(c.ablation.seeds >= 1, "config: ablation.seeds must be >= 1");
  if (c.task.specified) require(!c.task.goal.empty() || c.task.kind == envs::TaskKind::pendulum_balance,
                                "config: task.goal is required");
}

inline ExperimentConfig from_json(const Json& j) {
  ExperimentConfig c;
  detail::Section root(j, "");
  root.get("env", c.env);
  root.get("seed", c.seed);
  root.get("output_dir", c.output_dir);
  {
    auto s = root.sub("dataset");
    s.get("num_trajectories", c.dataset.num_trajectories);
    s.get("episode_length", c.dataset.episode_length);
    s.get("epsilon", c.dataset.epsilon);
    s.get("num_tasks", c.dataset.num_tasks);
    s.finish();
  }
  {
    auto s = root.sub("features");
    std::string kind = features::to_string(c.features.kind);
    s.get("kind", kind);
    c.features.kind = features::feature_kind_from_string(kind);
    s.get("num_features", c.features.num_features);
    s.get("gamma", c.features.gamma);
    s.get("horizon", c.features.horizon);
    s.get("stride", c.features.stride);
    s.finish();
  }
  {
    auto s = root.sub("qbasis");
    s.get("ensemble_size", c.qbasis.ensemble_size);
    s.get("width", c.qbasis.width);
    s.get("depth", c.qbasis.depth);
    s.get("epochs", c.qbasis.epochs);
    s.get("batch_size", c.qbasis.batch_size);
    s.get("learning_rate", c.qbasis.learning_rate);
    s.finish();
  }
  {
    auto s = root.sub("regression");
    s.get("lambda", c.regression.lambda);
    std::string mode = adaptation::to_string(c.regression.mode);
    s.get("mode", mode);
    c.regression.mode = adaptation::regression_mode_from_string(mode);
    s.get("exploration_steps", c.regression.exploration_steps);
    s.finish();
  }
  {
    auto s = root.sub("planner");
    std::string method = planner::to_string(c.planner.method);
    s.get("method", method);
    c.planner.method = planner::method_from_string(method);
    s.get("num_candidates", c.planner.num_candidates);
    s.get("horizon", c.planner.horizon);
    s.get("beta", c.planner.beta);
    s.get("mppi_temperature", c.planner.mppi_temperature);
    s.get("mppi_iterations", c.planner.mppi_iterations);
    s.get("mppi_samples", c.planner.mppi_samples);
    s.get("replan_every", c.planner.replan_every);
    s.get("tail_enabled", c.planner.tail_enabled);
    s.get("finetune_enabled", c.planner.finetune_enabled);
    s.finish();
  }
  {
    auto s = root.sub("adapt");
    s.get("budget", c.adapt.budget);
    s.get("eval_every", c.adapt.eval_every);
    s.get("eval_episodes", c.adapt.eval_episodes);
    s.get("episode_length", c.adapt.episode_length);
    s.get("finetune_every", c.adapt.finetune_every);
    s.get("finetune_steps", c.adapt.finetune_steps);
    s.get("finetune_learning_rate", c.adapt.finetune_learning_rate);
    s.get("tail_update_every", c.adapt.tail_update_every);
    s.get("tail_steps", c.adapt.tail_steps);
    s.get("tail_width", c.adapt.tail_width);
    s.get("tail_momentum", c.adapt.tail_momentum);
    s.get("tail_learning_rate", c.adapt.tail_learning_rate);
    s.get("log_wall_time", c.adapt.log_wall_time);
    s.finish();
  }
  if (root.has("task")) {
    auto s = root.sub("task");
    c.task.specified = true;
    std::string kind;
    s.get("kind", kind);
    require(!kind.empty(), "config: task.kind is required");
    c.task.kind = envs::task_kind_from_string(kind);
    s.get("goal", c.task.goal);
    s.get("action_penalty", c.task.action_penalty);
    s.get("perturbed", c.task.perturbed);
    s.finish();
  } else {
    root.sub("task");
  }
  {
    auto s = root.sub("baseline");
    s.get("width", c.baseline.width);
    s.get("epochs", c.baseline.epochs);
    s.get("batch_size", c.baseline.batch_size);
    s.get("learning_rate", c.baseline.learning_rate);
    s.finish();
  }
  {
    auto s = root.sub("ablation");
    s.get("seeds", c.ablation.seeds);
    s.get("dims", c.ablation.dims);
    s.get("state_dims", c.ablation.state_dims);
    s.get("feature_kinds", c.ablation.feature_kinds);
    s.get("eval_windows", c.ablation.eval_windows);
    s.finish();
  }
  root.finish();
  validate(c);
  return c;
}

inline Json to_json(const ExperimentConfig& c) {
  Json j;
  j["env"] = c.env;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["dataset"] = {{"num_trajectories", c.dataset.num_trajectories},
                  {"episode_length", c.dataset.episode_length},
                  {"epsilon", c.dataset.epsilon},
                  {"num_tasks", c.dataset.num_tasks}};
  j["features"] = {{"kind", features::to_string(c.features.kind)},
                   {"num_features", c.features.num_features},
                   {"gamma", c.features.gamma},
                   {"horizon", c.features.horizon},
                   {"stride", c.features.stride}};
  j["qbasis"] = {{"ensemble_size", c.qbasis.ensemble_size}, {"width", c.qbasis.width},
                 {"depth", c.qbasis.depth},                 {"epochs", c.qbasis.epochs},
                 {"batch_size", c.qbasis.batch_size},       {"learning_rate", c.qbasis.learning_rate}};
  j["regression"] = {{"lambda", c.regression.lambda},
                     {"mode", adaptation::to_string(c.regression.mode)},
                     {"exploration_steps", c.regression.exploration_steps}};
  j["planner"] = {{"method", planner::to_string(c.planner.method)},
                  {"num_candidates", c.planner.num_candidates},
                  {"horizon", c.planner.horizon},
                  {"beta", c.planner.beta},
                  {"mppi_temperature", c.planner.mppi_temperature},
                  {"mppi_iterations", c.planner.mppi_iterations},
                  {"mppi_samples", c.planner.mppi_samples},
                  {"replan_every", c.planner.replan_every},
                  {"tail_enabled", c.planner.tail_enabled},
                  {"finetune_enabled", c.planner.finetune_enabled}};
  j["adapt"] = {{"budget", c.adapt.budget},
                {"eval_every", c.adapt.eval_every},
                {"eval_episodes", c.adapt.eval_episodes},
                {"episode_length", c.adapt.episode_length},
                {"finetune_every", c.adapt.finetune_every},
                {"finetune_steps", c.adapt.finetune_steps},
                {"finetune_learning_rate", c.adapt.finetune_learning_rate},
                {"tail_update_every", c.adapt.tail_update_every},
                {"tail_steps", c.adapt.tail_steps},
                {"tail_width", c.adapt.tail_width},
                {"tail_momentum", c.adapt.tail_momentum},
                {"tail_learning_rate", c.adapt.tail_learning_rate},
                {"log_wall_time", c.adapt.log_wall_time}};
  if (c.task.specified)
    j["task"] = {{"kind", envs::to_string(c.task.kind)},
                 {"goal", c.task.goal},
                 {"action_penalty", c.task.action_penalty},
                 {"perturbed", c.task.perturbed}};
  j["baseline"] = {{"width", c.baseline.width},
                   {"epochs", c.baseline.epochs},
                   {"batch_size", c.baseline.batch_size},
                   {"learning_rate", c.baseline.learning_rate}};
  j["ablation"] = {{"seeds", c.ablation.seeds},
                   {"dims", c.ablation.dims},
                   {"state_dims", c.ablation.state_dims},
                   {"feature_kinds", c.ablation.feature_kinds},
                   {"eval_windows", c.ablation.eval_windows}};
  return j;
}

inline ExperimentConfig parse(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidArgument(std::string("config: malformed JSON: ") + e.what());
  }
  return from_json(j);
}

inline ExperimentConfig load(const std::string& path) { return parse(io::read_file(path)); }

inline std::string dump(const ExperimentConfig& c) { return to_json(c).dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Slices handed to the modules

inline envs::Env make_env(const ExperimentConfig& c) {
  envs::Env env = envs::Env::make(c.env);
  if (c.adapt.episode_length > 0) env.mutable_spec().episode_length = c.adapt.episode_length;
  return env;
}

inline envs::RewardTask make_task(const ExperimentConfig& c, const envs::Env& env) {
  if (!c.task.specified) return env.default_task();
  envs::RewardTask t;
  t.kind = c.task.kind;
  t.goal = Eigen::Map<const Vector>(c.task.goal.data(), static_cast<Eigen::Index>(c.task.goal.size()));
  if (t.kind == envs::TaskKind::pendulum_balance && t.goal.size() == 0) t.goal = Vector::Zero(2);
  t.action_penalty_coeff = c.task.action_penalty;
  if (c.task.perturbed || t.kind == envs::TaskKind::point_perturbed) t.perturbations = envs::Env::default_perturbations();
  if (t.kind == envs::TaskKind::point_goal || t.kind == envs::TaskKind::point_perturbed)
    require(t.goal.size() == env.spec().state_dim, "config: task.goal dimension does not match the environment");
  return t;
}

inline qbasis::QBasisConfig qbasis_config(const ExperimentConfig& c) {
  qbasis::QBasisConfig q;
  q.hidden.assign(static_cast<std::size_t>(c.qbasis.depth), c.qbasis.width);
  q.epochs = c.qbasis.epochs;
  q.batch_size = c.qbasis.batch_size;
  q.learning_rate = c.qbasis.learning_rate;
  q.ensemble_size = c.qbasis.ensemble_size;
  q.seed = derive_seed(c.seed, 0x9b);
  return q;
}

inline planner::PlannerConfig planner_config(const ExperimentConfig& c) {
  planner::PlannerConfig p;
  p.method = c.planner.method;
  p.num_candidates = c.planner.num_candidates;
  p.horizon = c.planner_horizon();
  p.beta = c.planner.beta;
  p.mppi_temperature = c.planner.mppi_temperature;
  p.mppi_iterations = c.planner.mppi_iterations;
  p.mppi_samples = c.planner.mppi_samples;
  p.replan_every = c.planner.replan_every;
  return p;
}

inline adaptation::AdaptationConfig adaptation_config(const ExperimentConfig& c) {
  adaptation::AdaptationConfig a;
  a.budget = c.adapt.budget;
  a.exploration_steps = c.regression.exploration_steps;
  a.lambda = c.regression.lambda;
  a.mode = c.regression.mode;
  a.planner = planner_config(c);
  a.finetune_enabled = c.planner.finetune_enabled;
  a.finetune_every = c.adapt.finetune_every;
  a.finetune.steps = c.adapt.finetune_steps;
  a.finetune.learning_rate = c.adapt.finetune_learning_rate;
  a.tail_enabled = c.planner.tail_enabled;
  a.tail_update_every = c.adapt.tail_update_every;
  a.tail_hidden = {c.adapt.tail_width, c.adapt.tail_width};
  a.tail_momentum = c.adapt.tail_momentum;
  a.tail_learning_rate = c.adapt.tail_learning_rate;
  a.tail_train.steps = c.adapt.tail_steps;
  a.eval_every = c.adapt.eval_every;
  a.eval_episodes = c.adapt.eval_episodes;
  a.episode_length = c.adapt.episode_length;
  a.log_wall_time = c.adapt.log_wall_time;
  return a;
}

}  // namespace ramp::config
