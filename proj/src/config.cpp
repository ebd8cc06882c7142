#include "wavectl/config.hpp"

#include <set>

#include "wavectl/errors.hpp"
#include "wavectl/io_util.hpp"

namespace wavectl {

using nlohmann::json;

namespace {

// Reads keys from one JSON object and rejects any key it was not asked about.
class Block {
 public:
  Block(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError(path_ + "." + key + ": wrong type");
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("unknown config key: " + path_ + "." + it.key());
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Vec2 vec2_from(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw ConfigError(where + ": expected [x, y]");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

json env_to_json(const EnvConfig& e) {
  json centers = json::array();
  for (const auto& c : e.design.centers) centers.push_back({c.x, c.y});
  json design = {{"centers", centers},
                 {"r_min", e.design.r_min},
                 {"r_max", e.design.r_max},
                 {"actuation_rate", e.design.actuation_rate},
                 {"initial_radii", e.design.initial_radii ? json(*e.design.initial_radii) : json(nullptr)}};
  json source = {{"center", {e.source.center.x, e.source.center.y}},
                 {"width_cells", e.source.width_cells},
                 {"amplitude", e.source.amplitude},
                 {"omega", e.source.omega}};
  return {{"nx", e.nx},
          {"ny", e.ny},
          {"length_x", e.length_x},
          {"length_y", e.length_y},
          {"dt", e.dt},
          {"steps_per_action", e.steps_per_action},
          {"actions_per_episode", e.actions_per_episode},
          {"obs_nx", e.obs_nx},
          {"obs_ny", e.obs_ny},
          {"c_ambient", e.medium.c_ambient},
          {"c_scatterer", e.medium.c_scatterer},
          {"pml_cells", e.pml_cells},
          {"pml_strength", e.pml_strength},
          {"source", source},
          {"design", design}};
}

EnvConfig env_from_json(const json& j) {
  EnvConfig e;
  Block b(j, "env");
  b.get("nx", e.nx);
  b.get("ny", e.ny);
  b.get("length_x", e.length_x);
  b.get("length_y", e.length_y);
  b.get("dt", e.dt);
  b.get("steps_per_action", e.steps_per_action);
  b.get("actions_per_episode", e.actions_per_episode);
  b.get("obs_nx", e.obs_nx);
  b.get("obs_ny", e.obs_ny);
  b.get("c_ambient", e.medium.c_ambient);
  b.get("c_scatterer", e.medium.c_scatterer);
  b.get("pml_cells", e.pml_cells);
  b.get("pml_strength", e.pml_strength);
  if (const json* s = b.child("source")) {
    Block sb(*s, "env.source");
    if (const json* c = sb.child("center")) e.source.center = vec2_from(*c, "env.source.center");
    sb.get("width_cells", e.source.width_cells);
    sb.get("amplitude", e.source.amplitude);
    sb.get("omega", e.source.omega);
    sb.finish();
  }
  if (const json* d = b.child("design")) {
    Block db(*d, "env.design");
    if (const json* c = db.child("centers")) {
      if (!c->is_array()) throw ConfigError("env.design.centers: expected a list of [x, y]");
      e.design.centers.clear();
      for (const auto& p : *c) e.design.centers.push_back(vec2_from(p, "env.design.centers"));
    }
    db.get("r_min", e.design.r_min);
    db.get("r_max", e.design.r_max);
    db.get("actuation_rate", e.design.actuation_rate);
    if (const json* r = db.child("initial_radii")) {
      if (r->is_null()) {
        e.design.initial_radii.reset();
      } else {
        try {
          e.design.initial_radii = r->get<std::vector<double>>();
        } catch (const json::exception&) {
          throw ConfigError("env.design.initial_radii: expected a list of numbers or null");
        }
      }
    }
    db.finish();
  }
  b.finish();
  return e;
}

json latent_to_json(const LatentConfig& l) {
  return {{"n_cells", l.n_cells},
          {"length", l.length},
          {"n_freq", l.n_freq},
          {"n_pml", l.n_pml},
          {"pml_scale", l.pml_scale},
          {"pml_init_fraction", l.pml_init_fraction},
          {"pml_init_strength", l.pml_init_strength},
          {"speed_gain", l.speed_gain},
          {"c_min_fraction", l.c_min_fraction},
          {"wave_channels1", l.wave_channels1},
          {"wave_channels2", l.wave_channels2},
          {"wave_channels3", l.wave_channels3},
          {"wave_hidden", l.wave_hidden},
          {"design_hidden", l.design_hidden}};
}

LatentConfig latent_from_json(const json& j) {
  LatentConfig l;
  Block b(j, "latent");
  b.get("n_cells", l.n_cells);
  b.get("length", l.length);
  b.get("n_freq", l.n_freq);
  b.get("n_pml", l.n_pml);
  b.get("pml_scale", l.pml_scale);
  b.get("pml_init_fraction", l.pml_init_fraction);
  b.get("pml_init_strength", l.pml_init_strength);
  b.get("speed_gain", l.speed_gain);
  b.get("c_min_fraction", l.c_min_fraction);
  b.get("wave_channels1", l.wave_channels1);
  b.get("wave_channels2", l.wave_channels2);
  b.get("wave_channels3", l.wave_channels3);
  b.get("wave_hidden", l.wave_hidden);
  b.get("design_hidden", l.design_hidden);
  b.finish();
  return l;
}

json train_to_json(const TrainConfig& t) {
  return {{"horizon_actions", t.horizon_actions},
          {"batch_size", t.batch_size},
          {"learning_rate", t.learning_rate},
          {"beta1", t.beta1},
          {"beta2", t.beta2},
          {"max_epochs", t.max_epochs},
          {"batches_per_epoch", t.batches_per_epoch},
          {"seed", t.seed},
          {"weight_sc", t.weight_sc},
          {"weight_tot", t.weight_tot},
          {"weight_inc", t.weight_inc},
          {"start_window_fraction", t.start_window_fraction},
          {"holdout_episodes", t.holdout_episodes},
          {"eval_batch", t.eval_batch},
          {"n_threads", t.n_threads},
          {"no_pml", t.no_pml}};
}

TrainConfig train_from_json(const json& j) {
  TrainConfig t;
  Block b(j, "train");
  b.get("horizon_actions", t.horizon_actions);
  b.get("batch_size", t.batch_size);
  b.get("learning_rate", t.learning_rate);
  b.get("beta1", t.beta1);
  b.get("beta2", t.beta2);
  b.get("max_epochs", t.max_epochs);
  b.get("batches_per_epoch", t.batches_per_epoch);
  b.get("seed", t.seed);
  b.get("weight_sc", t.weight_sc);
  b.get("weight_tot", t.weight_tot);
  b.get("weight_inc", t.weight_inc);
  b.get("start_window_fraction", t.start_window_fraction);
  b.get("holdout_episodes", t.holdout_episodes);
  b.get("eval_batch", t.eval_batch);
  b.get("n_threads", t.n_threads);
  b.get("no_pml", t.no_pml);
  b.finish();
  return t;
}

json mpc_to_json(const MpcConfig& m) {
  return {{"n_shots", m.n_shots},           {"horizon", m.horizon}, {"beta", m.beta},
          {"action_scale", m.action_scale}, {"seed", m.seed},       {"n_threads", m.n_threads}};
}

MpcConfig mpc_from_json(const json& j) {
  MpcConfig m;
  Block b(j, "mpc");
  b.get("n_shots", m.n_shots);
  b.get("horizon", m.horizon);
  b.get("beta", m.beta);
  b.get("action_scale", m.action_scale);
  b.get("seed", m.seed);
  b.get("n_threads", m.n_threads);
  b.finish();
  return m;
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  Block b(j, "config");
  if (const json* e = b.child("env")) c.env = env_from_json(*e);
  if (const json* l = b.child("latent")) c.latent = latent_from_json(*l);
  if (const json* t = b.child("train")) c.train = train_from_json(*t);
  if (const json* m = b.child("mpc")) c.mpc = mpc_from_json(*m);
  b.get("seed", c.seed);
  b.get("output_dir", c.output_dir);
  b.finish();
  return c;
}

json config_to_json(const RunConfig& c) {
  return {{"env", env_to_json(c.env)},
          {"latent", latent_to_json(c.latent)},
          {"train", train_to_json(c.train)},
          {"mpc", mpc_to_json(c.mpc)},
          {"seed", c.seed},
          {"output_dir", c.output_dir}};
}

RunConfig load_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(io::read_text(path));
  } catch (const json::parse_error& ex) {
    throw ConfigError("config is not valid JSON: " + std::string(ex.what()));
  } catch (const IoError& ex) {
    throw ConfigError(ex.what());
  }
  RunConfig c = config_from_json(j);
  c.validate();
  return c;
}

void RunConfig::validate() const {
  env.validate();
  if (train.horizon_actions < 1 || train.horizon_actions > env.actions_per_episode) {
    throw ConfigError("train.horizon_actions must be in [1, actions_per_episode]");
  }
  if (train.weight_sc < 0.0 || train.weight_tot < 0.0 || train.weight_inc < 0.0) {
    throw ConfigError("loss weights must be >= 0");
  }
  if (train.batch_size < 1 || train.batches_per_epoch < 1 || train.max_epochs < 0) {
    throw ConfigError("train.batch_size and batches_per_epoch must be >= 1");
  }
  if (!(train.start_window_fraction >= 0.0 && train.start_window_fraction <= 1.0)) {
    throw ConfigError("train.start_window_fraction must be in [0, 1]");
  }
  if (mpc.n_shots < 1 || mpc.horizon < 1) throw ConfigError("mpc.n_shots and mpc.horizon must be >= 1");
  if (env.n_scatterers() < 1) return;  // the surrogate is not built for empty designs
  try {
    SurrogateModel probe(latent, ModelEnvInfo::from(env), 0);
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(std::string("latent block: ") + ex.what());
  }
}

std::string env_hash(const EnvConfig& e) {
  // Episode length and initial radii do not change the dynamics a model learns.
  json j = env_to_json(e);
  j.erase("actions_per_episode");
  j["design"].erase("initial_radii");
  return io::hex64(io::fnv1a64(j.dump()));
}

}  // namespace wavectl
