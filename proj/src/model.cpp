#include "wavectl/model.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

#include "wavectl/config.hpp"
#include "wavectl/errors.hpp"
#include "wavectl/io_util.hpp"
#include "wavectl/random.hpp"

namespace wavectl {

using nlohmann::json;

ModelEnvInfo ModelEnvInfo::from(const EnvConfig& env) {
  ModelEnvInfo m;
  m.c_ambient = env.medium.c_ambient;
  m.omega = env.source.omega;
  m.dt = env.dt;
  m.steps_per_action = env.steps_per_action;
  m.n_scatterers = static_cast<int>(env.n_scatterers());
  m.r_min = env.design.r_min;
  m.r_max = env.design.r_max;
  m.obs_nx = env.obs_nx;
  m.obs_ny = env.obs_ny;
  m.domain_diagonal = std::hypot(env.length_x, env.length_y);
  m.max_radius_delta = env.max_radius_delta();
  return m;
}

namespace {

double softplus_inverse(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }

}  // namespace

SurrogateModel::SurrogateModel(const LatentConfig& latent, const ModelEnvInfo& env, std::uint64_t seed)
    : latent_(latent), env_(env), seed_(seed) {
  const double length = latent.length > 0.0 ? latent.length : 4.0 * env.domain_diagonal;
  if (latent.n_cells < 8 || !(length > 0.0)) throw ConfigError("latent grid needs >= 8 cells and a positive length");
  if (latent.n_freq < 1 || latent.n_pml < 2) throw ConfigError("latent n_freq must be >= 1 and n_pml >= 2");
  if (env.n_scatterers < 1) throw ConfigError("the surrogate needs at least one scatterer");
  grid_ = Grid1D::make(latent.n_cells, length);
  if (env.c_ambient * env.dt / grid_.dx() > 0.5) throw ConfigError("latent CFL number exceeds 0.5 at ambient speed");
  if (c_max() <= c_min()) throw ConfigError("latent speed cap is below the speed floor");
  basis_ = SineBasis(latent.n_freq, grid_);

  WaveEncoderShape ws;
  ws.obs_nx = env.obs_nx;
  ws.obs_ny = env.obs_ny;
  ws.channels1 = latent.wave_channels1;
  ws.channels2 = latent.wave_channels2;
  ws.channels3 = latent.wave_channels3;
  ws.hidden = latent.wave_hidden;
  ws.out = 5 * latent.n_freq + latent.n_pml;
  wave_ = WaveEncoder(params, ws);
  design_ = DesignEncoder(params, env.n_scatterers, latent.design_hidden, latent.n_freq);
  wave_.init(params, derive_seed(seed, 101));
  design_.init(params, derive_seed(seed, 102));

  auto& bias = params[wave_.head().b].data;
  const auto prior = pml_prior_raw();
  std::copy(prior.begin(), prior.end(), bias.begin() + 5 * latent.n_freq);
}

std::vector<double> SurrogateModel::pml_prior_raw() const {
  const int n = grid_.n_cells;
  const int thickness = std::clamp(static_cast<int>(std::lround(latent_.pml_init_fraction * n)), 1, n / 2 - 1);
  const double ramp_scale =
      pml_scale_from_strength(latent_.pml_init_strength, env_.c_ambient, thickness, grid_.dx());
  const PmlProfile1D ramp = build_ramp(grid_, thickness, ramp_scale);
  const int p = latent_.n_pml;
  std::vector<double> raw(p);
  for (int k = 0; k < p; ++k) {
    const int cell = static_cast<int>(std::lround(static_cast<double>(k) * (n - 1) / (p - 1)));
    const double target = std::max(ramp.sigma[cell] / latent_.pml_scale, 1e-4);
    raw[k] = softplus_inverse(target);
  }
  return raw;
}

SurrogateModel::WaveOutput SurrogateModel::encode_wave(const Observation& obs, double t0) const {
  if (obs.nx != env_.obs_nx || obs.ny != env_.obs_ny || obs.frames.size() != 3u * obs.nx * obs.ny) {
    throw DimensionError("observation does not match the model's frame resolution");
  }
  std::vector<double> frames(obs.frames.size());
  const double inv = 1.0 / frame_scale;
  for (std::size_t i = 0; i < frames.size(); ++i) frames[i] = obs.frames[i] * inv;

  WaveOutput out;
  wave_.forward(params, frames, out.cache);
  const int nf = latent_.n_freq;
  const auto& h = out.cache.out;
  auto block = [&](int k) { return std::span<const double>(h).subspan(static_cast<std::size_t>(k) * nf, nf); };

  out.conds.initial = LatentState(grid_, t0);
  auto& s = out.conds.initial;
  basis_.embed(block(0), s.u_tot);
  basis_.embed(block(1), s.v_tot);
  basis_.embed(block(2), s.u_inc);
  basis_.embed(block(3), s.v_inc);
  const double vs = 1.0 / env_.c_ambient;
  for (auto* v : {&s.v_tot, &s.v_inc}) {
    for (auto& x : *v) x *= vs;
  }
  out.conds.f_z.assign(grid_.n_cells, 0.0);
  basis_.embed(block(4), out.conds.f_z);

  out.pml.grid = grid_;
  out.pml.scale = latent_.pml_scale;
  out.pml.raw.assign(h.begin() + 5 * nf, h.end());
  if (no_pml) {
    out.conds.sigma_z.assign(grid_.n_cells, 0.0);
  } else {
    out.conds.sigma_z = realize_latent_pml(out.pml).values;
  }
  out.conds.omega = env_.omega;
  out.conds.c_ambient = env_.c_ambient;
  return out;
}

void SurrogateModel::backward_wave(const WaveOutput& out, const LatentGradients& g, nn::ParamStore& grads) const {
  const int nf = latent_.n_freq;
  std::vector<double> g_out(out.cache.out.size(), 0.0);
  auto block = [&](int k) { return std::span<double>(g_out).subspan(static_cast<std::size_t>(k) * nf, nf); };
  basis_.embed_transpose(g.u_tot, block(0));
  basis_.embed_transpose(g.v_tot, block(1));
  basis_.embed_transpose(g.u_inc, block(2));
  basis_.embed_transpose(g.v_inc, block(3));
  basis_.embed_transpose(g.f_z, block(4));
  const double vs = 1.0 / env_.c_ambient;
  for (int k : {1, 3}) {
    for (auto& x : block(k)) x *= vs;
  }
  if (!no_pml) {
    const auto g_raw = realize_latent_pml_vjp(out.pml, g.sigma_z);
    std::copy(g_raw.begin(), g_raw.end(), g_out.begin() + 5 * nf);
  }
  wave_.backward(params, out.cache, g_out, grads);
}

std::vector<double> SurrogateModel::speed_frame(const std::vector<double>& radii, DesignEncoder::Cache* cache,
                                                std::vector<unsigned char>* free) const {
  if (static_cast<int>(radii.size()) != env_.n_scatterers) throw DimensionError("radii length mismatch");
  const double mid = 0.5 * (env_.r_min + env_.r_max);
  const double half = std::max(0.5 * (env_.r_max - env_.r_min), 1e-12);
  std::vector<double> x(radii.size());
  for (std::size_t k = 0; k < radii.size(); ++k) x[k] = (radii[k] - mid) / half;
  DesignEncoder::Cache local;
  DesignEncoder::Cache& c = cache ? *cache : local;
  design_.forward(params, x, c);
  std::vector<double> frame(grid_.n_cells);
  basis_.embed(c.out, frame);
  const double lo = c_min(), hi = c_max();
  const double gain = latent_.speed_gain * env_.c_ambient;
  if (free) free->assign(frame.size(), 1);
  for (std::size_t i = 0; i < frame.size(); ++i) {
    const double v = env_.c_ambient + gain * frame[i];
    frame[i] = std::clamp(v, lo, hi);
    if (free && (v < lo || v > hi)) (*free)[i] = 0;
  }
  return frame;
}

SurrogateModel::DesignOutput SurrogateModel::encode_design_window(const std::vector<std::vector<double>>& radii_seq,
                                                                  double t0) const {
  if (radii_seq.size() < 2) throw DimensionError("a design window needs at least two design states");
  DesignOutput out;
  out.caches.resize(radii_seq.size());
  out.free.resize(radii_seq.size());
  for (std::size_t k = 0; k < radii_seq.size(); ++k) {
    out.speed.c_frames.push_back(speed_frame(radii_seq[k], &out.caches[k], &out.free[k]));
    out.speed.t_knots.push_back(t0 + static_cast<double>(k) * env_.action_dt());
  }
  return out;
}

void SurrogateModel::backward_design(const DesignOutput& out, const std::vector<std::vector<double>>& g_frames,
                                     nn::ParamStore& grads) const {
  if (g_frames.size() != out.caches.size()) throw DimensionError("speed-frame gradient count mismatch");
  const double gain = latent_.speed_gain * env_.c_ambient;
  std::vector<double> g_emb(grid_.n_cells), g_coeff(latent_.n_freq);
  for (std::size_t k = 0; k < g_frames.size(); ++k) {
    for (int i = 0; i < grid_.n_cells; ++i) g_emb[i] = out.free[k][i] ? gain * g_frames[k][i] : 0.0;
    basis_.embed_transpose(g_emb, g_coeff);
    design_.backward(params, out.caches[k], g_coeff, grads);
  }
}

// ---------------------------------------------------------------------------

void save_checkpoint(const SurrogateModel& model, const std::filesystem::path& dir) {
  io::ensure_dir(dir);
  json tensors = json::array();
  std::size_t offset = 0;
  for (const auto& t : model.params.tensors()) {
    tensors.push_back({{"name", t.name}, {"shape", t.shape}, {"offset", offset}, {"count", t.size()}});
    offset += t.size();
  }
  json m;
  m["format"] = "wavectl-checkpoint-1";
  m["seed"] = model.seed();
  m["env_hash"] = model.env_hash;
  m["latent"] = latent_to_json(model.latent_config());
  const auto& e = model.env_info();
  m["env_info"] = {{"c_ambient", e.c_ambient},   {"omega", e.omega},
                   {"dt", e.dt},                 {"steps_per_action", e.steps_per_action},
                   {"n_scatterers", e.n_scatterers}, {"r_min", e.r_min},
                   {"r_max", e.r_max},           {"obs_nx", e.obs_nx},
                   {"obs_ny", e.obs_ny},         {"domain_diagonal", e.domain_diagonal},
                   {"max_radius_delta", e.max_radius_delta}};
  m["frame_scale"] = model.frame_scale;
  m["sigma_scale"] = model.sigma_scale;
  m["beta"] = model.beta;
  m["no_pml"] = model.no_pml;
  m["tensors"] = tensors;
  m["params_file"] = "params.f32";
  m["dtype"] = "float32";
  m["byte_order"] = "little";
  io::write_text(dir / "manifest.json", m.dump(2) + "\n");
  io::write_f32(dir / "params.f32", std::span<const double>(model.params.flatten()));
}

SurrogateModel load_checkpoint(const std::filesystem::path& dir) {
  json m;
  try {
    m = json::parse(io::read_text(dir / "manifest.json"));
  } catch (const json::exception& ex) {
    throw IoError("checkpoint manifest is not valid JSON: " + std::string(ex.what()));
  }
  try {
    if (m.at("format") != "wavectl-checkpoint-1") throw IoError("unsupported checkpoint format");
    ModelEnvInfo e;
    const auto& j = m.at("env_info");
    e.c_ambient = j.at("c_ambient");
    e.omega = j.at("omega");
    e.dt = j.at("dt");
    e.steps_per_action = j.at("steps_per_action");
    e.n_scatterers = j.at("n_scatterers");
    e.r_min = j.at("r_min");
    e.r_max = j.at("r_max");
    e.obs_nx = j.at("obs_nx");
    e.obs_ny = j.at("obs_ny");
    e.domain_diagonal = j.at("domain_diagonal");
    e.max_radius_delta = j.at("max_radius_delta");
    SurrogateModel model(latent_from_json(m.at("latent")), e, m.at("seed").get<std::uint64_t>());
    model.env_hash = m.at("env_hash");
    model.frame_scale = m.at("frame_scale");
    model.sigma_scale = m.at("sigma_scale");
    model.beta = m.at("beta");
    model.no_pml = m.at("no_pml");
    const auto& tensors = m.at("tensors");
    if (static_cast<int>(tensors.size()) != model.params.count()) throw IoError("checkpoint tensor count mismatch");
    for (int i = 0; i < model.params.count(); ++i) {
      if (tensors[i].at("name") != model.params[i].name ||
          tensors[i].at("shape").get<std::vector<int>>() != model.params[i].shape) {
        throw IoError("checkpoint tensor layout mismatch at " + model.params[i].name);
      }
    }
    const auto flat = io::read_f32(dir / m.at("params_file").get<std::string>());
    model.params.unflatten(std::vector<double>(flat.begin(), flat.end()));
    return model;
  } catch (const json::exception& ex) {
    throw IoError("checkpoint manifest is incomplete: " + std::string(ex.what()));
  }
}

}  // namespace wavectl
