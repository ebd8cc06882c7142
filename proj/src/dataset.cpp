#include "wavectl/dataset.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

#include "json.hpp"
#include "wavectl/config.hpp"
#include "wavectl/errors.hpp"
#include "wavectl/io_util.hpp"

namespace wavectl {

using nlohmann::json;

namespace {

std::string episode_stem(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ep%03zu", i);
  return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw IoError("bad number in dataset CSV: " + s);
  return v;
}

// CSV rows "episode,index,v0,...": returns rows grouped per episode in file order.
std::vector<std::vector<std::vector<double>>> read_indexed_csv(const std::filesystem::path& path,
                                                               std::size_t n_episodes, std::size_t width) {
  std::istringstream in(io::read_text(path));
  std::string line;
  std::getline(in, line);  // header
  std::vector<std::vector<std::vector<double>>> out(n_episodes);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != width + 2) throw IoError("wrong column count in " + path.string());
    const auto ep = static_cast<std::size_t>(parse_double(cells[0]));
    const auto idx = static_cast<std::size_t>(parse_double(cells[1]));
    if (ep >= n_episodes || idx != out[ep].size()) throw IoError("rows out of order in " + path.string());
    std::vector<double> row(width);
    for (std::size_t k = 0; k < width; ++k) row[k] = parse_double(cells[k + 2]);
    out[ep].push_back(std::move(row));
  }
  return out;
}

}  // namespace

void save_dataset(const std::filesystem::path& dir, const std::vector<EpisodeRecord>& episodes) {
  if (episodes.empty()) throw ParameterError("cannot save an empty dataset");
  const EnvConfig& cfg = episodes.front().config;
  const std::string hash = env_hash(cfg);
  for (const auto& e : episodes) {
    if (env_hash(e.config) != hash) throw ParameterError("episodes were produced by different configs");
  }
  io::ensure_dir(dir);
  const std::size_t m = cfg.n_scatterers();

  std::vector<std::string> header{"episode", "index"};
  for (std::size_t k = 0; k < m; ++k) header.push_back("a" + std::to_string(k));
  io::CsvWriter actions(header);
  for (std::size_t k = 0; k < m; ++k) header[k + 2] = "r" + std::to_string(k);
  io::CsvWriter radii(header);

  json eps = json::array();
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    const auto& e = episodes[i];
    const std::string stem = episode_stem(i);
    const int n = e.n_actions();
    io::write_f32(dir / (stem + "_frames.f32"), std::span<const float>(e.frames));
    std::vector<double> sig;
    sig.reserve(3 * e.sigma_sc.size());
    sig.insert(sig.end(), e.sigma_sc.begin(), e.sigma_sc.end());
    sig.insert(sig.end(), e.sigma_tot.begin(), e.sigma_tot.end());
    sig.insert(sig.end(), e.sigma_inc.begin(), e.sigma_inc.end());
    io::write_f32(dir / (stem + "_sigma.f32"), std::span<const double>(sig));
    for (int a = 0; a < n; ++a) {
      std::vector<std::string> cells{std::to_string(i), std::to_string(a)};
      for (double v : e.actions[a]) cells.push_back(io::format_number(v));
      actions.row(cells);
    }
    for (std::size_t r = 0; r < e.radii.size(); ++r) {
      std::vector<std::string> cells{std::to_string(i), std::to_string(r)};
      for (double v : e.radii[r]) cells.push_back(io::format_number(v));
      radii.row(cells);
    }
    eps.push_back({{"index", i},
                   {"seed", e.seed},
                   {"n_actions", n},
                   {"frames_file", stem + "_frames.f32"},
                   {"frames_shape", {n + 1, e.obs_ny, e.obs_nx}},
                   {"sigma_file", stem + "_sigma.f32"},
                   {"sigma_shape", {3, e.sigma_sc.size()}},
                   {"sigma_rows", {"sigma_sc", "sigma_tot", "sigma_inc"}}});
  }
  actions.save(dir / "actions.csv");
  radii.save(dir / "radii.csv");

  json manifest = {{"format", "wavectl-dataset-1"},
                   {"config", env_to_json(cfg)},
                   {"config_hash", hash},
                   {"dtype", "float32"},
                   {"byte_order", "little"},
                   {"layout", "row-major"},
                   {"steps_per_action", cfg.steps_per_action},
                   {"n_scatterers", m},
                   {"actions_file", "actions.csv"},
                   {"radii_file", "radii.csv"},
                   {"episodes", eps}};
  io::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

std::vector<EpisodeRecord> load_dataset(const std::filesystem::path& dir) {
  json manifest;
  try {
    manifest = json::parse(io::read_text(dir / "manifest.json"));
  } catch (const json::exception& ex) {
    throw IoError("dataset manifest is not valid JSON: " + std::string(ex.what()));
  }
  try {
    if (manifest.at("format") != "wavectl-dataset-1") throw IoError("unsupported dataset format");
    const EnvConfig cfg = env_from_json(manifest.at("config"));
    if (env_hash(cfg) != manifest.at("config_hash").get<std::string>()) {
      throw IoError("dataset config hash does not match its config block");
    }
    const auto& eps = manifest.at("episodes");
    const std::size_t m = cfg.n_scatterers();
    const auto actions = read_indexed_csv(dir / manifest.at("actions_file").get<std::string>(), eps.size(), m);
    const auto radii = read_indexed_csv(dir / manifest.at("radii_file").get<std::string>(), eps.size(), m);
    std::vector<EpisodeRecord> out;
    for (std::size_t i = 0; i < eps.size(); ++i) {
      const auto& ej = eps[i];
      EpisodeRecord e;
      e.config = cfg;
      e.seed = ej.at("seed").get<std::uint64_t>();
      e.steps_per_action = cfg.steps_per_action;
      const auto fshape = ej.at("frames_shape").get<std::vector<std::size_t>>();
      const int n = ej.at("n_actions");
      if (fshape.size() != 3 || fshape[0] != static_cast<std::size_t>(n + 1)) {
        throw IoError("bad frames_shape for episode " + std::to_string(i));
      }
      e.obs_ny = static_cast<int>(fshape[1]);
      e.obs_nx = static_cast<int>(fshape[2]);
      e.frames = io::read_f32(dir / ej.at("frames_file").get<std::string>());
      if (e.frames.size() != fshape[0] * fshape[1] * fshape[2]) throw IoError("frames file size mismatch");
      const auto sig = io::read_f32(dir / ej.at("sigma_file").get<std::string>());
      const std::size_t steps = static_cast<std::size_t>(n) * cfg.steps_per_action;
      if (sig.size() != 3 * steps) throw IoError("sigma file size mismatch");
      e.sigma_sc.assign(sig.begin(), sig.begin() + steps);
      e.sigma_tot.assign(sig.begin() + steps, sig.begin() + 2 * steps);
      e.sigma_inc.assign(sig.begin() + 2 * steps, sig.end());
      e.actions = actions[i];
      e.radii = radii[i];
      if (e.actions.size() != static_cast<std::size_t>(n) || e.radii.size() != static_cast<std::size_t>(n + 1)) {
        throw IoError("action/radii rows do not match n_actions for episode " + std::to_string(i));
      }
      out.push_back(std::move(e));
    }
    return out;
  } catch (const json::exception& ex) {
    throw IoError("dataset manifest is incomplete: " + std::string(ex.what()));
  } catch (const ConfigError& ex) {
    throw IoError("dataset config block is invalid: " + std::string(ex.what()));
  }
}

std::string dataset_env_hash(const std::filesystem::path& dir) {
  try {
    return json::parse(io::read_text(dir / "manifest.json")).at("config_hash").get<std::string>();
  } catch (const json::exception& ex) {
    throw IoError("cannot read dataset config hash: " + std::string(ex.what()));
  }
}

}  // namespace wavectl
