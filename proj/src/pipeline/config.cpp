#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "ogs/config.hpp"
#include "ogs/errors.hpp"

namespace ogs {

namespace {

struct Field {
  std::function<void(SlamConfig&, const std::string&)> set;
  std::function<std::string(const SlamConfig&)> get;
};

double to_double(const std::string& v) {
  std::size_t used = 0;
  const double d = std::stod(v, &used);
  if (used != v.size()) throw std::invalid_argument("trailing characters");
  return d;
}

long long to_integer(const std::string& v) {
  std::size_t used = 0;
  const long long i = std::stoll(v, &used);
  if (used != v.size()) throw std::invalid_argument("trailing characters");
  return i;
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::invalid_argument("expected true or false");
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

template <class T>
Field real(T SlamConfig::*m) {
  return {[m](SlamConfig& c, const std::string& v) { c.*m = static_cast<T>(to_double(v)); },
          [m](const SlamConfig& c) { return fmt(static_cast<double>(c.*m)); }};
}

template <class T>
Field integer(T SlamConfig::*m) {
  return {[m](SlamConfig& c, const std::string& v) {
            const long long i = to_integer(v);
            if (std::is_unsigned_v<T> && i < 0) throw std::invalid_argument("must be non-negative");
            c.*m = static_cast<T>(i);
          },
          [m](const SlamConfig& c) { return std::to_string(c.*m); }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> f = {
      {"window_capacity", integer(&SlamConfig::window_capacity)},
      {"window_min_overlap", real(&SlamConfig::window_min_overlap)},
      {"kf_min_covisibility", real(&SlamConfig::kf_min_covisibility)},
      {"kf_min_coverage", real(&SlamConfig::kf_min_coverage)},
      {"track_iters", integer(&SlamConfig::track_iters)},
      {"track_step_rot", real(&SlamConfig::track_step_rot)},
      {"track_step_trans", real(&SlamConfig::track_step_trans)},
      {"track_momentum", real(&SlamConfig::track_momentum)},
      {"track_min_alpha", real(&SlamConfig::track_min_alpha)},
      {"track_rel_tol", real(&SlamConfig::track_rel_tol)},
      {"track_patience", integer(&SlamConfig::track_patience)},
      {"pnp_inlier_px", real(&SlamConfig::pnp_inlier_px)},
      {"pnp_max_iters", integer(&SlamConfig::pnp_max_iters)},
      {"pnp_max_points", integer(&SlamConfig::pnp_max_points)},
      {"map_iters", integer(&SlamConfig::map_iters)},
      {"lambda_iso", real(&SlamConfig::lambda_iso)},
      {"lr_mean_init", real(&SlamConfig::lr_mean_init)},
      {"lr_mean_final", real(&SlamConfig::lr_mean_final)},
      {"lr_horizon", real(&SlamConfig::lr_horizon)},
      {"lr_rot", real(&SlamConfig::lr_rot)},
      {"lr_scale", real(&SlamConfig::lr_scale)},
      {"lr_opacity", real(&SlamConfig::lr_opacity)},
      {"lr_color", real(&SlamConfig::lr_color)},
      {"lr_adjustment", {[](SlamConfig& c, const std::string& v) { c.lr_adjustment = to_bool(v); },
                         [](const SlamConfig& c) { return std::string(c.lr_adjustment ? "true" : "false"); }}},
      {"subsample_cell", integer(&SlamConfig::subsample_cell)},
      {"explained_alpha", real(&SlamConfig::explained_alpha)},
      {"explained_depth_rel", real(&SlamConfig::explained_depth_rel)},
      {"scale_samples", integer(&SlamConfig::scale_samples)},
      {"scale_ratio_mode",
       {[](SlamConfig& c, const std::string& v) {
          if (v == "cross_frame") c.scale_ratio_mode = ScaleRatioMode::cross_frame;
          else if (v == "within_frame") c.scale_ratio_mode = ScaleRatioMode::within_frame;
          else throw std::invalid_argument("expected cross_frame or within_frame");
        },
        [](const SlamConfig& c) {
          return std::string(c.scale_ratio_mode == ScaleRatioMode::cross_frame ? "cross_frame" : "within_frame");
        }}},
      {"provider",
       {[](SlamConfig& c, const std::string& v) {
          if (v == "files") c.provider = ProviderKind::files;
          else if (v == "synthetic") c.provider = ProviderKind::synthetic;
          else throw std::invalid_argument("expected files or synthetic");
        },
        [](const SlamConfig& c) { return std::string(c.provider == ProviderKind::files ? "files" : "synthetic"); }}},
      {"background",
       {[](SlamConfig& c, const std::string& v) {
          std::istringstream s(v);
          Eigen::Vector3d b;
          std::string extra;
          if (!(s >> b[0] >> b[1] >> b[2]) || (s >> extra)) throw std::invalid_argument("expected three numbers");
          c.background = b;
        },
        [](const SlamConfig& c) {
          return fmt(c.background[0]) + " " + fmt(c.background[1]) + " " + fmt(c.background[2]);
        }}},
      {"seed", integer(&SlamConfig::seed)},
      {"threads", integer(&SlamConfig::threads)},
  };
  return f;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidArgument("config: " + what);
}

}  // namespace

void SlamConfig::validate() const {
  require(window_capacity >= 1, "window_capacity must be >= 1");
  require(window_min_overlap >= 0.0 && window_min_overlap <= 1.0, "window_min_overlap must be in [0, 1]");
  require(kf_min_covisibility >= 0.0 && kf_min_covisibility <= 1.0, "kf_min_covisibility must be in [0, 1]");
  require(kf_min_coverage >= 0.0 && kf_min_coverage <= 1.0, "kf_min_coverage must be in [0, 1]");
  require(track_iters >= 1, "track_iters must be >= 1");
  require(track_step_rot > 0.0 && track_step_trans > 0.0, "tracking steps must be positive");
  require(track_momentum >= 0.0 && track_momentum < 1.0, "track_momentum must be in [0, 1)");
  require(track_min_alpha >= 0.0 && track_min_alpha <= 1.0, "track_min_alpha must be in [0, 1]");
  require(track_rel_tol >= 0.0, "track_rel_tol must be >= 0");
  require(track_patience >= 1, "track_patience must be >= 1");
  require(pnp_inlier_px > 0.0, "pnp_inlier_px must be positive");
  require(pnp_max_iters >= 1, "pnp_max_iters must be >= 1");
  require(pnp_max_points >= 6, "pnp_max_points must be >= 6");
  require(map_iters >= 0, "map_iters must be >= 0");
  require(lambda_iso >= 0.0, "lambda_iso must be >= 0");
  require(lr_mean_init > 0.0 && lr_mean_final > 0.0 && lr_mean_final <= lr_mean_init,
          "need 0 < lr_mean_final <= lr_mean_init");
  require(lr_horizon > 0.0, "lr_horizon must be positive");
  require(lr_rot >= 0.0 && lr_scale >= 0.0 && lr_opacity >= 0.0 && lr_color >= 0.0,
          "learning rates must be >= 0");
  require(subsample_cell >= 1, "subsample_cell must be >= 1");
  require(explained_alpha >= 0.0 && explained_alpha <= 1.0, "explained_alpha must be in [0, 1]");
  require(explained_depth_rel >= 0.0, "explained_depth_rel must be >= 0");
  require(scale_samples >= 2, "scale_samples must be >= 2");
  require(background.allFinite() && background.minCoeff() >= 0.0 && background.maxCoeff() <= 1.0,
          "background must be in [0, 1]");
  require(threads >= 0, "threads must be >= 0");
}

SlamConfig parse_config(const std::string& text) {
  SlamConfig c;
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InvalidArgument("config line " + std::to_string(n) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = fields().find(key);
    if (it == fields().end()) throw InvalidArgument("config line " + std::to_string(n) + ": unknown key '" + key + "'");
    try {
      it->second.set(c, value);
    } catch (const std::exception& e) {
      throw InvalidArgument("config line " + std::to_string(n) + ": bad value for " + key + ": " + e.what());
    }
  }
  c.validate();
  return c;
}

SlamConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw InvalidArgument("cannot read config " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

std::string format_config(const SlamConfig& config) {
  std::string out;
  for (const auto& [key, field] : fields()) out += key + " = " + field.get(config) + "\n";
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> k;
  for (const auto& [key, field] : fields()) k.push_back(key);
  return k;
}

}  // namespace ogs
