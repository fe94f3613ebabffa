#include "wvsn/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "wvsn/rng.hpp"

namespace wvsn {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void parse_fail(const std::string& origin, int line, const std::string& msg) {
  std::ostringstream os;
  os << origin << ":" << line << ": " << msg;
  throw ConfigError(os.str());
}

double to_double(const std::string& v, const std::string& origin, int line) {
  size_t pos = 0;
  double d = 0;
  try {
    d = std::stod(v, &pos);
  } catch (const std::exception&) {
    parse_fail(origin, line, "expected a number, got '" + v + "'");
  }
  if (pos != v.size()) parse_fail(origin, line, "trailing characters after number '" + v + "'");
  return d;
}

int to_int(const std::string& v, const std::string& origin, int line) {
  const double d = to_double(v, origin, line);
  if (d != std::floor(d)) parse_fail(origin, line, "expected an integer, got '" + v + "'");
  return static_cast<int>(d);
}

}  // namespace

Protocol protocol_from_string(const std::string& s) {
  if (s == "mmspeed") return Protocol::Mmspeed;
  if (s == "qbsa" || s == "qbsa-mmspeed") return Protocol::Qbsa;
  if (s == "eqbsa" || s == "eqbsa-mmspeed") return Protocol::Eqbsa;
  throw ConfigError("unknown protocol '" + s + "' (expected mmspeed|qbsa|eqbsa)");
}

void ScenarioConfig::validate() const {
  auto fail = [](const std::string& inv) { throw ConfigError("invalid scenario: " + inv); };
  if (node_count < 2) fail("node_count must be >= 2 (sink plus at least one node)");
  if (!(video_node_fraction > 0.0 && video_node_fraction <= 1.0))
    fail("0 < video_node_fraction <= 1");
  if (!(terrain_width_m > 0 && terrain_height_m > 0)) fail("terrain dimensions must be positive");
  if (!(radio_range_m > 0)) fail("radio_range > 0");
  if (!(bandwidth_bps > 0)) fail("bandwidth > 0");
  if (queue_capacity < 1) fail("queue_capacity >= 1");
  if (!(initial_energy_j > 0)) fail("initial_energy > 0");
  if (tx_current_a < 0 || rx_current_a < 0) fail("currents must be nonnegative");
  if (supply_voltage_v <= 0) fail("supply_voltage > 0");
  if (warmup_duration_s < 0) fail("warmup_duration >= 0");
  if (!(beacon_period_s > 0)) fail("beacon_period > 0");
  if (realization_count < 1) fail("realizations >= 1");
  if (event_time_s < warmup_duration_s) fail("event_time must be >= warmup_duration (XD)");
  if (alpha < 0 || beta < 0) fail("alpha >= 0 and beta >= 0");
  if (alpha + beta > 1.0 + 1e-12)
    fail("alpha + beta <= 1 (the residual-energy weight 1-alpha-beta must be nonnegative)");
  if (protocol == Protocol::Qbsa && beta != 0.0)
    fail("QBSA scores with alpha only; beta must be 0 for protocol=qbsa");
  if (qbsa_alpha < 0 || qbsa_alpha > 1) fail("qbsa_alpha in [0,1]");
  if (eqbsa_alpha < 0 || eqbsa_beta < 0 || eqbsa_alpha + eqbsa_beta > 1.0 + 1e-12)
    fail("eqbsa weights must be nonnegative with alpha + beta <= 1");
  if (source_count < -1) fail("source_count must be -1 (all video nodes) or >= 0");
  if (rush_source_count < 0) fail("rush_source_count >= 0");
  if (!(link_loss_max >= 0 && link_loss_max <= 1)) fail("link_loss_max in [0,1]");
  if (nominal_packet_bits <= 0) fail("nominal_packet_bits > 0");
  for (const auto& c : classes) {
    if (!(c.desired_reliability >= 0 && c.desired_reliability <= 1))
      fail("desired reliability DR in [0,1]");
    if (!(c.deadline_s > 0)) fail("class deadline > 0");
    if (!(c.pr_standby_pps > 0 && c.pr_rush_pps > 0)) fail("packet rates must be positive");
  }
  if (codec.width % 16 != 0 || codec.height % 16 != 0)
    fail("codec width/height must be multiples of 16");
  if (codec.width <= 0 || codec.height <= 0) fail("codec dimensions must be positive");
  if (codec.fp < 1 || codec.fp > 16) fail("1 <= fp <= 16");
  if (!(codec.roi_ratio >= 0 && codec.roi_ratio <= 1)) fail("0 <= roi_ratio <= 1");
  if (!(codec.fr_standby_fps > 0 && codec.fr_rush_fps > 0)) fail("frame rates must be positive");
  if (codec.packets_per_frame < 1) fail("packets_per_frame >= 1");
  if (codec.packets_per_frame > codec.mb_count())
    fail("packets_per_frame cannot exceed the macroblock count");
  if (sink_x_m >= 0 && sink_x_m > terrain_width_m) fail("sink_x inside terrain");
  if (sink_y_m >= 0 && sink_y_m > terrain_height_m) fail("sink_y inside terrain");
}

ScenarioConfig parse_scenario(const std::string& text, const std::string& origin) {
  ScenarioConfig cfg;
  bool alpha_set = false, beta_set = false;
  std::vector<std::string> seen;

  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = raw;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) parse_fail(origin, lineno, "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty()) parse_fail(origin, lineno, "empty key");
    if (val.empty()) parse_fail(origin, lineno, "empty value for key '" + key + "'");
    if (std::find(seen.begin(), seen.end(), key) != seen.end())
      parse_fail(origin, lineno, "duplicate key '" + key + "'");
    seen.push_back(key);

    auto num = [&] { return to_double(val, origin, lineno); };
    auto integer = [&] { return to_int(val, origin, lineno); };

    if (key == "node_count") cfg.node_count = integer();
    else if (key == "video_node_fraction") cfg.video_node_fraction = num();
    else if (key == "terrain_width") cfg.terrain_width_m = num();
    else if (key == "terrain_height") cfg.terrain_height_m = num();
    else if (key == "radio_range") cfg.radio_range_m = num();
    else if (key == "bandwidth") cfg.bandwidth_bps = num();
    else if (key == "queue_capacity") cfg.queue_capacity = integer();
    else if (key == "initial_energy") cfg.initial_energy_j = num();
    else if (key == "tx_current") cfg.tx_current_a = num();
    else if (key == "rx_current") cfg.rx_current_a = num();
    else if (key == "supply_voltage") cfg.supply_voltage_v = num();
    else if (key == "warmup_duration") cfg.warmup_duration_s = num();
    else if (key == "beacon_period") cfg.beacon_period_s = num();
    else if (key == "realizations") cfg.realization_count = integer();
    else if (key == "seed") cfg.rng_seed = static_cast<uint64_t>(integer());
    else if (key == "event_time") cfg.event_time_s = num();
    else if (key == "protocol") {
      try {
        cfg.protocol = protocol_from_string(val);
      } catch (const ConfigError& e) {
        parse_fail(origin, lineno, e.what());
      }
    } else if (key == "alpha") { cfg.alpha = num(); alpha_set = true; }
    else if (key == "beta") { cfg.beta = num(); beta_set = true; }
    else if (key == "qbsa_alpha") cfg.qbsa_alpha = num();
    else if (key == "eqbsa_alpha") cfg.eqbsa_alpha = num();
    else if (key == "eqbsa_beta") cfg.eqbsa_beta = num();
    else if (key == "source_count") cfg.source_count = integer();
    else if (key == "rush_source_count") cfg.rush_source_count = integer();
    else if (key == "video_duration") cfg.video_duration_s = num();
    else if (key == "psnr_window") cfg.psnr_window_s = num();
    else if (key == "link_loss_max") cfg.link_loss_max = num();
    else if (key == "sink_x") cfg.sink_x_m = num();
    else if (key == "sink_y") cfg.sink_y_m = num();
    else if (key == "max_sim_time") cfg.max_sim_time_s = num();
    else if (key == "nominal_packet_bits") cfg.nominal_packet_bits = num();
    else if (key == "dr_roi") cfg.classes[0].desired_reliability = num();
    else if (key == "dr_bkgd") cfg.classes[1].desired_reliability = num();
    else if (key == "deadline_roi") cfg.classes[0].deadline_s = num();
    else if (key == "deadline_bkgd") cfg.classes[1].deadline_s = num();
    else if (key == "pr_standby") {
      cfg.classes[0].pr_standby_pps = cfg.classes[1].pr_standby_pps = num();
    } else if (key == "pr_rush") {
      cfg.classes[0].pr_rush_pps = cfg.classes[1].pr_rush_pps = num();
    } else if (key == "width") cfg.codec.width = integer();
    else if (key == "height") cfg.codec.height = integer();
    else if (key == "qp") cfg.codec.qp = integer();
    else if (key == "fp") cfg.codec.fp = integer();
    else if (key == "roi_ratio") cfg.codec.roi_ratio = num();
    else if (key == "fr_standby") cfg.codec.fr_standby_fps = num();
    else if (key == "fr_rush") cfg.codec.fr_rush_fps = num();
    else if (key == "packets_per_frame") cfg.codec.packets_per_frame = integer();
    else if (key == "texture_amplitude") cfg.codec.texture_amplitude = num();
    else parse_fail(origin, lineno, "unknown key '" + key + "'");
  }

  // The generic alpha/beta keys configure the variant named by `protocol`.
  if (alpha_set || beta_set) {
    switch (cfg.protocol) {
      case Protocol::Qbsa:
        cfg.qbsa_alpha = cfg.alpha;
        break;
      case Protocol::Eqbsa:
        cfg.eqbsa_alpha = cfg.alpha;
        cfg.eqbsa_beta = cfg.beta;
        break;
      case Protocol::Mmspeed:
        break;  // accepted, unused
    }
  }

  cfg.validate();
  return cfg;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), path);
}

Deployment deploy(const ScenarioConfig& config, int realization_index) {
  config.validate();
  if (realization_index < 0 || realization_index >= config.realization_count)
    throw ConfigError("realization index out of range");

  Rng rng(stream_seed(config.rng_seed, static_cast<uint64_t>(realization_index),
                      RngStream::Deployment));
  Deployment d;
  d.realization_index = realization_index;
  d.sink_id = 0;

  const int n = config.node_count;
  d.positions.resize(n);
  d.positions[0] = config.sink_position();
  for (int i = 1; i < n; ++i) {
    d.positions[i] = {rng.uniform(0.0, config.terrain_width_m),
                      rng.uniform(0.0, config.terrain_height_m)};
  }

  const int video_count =
      std::min<int>(n - 1, static_cast<int>(std::lround(config.video_node_fraction * n)));
  std::vector<uint32_t> candidates(n - 1);
  for (int i = 1; i < n; ++i) candidates[i - 1] = static_cast<uint32_t>(i);
  d.video_node_ids = rng.sample(candidates, video_count);
  std::sort(d.video_node_ids.begin(), d.video_node_ids.end());

  const int sources = config.source_count < 0
                          ? video_count
                          : std::min<int>(config.source_count, video_count);
  d.source_ids = rng.sample(d.video_node_ids, sources);
  std::sort(d.source_ids.begin(), d.source_ids.end());

  const int rush = std::min<int>(config.rush_source_count, sources);
  d.rush_source_ids = rng.sample(d.source_ids, rush);
  std::sort(d.rush_source_ids.begin(), d.rush_source_ids.end());
  return d;
}

Timeline timeline(const ScenarioConfig& config) {
  config.validate();
  Timeline tl;
  tl.beacon_period_s = config.beacon_period_s;
  tl.standby_start_s = config.warmup_duration_s;
  tl.event_time_s = config.event_time_s;
  tl.fr_standby_fps = config.codec.fr_standby_fps;
  tl.fr_rush_fps = config.codec.fr_rush_fps;
  const bool bounded = config.video_duration_s > 0;
  tl.video_end_s = bounded ? config.warmup_duration_s + config.video_duration_s
                           : std::numeric_limits<double>::infinity();
  if (config.max_sim_time_s > 0) {
    tl.max_sim_time_s = config.max_sim_time_s;
  } else if (bounded) {
    tl.max_sim_time_s = config.warmup_duration_s + 10.0 * config.video_duration_s;
  } else {
    tl.max_sim_time_s = 36000.0;
  }
  return tl;
}

std::vector<double> capture_times(const Timeline& tl, bool detecting_node, double until) {
  std::vector<double> out;
  const double end = std::min(until, tl.video_end_s);
  double t = tl.standby_start_s;
  int k = 0;
  // Standby cadence up to the event (detectors) or the horizon (others).
  while (t < end && (!detecting_node || t < tl.event_time_s)) {
    out.push_back(t);
    ++k;
    t = tl.standby_start_s + k / tl.fr_standby_fps;
  }
  if (detecting_node) {
    k = 0;
    t = tl.event_time_s;
    while (t < end) {
      out.push_back(t);
      ++k;
      t = tl.event_time_s + k / tl.fr_rush_fps;
    }
  }
  return out;
}

}  // namespace wvsn
