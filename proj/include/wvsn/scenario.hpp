#pragma once

#include <array>
#include <string>
#include <vector>

#include "wvsn/types.hpp"

namespace wvsn {

/// Per-class QoS targets and application packet rates.
struct ClassSpec {
  TrafficClass cls = TrafficClass::Roi;
  double desired_reliability = 0.7;  // DR, probability the TRP must reach
  double deadline_s = 1.0;           // end-to-end deadline from capture
  double pr_standby_pps = 5.0;       // emission pacing, Standby mode
  double pr_rush_pps = 10.0;         // emission pacing, Rush mode
};

struct CodecConfig {
  int width = 176;  // QCIF luma
  int height = 144;
  int qp = 32;
  int fp = 6;              // coefficients kept per 4x4 block (Rush BKGD)
  double roi_ratio = 0.5;  // fraction of macroblocks labeled ROI
  double fr_standby_fps = 1.0;
  double fr_rush_fps = 3.0;
  int packets_per_frame = 33;
  double texture_amplitude = 40.0;  // synthetic source contrast knob

  int mb_cols() const { return width / 16; }
  int mb_rows() const { return height / 16; }
  int mb_count() const { return mb_cols() * mb_rows(); }
};

struct ScenarioConfig {
  int node_count = 100;
  double video_node_fraction = 0.5;
  double terrain_width_m = 200.0;
  double terrain_height_m = 200.0;
  double radio_range_m = 40.0;
  double bandwidth_bps = 250000.0;
  int queue_capacity = 100;  // packets, per traffic class
  double initial_energy_j = 10.0;
  double tx_current_a = 0.02818;
  double rx_current_a = 0.0395;
  double supply_voltage_v = 3.0;
  double warmup_duration_s = 50.0;  // XD: control traffic only
  double beacon_period_s = 1.0;
  int realization_count = 10;
  uint64_t rng_seed = 1;
  double event_time_s = 60.0;
  Protocol protocol = Protocol::Eqbsa;
  double alpha = 0.3;  // weights of the selected protocol (see below)
  double beta = 0.2;

  // Per-variant score weights used when running several protocols against one
  // scenario. The plain alpha/beta keys bind to `protocol`.
  double qbsa_alpha = 0.7;
  double eqbsa_alpha = 0.3;
  double eqbsa_beta = 0.2;

  int source_count = -1;      // -1: every video node sources traffic
  int rush_source_count = 1;  // event-detecting nodes per realization
  double video_duration_s = 900.0;  // capture window length; <=0: unbounded
  double psnr_window_s = 40.0;      // Rush video scored at the sink
  double link_loss_max = 0.3;       // p(d) = p_max * (d/range)^2
  double sink_x_m = -1.0;           // <0: terrain center
  double sink_y_m = -1.0;
  double max_sim_time_s = 0.0;       // 0: derived safeguard
  double nominal_packet_bits = 1500;  // cold-start delay prior

  std::array<ClassSpec, kClassCount> classes = {
      ClassSpec{TrafficClass::Roi, 0.7, 1.0, 5.0, 10.0},
      ClassSpec{TrafficClass::Bkgd, 0.3, 2.0, 5.0, 10.0}};
  CodecConfig codec;

  const ClassSpec& spec(TrafficClass c) const { return classes[static_cast<int>(c)]; }
  Vec2 sink_position() const {
    return {sink_x_m >= 0 ? sink_x_m : terrain_width_m / 2,
            sink_y_m >= 0 ? sink_y_m : terrain_height_m / 2};
  }
  /// Throws ConfigError naming the first violated invariant.
  void validate() const;
};

/// Parses the key=value scenario grammar ('#' comments, blank lines ignored).
/// `origin` is used in diagnostics ("file:line: ...").
ScenarioConfig parse_scenario(const std::string& text, const std::string& origin);
ScenarioConfig load_config(const std::string& path);

/// One realization of the network layout. Node 0 is the sink; positions are
/// identical across protocol variants for a given (seed, realization).
struct Deployment {
  int realization_index = 0;
  std::vector<Vec2> positions;
  uint32_t sink_id = 0;
  std::vector<uint32_t> video_node_ids;  // sorted
  std::vector<uint32_t> source_ids;      // sorted, subset of video nodes
  std::vector<uint32_t> rush_source_ids; // sorted, subset of sources
};

Deployment deploy(const ScenarioConfig& config, int realization_index);

/// Application-level schedule shared by every node.
struct Timeline {
  double beacon_period_s = 1.0;
  double standby_start_s = 50.0;  // XD
  double event_time_s = 60.0;
  double video_end_s = 950.0;  // infinity when capture is unbounded
  double fr_standby_fps = 1.0;
  double fr_rush_fps = 3.0;
  double max_sim_time_s = 9500.0;
};

Timeline timeline(const ScenarioConfig& config);

/// Capture instants of one source up to `until` (exclusive); detectors switch
/// to the Rush cadence at event_time.
std::vector<double> capture_times(const Timeline& tl, bool detecting_node, double until);

}  // namespace wvsn
