#pragma once

#include <array>
#include <vector>

#include "wvsn/rng.hpp"
#include "wvsn/scenario.hpp"
#include "wvsn/types.hpp"

namespace wvsn::routing {

constexpr double kEwmaWeight = 0.3;      // weight of the newest sample
constexpr double kColdStartLoss = 0.05;  // optimistic but nonzero prior
constexpr double kStalePeriods = 3.0;    // beacon silences before eviction

/// Periodic control message: position, per-class available buffer space and
/// residual energy of the sender.
struct DelayBeacon {
  uint32_t sender = 0;
  Vec2 position{0, 0};
  std::array<double, kClassCount> abs_packets{0, 0};
  double residual_energy_j = 0;
  double timestamp_s = 0;
};

struct NeighborEntry {
  uint32_t id = 0;
  Vec2 position{0, 0};
  double delay_est_s = 0.01;  // sender-side EWMA of enqueue-to-ack times
  double loss_est = kColdStartLoss;  // e_ij, EWMA of ack failures
  std::array<double, kClassCount> abs_packets{0, 0};
  double residual_energy_j = 0;
  double last_beacon_s = 0;
};

/// Per-node cache of one-hop neighbors, updated from beacons; link statistics
/// survive beacon refreshes but are lost on eviction.
class NeighborTable {
 public:
  /// Upserts from a beacon and evicts stale entries. New entries start from
  /// cold-start link priors (delay_prior_s, kColdStartLoss).
  void update(const DelayBeacon& beacon, double now, double beacon_period_s,
              double delay_prior_s);
  void evict_stale(double now, double beacon_period_s);
  /// EWMA update from an (instantaneous, reliable) ack; failures carry no
  /// delay sample.
  void on_ack(uint32_t neighbor, bool success, double delay_sample_s);

  const NeighborEntry* find(uint32_t id) const;
  NeighborEntry* find(uint32_t id);
  const std::vector<NeighborEntry>& entries() const { return entries_; }
  size_t size() const { return entries_.size(); }

 private:
  std::vector<NeighborEntry> entries_;  // sorted by id
};

/// Variant parameters plus the normalizers that make Eq. 5 inputs fall in
/// [0,1] (ABS by queue capacity, RE by initial energy).
struct ProtocolParams {
  Protocol variant = Protocol::Eqbsa;
  double alpha = 0.3;
  double beta = 0.2;
  std::array<double, kClassCount> desired_reliability{0.7, 0.3};
  std::array<double, kClassCount> deadline_s{1.0, 2.0};
  double queue_capacity = 100;
  double initial_energy_j = 10;

  static ProtocolParams from_config(const ScenarioConfig& config, Protocol variant);
  double dr(TrafficClass c) const { return desired_reliability[static_cast<int>(c)]; }
  double deadline(TrafficClass c) const { return deadline_s[static_cast<int>(c)]; }
};

// --- the protocol equations --------------------------------------------------

/// Geographic progress toward the destination per unit of estimated delay.
double progression_speed(const Vec2& i_pos, const Vec2& j_pos, const Vec2& dest,
                         double delay_ij_s);

/// Speed needed to cover the remaining distance within the remaining deadline.
double required_speed(const Vec2& i_pos, const Vec2& dest, double deadline_remaining_s);

/// (1-e)·(1-e)^floor(dist(j,D)/dist(i,j)): per-hop success times the estimated
/// remaining-hop successes. The bracket is read as floor (hop count).
double reaching_probability(const Vec2& i_pos, const Vec2& j_pos, const Vec2& dest,
                            double loss_ij);

/// TRP_new = 1 - (1 - TRP_old)(1 - RP).
double accumulate_trp(double trp_old, double rp);

/// score = alpha*RP + beta*ABS + (1-alpha-beta)*RE, all inputs in [0,1].
double node_score(double rp, double abs_norm, double re_norm, double alpha, double beta);

/// Nodes strictly closer to the destination than self (Eq. 1).
std::vector<const NeighborEntry*> forwarding_set(const Vec2& self_pos, const Vec2& dest,
                                                 const NeighborTable& table);

enum class DropReason : uint8_t { None = 0, VoidRegion, Expired, Fallback };
const char* to_string(DropReason r);

struct ForwardingDecision {
  std::vector<uint32_t> forwarders;  // in selection order
  TrafficClass cls = TrafficClass::Bkgd;
  double deadline_remaining_s = 0;
  double trp = 0;  // 1 - prod(1 - RP_k) over chosen k
  bool drop = false;
  DropReason reason = DropReason::None;
  int fs_size = 0, fs_high_size = 0, fs_low_size = 0;
  bool used_fallback = false, used_last_chance = false, used_rescue = false;
};

/// Scored candidate used by the fallback procedures (exposed for testing).
struct Candidate {
  const NeighborEntry* entry = nullptr;
  double ps = 0;     // progression speed
  double rp = 0;     // reaching probability
  double score = 0;  // variant-specific
};

/// MMSPEED/QBSA: drop with p = clamp(1 - best_PS/required_speed, 0, 1),
/// otherwise forward one copy to the best fs_low node by PS.
void probabilistic_fallback(const std::vector<Candidate>& fs_low, double required_speed_mps,
                            Rng& drop_rng, ForwardingDecision& decision);

/// EQBSA Last Chance Procedure: fs_low is split at its mean PS; the fast half
/// is scored (Eq. 5) and TRP-accumulated, then rescue nodes are appended by
/// descending RP until the class DR is met. Never drops when fs_low is
/// nonempty.
void last_chance(const std::vector<Candidate>& fs_low, double desired_reliability,
                 ForwardingDecision& decision);

struct PacketView {
  TrafficClass cls = TrafficClass::Bkgd;
  double origin_time_s = 0;
};

/// Full per-hop decision: Eq. 1 set construction, speed split, variant scoring
/// and greedy TRP accumulation, then the variant's insufficient-TRP procedure.
ForwardingDecision select_forwarders(const PacketView& packet, const Vec2& self_pos,
                                     const Vec2& sink_pos, const NeighborTable& table,
                                     const ProtocolParams& params, double now,
                                     Rng& drop_rng);

}  // namespace wvsn::routing
