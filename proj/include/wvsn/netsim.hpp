#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <vector>

#include "wvsn/routing.hpp"
#include "wvsn/scenario.hpp"
#include "wvsn/types.hpp"

namespace wvsn::sim {

enum class EventKind : uint8_t {
  BeaconTx,
  FrameCapture,
  PacketEmit,
  TxStart,
  TxEnd,
  RxDeliver,
  AckDeliver,
  Timer
};

struct SimEvent {
  double time = 0;
  uint64_t seq = 0;  // FIFO tiebreak at equal times
  EventKind kind = EventKind::Timer;
  uint8_t flag = 0;
  uint32_t node = 0;
  uint32_t peer = 0;
  uint32_t copy = 0;
  double aux = 0;
};

/// One emitted packet (a fragment of an encoded frame). Copies in flight
/// reference these by index.
struct PacketMeta {
  double origin_time_s = 0;  // capture time; deadlines count from here
  uint32_t content_index = 0;
  uint32_t total_bits = 0;  // payload plus 16-byte logical header
  uint32_t source = 0;
  uint32_t frame_seq = 0;
  uint16_t packet_id = 0;
  TrafficClass cls = TrafficClass::Bkgd;
  Mode mode = Mode::Standby;
};

/// Terminal state of one transmitted/queued packet copy. Every created copy
/// ends in exactly one of these.
enum class CopyOutcome : uint8_t {
  DeliveredFirst = 0,
  DeliveredLate,
  Duplicate,
  Relayed,  // handed to >=1 next hop at an intermediate node
  LostLink,
  LostDeadRx,
  ExpiredInQueue,
  ExpiredAtHop,  // arrived past its deadline
  DropVoid,
  DropFallback,
  QueueFull,
  FlushDeath,
  FlushEnd,
  kCount
};
constexpr int kCopyOutcomeCount = static_cast<int>(CopyOutcome::kCount);
const char* to_string(CopyOutcome o);

struct ClassModeStats {
  uint64_t generated = 0;  // packetized at capture
  uint64_t emitted = 0;    // handed to the routing layer
  uint64_t delivered_within = 0;
  uint64_t delivered_late = 0;
  double delay_sum_s = 0;  // over all first copies at the sink
  double delay_sq_sum_s = 0;

  uint64_t delivered_total() const { return delivered_within + delivered_late; }
  double pdr(uint64_t denom) const {
    return denom == 0 ? 0.0 : static_cast<double>(delivered_within) / static_cast<double>(denom);
  }
};

struct Delivery {
  uint32_t meta = 0;
  double time_s = 0;
};

struct MetricsLog {
  double sim_end_s = 0;
  bool hit_safeguard = false;

  std::vector<double> death_time_s;  // per node; +inf while alive
  double first_death_s = std::numeric_limits<double>::infinity();
  double half_death_s = std::numeric_limits<double>::infinity();

  // [mode][class]
  std::array<std::array<ClassModeStats, kClassCount>, kModeCount> traffic{};

  uint64_t copies_created = 0;
  std::array<uint64_t, kCopyOutcomeCount> copy_outcomes{};
  std::array<uint64_t, 4> decision_drops{};  // indexed by routing::DropReason

  std::array<uint64_t, kClassCount> backlog_overflow{};
  std::array<uint64_t, kClassCount> backlog_expired{};
  std::array<uint64_t, kClassCount> backlog_flushed{};
  uint64_t backlog_remaining = 0;
  uint64_t beacons_sent = 0;

  double energy_initial_total_j = 0;  // over battery-powered nodes
  double energy_debited_j = 0;
  double energy_residual_j = 0;
  std::vector<double> node_debits_j;
  std::vector<double> node_residual_j;
  std::vector<double> energy_spent_series_j;  // cumulative debits at 1 s ticks

  std::vector<Delivery> sink_deliveries;
  std::vector<PacketMeta> metas;

  uint64_t outcomes_total() const;
  /// created == sum of terminal outcomes (exact).
  bool copy_conservation_ok() const;
  /// per-node initial == debits + residual within rel_tol, battery nodes only.
  bool energy_conservation_ok(double rel_tol = 1e-9) const;
  ClassModeStats& stats(Mode m, TrafficClass c) {
    return traffic[static_cast<int>(m)][static_cast<int>(c)];
  }
  const ClassModeStats& stats(Mode m, TrafficClass c) const {
    return traffic[static_cast<int>(m)][static_cast<int>(c)];
  }
};

/// Supplies per-frame packetization (class and bit length per packet) to the
/// engine; backed by the codec in the experiment harness.
struct PacketDesc {
  TrafficClass cls = TrafficClass::Bkgd;
  uint32_t payload_bits = 0;  // header excluded
};
struct FramePacketization {
  std::vector<PacketDesc> packets;
};
class FrameProvider {
 public:
  virtual ~FrameProvider() = default;
  virtual const FramePacketization& packetization(int content_index, Mode mode) = 0;
};

/// Optional structured trace consumer (decision log and event rows).
class TraceSink {
 public:
  virtual ~TraceSink() = default;
  virtual void on_event(double t, uint32_t node, const char* event, const char* cls,
                        const char* detail) = 0;
  virtual void on_decision(double t, uint32_t node, const PacketMeta& packet,
                           const routing::ForwardingDecision& decision) = 0;
};

/// Runs one realization under one protocol. Deterministic given
/// (config.rng_seed, deployment.realization_index, params.variant is not part
/// of the stream seeds, so paired runs share deployment and link draws start
/// equal).
MetricsLog run(const ScenarioConfig& config, const Deployment& deployment,
               const Timeline& tl, const routing::ProtocolParams& params,
               FrameProvider& frames, TraceSink* trace = nullptr);

/// Distance-dependent loss: p_max*(d/range)^2 inside range, 1 beyond.
double link_loss_probability(double distance_m, double range_m, double p_max);

}  // namespace wvsn::sim
