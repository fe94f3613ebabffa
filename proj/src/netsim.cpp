#include "wvsn/netsim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <queue>

#include "wvsn/rng.hpp"

namespace wvsn::sim {

const char* to_string(CopyOutcome o) {
  switch (o) {
    case CopyOutcome::DeliveredFirst: return "delivered";
    case CopyOutcome::DeliveredLate: return "delivered-late";
    case CopyOutcome::Duplicate: return "duplicate-discarded";
    case CopyOutcome::Relayed: return "relayed";
    case CopyOutcome::LostLink: return "link-loss";
    case CopyOutcome::LostDeadRx: return "dead-receiver";
    case CopyOutcome::ExpiredInQueue: return "expired";
    case CopyOutcome::ExpiredAtHop: return "expired-at-hop";
    case CopyOutcome::DropVoid: return "void-region";
    case CopyOutcome::DropFallback: return "fallback-drop";
    case CopyOutcome::QueueFull: return "queue-full";
    case CopyOutcome::FlushDeath: return "death-flush";
    case CopyOutcome::FlushEnd: return "end-flush";
    case CopyOutcome::kCount: break;
  }
  return "?";
}

uint64_t MetricsLog::outcomes_total() const {
  uint64_t total = 0;
  for (uint64_t c : copy_outcomes) total += c;
  return total;
}

bool MetricsLog::copy_conservation_ok() const { return outcomes_total() == copies_created; }

bool MetricsLog::energy_conservation_ok(double rel_tol) const {
  for (size_t i = 1; i < node_debits_j.size(); ++i) {  // node 0 is the mains-powered sink
    const double initial = energy_initial_total_j / static_cast<double>(node_debits_j.size() - 1);
    const double sum = node_debits_j[i] + node_residual_j[i];
    if (std::abs(sum - initial) > rel_tol * initial) return false;
  }
  return true;
}

double link_loss_probability(double distance_m, double range_m, double p_max) {
  if (distance_m > range_m) return 1.0;
  const double r = distance_m / range_m;
  return p_max * r * r;
}

namespace {

struct EventOrder {
  bool operator()(const SimEvent& a, const SimEvent& b) const {
    if (a.time != b.time) return a.time > b.time;
    return a.seq > b.seq;
  }
};

struct BacklogPkt {
  double origin_time_s;
  uint32_t content_index;
  uint32_t frame_seq;
  uint16_t packet_id;
  TrafficClass cls;
  Mode mode;
};

struct CopyRec {
  uint32_t meta = 0;
  uint32_t next_hop = 0;
  double enqueue_time_s = 0;
};

struct Node {
  uint32_t id = 0;
  Vec2 pos{0, 0};
  double residual_j = 0;
  bool alive = true;
  bool energy_exempt = false;  // the mains-powered sink
  bool is_source = false;
  bool is_rush_source = false;
  Mode mode = Mode::Standby;

  std::array<std::deque<CopyRec>, kClassCount> txq;
  std::array<std::deque<BacklogPkt>, kClassCount> backlog;
  routing::NeighborTable table;
  std::vector<uint32_t> static_neighbors;  // in-range ids, sorted

  bool tx_busy = false;
  bool kick_scheduled = false;
  CopyRec in_service;
  uint32_t next_frame_seq = 0;
  uint32_t capture_epoch = 0;
  double capture_anchor_s = 0;
  uint32_t capture_count = 0;
};

class Engine {
 public:
  Engine(const ScenarioConfig& config, const Deployment& dep, const Timeline& tl,
         const routing::ProtocolParams& params, FrameProvider& frames, TraceSink* trace)
      : cfg_(config),
        dep_(dep),
        tl_(tl),
        params_(params),
        frames_(frames),
        trace_(trace),
        links_(stream_seed(config.rng_seed, dep.realization_index, RngStream::Links)),
        drops_(stream_seed(config.rng_seed, dep.realization_index, RngStream::Drops)) {
    delay_prior_s_ = config.nominal_packet_bits / config.bandwidth_bps;
    beacon_service_s_ = 256.0 / config.bandwidth_bps;
    sink_pos_ = dep.positions[dep.sink_id];
    words_per_meta_ = (config.node_count + 63) / 64;
    setup_nodes();
  }

  MetricsLog run() {
    schedule_initial();
    while (!events_.empty()) {
      SimEvent ev = events_.top();
      events_.pop();
      if (ev.time > tl_.max_sim_time_s) {
        log_.hit_safeguard = true;
        now_ = tl_.max_sim_time_s;
        break;
      }
      if (ev.time < now_ - 1e-9) throw SimError("event queue inversion");
      while (log_.energy_spent_series_j.size() < static_cast<size_t>(ev.time))
        log_.energy_spent_series_j.push_back(log_.energy_debited_j);
      now_ = ev.time;
      if (should_terminate()) break;
      dispatch(ev);
    }
    finalize();
    return std::move(log_);
  }

 private:
  // --- setup ---------------------------------------------------------------

  void setup_nodes() {
    const int n = cfg_.node_count;
    nodes_.resize(n);
    for (int i = 0; i < n; ++i) {
      Node& nd = nodes_[i];
      nd.id = static_cast<uint32_t>(i);
      nd.pos = dep_.positions[i];
      nd.residual_j = cfg_.initial_energy_j;
      nd.energy_exempt = nd.id == dep_.sink_id;
    }
    for (uint32_t s : dep_.source_ids) nodes_[s].is_source = true;
    for (uint32_t s : dep_.rush_source_ids) nodes_[s].is_rush_source = true;
    alive_sources_ = static_cast<int>(dep_.source_ids.size());
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j && dist(nodes_[i].pos, nodes_[j].pos) <= cfg_.radio_range_m)
          nodes_[i].static_neighbors.push_back(static_cast<uint32_t>(j));
    log_.death_time_s.assign(n, std::numeric_limits<double>::infinity());
    log_.node_debits_j.assign(n, 0.0);
    log_.node_residual_j.assign(n, 0.0);
    log_.energy_initial_total_j = cfg_.initial_energy_j * (n - 1);
  }

  void schedule_initial() {
    for (const Node& nd : nodes_)
      schedule({0.0, 0, EventKind::BeaconTx, 0, nd.id, 0, 0, 0.0});
    for (uint32_t s : dep_.source_ids) {
      Node& nd = nodes_[s];
      nd.capture_anchor_s = tl_.standby_start_s;
      nd.capture_count = 0;
      if (tl_.standby_start_s < tl_.video_end_s)
        schedule({tl_.standby_start_s, 0, EventKind::FrameCapture, 0, s, 0,
                  nd.capture_epoch, 0.0});
      schedule({tl_.standby_start_s, 0, EventKind::PacketEmit,
                static_cast<uint8_t>(TrafficClass::Bkgd), s, 0, 0, 0.0});
    }
    for (uint32_t s : dep_.rush_source_ids)
      if (tl_.event_time_s < tl_.video_end_s)
        schedule({tl_.event_time_s, 0, EventKind::Timer, 0, s, 0, 0, 0.0});
  }

  // --- plumbing ------------------------------------------------------------

  void schedule(SimEvent ev) {
    if (ev.time < now_ - 1e-9) throw SimError("attempted to schedule an event in the past");
    ev.seq = next_seq_++;
    events_.push(ev);
  }

  double pace_interval(const Node& nd, TrafficClass cls) const {
    const ClassSpec& spec = cfg_.spec(cls);
    return 1.0 / (nd.mode == Mode::Rush ? spec.pr_rush_pps : spec.pr_standby_pps);
  }

  double capture_interval(const Node& nd) const {
    return 1.0 / (nd.mode == Mode::Rush ? tl_.fr_rush_fps : tl_.fr_standby_fps);
  }

  double deadline(TrafficClass cls) const { return params_.deadline(cls); }

  double tx_energy(double service_s) const {
    return cfg_.supply_voltage_v * cfg_.tx_current_a * service_s;
  }
  double rx_energy(double service_s) const {
    return cfg_.supply_voltage_v * cfg_.rx_current_a * service_s;
  }

  /// Debits and handles the death crossing. Returns true while alive.
  bool debit(Node& nd, double joules) {
    if (!nd.alive) return false;
    if (nd.energy_exempt) return true;
    const double amount = std::min(joules, nd.residual_j);
    nd.residual_j -= amount;
    log_.energy_debited_j += amount;
    log_.node_debits_j[nd.id] += amount;
    if (nd.residual_j <= 0.0) {
      nd.residual_j = 0.0;
      die(nd);
      return false;
    }
    return true;
  }

  void die(Node& nd) {
    nd.alive = false;
    log_.death_time_s[nd.id] = now_;
    if (nd.is_source) --alive_sources_;
    for (auto& q : nd.txq) {
      for (size_t k = 0; k < q.size(); ++k) outcome(CopyOutcome::FlushDeath);
      q.clear();
    }
    if (nd.tx_busy) {
      outcome(CopyOutcome::FlushDeath);
      nd.tx_busy = false;
    }
    for (int c = 0; c < kClassCount; ++c) {
      log_.backlog_flushed[c] += nd.backlog[c].size();
      backlog_total_ -= nd.backlog[c].size();
      nd.backlog[c].clear();
    }
    if (trace_) trace_->on_event(now_, nd.id, "death", "-", "-");
  }

  void outcome(CopyOutcome o) {
    ++log_.copy_outcomes[static_cast<int>(o)];
    --inflight_;
  }

  bool visited(uint32_t meta, uint32_t node) const {
    return (visited_[meta * words_per_meta_ + node / 64] >> (node % 64)) & 1u;
  }
  void mark_visited(uint32_t meta, uint32_t node) {
    visited_[meta * words_per_meta_ + node / 64] |= uint64_t{1} << (node % 64);
  }

  uint32_t new_meta(const BacklogPkt& bk, uint32_t source) {
    const auto& pk = frames_.packetization(static_cast<int>(bk.content_index), bk.mode);
    PacketMeta m;
    m.origin_time_s = bk.origin_time_s;
    m.content_index = bk.content_index;
    m.total_bits =
        pk.packets[bk.packet_id].payload_bits + static_cast<uint32_t>(kHeaderBits);
    m.source = source;
    m.frame_seq = bk.frame_seq;
    m.packet_id = bk.packet_id;
    m.cls = bk.cls;
    m.mode = bk.mode;
    log_.metas.push_back(m);
    visited_.resize(visited_.size() + words_per_meta_, 0);
    const uint32_t idx = static_cast<uint32_t>(log_.metas.size() - 1);
    mark_visited(idx, source);
    return idx;
  }

  void enqueue_copy(Node& nd, uint32_t next_hop, uint32_t meta) {
    ++log_.copies_created;
    ++inflight_;
    auto& q = nd.txq[static_cast<int>(log_.metas[meta].cls)];
    if (q.size() >= static_cast<size_t>(cfg_.queue_capacity)) {
      outcome(CopyOutcome::QueueFull);
      if (trace_)
        trace_->on_event(now_, nd.id, "drop", to_string(log_.metas[meta].cls), "queue-full");
      return;
    }
    q.push_back({meta, next_hop, now_});
    kick(nd);
  }

  void kick(Node& nd) {
    if (!nd.alive || nd.tx_busy || nd.kick_scheduled) return;
    nd.kick_scheduled = true;
    schedule({now_, 0, EventKind::TxStart, 0, nd.id, 0, 0, 0.0});
  }

  /// Applies the forwarding decision at `nd` for an emitted/arrived packet.
  routing::ForwardingDecision forward(Node& nd, uint32_t meta) {
    nd.table.evict_stale(now_, cfg_.beacon_period_s);
    const PacketMeta& m = log_.metas[meta];
    const routing::PacketView view{m.cls, m.origin_time_s};
    auto decision = routing::select_forwarders(view, nd.pos, sink_pos_, nd.table, params_,
                                               now_, drops_);
    if (trace_) trace_->on_decision(now_, nd.id, m, decision);
    if (decision.drop) {
      ++log_.decision_drops[static_cast<int>(decision.reason)];
      return decision;
    }
    for (uint32_t f : decision.forwarders) enqueue_copy(nd, f, meta);
    return decision;
  }

  bool capture_window_open() const { return now_ < tl_.video_end_s; }

  bool should_terminate() const {
    if (now_ < tl_.standby_start_s) return false;
    if (inflight_ != 0 || backlog_total_ != 0) return false;
    return !capture_window_open() || alive_sources_ == 0;
  }

  // --- event handlers --------------------------------------------------------

  void dispatch(const SimEvent& ev) {
    switch (ev.kind) {
      case EventKind::BeaconTx: return on_beacon(ev);
      case EventKind::FrameCapture: return on_capture(ev);
      case EventKind::PacketEmit: return on_emit(ev);
      case EventKind::TxStart: return on_tx_start(ev);
      case EventKind::TxEnd: return on_tx_end(ev);
      case EventKind::RxDeliver: return on_rx(ev);
      case EventKind::AckDeliver: return on_ack(ev);
      case EventKind::Timer: return on_rush_switch(ev);
    }
  }

  void on_beacon(const SimEvent& ev) {
    Node& nd = nodes_[ev.node];
    if (!nd.alive) return;  // dead nodes stop beaconing
    routing::DelayBeacon b;
    b.sender = nd.id;
    b.position = nd.pos;
    for (int c = 0; c < kClassCount; ++c)
      b.abs_packets[c] =
          static_cast<double>(cfg_.queue_capacity) - static_cast<double>(nd.txq[c].size());
    b.residual_energy_j = nd.energy_exempt ? cfg_.initial_energy_j : nd.residual_j;
    b.timestamp_s = now_;

    if (!debit(nd, tx_energy(beacon_service_s_))) return;
    ++log_.beacons_sent;
    for (uint32_t r : nd.static_neighbors) {
      Node& rx = nodes_[r];
      if (!rx.alive) continue;
      const double p = link_loss_probability(dist(nd.pos, rx.pos), cfg_.radio_range_m,
                                             cfg_.link_loss_max);
      if (links_.bernoulli(p)) continue;
      if (!debit(rx, rx_energy(beacon_service_s_))) continue;
      if (rx.id == dep_.sink_id) continue;  // the sink never forwards
      rx.table.update(b, now_, cfg_.beacon_period_s, delay_prior_s_);
    }
    schedule({now_ + cfg_.beacon_period_s, 0, EventKind::BeaconTx, 0, nd.id, 0, 0, 0.0});
  }

  void on_capture(const SimEvent& ev) {
    Node& nd = nodes_[ev.node];
    if (!nd.alive || ev.copy != nd.capture_epoch || !capture_window_open()) return;
    const Mode mode = nd.mode;
    const int content =
        static_cast<int>(std::llround((now_ - tl_.standby_start_s) * tl_.fr_rush_fps));
    const auto& pk = frames_.packetization(content, mode);
    const uint32_t frame_seq = nd.next_frame_seq++;
    for (size_t pid = 0; pid < pk.packets.size(); ++pid) {
      const TrafficClass cls = pk.packets[pid].cls;
      const int c = static_cast<int>(cls);
      ++log_.stats(mode, cls).generated;
      auto& bl = nd.backlog[c];
      if (bl.size() >= static_cast<size_t>(cfg_.queue_capacity)) {
        bl.pop_front();  // drop-oldest; the freshest content stays sendable
        ++log_.backlog_overflow[c];
        --backlog_total_;
      }
      bl.push_back({now_, static_cast<uint32_t>(content), frame_seq,
                    static_cast<uint16_t>(pid), cls, mode});
      ++backlog_total_;
    }
    ++nd.capture_count;
    const double next = nd.capture_anchor_s + nd.capture_count / (mode == Mode::Rush
                                                                      ? tl_.fr_rush_fps
                                                                      : tl_.fr_standby_fps);
    if (next < tl_.video_end_s)
      schedule({next, 0, EventKind::FrameCapture, 0, nd.id, 0, nd.capture_epoch, 0.0});
  }

  void on_emit(const SimEvent& ev) {
    Node& nd = nodes_[ev.node];
    if (!nd.alive) return;
    const TrafficClass cls = static_cast<TrafficClass>(ev.flag);
    const int c = static_cast<int>(cls);
    auto& bl = nd.backlog[c];
    // Oldest packets expire in place; emission serves the freshest content.
    while (!bl.empty() && now_ - bl.front().origin_time_s >= deadline(cls)) {
      bl.pop_front();
      ++log_.backlog_expired[c];
      --backlog_total_;
    }
    if (!bl.empty()) {
      const BacklogPkt bk = bl.back();
      bl.pop_back();
      --backlog_total_;
      const uint32_t meta = new_meta(bk, nd.id);
      ++log_.stats(bk.mode, bk.cls).emitted;
      if (trace_) trace_->on_event(now_, nd.id, "emit", to_string(bk.cls), "-");
      forward(nd, meta);
    }
    if (capture_window_open() || !bl.empty())
      schedule({now_ + pace_interval(nd, cls), 0, EventKind::PacketEmit, ev.flag, nd.id, 0,
                0, 0.0});
  }

  void on_rush_switch(const SimEvent& ev) {
    Node& nd = nodes_[ev.node];
    if (!nd.alive || !nd.is_rush_source) return;
    nd.mode = Mode::Rush;
    ++nd.capture_epoch;
    nd.capture_anchor_s = now_;
    nd.capture_count = 0;
    if (capture_window_open())
      schedule({now_, 0, EventKind::FrameCapture, 0, nd.id, 0, nd.capture_epoch, 0.0});
    schedule({now_, 0, EventKind::PacketEmit, static_cast<uint8_t>(TrafficClass::Roi),
              nd.id, 0, 0, 0.0});
    if (trace_) trace_->on_event(now_, nd.id, "rush-switch", "-", "-");
  }

  void on_tx_start(const SimEvent& ev) {
    Node& nd = nodes_[ev.node];
    nd.kick_scheduled = false;
    if (!nd.alive || nd.tx_busy) return;
    CopyRec copy;
    bool found = false;
    for (int c = 0; c < kClassCount && !found; ++c) {  // strict ROI priority
      auto& q = nd.txq[c];
      while (!q.empty()) {
        const PacketMeta& m = log_.metas[q.front().meta];
        if (now_ - m.origin_time_s >= deadline(m.cls)) {
          outcome(CopyOutcome::ExpiredInQueue);
          if (trace_) trace_->on_event(now_, nd.id, "drop", to_string(m.cls), "expired");
          q.pop_front();
          continue;
        }
        copy = q.front();
        q.pop_front();
        found = true;
        break;
      }
    }
    if (!found) return;
    nd.in_service = copy;
    nd.tx_busy = true;
    const double service = log_.metas[copy.meta].total_bits / cfg_.bandwidth_bps;
    if (!debit(nd, tx_energy(service))) return;  // died mid-start; die() flushed it
    schedule({now_ + service, 0, EventKind::TxEnd, 0, nd.id, copy.next_hop, copy.meta,
              copy.enqueue_time_s});
  }

  void on_tx_end(const SimEvent& ev) {
    Node& nd = nodes_[ev.node];
    if (!nd.alive || !nd.tx_busy || nd.in_service.meta != ev.copy ||
        nd.in_service.next_hop != ev.peer)
      return;  // canceled by death
    nd.tx_busy = false;
    Node& rx = nodes_[ev.peer];
    const PacketMeta& m = log_.metas[ev.copy];
    const double service = m.total_bits / cfg_.bandwidth_bps;
    bool delivered = false;
    if (rx.alive) {
      const double p = link_loss_probability(dist(nd.pos, rx.pos), cfg_.radio_range_m,
                                             cfg_.link_loss_max);
      if (!links_.bernoulli(p)) {
        if (debit(rx, rx_energy(service))) {
          delivered = true;
        } else {
          outcome(CopyOutcome::LostDeadRx);
        }
      } else {
        outcome(CopyOutcome::LostLink);
      }
    } else {
      outcome(CopyOutcome::LostDeadRx);
    }
    // Ack: instantaneous, lossless, zero-energy control channel.
    schedule({now_, 0, EventKind::AckDeliver, static_cast<uint8_t>(delivered), nd.id,
              ev.peer, ev.copy, now_ - ev.aux});
    if (delivered)
      schedule({now_, 0, EventKind::RxDeliver, 0, ev.peer, nd.id, ev.copy, 0.0});
    kick(nd);
  }

  void on_rx(const SimEvent& ev) {
    Node& nd = nodes_[ev.node];
    const PacketMeta& m = log_.metas[ev.copy];
    if (!nd.alive) {  // killed at the same instant by another reception
      outcome(CopyOutcome::LostDeadRx);
      return;
    }
    if (visited(ev.copy, nd.id)) {
      outcome(CopyOutcome::Duplicate);
      if (trace_) trace_->on_event(now_, nd.id, "duplicate", to_string(m.cls), "-");
      return;
    }
    mark_visited(ev.copy, nd.id);
    if (nd.id == dep_.sink_id) {
      const double delay = now_ - m.origin_time_s;
      auto& st = log_.stats(m.mode, m.cls);
      const bool within = delay <= deadline(m.cls);
      if (within)
        ++st.delivered_within;
      else
        ++st.delivered_late;
      st.delay_sum_s += delay;
      st.delay_sq_sum_s += delay * delay;
      log_.sink_deliveries.push_back({ev.copy, now_});
      outcome(within ? CopyOutcome::DeliveredFirst : CopyOutcome::DeliveredLate);
      if (trace_) trace_->on_event(now_, nd.id, "deliver", to_string(m.cls), "-");
      return;
    }
    const auto decision = forward(nd, ev.copy);
    if (!decision.drop) {
      outcome(CopyOutcome::Relayed);
    } else if (decision.reason == routing::DropReason::Expired) {
      outcome(CopyOutcome::ExpiredAtHop);
    } else if (decision.reason == routing::DropReason::Fallback) {
      outcome(CopyOutcome::DropFallback);
    } else {
      outcome(CopyOutcome::DropVoid);
    }
  }

  void on_ack(const SimEvent& ev) {
    Node& nd = nodes_[ev.node];
    if (!nd.alive) return;
    nd.table.on_ack(ev.peer, ev.flag != 0, ev.aux);
  }

  // --- teardown --------------------------------------------------------------

  void finalize() {
    log_.sim_end_s = now_;
    for (Node& nd : nodes_) {
      for (auto& q : nd.txq)
        for (size_t k = 0; k < q.size(); ++k) outcome(CopyOutcome::FlushEnd);
      if (nd.tx_busy) outcome(CopyOutcome::FlushEnd);
      for (int c = 0; c < kClassCount; ++c) log_.backlog_remaining += nd.backlog[c].size();
      log_.node_residual_j[nd.id] = nd.residual_j;
      if (!nd.energy_exempt) log_.energy_residual_j += nd.residual_j;
    }
    std::vector<double> deaths;
    for (double d : log_.death_time_s)
      if (std::isfinite(d)) deaths.push_back(d);
    std::sort(deaths.begin(), deaths.end());
    if (!deaths.empty()) log_.first_death_s = deaths.front();
    const size_t half = static_cast<size_t>((cfg_.node_count + 1) / 2);
    if (deaths.size() >= half) log_.half_death_s = deaths[half - 1];
  }

  static constexpr int kHeaderBits = 128;

  const ScenarioConfig& cfg_;
  const Deployment& dep_;
  const Timeline& tl_;
  const routing::ProtocolParams& params_;
  FrameProvider& frames_;
  TraceSink* trace_;
  Rng links_, drops_;

  std::priority_queue<SimEvent, std::vector<SimEvent>, EventOrder> events_;
  std::vector<Node> nodes_;
  std::vector<uint64_t> visited_;
  size_t words_per_meta_ = 2;
  Vec2 sink_pos_{0, 0};
  double now_ = 0;
  uint64_t next_seq_ = 0;
  int64_t inflight_ = 0;
  int64_t backlog_total_ = 0;
  int alive_sources_ = 0;
  double delay_prior_s_ = 0.006;
  double beacon_service_s_ = 0.001;
  MetricsLog log_;
};

}  // namespace

MetricsLog run(const ScenarioConfig& config, const Deployment& deployment, const Timeline& tl,
               const routing::ProtocolParams& params, FrameProvider& frames,
               TraceSink* trace) {
  Engine engine(config, deployment, tl, params, frames, trace);
  return engine.run();
}

}  // namespace wvsn::sim
