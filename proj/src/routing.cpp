#include "wvsn/routing.hpp"

#include <algorithm>
#include <cmath>

namespace wvsn::routing {

void NeighborTable::update(const DelayBeacon& beacon, double now, double beacon_period_s,
                           double delay_prior_s) {
  evict_stale(now, beacon_period_s);
  auto it = std::lower_bound(entries_.begin(), entries_.end(), beacon.sender,
                             [](const NeighborEntry& e, uint32_t id) { return e.id < id; });
  if (it == entries_.end() || it->id != beacon.sender) {
    NeighborEntry e;
    e.id = beacon.sender;
    e.delay_est_s = delay_prior_s;
    e.loss_est = kColdStartLoss;
    it = entries_.insert(it, e);
  }
  it->position = beacon.position;
  it->abs_packets = beacon.abs_packets;
  it->residual_energy_j = beacon.residual_energy_j;
  it->last_beacon_s = beacon.timestamp_s;
  (void)now;
}

void NeighborTable::evict_stale(double now, double beacon_period_s) {
  const double horizon = kStalePeriods * beacon_period_s;
  std::erase_if(entries_, [&](const NeighborEntry& e) {
    return now - e.last_beacon_s > horizon;
  });
}

void NeighborTable::on_ack(uint32_t neighbor, bool success, double delay_sample_s) {
  NeighborEntry* e = find(neighbor);
  if (e == nullptr) return;  // evicted since the transmission started
  e->loss_est = (1.0 - kEwmaWeight) * e->loss_est + kEwmaWeight * (success ? 0.0 : 1.0);
  if (success)
    e->delay_est_s = (1.0 - kEwmaWeight) * e->delay_est_s + kEwmaWeight * delay_sample_s;
}

const NeighborEntry* NeighborTable::find(uint32_t id) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), id,
                             [](const NeighborEntry& e, uint32_t i) { return e.id < i; });
  return it != entries_.end() && it->id == id ? &*it : nullptr;
}

NeighborEntry* NeighborTable::find(uint32_t id) {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), id,
                             [](const NeighborEntry& e, uint32_t i) { return e.id < i; });
  return it != entries_.end() && it->id == id ? &*it : nullptr;
}

ProtocolParams ProtocolParams::from_config(const ScenarioConfig& config, Protocol variant) {
  ProtocolParams p;
  p.variant = variant;
  switch (variant) {
    case Protocol::Mmspeed:
      p.alpha = 1.0;  // unused; score is RP alone
      p.beta = 0.0;
      break;
    case Protocol::Qbsa:
      p.alpha = config.qbsa_alpha;
      p.beta = 0.0;
      break;
    case Protocol::Eqbsa:
      p.alpha = config.eqbsa_alpha;
      p.beta = config.eqbsa_beta;
      break;
  }
  for (int c = 0; c < kClassCount; ++c) {
    p.desired_reliability[c] = config.classes[c].desired_reliability;
    p.deadline_s[c] = config.classes[c].deadline_s;
  }
  p.queue_capacity = config.queue_capacity;
  p.initial_energy_j = config.initial_energy_j;
  return p;
}

double progression_speed(const Vec2& i_pos, const Vec2& j_pos, const Vec2& dest,
                         double delay_ij_s) {
  if (!(delay_ij_s > 0)) throw SimError("progression_speed: delay must be positive");
  return (dist(i_pos, dest) - dist(j_pos, dest)) / delay_ij_s;
}

double required_speed(const Vec2& i_pos, const Vec2& dest, double deadline_remaining_s) {
  if (!(deadline_remaining_s > 0))
    throw SimError("required_speed: packet already expired");
  return dist(i_pos, dest) / deadline_remaining_s;
}

double reaching_probability(const Vec2& i_pos, const Vec2& j_pos, const Vec2& dest,
                            double loss_ij) {
  const double hop = dist(i_pos, j_pos);
  if (!(hop > 0)) throw SimError("reaching_probability: zero hop distance");
  const double hops_left = std::floor(dist(j_pos, dest) / hop);
  return (1.0 - loss_ij) * std::pow(1.0 - loss_ij, hops_left);
}

double accumulate_trp(double trp_old, double rp) {
  return 1.0 - (1.0 - trp_old) * (1.0 - rp);
}

double node_score(double rp, double abs_norm, double re_norm, double alpha, double beta) {
  return alpha * rp + beta * abs_norm + (1.0 - alpha - beta) * re_norm;
}

std::vector<const NeighborEntry*> forwarding_set(const Vec2& self_pos, const Vec2& dest,
                                                 const NeighborTable& table) {
  std::vector<const NeighborEntry*> fs;
  const double self_dist = dist(self_pos, dest);
  for (const auto& e : table.entries())
    if (self_dist - dist(e.position, dest) > 0.0) fs.push_back(&e);
  return fs;
}

const char* to_string(DropReason r) {
  switch (r) {
    case DropReason::None: return "-";
    case DropReason::VoidRegion: return "void-region";
    case DropReason::Expired: return "expired";
    case DropReason::Fallback: return "fallback-drop";
  }
  return "?";
}

namespace {

double variant_score(const ProtocolParams& params, double rp, double abs_norm,
                     double re_norm) {
  switch (params.variant) {
    case Protocol::Mmspeed:
      return rp;
    case Protocol::Qbsa:
      return params.alpha * rp + (1.0 - params.alpha) * abs_norm;
    case Protocol::Eqbsa:
      return node_score(rp, abs_norm, re_norm, params.alpha, params.beta);
  }
  return rp;
}

// Ties broken by higher RP, then lower node id.
bool score_order(const Candidate& a, const Candidate& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.rp != b.rp) return a.rp > b.rp;
  return a.entry->id < b.entry->id;
}

}  // namespace

void probabilistic_fallback(const std::vector<Candidate>& fs_low, double required_speed_mps,
                            Rng& drop_rng, ForwardingDecision& decision) {
  decision.used_fallback = true;
  if (fs_low.empty()) {
    if (decision.forwarders.empty()) {
      decision.drop = true;
      decision.reason = DropReason::VoidRegion;
    }
    return;
  }
  const Candidate* best = &fs_low.front();
  for (const auto& c : fs_low) {
    if (c.ps > best->ps || (c.ps == best->ps && (c.rp > best->rp ||
        (c.rp == best->rp && c.entry->id < best->entry->id))))
      best = &c;
  }
  const double p_drop =
      std::clamp(1.0 - best->ps / required_speed_mps, 0.0, 1.0);
  if (drop_rng.bernoulli(p_drop)) {
    if (decision.forwarders.empty()) {
      decision.drop = true;
      decision.reason = DropReason::Fallback;
    }
    return;
  }
  decision.forwarders.push_back(best->entry->id);
  decision.trp = accumulate_trp(decision.trp, best->rp);
}

void last_chance(const std::vector<Candidate>& fs_low, double desired_reliability,
                 ForwardingDecision& decision) {
  decision.used_last_chance = true;
  if (fs_low.empty()) {
    if (decision.forwarders.empty()) {
      decision.drop = true;
      decision.reason = DropReason::VoidRegion;
    }
    return;
  }
  double ps_sum = 0;
  for (const auto& c : fs_low) ps_sum += c.ps;
  const double ps_avg = ps_sum / static_cast<double>(fs_low.size());

  std::vector<Candidate> chance, rescue;
  for (const auto& c : fs_low)
    (c.ps >= ps_avg ? chance : rescue).push_back(c);

  std::sort(chance.begin(), chance.end(), score_order);
  for (const auto& c : chance) {
    if (decision.trp >= desired_reliability) break;
    decision.forwarders.push_back(c.entry->id);
    decision.trp = accumulate_trp(decision.trp, c.rp);
  }
  if (decision.trp < desired_reliability && !rescue.empty()) {
    decision.used_rescue = true;
    std::sort(rescue.begin(), rescue.end(), [](const Candidate& a, const Candidate& b) {
      if (a.rp != b.rp) return a.rp > b.rp;
      return a.entry->id < b.entry->id;
    });
    for (const auto& c : rescue) {
      if (decision.trp >= desired_reliability) break;
      decision.forwarders.push_back(c.entry->id);
      decision.trp = accumulate_trp(decision.trp, c.rp);
    }
  }
}

ForwardingDecision select_forwarders(const PacketView& packet, const Vec2& self_pos,
                                     const Vec2& sink_pos, const NeighborTable& table,
                                     const ProtocolParams& params, double now,
                                     Rng& drop_rng) {
  ForwardingDecision decision;
  decision.cls = packet.cls;
  const double remaining = params.deadline(packet.cls) - (now - packet.origin_time_s);
  decision.deadline_remaining_s = remaining;
  if (remaining <= 0) {
    decision.drop = true;
    decision.reason = DropReason::Expired;
    return decision;
  }

  const auto fs = forwarding_set(self_pos, sink_pos, table);
  decision.fs_size = static_cast<int>(fs.size());
  if (fs.empty()) {
    decision.drop = true;
    decision.reason = DropReason::VoidRegion;
    return decision;
  }

  const double req_speed = required_speed(self_pos, sink_pos, remaining);
  const int cls = static_cast<int>(packet.cls);

  std::vector<Candidate> fs_high, fs_low;
  for (const NeighborEntry* e : fs) {
    Candidate c;
    c.entry = e;
    c.ps = progression_speed(self_pos, e->position, sink_pos, e->delay_est_s);
    c.rp = reaching_probability(self_pos, e->position, sink_pos, e->loss_est);
    const double abs_norm =
        std::clamp(e->abs_packets[cls] / params.queue_capacity, 0.0, 1.0);
    const double re_norm =
        std::clamp(e->residual_energy_j / params.initial_energy_j, 0.0, 1.0);
    c.score = variant_score(params, c.rp, abs_norm, re_norm);
    (c.ps >= req_speed ? fs_high : fs_low).push_back(c);
  }
  decision.fs_high_size = static_cast<int>(fs_high.size());
  decision.fs_low_size = static_cast<int>(fs_low.size());

  const double dr = params.dr(packet.cls);
  std::sort(fs_high.begin(), fs_high.end(), score_order);
  for (const auto& c : fs_high) {
    if (decision.trp >= dr) break;
    decision.forwarders.push_back(c.entry->id);
    decision.trp = accumulate_trp(decision.trp, c.rp);
  }
  if (decision.trp >= dr) return decision;

  if (params.variant == Protocol::Eqbsa) {
    last_chance(fs_low, dr, decision);
  } else {
    probabilistic_fallback(fs_low, req_speed, drop_rng, decision);
  }
  return decision;
}

}  // namespace wvsn::routing
