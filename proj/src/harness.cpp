#include "wvsn/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "wvsn/routing.hpp"
#include "wvsn/svg.hpp"

namespace wvsn::harness {

namespace {

std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);  // round-trips doubles exactly
  return buf;
}

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double sample_std(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  if (!std::isfinite(m)) return 0.0;
  double s = 0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

uint64_t mix64(uint64_t h, uint64_t v) {
  h ^= splitmix64(v + 0x9e3779b97f4a7c15ULL);
  return splitmix64(h);
}

}  // namespace

CachingFrameProvider::CachingFrameProvider(uint64_t content_seed, const CodecConfig& config)
    : synth_(content_seed, config.width, config.height, config.texture_amplitude),
      config_(config) {}

const sim::FramePacketization& CachingFrameProvider::packetization(int content_index,
                                                                   Mode mode) {
  const uint64_t key =
      (static_cast<uint64_t>(content_index) << 1) | static_cast<uint64_t>(mode);
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;

  const codec::Frame frame = synth_.frame(content_index);
  const codec::EncodedFrame enc = codec::encode_frame(frame, mode, config_);
  sim::FramePacketization pk;
  pk.packets.reserve(enc.packets.size());
  uint64_t d = mix64(0x77, key);
  for (const auto& p : enc.packets) {
    pk.packets.push_back({p.cls, static_cast<uint32_t>(p.payload_bits)});
    d = mix64(d, (static_cast<uint64_t>(p.payload_bits) << 1) |
                     static_cast<uint64_t>(p.cls));
  }
  digest_ ^= d;  // order-independent across protocols
  return cache_.emplace(key, std::move(pk)).first->second;
}

PsnrSeries reconstruct_and_score(const sim::MetricsLog& log, const ScenarioConfig& config,
                                 const Deployment& deployment) {
  PsnrSeries out;
  uint32_t displayed = 0;
  if (!deployment.rush_source_ids.empty()) {
    displayed = deployment.rush_source_ids.front();
  } else if (!deployment.source_ids.empty()) {
    displayed = deployment.source_ids.front();
  } else {
    return out;
  }
  const bool detector = !deployment.rush_source_ids.empty();
  const Timeline tl = timeline(config);
  const double score_until =
      std::min(tl.video_end_s, (detector ? tl.event_time_s : tl.standby_start_s) +
                                   config.psnr_window_s);
  const std::vector<double> schedule = capture_times(tl, detector, score_until);
  if (schedule.empty()) return out;

  // Playout rule: keep first copies delivered within capture time + deadline.
  std::unordered_map<uint32_t, std::vector<uint16_t>> arrived;  // content -> packet ids
  for (const auto& d : log.sink_deliveries) {
    const sim::PacketMeta& m = log.metas[d.meta];
    if (m.source != displayed) continue;
    if (d.time_s > m.origin_time_s + config.spec(m.cls).deadline_s) continue;
    arrived[m.content_index].push_back(m.packet_id);
  }

  codec::SynthSource synth(
      stream_seed(config.rng_seed, deployment.realization_index, RngStream::Content),
      config.codec.width, config.codec.height, config.codec.texture_amplitude);

  codec::Luma prev;
  bool have_prev = false;
  double rush_sum = 0, all_sum = 0;
  int rush_n = 0;
  for (double t : schedule) {
    const int content =
        static_cast<int>(std::llround((t - tl.standby_start_s) * tl.fr_rush_fps));
    const Mode mode =
        detector && t >= tl.event_time_s - 1e-9 ? Mode::Rush : Mode::Standby;
    const codec::Frame original = synth.frame(content);
    const codec::EncodedFrame enc = codec::encode_frame(original, mode, config.codec);
    std::vector<bool> received(enc.packets.size(), false);
    if (auto it = arrived.find(static_cast<uint32_t>(content)); it != arrived.end())
      for (uint16_t pid : it->second)
        if (pid < received.size()) received[pid] = true;
    codec::Luma recon =
        codec::decode_frame(enc, received, have_prev ? &prev : nullptr);
    const double p = codec::psnr(original.samples, recon);
    out.content_index.push_back(content);
    out.capture_time_s.push_back(t);
    out.psnr_db.push_back(p);
    out.mode.push_back(mode);
    all_sum += p;
    if (mode == Mode::Rush) {
      rush_sum += p;
      ++rush_n;
    }
    prev = std::move(recon);
    have_prev = true;
  }
  out.all_mean_db = all_sum / static_cast<double>(schedule.size());
  out.rush_mean_db = rush_n > 0 ? rush_sum / rush_n : out.all_mean_db;
  return out;
}

std::vector<std::pair<std::string, double>> RunResult::metrics() const {
  std::vector<std::pair<std::string, double>> m;
  m.emplace_back("first_death_s", log.first_death_s);
  m.emplace_back("half_death_s", log.half_death_s);
  m.emplace_back("sim_end_s", log.sim_end_s);
  m.emplace_back("energy_debited_j", log.energy_debited_j);
  for (int mo = 0; mo < kModeCount; ++mo) {
    for (int c = 0; c < kClassCount; ++c) {
      const Mode mode = static_cast<Mode>(mo);
      const TrafficClass cls = static_cast<TrafficClass>(c);
      if (mode == Mode::Standby && cls == TrafficClass::Roi) continue;  // no such traffic
      const auto& st = log.stats(mode, cls);
      const std::string tag = std::string(to_string(mode)) + "_" + to_string(cls);
      const double delivered = static_cast<double>(st.delivered_total());
      m.emplace_back("delay_" + tag + "_s",
                     delivered > 0 ? st.delay_sum_s / delivered
                                   : std::numeric_limits<double>::quiet_NaN());
      m.emplace_back("within_" + tag,
                     delivered > 0 ? static_cast<double>(st.delivered_within) / delivered
                                   : std::numeric_limits<double>::quiet_NaN());
      m.emplace_back("pdr_" + tag, st.pdr(st.emitted));
      m.emplace_back("emitted_" + tag, static_cast<double>(st.emitted));
    }
  }
  m.emplace_back("psnr_rush_db", psnr.rush_mean_db);
  m.emplace_back("psnr_all_db", psnr.all_mean_db);
  m.emplace_back("copies_created", static_cast<double>(log.copies_created));
  for (int o = 0; o < sim::kCopyOutcomeCount; ++o) {
    std::string name = std::string("copies_") + to_string(static_cast<sim::CopyOutcome>(o));
    for (char& c : name)
      if (c == '-') c = '_';
    m.emplace_back(name, static_cast<double>(log.copy_outcomes[o]));
  }
  return m;
}

namespace {

RunResult run_one(const ScenarioConfig& config, const Deployment& dep, const Timeline& tl,
                  Protocol proto, CachingFrameProvider& provider, sim::TraceSink* trace) {
  RunResult rr;
  rr.protocol = proto;
  rr.realization = dep.realization_index;
  const auto params = routing::ProtocolParams::from_config(config, proto);
  rr.log = sim::run(config, dep, tl, params, provider, trace);
  rr.psnr = reconstruct_and_score(rr.log, config, dep);
  rr.frame_digest = provider.digest();
  return rr;
}

}  // namespace

ExperimentResult run_experiment(const ScenarioConfig& config,
                                const std::vector<Protocol>& protocols, int realizations,
                                int jobs, sim::TraceSink* trace) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentResult result;
  result.config = config;
  result.protocols = protocols;
  result.realizations = realizations;
  result.runs.resize(static_cast<size_t>(realizations) * protocols.size());

  const Timeline tl = timeline(config);
  auto work = [&](int r) {
    const Deployment dep = deploy(config, r);
    CachingFrameProvider provider(
        stream_seed(config.rng_seed, static_cast<uint64_t>(r), RngStream::Content),
        config.codec);
    for (size_t p = 0; p < protocols.size(); ++p) {
      result.runs[static_cast<size_t>(r) * protocols.size() + p] =
          run_one(config, dep, tl, protocols[p], provider, trace);
    }
  };

  if (jobs <= 1 || trace != nullptr || realizations == 1) {
    for (int r = 0; r < realizations; ++r) work(r);
  } else {
    std::atomic<int> next{0};
    const int workers = std::min(jobs, realizations);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (int r = next.fetch_add(1); r < realizations; r = next.fetch_add(1)) work(r);
      });
    }
    for (auto& th : pool) th.join();
  }

  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

double ProtocolSummary::mean(const std::string& name) const {
  auto it = metrics.find(name);
  return it == metrics.end() ? std::numeric_limits<double>::quiet_NaN() : it->second.first;
}

std::vector<ProtocolSummary> summarize(const ExperimentResult& result) {
  std::vector<ProtocolSummary> out;
  const int node_count = result.config.node_count;
  for (size_t p = 0; p < result.protocols.size(); ++p) {
    ProtocolSummary s;
    s.protocol = result.protocols[p];
    std::map<std::string, std::vector<double>> samples;
    std::vector<const RunResult*> runs;
    for (int r = 0; r < result.realizations; ++r)
      runs.push_back(&result.runs[static_cast<size_t>(r) * result.protocols.size() + p]);

    for (const RunResult* rr : runs)
      for (const auto& [name, value] : rr->metrics())
        if (!std::isnan(value)) samples[name].push_back(value);
    for (const auto& [name, xs] : samples) s.metrics[name] = {mean_of(xs), sample_std(xs)};

    // Alive-node curve at 1 s resolution, padded with each run's final count.
    double horizon = 0;
    for (const RunResult* rr : runs) horizon = std::max(horizon, rr->log.sim_end_s);
    const int steps = static_cast<int>(std::ceil(horizon)) + 1;
    s.alive_time_s.resize(steps);
    s.alive_mean.assign(steps, 0.0);
    for (int t = 0; t < steps; ++t) {
      s.alive_time_s[t] = t;
      double acc = 0;
      for (const RunResult* rr : runs) {
        int dead = 0;
        for (double d : rr->log.death_time_s)
          if (d <= t) ++dead;
        acc += node_count - dead;
      }
      s.alive_mean[t] = acc / static_cast<double>(runs.size());
    }

    // Per-frame PSNR across realizations (frames are aligned by schedule).
    size_t frames = 0;
    for (const RunResult* rr : runs) frames = std::max(frames, rr->psnr.psnr_db.size());
    for (size_t f = 0; f < frames; ++f) {
      std::vector<double> xs;
      for (const RunResult* rr : runs)
        if (f < rr->psnr.psnr_db.size()) xs.push_back(rr->psnr.psnr_db[f]);
      if (xs.empty()) continue;
      const RunResult* ref = runs.front();
      s.frame_content.push_back(f < ref->psnr.content_index.size()
                                    ? ref->psnr.content_index[f]
                                    : static_cast<int>(f));
      s.frame_time_s.push_back(f < ref->psnr.capture_time_s.size()
                                   ? ref->psnr.capture_time_s[f]
                                   : 0.0);
      s.frame_psnr_mean.push_back(mean_of(xs));
      s.frame_psnr_std.push_back(sample_std(xs));
    }
    out.push_back(std::move(s));
  }
  return out;
}

void emit_outputs(const ExperimentResult& result, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const auto summaries = summarize(result);
  auto open = [&](const std::string& name) {
    std::ofstream f(out_dir + "/" + name, std::ios::binary);
    if (!f) throw ConfigError("cannot write output file " + out_dir + "/" + name);
    return f;
  };

  {  // alive.csv: one column per protocol
    auto f = open("alive.csv");
    f << "time_s";
    for (const auto& s : summaries) f << "," << to_string(s.protocol);
    f << "\n";
    size_t steps = 0;
    for (const auto& s : summaries) steps = std::max(steps, s.alive_mean.size());
    for (size_t t = 0; t < steps; ++t) {
      f << t;
      for (const auto& s : summaries) {
        const double v = t < s.alive_mean.size() ? s.alive_mean[t]
                                                 : s.alive_mean.back();
        f << "," << num(v);
      }
      f << "\n";
    }
  }

  const std::vector<std::pair<Mode, TrafficClass>> cells = {
      {Mode::Standby, TrafficClass::Bkgd},
      {Mode::Rush, TrafficClass::Roi},
      {Mode::Rush, TrafficClass::Bkgd}};

  {  // delay.csv
    auto f = open("delay.csv");
    f << "protocol,mode,class,mean_delay_s,std_delay_s,within_deadline_fraction\n";
    for (const auto& s : summaries) {
      for (auto [mode, cls] : cells) {
        const std::string tag = std::string(to_string(mode)) + "_" + to_string(cls);
        auto it = s.metrics.find("delay_" + tag + "_s");
        const double mean = it == s.metrics.end() ? NAN : it->second.first;
        const double std_ = it == s.metrics.end() ? NAN : it->second.second;
        auto wit = s.metrics.find("within_" + tag);
        f << to_string(s.protocol) << "," << to_string(mode) << "," << to_string(cls) << ","
          << num(mean) << "," << num(std_) << ","
          << num(wit == s.metrics.end() ? NAN : wit->second.first) << "\n";
      }
    }
  }

  {  // pdr.csv
    auto f = open("pdr.csv");
    f << "protocol,mode,class,mean,std\n";
    for (const auto& s : summaries) {
      for (auto [mode, cls] : cells) {
        const std::string tag = std::string(to_string(mode)) + "_" + to_string(cls);
        auto it = s.metrics.find("pdr_" + tag);
        f << to_string(s.protocol) << "," << to_string(mode) << "," << to_string(cls) << ","
          << num(it == s.metrics.end() ? NAN : it->second.first) << ","
          << num(it == s.metrics.end() ? NAN : it->second.second) << "\n";
      }
    }
  }

  {  // psnr.csv: per-frame series plus rush/sequence means
    auto f = open("psnr.csv");
    f << "protocol,scope,frame_index,capture_time_s,psnr_mean_db,psnr_std_db\n";
    for (const auto& s : summaries) {
      for (size_t i = 0; i < s.frame_psnr_mean.size(); ++i)
        f << to_string(s.protocol) << ",frame," << s.frame_content[i] << ","
          << num(s.frame_time_s[i]) << "," << num(s.frame_psnr_mean[i]) << ","
          << num(s.frame_psnr_std[i]) << "\n";
      auto rush = s.metrics.find("psnr_rush_db");
      auto all = s.metrics.find("psnr_all_db");
      if (rush != s.metrics.end())
        f << to_string(s.protocol) << ",rush_mean,,," << num(rush->second.first) << ","
          << num(rush->second.second) << "\n";
      if (all != s.metrics.end())
        f << to_string(s.protocol) << ",sequence_mean,,," << num(all->second.first) << ","
          << num(all->second.second) << "\n";
    }
  }

  {  // summary.csv
    auto f = open("summary.csv");
    f << "protocol,metric,mean,std\n";
    for (const auto& s : summaries)
      for (const auto& [name, ms] : s.metrics)
        f << to_string(s.protocol) << "," << name << "," << num(ms.first) << ","
          << num(ms.second) << "\n";
  }

  {  // per_realization.csv
    auto f = open("per_realization.csv");
    f << "protocol,realization,metric,value\n";
    for (const auto& rr : result.runs)
      for (const auto& [name, value] : rr.metrics())
        f << to_string(rr.protocol) << "," << rr.realization << "," << name << ","
          << num(value) << "\n";
  }

  {  // charts
    std::vector<svg::Series> alive;
    for (const auto& s : summaries)
      alive.push_back({to_string(s.protocol), s.alive_time_s, s.alive_mean});
    open("alive.svg") << svg::line_chart("Alive nodes at runtime", "time (s)",
                                         "alive nodes", alive);

    std::vector<std::string> names;
    for (const auto& s : summaries) names.push_back(to_string(s.protocol));

    std::vector<svg::BarGroup> delay_groups, pdr_groups;
    for (auto [mode, cls] : cells) {
      const std::string tag = std::string(to_string(mode)) + "_" + to_string(cls);
      svg::BarGroup gd{std::string(to_string(mode)) + "/" + to_string(cls), {}};
      svg::BarGroup gp = gd;
      for (const auto& s : summaries) {
        gd.values.push_back(s.mean("delay_" + tag + "_s"));
        gp.values.push_back(s.mean("pdr_" + tag));
      }
      delay_groups.push_back(std::move(gd));
      pdr_groups.push_back(std::move(gp));
    }
    open("delay.svg") << svg::bar_chart("Mean end-to-end delay", "delay (s)", names,
                                        delay_groups);
    open("pdr.svg") << svg::bar_chart("Packet delivery ratio", "PDR", names, pdr_groups);

    std::vector<svg::Series> psnr_series;
    for (const auto& s : summaries)
      psnr_series.push_back({to_string(s.protocol), s.frame_time_s, s.frame_psnr_mean});
    open("psnr.svg") << svg::line_chart("PSNR of the displayed stream", "capture time (s)",
                                        "PSNR (dB)", psnr_series);
  }
}

struct CsvTraceSink::Impl {
  std::ofstream out;
};

CsvTraceSink::CsvTraceSink(const std::string& path) : impl_(new Impl) {
  impl_->out.open(path, std::ios::binary);
  if (!impl_->out) throw ConfigError("cannot open trace file " + path);
  impl_->out << "time_s,node,event,class,reason,packet,fs,fs_high,fs_low,chosen,trp\n";
}

CsvTraceSink::~CsvTraceSink() = default;

void CsvTraceSink::on_event(double t, uint32_t node, const char* event, const char* cls,
                            const char* detail) {
  impl_->out << num(t) << "," << node << "," << event << "," << cls << "," << detail
             << ",,,,,,\n";
}

void CsvTraceSink::on_decision(double t, uint32_t node, const sim::PacketMeta& packet,
                               const routing::ForwardingDecision& decision) {
  impl_->out << num(t) << "," << node << ",decision," << to_string(packet.cls) << ","
             << to_string(decision.reason) << "," << packet.source << ":"
             << packet.frame_seq << ":" << packet.packet_id << "," << decision.fs_size
             << "," << decision.fs_high_size << "," << decision.fs_low_size << ",";
  for (size_t i = 0; i < decision.forwarders.size(); ++i) {
    if (i) impl_->out << "|";
    impl_->out << decision.forwarders[i];
  }
  impl_->out << "," << num(decision.trp) << "\n";
}

}  // namespace wvsn::harness
