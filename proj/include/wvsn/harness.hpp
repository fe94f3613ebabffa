#pragma once

#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "wvsn/codec.hpp"
#include "wvsn/netsim.hpp"
#include "wvsn/scenario.hpp"

namespace wvsn::harness {

/// Codec-backed packetization source. One instance is shared by the protocol
/// runs of a realization so every variant sees bit-identical frames.
class CachingFrameProvider : public sim::FrameProvider {
 public:
  CachingFrameProvider(uint64_t content_seed, const CodecConfig& config);
  const sim::FramePacketization& packetization(int content_index, Mode mode) override;
  const codec::SynthSource& source() const { return synth_; }
  /// Order-independent digest of every packetization served so far.
  uint64_t digest() const { return digest_; }

 private:
  codec::SynthSource synth_;
  CodecConfig config_;
  std::unordered_map<uint64_t, sim::FramePacketization> cache_;
  uint64_t digest_ = 0;
};

struct PsnrSeries {
  std::vector<int> content_index;
  std::vector<double> capture_time_s;
  std::vector<double> psnr_db;
  std::vector<Mode> mode;
  double rush_mean_db = 0;  // frames captured at/after the event
  double all_mean_db = 0;
};

/// Decodes the displayed (event) stream from the sink delivery log: packets
/// past their playout deadline (capture time + class deadline) are discarded,
/// frames are decoded in capture order with temporal concealment, and PSNR is
/// taken against the original synthetic frames.
PsnrSeries reconstruct_and_score(const sim::MetricsLog& log, const ScenarioConfig& config,
                                 const Deployment& deployment);

struct RunResult {
  Protocol protocol = Protocol::Mmspeed;
  int realization = 0;
  sim::MetricsLog log;
  PsnrSeries psnr;
  uint64_t frame_digest = 0;  // pairing check across protocols
  /// Flattened named metrics (feeds per-realization CSV and aggregation).
  std::vector<std::pair<std::string, double>> metrics() const;
};

struct ExperimentResult {
  ScenarioConfig config;
  std::vector<Protocol> protocols;
  int realizations = 0;
  std::vector<RunResult> runs;  // ordered by (realization, protocol)
  double wall_seconds = 0;
};

/// Paired multi-realization comparison: each realization shares deployment,
/// sources and encoded frames across every protocol.
ExperimentResult run_experiment(const ScenarioConfig& config,
                                const std::vector<Protocol>& protocols, int realizations,
                                int jobs = 1, sim::TraceSink* trace = nullptr);

struct ProtocolSummary {
  Protocol protocol = Protocol::Mmspeed;
  /// metric name -> (mean, sample std over realizations)
  std::map<std::string, std::pair<double, double>> metrics;
  std::vector<double> alive_time_s;  // 1 s resolution
  std::vector<double> alive_mean;
  std::vector<int> frame_content;
  std::vector<double> frame_time_s, frame_psnr_mean, frame_psnr_std;

  double mean(const std::string& name) const;
};

std::vector<ProtocolSummary> summarize(const ExperimentResult& result);

/// Writes alive/delay/pdr/psnr/summary/per_realization CSVs and the matching
/// SVG charts. Deterministic byte-for-byte given identical inputs.
void emit_outputs(const ExperimentResult& result, const std::string& out_dir);

/// CSV trace sink for --verbose-trace (decision and event rows).
class CsvTraceSink : public sim::TraceSink {
 public:
  explicit CsvTraceSink(const std::string& path);
  ~CsvTraceSink() override;
  void on_event(double t, uint32_t node, const char* event, const char* cls,
                const char* detail) override;
  void on_decision(double t, uint32_t node, const sim::PacketMeta& packet,
                   const routing::ForwardingDecision& decision) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace wvsn::harness
