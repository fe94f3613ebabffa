#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "wvsn/scenario.hpp"
#include "wvsn/types.hpp"

namespace wvsn::codec {

/// 8-bit luma plane, height rows by width columns.
using Luma = Eigen::Matrix<uint8_t, Eigen::Dynamic, Eigen::Dynamic>;
using Block4 = Eigen::Matrix<double, 4, 4>;

struct Frame {
  Luma samples;
  int content_index = 0;
  double capture_time_s = 0.0;
};

constexpr int kPacketHeaderBits = 128;  // 16-byte logical packet header

/// Quantizer step for the H.264-style exponential QP scale.
double qstep(int qp);

/// Quantized 4x4 coefficients in zigzag scan order.
using Coeffs = std::array<int32_t, 16>;

/// Forward 4x4 orthonormal DCT of a residual block (samples minus 128) and
/// round-half-away-from-zero quantization; output in zigzag order.
Coeffs transform_quantize(const Block4& residual, int qp);

/// Inverse of transform_quantize up to quantization error.
Block4 dequantize_inverse(const Coeffs& coeffs, int qp);

/// Frequency Selectivity: keep the first fp zigzag coefficients, zero the
/// rest. Pure truncation, no requantization.
void frequency_select(Coeffs& coeffs, int fp);

// --- bitstream -------------------------------------------------------------

class BitWriter {
 public:
  void put_bit(int b);
  void put_bits(uint32_t value, int count);  // MSB first
  size_t bit_count() const { return bits_; }
  std::vector<uint8_t> take();

 private:
  std::vector<uint8_t> bytes_;
  size_t bits_ = 0;
};

class BitReader {
 public:
  explicit BitReader(const std::vector<uint8_t>& bytes) : bytes_(bytes) {}
  int get_bit();  // throws CodecError past the end
  size_t consumed_bits() const { return pos_; }

 private:
  const std::vector<uint8_t>& bytes_;
  size_t pos_ = 0;
};

void write_ue(BitWriter& w, uint32_t v);
uint32_t read_ue(BitReader& r);
void write_se(BitWriter& w, int32_t v);
int32_t read_se(BitReader& r);
size_t ue_bits(uint32_t v);
size_t se_bits(int32_t v);

/// Run-length + exp-Golomb block code: ue(nonzero count), then for each
/// nonzero coefficient ue(preceding zero run) and se(level).
void encode_block(const Coeffs& coeffs, BitWriter& w);
Coeffs decode_block(BitReader& r);
size_t block_bits(const Coeffs& coeffs);

// --- frame coding ----------------------------------------------------------

struct MacroblockLabel {
  int mb_index;
  TrafficClass cls;
};

/// Deterministic centered-rectangle ROI of floor(roi_ratio * mb_count)
/// macroblocks; leftover count filled in raster order.
std::vector<TrafficClass> partition_roi(const CodecConfig& config);

struct PacketInfo {
  int packet_id = 0;
  TrafficClass cls = TrafficClass::Bkgd;
  int first = 0;  // index range into class_mbs[cls]
  int count = 0;
  uint64_t payload_bits = 0;  // bitstream share, header excluded
};

using MbCoeffs = std::array<int16_t, 256>;  // 16 blocks x 16 zigzag coeffs

struct EncodedFrame {
  int content_index = 0;
  Mode mode = Mode::Standby;
  int qp = 32;
  int mb_cols = 0, mb_rows = 0;
  std::vector<TrafficClass> labels;          // per macroblock
  std::vector<MbCoeffs> coeffs;              // per macroblock, post-selection
  std::vector<uint32_t> mb_bits;             // per macroblock code length
  std::array<std::vector<int>, kClassCount> class_mbs;  // raster order
  std::vector<PacketInfo> packets;
  uint64_t total_payload_bits = 0;
  Luma reference_recon;  // encoder-side reconstruction (all packets)
};

/// Standby: one stream, no frequency selection. Rush: ROI kept intact, BKGD
/// truncated to config.fp. Always exactly packets_per_frame packets.
EncodedFrame encode_frame(const Frame& frame, Mode mode, const CodecConfig& config);

/// Reconstructs a frame from a subset of its packets; missing macroblocks are
/// concealed from `prev` (co-located copy) or 128 when there is no history.
Luma decode_frame(const EncodedFrame& enc, const std::vector<bool>& packet_received,
                  const Luma* prev);

/// Mean PSNR over luma, capped at 99 dB for identical frames.
double psnr(const Luma& reference, const Luma& reconstructed);

/// Exact bitstream for one packet (concatenated macroblock block codes).
std::vector<uint8_t> serialize_packet(const EncodedFrame& enc, int packet_id);
/// Inverse of serialize_packet; returns the per-macroblock coefficients.
std::vector<MbCoeffs> parse_packet(const std::vector<uint8_t>& bytes, int mb_count);

/// Deterministic synthetic QCIF-style content: translating gradient, drifting
/// texture and a moving high-contrast rectangle.
class SynthSource {
 public:
  SynthSource(uint64_t seed, int width, int height, double texture_amplitude = 40.0);
  Frame frame(int content_index) const;
  int width() const { return width_; }
  int height() const { return height_; }

 private:
  int width_, height_;
  double amplitude_;
  Eigen::MatrixXd texture_;  // static plane, translated per frame
  double grad_speed_, tex_dx_, tex_dy_, rect_dx_, rect_dy_;
  double rect_x0_, rect_y0_;
  int rect_w_, rect_h_;
  double rect_level_;
};

std::vector<Frame> synth_sequence(uint64_t seed, int frame_count, int width, int height,
                                  double texture_amplitude = 40.0);

/// Headerless frame-sequential 8-bit luma file (.y). Throws CodecError when
/// the file size is not a multiple of width*height.
std::vector<Luma> load_raw_video(const std::string& path, int width, int height);

}  // namespace wvsn::codec
