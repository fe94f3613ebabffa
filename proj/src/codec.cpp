#include "wvsn/codec.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "wvsn/rng.hpp"

namespace wvsn::codec {

namespace {

// Zigzag scan position -> raster index within a 4x4 block.
constexpr int kZigzag[16] = {0, 1, 4, 8, 5, 2, 3, 6, 9, 12, 13, 10, 7, 11, 14, 15};

const Block4& dct_matrix() {
  static const Block4 a = [] {
    Block4 m;
    for (int u = 0; u < 4; ++u) {
      const double cu = u == 0 ? 0.5 : std::sqrt(0.5);
      for (int x = 0; x < 4; ++x)
        m(u, x) = cu * std::cos((2 * x + 1) * u * M_PI / 8.0);
    }
    return m;
  }();
  return a;
}

int32_t round_half_away(double v) {
  return static_cast<int32_t>(v >= 0 ? std::floor(v + 0.5) : std::ceil(v - 0.5));
}

}  // namespace

double qstep(int qp) { return std::exp2((qp - 4) / 6.0); }

Coeffs transform_quantize(const Block4& residual, int qp) {
  const Block4& a = dct_matrix();
  const Block4 y = a * residual * a.transpose();
  const double step = qstep(qp);
  Coeffs out;
  for (int k = 0; k < 16; ++k) {
    const int idx = kZigzag[k];
    out[k] = round_half_away(y(idx / 4, idx % 4) / step);
  }
  return out;
}

Block4 dequantize_inverse(const Coeffs& coeffs, int qp) {
  const double step = qstep(qp);
  Block4 y;
  for (int k = 0; k < 16; ++k) {
    const int idx = kZigzag[k];
    y(idx / 4, idx % 4) = coeffs[k] * step;
  }
  const Block4& a = dct_matrix();
  return a.transpose() * y * a;
}

void frequency_select(Coeffs& coeffs, int fp) {
  for (int k = fp; k < 16; ++k) coeffs[k] = 0;
}

// --- bitstream -------------------------------------------------------------

void BitWriter::put_bit(int b) {
  const size_t byte = bits_ / 8;
  if (byte >= bytes_.size()) bytes_.push_back(0);
  if (b) bytes_[byte] |= static_cast<uint8_t>(0x80u >> (bits_ % 8));
  ++bits_;
}

void BitWriter::put_bits(uint32_t value, int count) {
  for (int i = count - 1; i >= 0; --i) put_bit((value >> i) & 1u);
}

std::vector<uint8_t> BitWriter::take() { return std::move(bytes_); }

int BitReader::get_bit() {
  const size_t byte = pos_ / 8;
  if (byte >= bytes_.size()) throw CodecError("bitstream truncated");
  const int b = (bytes_[byte] >> (7 - pos_ % 8)) & 1;
  ++pos_;
  return b;
}

void write_ue(BitWriter& w, uint32_t v) {
  const uint32_t x = v + 1;
  int len = 0;
  while ((x >> len) > 1) ++len;
  for (int i = 0; i < len; ++i) w.put_bit(0);
  w.put_bits(x, len + 1);
}

uint32_t read_ue(BitReader& r) {
  int zeros = 0;
  while (r.get_bit() == 0) {
    if (++zeros > 32) throw CodecError("exp-Golomb prefix too long");
  }
  uint32_t x = 1;
  for (int i = 0; i < zeros; ++i) x = (x << 1) | static_cast<uint32_t>(r.get_bit());
  return x - 1;
}

void write_se(BitWriter& w, int32_t v) {
  write_ue(w, v > 0 ? static_cast<uint32_t>(2 * v - 1) : static_cast<uint32_t>(-2 * v));
}

int32_t read_se(BitReader& r) {
  const uint32_t u = read_ue(r);
  return (u & 1u) ? static_cast<int32_t>((u + 1) / 2) : -static_cast<int32_t>(u / 2);
}

size_t ue_bits(uint32_t v) {
  const uint32_t x = v + 1;
  int len = 0;
  while ((x >> len) > 1) ++len;
  return 2 * static_cast<size_t>(len) + 1;
}

size_t se_bits(int32_t v) {
  return ue_bits(v > 0 ? static_cast<uint32_t>(2 * v - 1) : static_cast<uint32_t>(-2 * v));
}

void encode_block(const Coeffs& coeffs, BitWriter& w) {
  int nnz = 0;
  for (int32_t c : coeffs) nnz += c != 0;
  write_ue(w, static_cast<uint32_t>(nnz));
  uint32_t run = 0;
  for (int32_t c : coeffs) {
    if (c == 0) {
      ++run;
      continue;
    }
    write_ue(w, run);
    write_se(w, c);
    run = 0;
  }
}

Coeffs decode_block(BitReader& r) {
  Coeffs out{};
  const uint32_t nnz = read_ue(r);
  if (nnz > 16) throw CodecError("invalid coefficient count");
  int pos = -1;
  for (uint32_t i = 0; i < nnz; ++i) {
    const uint32_t run = read_ue(r);
    pos += static_cast<int>(run) + 1;
    if (pos > 15) throw CodecError("coefficient run past block end");
    const int32_t level = read_se(r);
    if (level == 0) throw CodecError("zero level in block code");
    out[pos] = level;
  }
  return out;
}

size_t block_bits(const Coeffs& coeffs) {
  int nnz = 0;
  size_t bits = 0;
  uint32_t run = 0;
  for (int32_t c : coeffs) {
    if (c == 0) {
      ++run;
      continue;
    }
    ++nnz;
    bits += ue_bits(run) + se_bits(c);
    run = 0;
  }
  return bits + ue_bits(static_cast<uint32_t>(nnz));
}

// --- frame coding ----------------------------------------------------------

std::vector<TrafficClass> partition_roi(const CodecConfig& config) {
  const int cols = config.mb_cols(), rows = config.mb_rows();
  const int total = cols * rows;
  std::vector<TrafficClass> labels(total, TrafficClass::Bkgd);
  const int target = static_cast<int>(std::floor(config.roi_ratio * total));
  if (target <= 0) return labels;

  int h = static_cast<int>(std::floor(std::sqrt(static_cast<double>(target) * rows / cols)));
  h = std::clamp(h, 1, rows);
  int w = std::clamp(target / h, 1, cols);
  const int top = (rows - h) / 2, left = (cols - w) / 2;
  int placed = 0;
  for (int r = top; r < top + h; ++r)
    for (int c = left; c < left + w; ++c) {
      labels[r * cols + c] = TrafficClass::Roi;
      ++placed;
    }
  for (int i = 0; i < total && placed < target; ++i) {
    if (labels[i] == TrafficClass::Bkgd) {
      labels[i] = TrafficClass::Roi;
      ++placed;
    }
  }
  return labels;
}

EncodedFrame encode_frame(const Frame& frame, Mode mode, const CodecConfig& config) {
  const int w = config.width, h = config.height;
  if (frame.samples.rows() != h || frame.samples.cols() != w)
    throw CodecError("frame dimensions do not match codec config");

  EncodedFrame enc;
  enc.content_index = frame.content_index;
  enc.mode = mode;
  enc.qp = config.qp;
  enc.mb_cols = config.mb_cols();
  enc.mb_rows = config.mb_rows();
  const int mb_count = config.mb_count();

  enc.labels = mode == Mode::Rush ? partition_roi(config)
                                  : std::vector<TrafficClass>(mb_count, TrafficClass::Bkgd);

  enc.coeffs.resize(mb_count);
  enc.mb_bits.resize(mb_count);
  for (int mb = 0; mb < mb_count; ++mb) {
    const int mb_y = (mb / enc.mb_cols) * 16;
    const int mb_x = (mb % enc.mb_cols) * 16;
    const bool truncate = mode == Mode::Rush && enc.labels[mb] == TrafficClass::Bkgd;
    uint32_t bits = 0;
    for (int b = 0; b < 16; ++b) {
      const int by = mb_y + (b / 4) * 4;
      const int bx = mb_x + (b % 4) * 4;
      const Block4 residual =
          frame.samples.block<4, 4>(by, bx).cast<double>().array() - 128.0;
      Coeffs c = transform_quantize(residual, config.qp);
      if (truncate) frequency_select(c, config.fp);
      for (int k = 0; k < 16; ++k) enc.coeffs[mb][b * 16 + k] = static_cast<int16_t>(c[k]);
      bits += static_cast<uint32_t>(block_bits(c));
    }
    enc.mb_bits[mb] = bits;
    enc.class_mbs[static_cast<int>(enc.labels[mb])].push_back(mb);
  }

  // Fragmentation: packets_per_frame split across classes in proportion to
  // their macroblock counts, each class cut into near-equal raster runs.
  const int ppf = config.packets_per_frame;
  const auto& roi = enc.class_mbs[static_cast<int>(TrafficClass::Roi)];
  const auto& bkgd = enc.class_mbs[static_cast<int>(TrafficClass::Bkgd)];
  int roi_packets = 0;
  if (!roi.empty() && !bkgd.empty()) {
    roi_packets = static_cast<int>(
        std::lround(static_cast<double>(ppf) * roi.size() / mb_count));
    roi_packets = std::clamp(roi_packets, 1, ppf - 1);
  } else if (!roi.empty()) {
    roi_packets = ppf;
  }

  int packet_id = 0;
  auto fragment = [&](TrafficClass cls, int packet_count) {
    const auto& mbs = enc.class_mbs[static_cast<int>(cls)];
    if (packet_count <= 0) return;
    const int n = static_cast<int>(mbs.size());
    const int base = n / packet_count, extra = n % packet_count;
    int at = 0;
    for (int p = 0; p < packet_count; ++p) {
      PacketInfo info;
      info.packet_id = packet_id++;
      info.cls = cls;
      info.first = at;
      info.count = base + (p < extra ? 1 : 0);
      uint64_t bits = 0;
      for (int i = 0; i < info.count; ++i) bits += enc.mb_bits[mbs[at + i]];
      info.payload_bits = bits;
      at += info.count;
      enc.packets.push_back(info);
    }
  };
  fragment(TrafficClass::Roi, roi_packets);
  fragment(TrafficClass::Bkgd, ppf - roi_packets);

  for (const auto& p : enc.packets) enc.total_payload_bits += p.payload_bits;

  const std::vector<bool> all(enc.packets.size(), true);
  enc.reference_recon = decode_frame(enc, all, nullptr);
  return enc;
}

Luma decode_frame(const EncodedFrame& enc, const std::vector<bool>& packet_received,
                  const Luma* prev) {
  const int w = enc.mb_cols * 16, h = enc.mb_rows * 16;
  Luma out;
  if (prev != nullptr && prev->rows() == h && prev->cols() == w) {
    out = *prev;  // temporal copy concealment
  } else {
    out.setConstant(h, w, 128);  // cold start
  }

  for (size_t pid = 0; pid < enc.packets.size(); ++pid) {
    if (pid >= packet_received.size() || !packet_received[pid]) continue;
    const PacketInfo& p = enc.packets[pid];
    const auto& mbs = enc.class_mbs[static_cast<int>(p.cls)];
    for (int i = 0; i < p.count; ++i) {
      const int mb = mbs[p.first + i];
      const int mb_y = (mb / enc.mb_cols) * 16;
      const int mb_x = (mb % enc.mb_cols) * 16;
      for (int b = 0; b < 16; ++b) {
        Coeffs c;
        for (int k = 0; k < 16; ++k) c[k] = enc.coeffs[mb][b * 16 + k];
        const Block4 rec = dequantize_inverse(c, enc.qp);
        const int by = mb_y + (b / 4) * 4;
        const int bx = mb_x + (b % 4) * 4;
        for (int r = 0; r < 4; ++r)
          for (int col = 0; col < 4; ++col)
            out(by + r, bx + col) = static_cast<uint8_t>(
                std::clamp(round_half_away(rec(r, col)) + 128, 0, 255));
      }
    }
  }
  return out;
}

double psnr(const Luma& reference, const Luma& reconstructed) {
  if (reference.rows() != reconstructed.rows() || reference.cols() != reconstructed.cols())
    throw CodecError("psnr: dimension mismatch");
  const double n = static_cast<double>(reference.size());
  const double sse = (reference.cast<double>() - reconstructed.cast<double>())
                         .array()
                         .square()
                         .sum();
  if (sse == 0.0) return 99.0;
  const double mse = sse / n;
  return std::min(99.0, 10.0 * std::log10(255.0 * 255.0 / mse));
}

std::vector<uint8_t> serialize_packet(const EncodedFrame& enc, int packet_id) {
  const PacketInfo& p = enc.packets.at(static_cast<size_t>(packet_id));
  const auto& mbs = enc.class_mbs[static_cast<int>(p.cls)];
  BitWriter w;
  for (int i = 0; i < p.count; ++i) {
    const int mb = mbs[p.first + i];
    for (int b = 0; b < 16; ++b) {
      Coeffs c;
      for (int k = 0; k < 16; ++k) c[k] = enc.coeffs[mb][b * 16 + k];
      encode_block(c, w);
    }
  }
  if (w.bit_count() != p.payload_bits) throw CodecError("payload bit accounting mismatch");
  return w.take();
}

std::vector<MbCoeffs> parse_packet(const std::vector<uint8_t>& bytes, int mb_count) {
  BitReader r(bytes);
  std::vector<MbCoeffs> out(static_cast<size_t>(mb_count));
  for (int mb = 0; mb < mb_count; ++mb) {
    for (int b = 0; b < 16; ++b) {
      const Coeffs c = decode_block(r);
      for (int k = 0; k < 16; ++k) out[mb][b * 16 + k] = static_cast<int16_t>(c[k]);
    }
  }
  return out;
}

// --- synthetic source ------------------------------------------------------

SynthSource::SynthSource(uint64_t seed, int width, int height, double texture_amplitude)
    : width_(width), height_(height), amplitude_(texture_amplitude) {
  Rng rng(splitmix64(seed ^ 0x9d2c5680a7b4f2e1ULL));
  texture_.resize(height, width);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) texture_(y, x) = rng.uniform(-1.0, 1.0);
  grad_speed_ = rng.uniform(1.0, 3.0);
  tex_dx_ = rng.uniform(1.0, 4.0);
  tex_dy_ = rng.uniform(0.5, 2.0);
  rect_dx_ = rng.uniform(2.0, 5.0);
  rect_dy_ = rng.uniform(1.0, 3.0);
  rect_x0_ = rng.uniform(0.0, width);
  rect_y0_ = rng.uniform(0.0, height);
  rect_w_ = width / 4;
  rect_h_ = height / 4;
  rect_level_ = rng.bernoulli(0.5) ? 90.0 : -90.0;
}

Frame SynthSource::frame(int content_index) const {
  const double t = content_index;
  Frame f;
  f.content_index = content_index;
  f.samples.resize(height_, width_);

  const int tx = static_cast<int>(std::floor(tex_dx_ * t)) % width_;
  const int ty = static_cast<int>(std::floor(tex_dy_ * t)) % height_;
  const double gshift = grad_speed_ * t;
  const int rx = static_cast<int>(std::floor(rect_x0_ + rect_dx_ * t)) % width_;
  const int ry = static_cast<int>(std::floor(rect_y0_ + rect_dy_ * t)) % height_;

  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      const double ramp =
          std::fmod((x + y * 0.5 + gshift) * (160.0 / width_), 160.0);
      double v = 48.0 + ramp;
      v += amplitude_ * texture_((y + ty) % height_, (x + tx) % width_);
      const int dx = (x - rx + width_) % width_;
      const int dy = (y - ry + height_) % height_;
      if (dx < rect_w_ && dy < rect_h_) v += rect_level_;
      f.samples(y, x) = static_cast<uint8_t>(std::clamp(v, 0.0, 255.0));
    }
  }
  return f;
}

std::vector<Frame> synth_sequence(uint64_t seed, int frame_count, int width, int height,
                                  double texture_amplitude) {
  SynthSource src(seed, width, height, texture_amplitude);
  std::vector<Frame> out;
  out.reserve(static_cast<size_t>(frame_count));
  for (int i = 0; i < frame_count; ++i) out.push_back(src.frame(i));
  return out;
}

std::vector<Luma> load_raw_video(const std::string& path, int width, int height) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CodecError("cannot open raw video file '" + path + "'");
  std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const size_t frame_bytes = static_cast<size_t>(width) * height;
  if (frame_bytes == 0 || data.size() % frame_bytes != 0)
    throw CodecError("raw video length is not a multiple of width*height");
  std::vector<Luma> frames(data.size() / frame_bytes);
  size_t at = 0;
  for (auto& f : frames) {
    f.resize(height, width);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) f(y, x) = static_cast<uint8_t>(data[at++]);
  }
  return frames;
}

}  // namespace wvsn::codec
