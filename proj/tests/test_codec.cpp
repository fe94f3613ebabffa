#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "wvsn/codec.hpp"
#include "wvsn/rng.hpp"

using namespace wvsn;
using namespace wvsn::codec;

namespace {

Block4 random_residual(Rng& rng) {
  Block4 b;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) b(r, c) = std::floor(rng.uniform(-128.0, 128.0));
  return b;
}

Coeffs random_coeffs(Rng& rng) {
  Coeffs c{};
  const int nnz = static_cast<int>(rng.below(17));
  for (int k = 0; k < nnz; ++k) {
    int v = static_cast<int>(rng.below(1024)) - 512;
    if (v == 0) v = 7;
    c[rng.below(16)] = v;
  }
  return c;
}

CodecConfig qcif_config() {
  CodecConfig cfg;  // QCIF defaults
  return cfg;
}

}  // namespace

TEST_CASE("transform_quantize basics") {
  Block4 zero = Block4::Zero();
  const Coeffs z = transform_quantize(zero, 32);
  for (int32_t c : z) CHECK(c == 0);

  // Constant block 128+c: only the DC coefficient survives.
  Block4 constant = Block4::Constant(40.0);
  const Coeffs d = transform_quantize(constant, 20);
  CHECK(d[0] != 0);
  for (int k = 1; k < 16; ++k) CHECK(d[k] == 0);
}

TEST_CASE("quantize/dequantize reconstruction error over 1000 seeded blocks") {
  // Round-to-nearest bounds the coefficient error by step/2; through the
  // orthonormal synthesis the per-sample error is bounded by
  // step/2 * (sum of |basis| amplitudes)^2 = step/2 * 3.701 = 1.851*step.
  Rng rng(2024);
  const double step = qstep(32);
  double max_sample_err = 0;
  for (int i = 0; i < 1000; ++i) {
    const Block4 res = random_residual(rng);
    const Coeffs q = transform_quantize(res, 32);
    const Block4 rec = dequantize_inverse(q, 32);

    // Coefficient-domain error is at most half a step, exactly.
    const Block4 requant_err =
        dequantize_inverse(transform_quantize(rec, 32), 32) - rec;
    CHECK(requant_err.cwiseAbs().maxCoeff() <= 1e-9);  // idempotent fixed point
    max_sample_err = std::max(max_sample_err, (res - rec).cwiseAbs().maxCoeff());
  }
  CHECK(max_sample_err <= 1.852 * step);
  // Energy view (orthonormal transform): RMS error stays below step/2 * 4.
  Rng rng2(2024);
  for (int i = 0; i < 100; ++i) {
    const Block4 res = random_residual(rng2);
    const Block4 rec = dequantize_inverse(transform_quantize(res, 32), 32);
    CHECK((res - rec).norm() <= 4.0 * step / 2.0 + 1e-9);
  }
}

TEST_CASE("frequency_select is pure truncation") {
  Rng rng(7);
  Coeffs c = random_coeffs(rng);
  Coeffs full = c;
  frequency_select(full, 16);
  CHECK(full == c);  // fp=16 is the identity

  Coeffs dc = c;
  frequency_select(dc, 1);
  for (int k = 1; k < 16; ++k) CHECK(dc[k] == 0);
  CHECK(dc[0] == c[0]);
}

TEST_CASE("exp-Golomb primitives round-trip") {
  BitWriter w;
  for (uint32_t v : {0u, 1u, 2u, 7u, 8u, 255u, 100000u}) write_ue(w, v);
  for (int32_t v : {0, 1, -1, 2, -2, 17, -400, 511, -512}) write_se(w, v);
  const auto bytes = w.take();
  BitReader r(bytes);
  for (uint32_t v : {0u, 1u, 2u, 7u, 8u, 255u, 100000u}) CHECK(read_ue(r) == v);
  for (int32_t v : {0, 1, -1, 2, -2, 17, -400, 511, -512}) CHECK(read_se(r) == v);
}

TEST_CASE("block entropy code") {
  // Empty stream stays empty.
  BitWriter w0;
  CHECK(w0.take().empty());

  // All-zero block codes shorter than any nonzero block.
  Coeffs zero{};
  CHECK(block_bits(zero) == 1);
  Coeffs minimal{};
  minimal[0] = 1;
  CHECK(block_bits(zero) < block_bits(minimal));
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    Coeffs c = random_coeffs(rng);
    bool nonzero = false;
    for (int32_t v : c) nonzero |= v != 0;
    if (nonzero) CHECK(block_bits(zero) < block_bits(c));
  }

  // 1000 seeded random blocks: bit-exact round-trip, length matches block_bits.
  Rng rng2(12);
  for (int i = 0; i < 1000; ++i) {
    const Coeffs c = random_coeffs(rng2);
    BitWriter w;
    encode_block(c, w);
    CHECK(w.bit_count() == block_bits(c));
    const auto bytes = w.take();
    BitReader r(bytes);
    CHECK(decode_block(r) == c);
  }

  // Truncated bitstreams are detected.
  Coeffs busy{};
  for (int k = 0; k < 16; ++k) busy[k] = 100 + k;
  BitWriter w;
  encode_block(busy, w);
  auto bytes = w.take();
  bytes.resize(bytes.size() / 2);
  BitReader r(bytes);
  CHECK_THROWS_AS((void)decode_block(r), CodecError);
}

TEST_CASE("partition_roi covers floor(ratio * mb_count) as a centered rectangle") {
  CodecConfig cfg = qcif_config();  // 11x9 = 99 macroblocks
  cfg.roi_ratio = 0.5;
  auto labels = partition_roi(cfg);
  CHECK(std::count(labels.begin(), labels.end(), TrafficClass::Roi) == 49);

  cfg.roi_ratio = 1.0;
  labels = partition_roi(cfg);
  CHECK(std::count(labels.begin(), labels.end(), TrafficClass::Roi) == 99);

  cfg.roi_ratio = 0.0;
  labels = partition_roi(cfg);
  CHECK(std::count(labels.begin(), labels.end(), TrafficClass::Roi) == 0);

  // Deterministic.
  cfg.roi_ratio = 0.37;
  CHECK(partition_roi(cfg) == partition_roi(cfg));
}

TEST_CASE("encode_frame fragmentation and class structure") {
  const CodecConfig cfg = qcif_config();
  SynthSource src(99, cfg.width, cfg.height);
  const Frame frame = src.frame(0);

  SUBCASE("standby: single class, full packet count, complete coverage") {
    const EncodedFrame enc = encode_frame(frame, Mode::Standby, cfg);
    CHECK(enc.packets.size() == 33);
    std::vector<int> seen(cfg.mb_count(), 0);
    for (const auto& p : enc.packets) {
      CHECK(p.cls == TrafficClass::Bkgd);  // standby traffic rides the BKGD class
      for (int i = 0; i < p.count; ++i)
        seen[enc.class_mbs[static_cast<int>(p.cls)][p.first + i]]++;
    }
    for (int c : seen) CHECK(c == 1);  // every macroblock in exactly one packet
  }

  SUBCASE("rush: both classes, FP truncation confined to BKGD") {
    const EncodedFrame enc = encode_frame(frame, Mode::Rush, cfg);
    CHECK(enc.packets.size() == 33);
    std::vector<int> seen(cfg.mb_count(), 0);
    int roi_packets = 0;
    for (const auto& p : enc.packets) {
      roi_packets += p.cls == TrafficClass::Roi;
      for (int i = 0; i < p.count; ++i)
        seen[enc.class_mbs[static_cast<int>(p.cls)][p.first + i]]++;
    }
    for (int c : seen) CHECK(c == 1);
    CHECK(roi_packets == 16);  // round(33 * 49/99)

    // BKGD blocks carry nonzero coefficients only below index fp.
    for (int mb = 0; mb < cfg.mb_count(); ++mb) {
      if (enc.labels[mb] != TrafficClass::Bkgd) continue;
      for (int b = 0; b < 16; ++b)
        for (int k = cfg.fp; k < 16; ++k) CHECK(enc.coeffs[mb][b * 16 + k] == 0);
    }
  }
}

TEST_CASE("rate and quality monotone in fp; qp monotone; fp=16 identical to no FS") {
  CodecConfig cfg = qcif_config();
  cfg.roi_ratio = 0.0;  // all macroblocks take the truncation path
  SynthSource src(5, cfg.width, cfg.height);
  const Frame frame = src.frame(3);

  uint64_t prev_bits = 0;
  double prev_psnr = -1;
  bool first = true;
  for (int fp : {1, 2, 4, 6, 8, 16}) {
    cfg.fp = fp;
    const EncodedFrame enc = encode_frame(frame, Mode::Rush, cfg);
    const std::vector<bool> all(enc.packets.size(), true);
    const double p = psnr(frame.samples, decode_frame(enc, all, nullptr));
    if (!first) {
      CHECK(enc.total_payload_bits >= prev_bits);  // bits grow with fp
      CHECK(p >= prev_psnr);                       // so does quality
    }
    prev_bits = enc.total_payload_bits;
    prev_psnr = p;
    first = false;
  }

  // FP=6 strictly cheaper than FP=16 on the QCIF test frame.
  cfg.fp = 6;
  const uint64_t bits6 = encode_frame(frame, Mode::Rush, cfg).total_payload_bits;
  cfg.fp = 16;
  const uint64_t bits16 = encode_frame(frame, Mode::Rush, cfg).total_payload_bits;
  CHECK(bits6 < bits16);

  // fp=16 output is bit-identical to the FS-disabled (standby-style) path.
  cfg.fp = 16;
  const EncodedFrame with_fs = encode_frame(frame, Mode::Rush, cfg);
  const EncodedFrame no_fs = encode_frame(frame, Mode::Standby, cfg);
  REQUIRE(with_fs.coeffs.size() == no_fs.coeffs.size());
  for (size_t mb = 0; mb < with_fs.coeffs.size(); ++mb)
    CHECK(with_fs.coeffs[mb] == no_fs.coeffs[mb]);
  CHECK(with_fs.total_payload_bits == no_fs.total_payload_bits);

  // Bits nonincreasing as qp increases at fixed fp.
  cfg.fp = 6;
  uint64_t last = ~0ull;
  for (int qp : {20, 26, 32, 38, 44}) {
    cfg.qp = qp;
    const uint64_t bits = encode_frame(frame, Mode::Rush, cfg).total_payload_bits;
    CHECK(bits <= last);
    last = bits;
  }
}

TEST_CASE("decode_frame concealment") {
  const CodecConfig cfg = qcif_config();
  SynthSource src(17, cfg.width, cfg.height);
  const Frame f0 = src.frame(0);
  const Frame f1 = src.frame(1);
  const EncodedFrame e0 = encode_frame(f0, Mode::Rush, cfg);
  const EncodedFrame e1 = encode_frame(f1, Mode::Rush, cfg);

  // All packets received: equals the encoder-side reference reconstruction.
  const std::vector<bool> all(e0.packets.size(), true);
  const Luma full = decode_frame(e0, all, nullptr);
  CHECK(full == e0.reference_recon);

  // Zero packets, first frame: uniform 128.
  const std::vector<bool> none(e0.packets.size(), false);
  const Luma cold = decode_frame(e0, none, nullptr);
  CHECK((cold.array() == 128).all());

  // Determinism: same received subset decodes identically.
  std::vector<bool> half(e1.packets.size(), false);
  for (size_t i = 0; i < half.size(); i += 2) half[i] = true;
  const Luma prev = decode_frame(e0, all, nullptr);
  CHECK(decode_frame(e1, half, &prev) == decode_frame(e1, half, &prev));

  // 50% loss strictly degrades PSNR against the no-loss decode.
  const double lossless = psnr(f1.samples, decode_frame(e1, all, &prev));
  const double lossy = psnr(f1.samples, decode_frame(e1, half, &prev));
  CHECK(lossy < lossless);
}

TEST_CASE("psnr") {
  Luma a, b;
  a.setConstant(16, 16, 77);
  CHECK(psnr(a, a) == doctest::Approx(99.0));  // identical -> cap

  // +-1 alternating noise: MSE = 1 -> 10*log10(255^2) = 48.13 dB.
  b = a;
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x)
      b(y, x) = static_cast<uint8_t>(77 + ((x + y) % 2 ? 1 : -1));
  CHECK(psnr(a, b) == doctest::Approx(10.0 * std::log10(65025.0)).epsilon(1e-9));
  CHECK(psnr(a, b) == doctest::Approx(48.13).epsilon(1e-3));

  // Hand-computed MSE against a uniform-128 reconstruction.
  Luma ref;
  ref.setConstant(8, 8, 130);
  Luma mid;
  mid.setConstant(8, 8, 128);
  CHECK(psnr(ref, mid) == doctest::Approx(10.0 * std::log10(65025.0 / 4.0)).epsilon(1e-9));

  Luma small;
  small.setConstant(4, 4, 0);
  CHECK_THROWS_AS(psnr(ref, small), CodecError);
}

TEST_CASE("packet serialization matches the bit accounting") {
  const CodecConfig cfg = qcif_config();
  SynthSource src(23, cfg.width, cfg.height);
  const EncodedFrame enc = encode_frame(src.frame(4), Mode::Rush, cfg);
  for (int pid = 0; pid < static_cast<int>(enc.packets.size()); pid += 7) {
    const auto bytes = serialize_packet(enc, pid);
    const PacketInfo& p = enc.packets[pid];
    CHECK(bytes.size() == (p.payload_bits + 7) / 8);
    const auto parsed = parse_packet(bytes, p.count);
    for (int i = 0; i < p.count; ++i) {
      const int mb = enc.class_mbs[static_cast<int>(p.cls)][p.first + i];
      CHECK(parsed[i] == enc.coeffs[mb]);
    }
  }
}

TEST_CASE("synthetic source properties") {
  const CodecConfig cfg = qcif_config();
  SynthSource a(42, cfg.width, cfg.height), b(42, cfg.width, cfg.height);
  CHECK(a.frame(5).samples == b.frame(5).samples);  // same seed, same content

  // Motion: consecutive frames differ...
  const Frame f4 = a.frame(4), f5 = a.frame(5);
  CHECK(f4.samples != f5.samples);

  // ...but stay temporally correlated: |f_t - f_{t-1}| << |f_t - 128|.
  const double diff_prev =
      (f5.samples.cast<double>() - f4.samples.cast<double>()).array().abs().mean();
  const double diff_mid = (f5.samples.cast<double>().array() - 128.0).abs().mean();
  CHECK(diff_prev < diff_mid);
}

TEST_CASE("raw video loader validates length") {
  const std::string path = "test_codec_tmp.y";
  {
    std::ofstream f(path, std::ios::binary);
    std::vector<char> frame(176 * 144, 7);
    f.write(frame.data(), static_cast<std::streamsize>(frame.size()));
    f.write(frame.data(), static_cast<std::streamsize>(frame.size()));
  }
  const auto frames = load_raw_video(path, 176, 144);
  CHECK(frames.size() == 2);
  CHECK(frames[0](0, 0) == 7);
  std::remove(path.c_str());

  {
    std::ofstream f(path, std::ios::binary);
    std::vector<char> bad(100, 1);
    f.write(bad.data(), static_cast<std::streamsize>(bad.size()));
  }
  CHECK_THROWS_AS(load_raw_video(path, 176, 144), CodecError);
  std::remove(path.c_str());
}
