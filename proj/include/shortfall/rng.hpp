#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace shortfall {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11 constants).
/// Each (seed, stream) pair indexes an independent sequence; jumping to a
/// path needs no sequential skipping, which is what makes per-path
/// reproducibility cheap.
class Philox4x32 {
 public:
  Philox4x32(std::uint64_t seed, std::uint64_t stream)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_lo_(static_cast<std::uint32_t>(stream)),
        stream_hi_(static_cast<std::uint32_t>(stream >> 32)) {}

  /// The keyed bijection itself (10 rounds), exposed for known-answer tests.
  static std::array<std::uint32_t, 4> bijection(std::array<std::uint32_t, 4> ctr,
                                                std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = static_cast<std::uint64_t>(0xD2511F53u) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(0xCD9E8D57u) * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
             static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
             static_cast<std::uint32_t>(p0)};
      key[0] += 0x9E3779B9u;
      key[1] += 0xBB67AE85u;
    }
    return ctr;
  }

  std::array<std::uint32_t, 4> next_block() {
    const std::array<std::uint32_t, 4> ctr = {static_cast<std::uint32_t>(block_),
                                              static_cast<std::uint32_t>(block_ >> 32),
                                              stream_lo_, stream_hi_};
    ++block_;
    return bijection(ctr, key_);
  }

  std::uint64_t next_u64() {
    if (pos_ == kBuf) refill();
    return buf_[pos_++];
  }

  /// uniform in [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  /// uniform in (0, 1]
  double uniform_open() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

 private:
  static constexpr int kBuf = 4;

  // two counter blocks per refill: the round chains are independent, so
  // they pipeline instead of serializing; same output order as one-at-a-time
  void refill() {
    std::array<std::uint32_t, 4> c0 = {static_cast<std::uint32_t>(block_),
                                       static_cast<std::uint32_t>(block_ >> 32), stream_lo_,
                                       stream_hi_};
    const std::uint64_t next = block_ + 1;
    std::array<std::uint32_t, 4> c1 = {static_cast<std::uint32_t>(next),
                                       static_cast<std::uint32_t>(next >> 32), stream_lo_,
                                       stream_hi_};
    block_ += 2;
    std::array<std::uint32_t, 2> k0 = key_, k1 = key_;
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t a0 = static_cast<std::uint64_t>(0xD2511F53u) * c0[0];
      const std::uint64_t b0 = static_cast<std::uint64_t>(0xCD9E8D57u) * c0[2];
      const std::uint64_t a1 = static_cast<std::uint64_t>(0xD2511F53u) * c1[0];
      const std::uint64_t b1 = static_cast<std::uint64_t>(0xCD9E8D57u) * c1[2];
      c0 = {static_cast<std::uint32_t>(b0 >> 32) ^ c0[1] ^ k0[0],
            static_cast<std::uint32_t>(b0),
            static_cast<std::uint32_t>(a0 >> 32) ^ c0[3] ^ k0[1],
            static_cast<std::uint32_t>(a0)};
      c1 = {static_cast<std::uint32_t>(b1 >> 32) ^ c1[1] ^ k1[0],
            static_cast<std::uint32_t>(b1),
            static_cast<std::uint32_t>(a1 >> 32) ^ c1[3] ^ k1[1],
            static_cast<std::uint32_t>(a1)};
      k0[0] += 0x9E3779B9u;
      k0[1] += 0xBB67AE85u;
      k1[0] += 0x9E3779B9u;
      k1[1] += 0xBB67AE85u;
    }
    buf_[0] = (static_cast<std::uint64_t>(c0[1]) << 32) | c0[0];
    buf_[1] = (static_cast<std::uint64_t>(c0[3]) << 32) | c0[2];
    buf_[2] = (static_cast<std::uint64_t>(c1[1]) << 32) | c1[0];
    buf_[3] = (static_cast<std::uint64_t>(c1[3]) << 32) | c1[2];
    pos_ = 0;
  }

  std::array<std::uint32_t, 2> key_;
  std::uint32_t stream_lo_, stream_hi_;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, kBuf> buf_{};
  int pos_ = kBuf;
};

namespace detail {

/// 128-layer ziggurat tables for the standard normal.
struct ZigguratTables {
  static constexpr double r = 3.442619855899;
  static constexpr double v = 9.91256303526217e-3;
  double X[129];
  double F[129];

  ZigguratTables() {
    X[1] = r;
    F[1] = std::exp(-0.5 * r * r);
    X[0] = v / F[1];
    F[0] = 0.0;
    for (int i = 1; i < 128; ++i) {
      F[i + 1] = F[i] + v / X[i];
      X[i + 1] = F[i + 1] >= 1.0 ? 0.0 : std::sqrt(-2.0 * std::log(F[i + 1]));
    }
    F[128] = 1.0;
    X[128] = 0.0;
  }
};

inline const ZigguratTables& ziggurat() {
  static const ZigguratTables tables;
  return tables;
}

}  // namespace detail

/// Standard normal draws from a Philox stream via the ziggurat method;
/// roughly an order of magnitude faster than Box-Muller, which matters
/// with billions of Euler increments on one core.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t stream) : gen_(seed, stream) {}

  double next() {
    const auto& z = detail::ziggurat();
    for (;;) {
      const std::uint64_t u = gen_.next_u64();
      const int i = static_cast<int>(u & 127u);
      const double sign = (u & 128u) ? -1.0 : 1.0;
      const double x = static_cast<double>(u >> 11) * 0x1.0p-53 * z.X[i];
      if (x < z.X[i + 1]) return sign * x;
      if (i == 0) {
        // tail beyond r (Marsaglia)
        double xt, yt;
        do {
          xt = -std::log(gen_.uniform_open()) / detail::ZigguratTables::r;
          yt = -std::log(gen_.uniform_open());
        } while (2.0 * yt < xt * xt);
        return sign * (detail::ZigguratTables::r + xt);
      }
      const double y = z.F[i] + gen_.uniform() * (z.F[i + 1] - z.F[i]);
      if (y < std::exp(-0.5 * x * x)) return sign * x;
    }
  }

  Philox4x32& raw() { return gen_; }

 private:
  Philox4x32 gen_;
};

}  // namespace shortfall
