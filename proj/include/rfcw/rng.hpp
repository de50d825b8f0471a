#pragma once

#include <array>
#include <cstdint>

namespace rfcw {

// Philox4x32-10 (Salmon et al. 2011). Counter-based, so every
// (seed, stream, substream) triple names an independent sequence.
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;
  static Counter block(Counter ctr, Key key);
};

class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint32_t stream, std::uint32_t substream = 0);

  std::uint64_t next_u64();
  // 53-bit uniform in [0,1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  // uniform integer in [0,n), Lemire-style multiply-shift (bias < n/2^64)
  std::uint32_t index(std::uint32_t n) {
    return static_cast<std::uint32_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }
  double exponential();

  std::uint64_t draws() const { return draws_; }
  std::uint64_t seed() const { return seed_; }
  std::uint32_t stream() const { return stream_; }
  std::uint32_t substream() const { return substream_; }

 private:
  void refill();

  std::uint64_t seed_;
  std::uint32_t stream_, substream_;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 2> buf_{};
  int pos_ = 2;
  std::uint64_t draws_ = 0;
};

namespace substreams {
// per trajectory: 0 = the chain itself, 1 = start-state sampling
inline constexpr std::uint32_t kChain = 0;
inline constexpr std::uint32_t kStart = 1;
// coupling attempt k (0-based) owns four substreams starting here
inline constexpr std::uint32_t attempt_base(std::uint32_t k) { return 4 * (k + 1); }
inline constexpr std::uint32_t kEtaPath = 0, kCoins = 1, kAux = 2, kEtaStart = 3;
}  // namespace substreams

// stream index reserved for field sampling
inline constexpr std::uint32_t kFieldStream = 0xFFFFFFFFu;

}  // namespace rfcw
