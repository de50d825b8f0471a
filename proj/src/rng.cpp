#include "rfcw/rng.hpp"

#include <cmath>

namespace rfcw {

namespace {
constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}
}  // namespace

Philox4x32::Counter Philox4x32::block(Counter c, Key k) {
  for (int r = 0; r < 10; ++r) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kM0, c[0], hi0, lo0);
    mulhilo(kM1, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    k[0] += kW0;
    k[1] += kW1;
  }
  return c;
}

RngStream::RngStream(std::uint64_t seed, std::uint32_t stream, std::uint32_t substream)
    : seed_(seed), stream_(stream), substream_(substream) {}

void RngStream::refill() {
  Philox4x32::Counter ctr{static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                          stream_, substream_};
  Philox4x32::Key key{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)};
  auto out = Philox4x32::block(ctr, key);
  buf_[0] = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
  buf_[1] = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
  ++block_;
  pos_ = 0;
}

std::uint64_t RngStream::next_u64() {
  if (pos_ == 2) refill();
  ++draws_;
  return buf_[pos_++];
}

double RngStream::exponential() {
  // 1-u lies in (0,1]
  return -std::log1p(-uniform());
}

}  // namespace rfcw
