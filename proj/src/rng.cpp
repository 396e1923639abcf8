#include "ib/rng.hpp"

#include <atomic>

#include "ib/errors.hpp"

namespace ib::rng {

namespace {

std::atomic<std::uint64_t> next_serial{1};

inline std::uint64_t absorb(std::uint64_t h, std::uint64_t word) noexcept {
  return mix64(h ^ mix64(word + kGolden));
}

}  // namespace

std::uint64_t derive_seed(MasterSeed master, const StreamKey& key) noexcept {
  std::uint64_t h = mix64(master.value + 0x6a09e667f3bcc909ULL);
  h = absorb(h, key.replicate_id);
  h = absorb(h, static_cast<std::uint64_t>(key.role));
  h = absorb(h, key.boot_index);
  h = absorb(h, key.inner_index);
  h = absorb(h, key.salt);
  return h;
}

RandomBlock::RandomBlock(std::vector<double> u)
    : u_(std::move(u)), serial_(next_serial.fetch_add(1, std::memory_order_relaxed)) {}

void fill_uniforms(std::uint64_t seed, std::span<double> out) noexcept {
  constexpr double kScale = 0x1.0p-53;
  std::uint64_t state = seed;
  for (double& v : out) {
    state += kGolden;
    const double u = static_cast<double>(mix64(state) >> 11) * kScale;
    v = u > 0.0 ? u : kScale;
  }
}

RandomBlock draw_block(std::uint64_t seed, std::size_t m) {
  if (m == 0) throw EmptyBlock();
  std::vector<double> u(m);
  fill_uniforms(seed, u);
  return RandomBlock(std::move(u));
}

}  // namespace ib::rng
