#pragma once

// Counter-based random streams. Every stream is addressed by a (master seed,
// stream key) pair, so a simulated dataset is a pure function of its key and
// never of the order in which worker threads happen to draw.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace ib::rng {

struct MasterSeed {
  std::uint64_t value = 0;
};

enum class Role : std::uint8_t { Observed = 1, Boot = 2, Inner = 3 };

struct StreamKey {
  std::uint64_t replicate_id = 0;
  Role role = Role::Observed;
  std::uint64_t boot_index = 0;   // b for Boot and Inner
  std::uint64_t inner_index = 0;  // h for Inner
  std::uint64_t salt = 0;

  static StreamKey observed(std::uint64_t replicate, std::uint64_t salt = 0) {
    return {replicate, Role::Observed, 0, 0, salt};
  }
  static StreamKey boot(std::uint64_t replicate, std::uint64_t b, std::uint64_t salt = 0) {
    return {replicate, Role::Boot, b, 0, salt};
  }
  static StreamKey inner(std::uint64_t replicate, std::uint64_t b, std::uint64_t h,
                         std::uint64_t salt = 0) {
    return {replicate, Role::Inner, b, h, salt};
  }
};

/// SplitMix64 output function (Stafford "Mix13" finalizer).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

std::uint64_t derive_seed(MasterSeed master, const StreamKey& key) noexcept;

/// Canonical noise W: m uniforms strictly inside (0,1). Immutable once drawn.
class RandomBlock {
 public:
  RandomBlock() = default;
  explicit RandomBlock(std::vector<double> u);

  std::span<const double> values() const noexcept { return u_; }
  std::size_t size() const noexcept { return u_.size(); }
  double operator[](std::size_t i) const noexcept { return u_[i]; }
  /// Process-unique identity, used to key per-block caches.
  std::uint64_t serial() const noexcept { return serial_; }

 private:
  std::vector<double> u_;
  std::uint64_t serial_ = 0;
};

/// m uniforms from the SplitMix64 counter stream started at `seed`.
/// Uses the 53-bit mantissa convention; an exact 0 becomes 2^-53.
RandomBlock draw_block(std::uint64_t seed, std::size_t m);

/// Fills `out` with the same values draw_block(seed, out.size()) would hold.
void fill_uniforms(std::uint64_t seed, std::span<double> out) noexcept;

inline RandomBlock draw_block(MasterSeed master, const StreamKey& key, std::size_t m) {
  return draw_block(derive_seed(master, key), m);
}

}  // namespace ib::rng
