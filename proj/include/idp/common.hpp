#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace idp {

using ExampleId = std::uint32_t;
using PrimitiveId = std::uint32_t;

/// Binary class label. Votes use the same encoding with 0 meaning abstain.
enum class Label : std::int8_t { negative = -1, positive = 1 };

inline constexpr Label kLabels[] = {Label::positive, Label::negative};

constexpr int to_int(Label y) noexcept { return static_cast<int>(y); }
constexpr Label flip(Label y) noexcept {
    return y == Label::positive ? Label::negative : Label::positive;
}

inline Label label_from_int(long long v) {
    if (v == 1) return Label::positive;
    if (v == -1) return Label::negative;
    throw std::invalid_argument("label must be -1 or 1, got " + std::to_string(v));
}

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class IngestError : public Error {
  public:
    using Error::Error;
};

class ConfigError : public Error {
  public:
    using Error::Error;
};

class RestoreError : public Error {
  public:
    using Error::Error;
};

/// Thrown when an operation needs a pending/ready state the session is not in.
class StateError : public Error {
  public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Seeded random streams. Every consumer derives its own generator from
// (seed, purpose, index) so that a restored session replays the same draws
// without persisting generator state.

enum class Stream : std::uint64_t {
    split = 1,
    select = 2,
    simulate = 3,
    explore = 4,
    synthetic = 5,
    run = 6,
};

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::mt19937_64 make_rng(std::uint64_t seed, Stream purpose, std::uint64_t index = 0) {
    std::uint64_t s = splitmix64(seed);
    s = splitmix64(s ^ static_cast<std::uint64_t>(purpose));
    s = splitmix64(s ^ index);
    return std::mt19937_64(s);
}

/// Uniform index in [0, n). n must be positive.
template <class Rng>
std::size_t uniform_index(Rng& rng, std::size_t n) {
    std::uniform_int_distribution<std::size_t> dist(0, n - 1);
    return dist(rng);
}

/// 64-bit FNV-1a, used for stable fingerprints and stream indices.
class Fnv1a {
  public:
    void add(std::string_view s) noexcept {
        for (unsigned char c : s) {
            hash_ ^= c;
            hash_ *= 0x100000001b3ULL;
        }
        add_u64(s.size());
    }
    void add_u64(std::uint64_t v) noexcept {
        for (int i = 0; i < 8; ++i) {
            hash_ ^= (v >> (8 * i)) & 0xffU;
            hash_ *= 0x100000001b3ULL;
        }
    }
    std::uint64_t value() const noexcept { return hash_; }

  private:
    std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

}  // namespace idp
