#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <memory>
#include <mutex>
#include <string_view>

#include "concealed/bytes.hpp"

namespace concealed {

/// Source of randomness shared by every component. Satisfies UniformRandomBitGenerator so it
/// can be handed to standard algorithms, but uniform() and shuffle() below are preferred
/// because their output does not depend on the standard library implementation.
class Rng {
  public:
    using result_type = std::uint64_t;

    virtual ~Rng() = default;

    virtual void fill(std::span<std::uint8_t> out) = 0;

    Bytes bytes(std::size_t n);
    std::uint64_t next_u64();
    /// Uniform in [0, bound). bound must be nonzero.
    std::uint64_t uniform(std::uint64_t bound);
    /// Uniform in [0, 1).
    double unit();

    template <typename It>
    void shuffle(It first, It last) {
        auto n = static_cast<std::uint64_t>(last - first);
        for (std::uint64_t i = n; i > 1; --i) {
            auto j = uniform(i);
            std::swap(first[i - 1], first[j]);
        }
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
    result_type operator()() { return next_u64(); }
};

/// Operating-system CSPRNG.
class SystemRng final : public Rng {
  public:
    void fill(std::span<std::uint8_t> out) override;
};

/// ChaCha20 keystream keyed from a seed. Identical seeds give identical streams on every
/// platform; used for reproducible simulations and tests.
class SeededRng final : public Rng {
  public:
    explicit SeededRng(std::uint64_t seed);
    explicit SeededRng(const std::array<std::uint8_t, 32>& key);

    void fill(std::span<std::uint8_t> out) override;

    /// Independent child stream; the parent stream is not advanced.
    SeededRng derive(std::string_view label) const;

  private:
    void refill();

    std::array<std::uint8_t, 32> key_{};
    std::array<std::uint8_t, 64> block_{};
    std::uint64_t counter_ = 0;
    std::size_t used_ = 64;
};

/// Serializes access to another generator so several threads can draw from one stream.
class LockedRng final : public Rng {
  public:
    explicit LockedRng(std::unique_ptr<Rng> inner) : inner_{std::move(inner)} {}

    void fill(std::span<std::uint8_t> out) override {
        std::lock_guard lock{mutex_};
        inner_->fill(out);
    }

  private:
    std::mutex mutex_;
    std::unique_ptr<Rng> inner_;
};

/// Calls sodium_init() once; every entry point that touches libsodium goes through this.
void ensure_sodium();

}  // namespace concealed
