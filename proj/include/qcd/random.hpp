#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace qcd {

// Identifies one independent random substream. Trials and regimes get
// distinct keys so no two trials ever share draws, and results do not
// depend on scheduling order.
struct SeedKey {
    std::uint64_t seed = 0;
    std::uint64_t trial = 0;
    std::uint64_t stream = 0;

    friend bool operator==(const SeedKey&, const SeedKey&) = default;
};

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline constexpr std::uint64_t derive_key(const SeedKey& key) noexcept {
    std::uint64_t h = splitmix64(key.seed);
    h = splitmix64(h ^ splitmix64(key.trial + 0x632BE59BD9B4E019ULL));
    h = splitmix64(h ^ splitmix64(key.stream + 0x8CB92BA72F3D8DD7ULL));
    return h;
}

// Counter-based generator: output n is a fixed bijective mix of
// (key, n), so any position of any substream is reproducible from its
// key alone. Satisfies UniformRandomBitGenerator.
class CounterEngine {
public:
    using result_type = std::uint64_t;

    explicit constexpr CounterEngine(const SeedKey& key) noexcept : key_(derive_key(key)) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    constexpr result_type operator()() noexcept {
        ++counter_;
        return splitmix64(key_ + counter_ * 0xD1B54A32D192ED03ULL);
    }

    constexpr std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

// Per-worker source of variates. Owned by exactly one trial at a time.
class RandomStream {
public:
    explicit RandomStream(const SeedKey& key) : engine_(key) {}

    double standard_normal() { return normal_(engine_); }

    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

    CounterEngine& engine() noexcept { return engine_; }

private:
    CounterEngine engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

} // namespace qcd
