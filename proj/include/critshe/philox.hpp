#pragma once

// Philox4x32-10 (Salmon, Moraes, Dror, Shaw; SC'11). Stateless: every call
// maps (counter, key) to four 32-bit words, so streams can be addressed by
// (seed, replica, step, block) without any shared generator state.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace critshe {

class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter hash(Counter ctr, Key key) {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += kW0;
                key[1] += kW1;
            }
            const std::uint64_t p0 = std::uint64_t(kM0) * ctr[0];
            const std::uint64_t p1 = std::uint64_t(kM1) * ctr[2];
            const std::uint32_t hi0 = std::uint32_t(p0 >> 32), lo0 = std::uint32_t(p0);
            const std::uint32_t hi1 = std::uint32_t(p1 >> 32), lo1 = std::uint32_t(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        }
        return ctr;
    }

    static Key key_from_seed(std::uint64_t seed) {
        return {std::uint32_t(seed), std::uint32_t(seed >> 32)};
    }

private:
    static constexpr std::uint32_t kM0 = 0xD2511F53u;
    static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kW0 = 0x9E3779B9u;
    static constexpr std::uint32_t kW1 = 0xBB67AE85u;
};

// Uniform in (0,1) from 64 bits; never returns 0, so log() is safe.
inline double u01_open(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = (std::uint64_t(hi) << 32 | lo) >> 11;
    return (double(bits) + 0.5) * 0x1.0p-53;
}

// A small sequential view onto one Philox stream: the key is the seed and
// the top three counter words name the stream; word 0 advances.
class PhiloxStream {
public:
    PhiloxStream(std::uint64_t seed, std::uint32_t s1, std::uint32_t s2, std::uint32_t s3)
        : key_(Philox4x32::key_from_seed(seed)), ctr_{0, s1, s2, s3} {}

    double uniform() {
        if (pos_ == 4) refill();
        const std::uint32_t hi = buf_[pos_], lo = buf_[pos_ + 1];
        pos_ += 2;
        return u01_open(hi, lo);
    }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform(), u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double th = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(th);
        has_spare_ = true;
        return r * std::cos(th);
    }

    double exponential() { return -std::log(uniform()); }

private:
    void refill() {
        buf_ = Philox4x32::hash(ctr_, key_);
        ++ctr_[0];
        pos_ = 0;
    }

    Philox4x32::Key key_;
    Philox4x32::Counter ctr_;
    Philox4x32::Counter buf_{};
    int pos_ = 4;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace critshe
