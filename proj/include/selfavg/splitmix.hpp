#pragma once
// Counter-based splitmix64: output at position ctr is a pure function of
// (base, ctr), so parallel and vector evaluation reproduce the sequential
// stream exactly.

#include <cstdint>

namespace selfavg {

constexpr uint64_t kSplitmixGamma = UINT64_C(0x9E3779B97F4A7C15);

inline uint64_t splitmix64_at(uint64_t base, uint64_t ctr) {
    uint64_t z = base + (ctr + 1) * kSplitmixGamma;
    z = (z ^ (z >> 30)) * UINT64_C(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)) * UINT64_C(0x94D049BB133111EB);
    return z ^ (z >> 31);
}

// Sequential view of the counter-based stream.
class SplitMixStream {
  public:
    explicit SplitMixStream(uint64_t base) : base_(base) {}
    uint64_t next() { return splitmix64_at(base_, ctr_++); }
    uint64_t base() const { return base_; }
    uint64_t counter() const { return ctr_; }
    void skip(uint64_t n) { ctr_ += n; }

  private:
    uint64_t base_;
    uint64_t ctr_ = 0;
};

} // namespace selfavg
