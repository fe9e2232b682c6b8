#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace fusion {

// Error taxonomy, mapped to CLI exit codes by the frontend:
//   ShapeError -> 4, IoError -> 3, NumericError -> 5, UsageError -> 2.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& m) : std::runtime_error(m) {}
};
struct IoError : std::runtime_error {
    explicit IoError(const std::string& m) : std::runtime_error(m) {}
};
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& m) : std::runtime_error(m) {}
};
struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& m) : std::runtime_error(m) {}
};

using Shape = std::vector<int>;

std::string shape_str(const Shape& s);
long long shape_numel(const Shape& s);

// Deterministic, serializable PRNG (xoshiro256** seeded via splitmix64).
// std engines are avoided so that checkpointed training can resume
// bit-identically from four state words.
class Rng {
public:
    explicit Rng(uint64_t seed = 42) { reseed(seed); }

    void reseed(uint64_t seed);

    uint64_t next_u64();

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller, no cached spare (keeps the state trivially serializable)
    double normal();

    int uniform_int(int lo, int hi);  // inclusive bounds

    const uint64_t* state() const { return s_; }
    void set_state(const uint64_t st[4]) {
        for (int i = 0; i < 4; ++i) s_[i] = st[i];
    }

private:
    uint64_t s_[4];
};

}  // namespace fusion
