#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fusion/tensor.hpp"

namespace fusion {

// Complementary synthetic pair: A carries a smooth low-frequency field
// with bright blobs, B carries high-frequency texture visible only
// outside A's blob mask, so neither image alone holds all structure.
std::pair<Tensor, Tensor> synth_pair(int size, Rng& rng);

// Writes `count` pairs as pair_NNNN_{a,b}.pgm; per-pair RNGs are derived
// from (seed, index) so generation is order-independent.
void generate_corpus(const std::string& dir, int count, int size,
                     uint64_t seed);

// Loads pair_NNNN_{a,b}.pgm pairs sorted by index.
std::vector<std::pair<Tensor, Tensor>> load_corpus(const std::string& dir);

}  // namespace fusion
