#pragma once

#include <vector>

#include "fusion/common.hpp"

namespace fusion {

// An explicit token traversal. Unimodal orders are permutations of
// 0..length-1. Cross-modal orders carry a modality tag per entry; indices
// are then token positions within the tagged modality, and the combined
// storage convention is modality-1 tokens followed by modality-2 tokens.
struct ScanOrder {
    std::vector<int> indices;
    std::vector<int> tags;  // empty for unimodal; else 1 or 2 per entry

    int length() const { return static_cast<int>(indices.size()); }
    bool cross_modal() const { return !tags.empty(); }

    // Flat positions into the concatenated (modality1; modality2) storage.
    std::vector<int> storage_indices(int modality1_count) const;

    bool is_permutation() const;  // per modality for tagged orders
};

// Row-major order 0,1,...,H*W-1.
ScanOrder spatial_raster(int h, int w);

// Identity order over channel indices.
ScanOrder channel_order(int c);

// Frequency-plane bins ordered by increasing centered radius from the DC
// bin, ties by angle then (u,v); a permutation of 0..H*W-1 starting at DC.
ScanOrder frequency_rotational(int h, int w);

// Token-level alternation o1[0],o2[0],o1[1],o2[1],... with per-entry tags.
// tag1/tag2 name the modalities of the two arguments.
ScanOrder cross_modal_interleave(const ScanOrder& o1, const ScanOrder& o2,
                                 int tag1 = 1, int tag2 = 2);

ScanOrder reverse(const ScanOrder& o);

}  // namespace fusion
