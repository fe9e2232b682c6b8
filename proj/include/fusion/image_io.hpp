#pragma once

#include <string>

#include "fusion/tensor.hpp"

namespace fusion {

// Netpbm I/O: PGM (P2/P5) as [1,H,W], PPM (P3/P6) as [3,H,W], 8-bit
// maxval, values mapped linearly to [0,1].
Tensor read_image(const std::string& path);
void write_pgm(const std::string& path, const Tensor& img, bool binary = true);
void write_ppm(const std::string& path, const Tensor& img, bool binary = true);
void write_image(const std::string& path, const Tensor& img);  // by channels

// BT.601 luminance of a [3,H,W] image (passthrough for [1,H,W]).
Tensor to_luminance(const Tensor& img);

// Fused luminance recolored with the chrominance of the reference image.
Tensor recolor(const Tensor& fused_luma, const Tensor& reference_rgb);

}  // namespace fusion
