#pragma once

#include <utility>

#include "fusion/ops.hpp"

namespace fusion {

// Complex values carried as parallel re/im tensors of equal shape.
struct ComplexTensor {
    Tensor re, im;

    const Shape& shape() const { return re.shape(); }
};

// Unnormalized forward 2-D DFT over the spatial axes of [C,H,W], applied
// separably (rows then columns) against precomputed cos/sin tables.
ComplexTensor fft2(const Tensor& x);

// Inverse 2-D DFT with 1/(H*W) normalization.
ComplexTensor ifft2(const ComplexTensor& z);

// Real part of the inverse transform; reports the largest |imaginary|
// residue so callers can assert real-valuedness.
Tensor ifft2_real(const ComplexTensor& z, double* max_im_residue = nullptr);

// amp = sqrt(re^2+im^2), phase = atan2(im, re).
std::pair<Tensor, Tensor> amp_phase(const ComplexTensor& z);

// re = amp*cos(phase), im = amp*sin(phase); negative amplitude rejected.
ComplexTensor recompose(const Tensor& amp, const Tensor& phase);

// Projects a spectrum onto the Hermitian subspace:
// re'(u,v) = (re(u,v)+re(-u,-v))/2, im'(u,v) = (im(u,v)-im(-u,-v))/2.
// Identity for spectra of real signals; makes ifft2 exactly real otherwise.
ComplexTensor hermitian_symmetrize(const ComplexTensor& z);

}  // namespace fusion
