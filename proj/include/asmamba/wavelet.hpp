#pragma once

#include "asmamba/autograd.hpp"

// One-level orthonormal 2D Haar transform.
//
// For a 2x2 block [[a, b], [c, d]] (row-major) the bands are
//   ll = (a + b + c + d) / 2
//   lh = (a - b + c - d) / 2   detail across columns
//   hl = (a + b - c - d) / 2   detail across rows
//   hh = (a - b - c + d) / 2
// so LH responds to vertical edges and HL to horizontal ones.
namespace asmamba::wavelet {

struct SubBands {
  Tensor ll, lh, hl, hh;  // each (C, H/2, W/2)

  int channels() const { return ll.channels(); }
  int height() const { return ll.height(); }
  int width() const { return ll.width(); }
  /// Throws std::invalid_argument unless all four bands share a rank-3 shape.
  void validate() const;
  double energy() const;
};

SubBands dwt2(const Tensor& x);
Tensor idwt2(const SubBands& bands);

/// Channel concatenation (LL, LH, HL, HH) -> (4C, H/2, W/2).
Tensor pack(const SubBands& bands);
SubBands unpack(const Tensor& packed);

/// Channel concatenation (LH, HL, HH) -> (3C, H/2, W/2).
Tensor concat_hf(const SubBands& bands);
struct HighBands {
  Tensor lh, hl, hh;
};
HighBands split_hf(const Tensor& hf);

/// Reflection-pads a (C, H, W) or (H, W) tensor on the bottom/right so both
/// spatial sides are multiples of `multiple`.
Tensor pad_to_multiple(const Tensor& x, int multiple);

// Differentiable forms operating on the packed (4C, H/2, W/2) layout. The
// transform is orthonormal, so each backward pass is the other transform.
Var dwt2(const Var& x);
Var idwt2(const Var& packed);

/// Haar wavelet downsampling: dwt2, band concatenation, then a 1x1 mix
/// `mix_w` (out, 4C, 1, 1) with optional bias.
Var hwd(const Var& x, const Var& mix_w, const Var& mix_b);

}  // namespace asmamba::wavelet
