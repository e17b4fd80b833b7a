// Identity-preserving composition of the input and the optimized generation.
#pragma once

#include "ganedit/core.hpp"

namespace ganedit {

enum class MaskMode { kSoft, kHard };

struct StitchPolicy {
  MaskMode mask_mode = MaskMode::kSoft;
  double hard_threshold = 0.5;  // consulted in hard mode only
};

/// Per-pixel convex combination head_mask * original + (1 - head_mask) *
/// generated, with the mask broadcast across channels. Hard mode thresholds
/// the mask first, so every pixel is a bitwise copy from one source.
ImageTensor stitch(const ImageTensor& original, const ImageTensor& generated,
                   const Vec& head_mask, const StitchPolicy& policy = {});

}  // namespace ganedit
