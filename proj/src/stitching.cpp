#include "ganedit/stitching.hpp"

#include <algorithm>

namespace ganedit {

ImageTensor stitch(const ImageTensor& original, const ImageTensor& generated,
                   const Vec& head_mask, const StitchPolicy& policy) {
  if (original.side() != generated.side()) {
    throw ShapeError("stitch inputs must share one side length");
  }
  const int px = original.pixel_count();
  if (head_mask.size() != px) {
    throw ShapeError("head mask size does not match the images");
  }
  if ((head_mask.array() < 0.0).any() || (head_mask.array() > 1.0).any()) {
    throw RangeError("head mask values must lie in [0, 1]");
  }
  if (policy.mask_mode == MaskMode::kHard &&
      (policy.hard_threshold <= 0.0 || policy.hard_threshold >= 1.0)) {
    throw ConfigError("hard threshold must lie in (0, 1)");
  }

  Vec out(original.size());
  for (int c = 0; c < ImageTensor::kChannels; ++c) {
    const int base = c * px;
    for (int p = 0; p < px; ++p) {
      const double a = original.data()[base + p];
      const double b = generated.data()[base + p];
      if (policy.mask_mode == MaskMode::kHard) {
        out[base + p] = head_mask[p] >= policy.hard_threshold ? a : b;
      } else {
        const double m = head_mask[p];
        if (m == 1.0) {
          out[base + p] = a;
        } else if (m == 0.0) {
          out[base + p] = b;
        } else {
          // Clamped so rounding can never leave the [a, b] interval.
          out[base + p] =
              std::clamp(b + m * (a - b), std::min(a, b), std::max(a, b));
        }
      }
    }
  }
  return ImageTensor(original.side(), std::move(out));
}

}  // namespace ganedit
