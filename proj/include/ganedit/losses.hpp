// The five differentiable loss terms and their weighted composition.
#pragma once

#include "ganedit/core.hpp"
#include "ganedit/models.hpp"

#include <optional>
#include <vector>

namespace ganedit {

/// Per-term values of one objective evaluation. Terms skipped because their
/// weight is zero stay at 0.
struct LossBreakdown {
  double clip = 0.0;
  double pose = 0.0;
  double reg = 0.0;
  double im = 0.0;
  double head = 0.0;
  double total = 0.0;
};

enum class LossTerm { kClip, kPose, kReg, kIm, kHead };

std::vector<LossTerm> all_loss_terms();

/// 1 - cos(embed_image(image), prompt_embedding); in [0, 2].
double semantic_loss(const ImageTensor& image, const Vec& prompt_embedding,
                     const SemanticModel& semantic, Vec* image_grad = nullptr);

/// Mean over parsed parts of the squared mask difference.
double pose_loss(const ImageTensor& original, const ImageTensor& generated,
                 const PoseParser& pose, Vec* generated_grad = nullptr);

/// Mean squared distance of the coarsest layer code to every other layer code.
double latent_regularization(const ExtendedLatentCode& code, Mat* code_grad = nullptr);

/// ||(1 - S_body(original)) * (generated - original)||^2 with the mask
/// broadcast across channels.
double composition_image_loss(const ImageTensor& original, const ImageTensor& generated,
                              const SegmentationTriple& seg_of_original,
                              Vec* generated_grad = nullptr);

/// ||S_head(original) - S_head(generated)||^2.
double composition_head_loss(const ImageTensor& original, const ImageTensor& generated,
                             const Segmenter& segmenter, Vec* generated_grad = nullptr);

/// Weighted superposition of the per-job objective, holding everything that is
/// fixed while the latent code moves. Per-job constants (prompt embedding,
/// composition mask, reference parses) are computed once at construction, and
/// only for terms whose weight is nonzero.
class Objective {
 public:
  Objective(ImageTensor original, std::optional<Vec> prompt_embedding,
            LossWeights weights, const ModelStack& models, bool vanilla_mode,
            std::vector<LossTerm> terms = all_loss_terms());

  /// Synthesizes I_g = G(code) once, evaluates the enabled terms on it, and
  /// accumulates d(total)/d(code) when code_grad is non-null.
  LossBreakdown evaluate(const ExtendedLatentCode& code, Mat* code_grad = nullptr) const;

  const ImageTensor& original() const { return original_; }
  const LossWeights& weights() const { return weights_; }
  bool vanilla_mode() const { return vanilla_mode_; }
  const Generator& generator() const { return *models_->generator; }

 private:
  bool enabled(LossTerm t) const;

  ImageTensor original_;
  std::optional<Vec> prompt_embedding_;
  LossWeights weights_;
  const ModelStack* models_;
  bool vanilla_mode_;
  std::vector<LossTerm> terms_;

  // Per-job constants, present only when the owning term is active.
  std::optional<Vec> composition_mask_;        // M = 1 - S_body(I), n^2
  std::optional<BodyPartMaskSet> pose_reference_;
  std::optional<Vec> head_reference_;          // S_head(I), n^2
};

/// One-shot evaluation of the full objective for a given code.
LossBreakdown total_objective(const ImageTensor& original, const ExtendedLatentCode& code,
                              const Vec& prompt_embedding, const LossWeights& weights,
                              const ModelStack& models);

}  // namespace ganedit
