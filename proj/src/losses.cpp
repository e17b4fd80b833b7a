#include "ganedit/losses.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

namespace ganedit {

std::vector<LossTerm> all_loss_terms() {
  return {LossTerm::kClip, LossTerm::kPose, LossTerm::kReg, LossTerm::kIm,
          LossTerm::kHead};
}

double semantic_loss(const ImageTensor& image, const Vec& prompt_embedding,
                     const SemanticModel& semantic, Vec* image_grad) {
  const Vec v = semantic.embed_image(image);
  if (v.size() != prompt_embedding.size()) {
    throw ShapeError("prompt embedding dimension does not match the image embedding");
  }
  const double cos = std::clamp(v.dot(prompt_embedding), -1.0, 1.0);
  if (image_grad) {
    *image_grad = semantic.embed_image_vjp(image, -prompt_embedding);
  }
  return 1.0 - cos;
}

namespace {

double mask_set_distance(const BodyPartMaskSet& a, const BodyPartMaskSet& b,
                         Mat* diff_out) {
  if (a.part_count() != b.part_count() || a.side != b.side) {
    throw ShapeError("mask sets do not align");
  }
  if (a.part_count() == 0) {
    throw ConfigError("pose part subset is empty after configuration");
  }
  Mat diff = b.masks - a.masks;
  const double value = diff.squaredNorm() / a.part_count();
  if (diff_out) {
    *diff_out = std::move(diff);
  }
  return value;
}

}  // namespace

double pose_loss(const ImageTensor& original, const ImageTensor& generated,
                 const PoseParser& pose, Vec* generated_grad) {
  if (original.side() != generated.side()) {
    throw ShapeError("pose loss images must share one side length");
  }
  const BodyPartMaskSet ref = pose.parse(original);
  const BodyPartMaskSet gen = pose.parse(generated);
  Mat diff;
  const double value = mask_set_distance(ref, gen, &diff);
  if (generated_grad) {
    diff *= 2.0 / ref.part_count();
    *generated_grad = pose.parse_vjp(generated, diff);
  }
  return value;
}

double latent_regularization(const ExtendedLatentCode& code, Mat* code_grad) {
  const int layers = code.layer_count();
  if (layers < 2) {
    throw ConfigError("latent regularizer needs at least two layer codes; "
                      "disable it in vanilla space");
  }
  const Mat& rows = code.rows();
  const double scale = 1.0 / (layers - 1);
  double value = 0.0;
  if (code_grad) {
    code_grad->setZero(layers, code.style_dim());
  }
  for (int j = 1; j < layers; ++j) {
    const Eigen::RowVectorXd d = rows.row(0) - rows.row(j);
    value += scale * d.squaredNorm();
    if (code_grad) {
      code_grad->row(0) += 2.0 * scale * d;
      code_grad->row(j) -= 2.0 * scale * d;
    }
  }
  return value;
}

namespace {

double masked_image_distance(const ImageTensor& original, const ImageTensor& generated,
                             const Vec& mask, Vec* generated_grad) {
  const int px = original.pixel_count();
  if (generated.side() != original.side() || mask.size() != px) {
    throw ShapeError("composition loss shapes do not align");
  }
  double value = 0.0;
  if (generated_grad) {
    generated_grad->setZero(original.size());
  }
  for (int c = 0; c < ImageTensor::kChannels; ++c) {
    const int base = c * px;
    for (int p = 0; p < px; ++p) {
      const double d = mask[p] * (generated.data()[base + p] - original.data()[base + p]);
      value += d * d;
      if (generated_grad) {
        (*generated_grad)[base + p] = 2.0 * mask[p] * d;
      }
    }
  }
  return value;
}

double head_distance(const Vec& head_ref, const ImageTensor& generated,
                     const Segmenter& segmenter, Vec* generated_grad) {
  const SegmentationTriple seg_g = segmenter.parse(generated);
  if (head_ref.size() != seg_g.probs.cols()) {
    throw ShapeError("head loss shapes do not align");
  }
  const Vec diff = seg_g.head() - head_ref;
  if (generated_grad) {
    Mat upstream = Mat::Zero(3, diff.size());
    upstream.row(2) = 2.0 * diff.transpose();
    *generated_grad = segmenter.parse_vjp(generated, upstream);
  }
  return diff.squaredNorm();
}

}  // namespace

double composition_image_loss(const ImageTensor& original, const ImageTensor& generated,
                              const SegmentationTriple& seg_of_original,
                              Vec* generated_grad) {
  if (seg_of_original.side != original.side()) {
    throw ShapeError("segmentation does not match the original image");
  }
  const Vec mask = (1.0 - seg_of_original.body().array()).matrix();
  return masked_image_distance(original, generated, mask, generated_grad);
}

double composition_head_loss(const ImageTensor& original, const ImageTensor& generated,
                             const Segmenter& segmenter, Vec* generated_grad) {
  if (original.side() != generated.side()) {
    throw ShapeError("head loss images must share one side length");
  }
  const Vec head_ref = segmenter.parse(original).head();
  return head_distance(head_ref, generated, segmenter, generated_grad);
}

// ---------------------------------------------------------------------------
// Objective
// ---------------------------------------------------------------------------

Objective::Objective(ImageTensor original, std::optional<Vec> prompt_embedding,
                     LossWeights weights, const ModelStack& models, bool vanilla_mode,
                     std::vector<LossTerm> terms)
    : original_(std::move(original)),
      prompt_embedding_(std::move(prompt_embedding)),
      weights_(weights),
      models_(&models),
      vanilla_mode_(vanilla_mode),
      terms_(std::move(terms)) {
  weights_.validate();
  if (!models_->generator) {
    throw ConfigError("objective requires an attached generator");
  }
  if (vanilla_mode_ && weights_.reg > 0.0 &&
      std::count(terms_.begin(), terms_.end(), LossTerm::kReg) > 0) {
    std::cerr << "warning: latent regularizer is degenerate in vanilla space; "
                 "forcing its contribution to zero\n";
  }
  if (enabled(LossTerm::kClip)) {
    if (!prompt_embedding_) {
      throw ConfigError("semantic term is enabled but no prompt embedding was given");
    }
    if (!models_->semantic) {
      throw ConfigError("semantic term requires an attached semantic model");
    }
  }
  if (enabled(LossTerm::kPose)) {
    if (!models_->pose) {
      throw ConfigError("pose term requires an attached pose parser");
    }
    pose_reference_ = models_->pose->parse(original_);
    if (pose_reference_->part_count() == 0) {
      throw ConfigError("pose part subset is empty after configuration");
    }
  }
  if (enabled(LossTerm::kIm) || enabled(LossTerm::kHead)) {
    if (!models_->segmenter) {
      throw ConfigError("composition terms require an attached segmenter");
    }
    const SegmentationTriple seg = models_->segmenter->parse(original_);
    if (enabled(LossTerm::kIm)) {
      composition_mask_ = (1.0 - seg.body().array()).matrix();
    }
    if (enabled(LossTerm::kHead)) {
      head_reference_ = seg.head();
    }
  }
}

bool Objective::enabled(LossTerm t) const {
  if (std::count(terms_.begin(), terms_.end(), t) == 0) {
    return false;
  }
  switch (t) {
    case LossTerm::kClip:
      return weights_.clip > 0.0;
    case LossTerm::kPose:
      return weights_.pose > 0.0;
    case LossTerm::kReg:
      return weights_.reg > 0.0 && !vanilla_mode_;
    case LossTerm::kIm:
      return weights_.im > 0.0;
    case LossTerm::kHead:
      return weights_.head > 0.0;
  }
  return false;
}

LossBreakdown Objective::evaluate(const ExtendedLatentCode& code, Mat* code_grad) const {
  const Generator& gen = *models_->generator;
  validate_latent(code, gen.layer_count());
  const ImageTensor image = gen.synthesize(code);

  LossBreakdown out;
  Vec image_grad;
  Vec term_grad;
  if (code_grad) {
    image_grad = Vec::Zero(image.size());
  }
  Vec* term_grad_ptr = code_grad ? &term_grad : nullptr;

  if (enabled(LossTerm::kClip)) {
    out.clip = semantic_loss(image, *prompt_embedding_, *models_->semantic, term_grad_ptr);
    if (code_grad) image_grad += weights_.clip * term_grad;
  }
  if (enabled(LossTerm::kPose)) {
    const BodyPartMaskSet gen_masks = models_->pose->parse(image);
    Mat diff;
    out.pose = mask_set_distance(*pose_reference_, gen_masks, &diff);
    if (code_grad) {
      diff *= 2.0 / pose_reference_->part_count();
      image_grad += weights_.pose * models_->pose->parse_vjp(image, diff);
    }
  }
  if (enabled(LossTerm::kIm)) {
    out.im = masked_image_distance(original_, image, *composition_mask_, term_grad_ptr);
    if (code_grad) image_grad += weights_.im * term_grad;
  }
  if (enabled(LossTerm::kHead)) {
    out.head = head_distance(*head_reference_, image, *models_->segmenter, term_grad_ptr);
    if (code_grad) image_grad += weights_.head * term_grad;
  }

  Mat reg_grad;
  if (enabled(LossTerm::kReg)) {
    out.reg = latent_regularization(code, code_grad ? &reg_grad : nullptr);
  }

  if (code_grad) {
    *code_grad = gen.synthesize_vjp(code, image_grad);
    if (enabled(LossTerm::kReg)) {
      *code_grad += weights_.reg * reg_grad;
    }
  }

  out.total = weights_.clip * out.clip + weights_.pose * out.pose +
              weights_.reg * out.reg + weights_.im * out.im + weights_.head * out.head;
  return out;
}

LossBreakdown total_objective(const ImageTensor& original, const ExtendedLatentCode& code,
                              const Vec& prompt_embedding, const LossWeights& weights,
                              const ModelStack& models) {
  Objective objective(original, prompt_embedding, weights, models, /*vanilla_mode=*/false);
  return objective.evaluate(code);
}

}  // namespace ganedit
