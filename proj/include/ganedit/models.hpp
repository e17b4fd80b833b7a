// Abstract interfaces for the auxiliary networks (generator, image-text
// embedder, pose parser, segmenter, inversion encoder, face embedder) and the
// seeded fixed-weight toy reference implementations that make the full
// pipeline testable without pretrained checkpoints.
//
// Every op that appears inside the optimization objective exposes a
// vector-Jacobian product next to its forward pass, so adapters around real
// differentiable models and the toy stack share one contract.
#pragma once

#include "ganedit/core.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

namespace ganedit {

/// Soft per-part presence maps, one row per part, each row an n*n image in
/// [0, 1]. part_indices lists the (1-based) part labels in row order.
struct BodyPartMaskSet {
  int side = 0;
  Mat masks;                      // parts x n^2
  std::vector<int> part_indices;  // labels, size == masks.rows()

  int part_count() const { return static_cast<int>(masks.rows()); }
};

/// Per-pixel class probabilities for background / body / head. Rows sum to 1
/// per pixel.
struct SegmentationTriple {
  int side = 0;
  Mat probs;  // 3 x n^2

  Eigen::VectorXd bg() const { return probs.row(0).transpose(); }
  Eigen::VectorXd body() const { return probs.row(1).transpose(); }
  Eigen::VectorXd head() const { return probs.row(2).transpose(); }
};

class Generator {
 public:
  virtual ~Generator() = default;

  virtual int layer_count() const = 0;
  virtual int style_dim() const = 0;
  virtual int output_side() const = 0;
  virtual const ExtendedLatentCode& mean_code() const = 0;

  /// Pure function of the code; output follows the canonical image contract.
  virtual ImageTensor synthesize(const ExtendedLatentCode& code) const = 0;

  /// d(loss)/d(code) given d(loss)/d(image pixels).
  virtual Mat synthesize_vjp(const ExtendedLatentCode& code,
                             const Vec& image_grad) const = 0;

  /// Draws a code from the native prior through the style pathway.
  /// truncation in (0, 1] pulls the draw toward the mean code (1 = none).
  virtual ExtendedLatentCode sample_code(Rng& rng, double truncation) const = 0;
};

class ImageEmbedder {
 public:
  virtual ~ImageEmbedder() = default;
  virtual int embed_dim() const = 0;
  virtual Vec embed_image(const ImageTensor& image) const = 0;
};

class SemanticModel : public ImageEmbedder {
 public:
  static constexpr int kMaxPromptTokens = 76;

  virtual Vec embed_image_vjp(const ImageTensor& image,
                              const Vec& upstream) const = 0;

  virtual int count_tokens(const std::string& text) const = 0;
  TextPrompt make_prompt(const std::string& text) const {
    return TextPrompt{text, count_tokens(text)};
  }

  /// Unit-norm text embedding. Prompts above kMaxPromptTokens are rejected.
  virtual Vec embed_text(const TextPrompt& prompt) const = 0;
};

class PoseParser {
 public:
  virtual ~PoseParser() = default;
  virtual BodyPartMaskSet parse(const ImageTensor& image) const = 0;
  /// d(loss)/d(pixels) given d(loss)/d(masks), upstream shaped parts x n^2.
  virtual Vec parse_vjp(const ImageTensor& image, const Mat& upstream) const = 0;
};

class Segmenter {
 public:
  virtual ~Segmenter() = default;
  virtual SegmentationTriple parse(const ImageTensor& image) const = 0;
  /// d(loss)/d(pixels) given d(loss)/d(probs), upstream shaped 3 x n^2.
  virtual Vec parse_vjp(const ImageTensor& image, const Mat& upstream) const = 0;
};

class InversionEncoder {
 public:
  virtual ~InversionEncoder() = default;
  virtual ExtendedLatentCode invert(const ImageTensor& image) const = 0;
};

class FaceEmbedder {
 public:
  virtual ~FaceEmbedder() = default;
  /// Unit-norm identity embedding, or nullopt when no face is found.
  virtual std::optional<Vec> embed(const ImageTensor& image) const = 0;
};

/// Read-only bundle of every attached model. Handles are immutable after
/// load and safe for concurrent inference.
struct ModelStack {
  std::shared_ptr<const Generator> generator;
  std::shared_ptr<const SemanticModel> semantic;
  std::shared_ptr<const PoseParser> pose;
  std::shared_ptr<const Segmenter> segmenter;
  std::shared_ptr<const InversionEncoder> encoder;          // extended-space E
  std::shared_ptr<const InversionEncoder> vanilla_encoder;  // single-row variant
  std::shared_ptr<const FaceEmbedder> face;
};

// ---------------------------------------------------------------------------
// Toy reference stack
// ---------------------------------------------------------------------------

struct ToyStackConfig {
  int image_side = 16;
  int layer_count = 6;
  int style_dim = 16;
  int clip_dim = 8;
  int face_dim = 8;
  int part_count = 4;
  std::vector<int> part_subset;  // 1-based labels; empty = all parts
  std::uint64_t seed = 7;
};

/// Linear generator: image = A * flatten(code), with a seeded affine style
/// pathway mapping prior draws to broadcast (vanilla) codes.
class ToyGenerator : public Generator {
 public:
  explicit ToyGenerator(const ToyStackConfig& cfg, std::uint64_t seed);

  int layer_count() const override { return layer_count_; }
  int style_dim() const override { return style_dim_; }
  int output_side() const override { return side_; }
  const ExtendedLatentCode& mean_code() const override { return mean_code_; }

  ImageTensor synthesize(const ExtendedLatentCode& code) const override;
  Mat synthesize_vjp(const ExtendedLatentCode& code,
                     const Vec& image_grad) const override;
  ExtendedLatentCode sample_code(Rng& rng, double truncation) const override;

  /// Synthesis matrix, exposed so tests can run direct linear-algebra oracles.
  const Mat& weight_matrix() const { return weights_; }
  const Mat& style_map() const { return style_map_; }
  const Vec& style_bias() const { return style_bias_; }

 private:
  int side_;
  int layer_count_;
  int style_dim_;
  Mat weights_;    // (3 n^2) x (layers * style_dim)
  Mat style_map_;  // style_dim x style_dim
  Vec style_bias_;
  ExtendedLatentCode mean_code_;
};

/// Fixed random projection plus bias, normalized; text side hashes the prompt
/// into a seeded unit vector. The bias keeps the zero image embeddable.
class ToySemanticModel : public SemanticModel {
 public:
  ToySemanticModel(int image_side, int clip_dim, std::uint64_t seed);

  int embed_dim() const override { return static_cast<int>(bias_.size()); }
  Vec embed_image(const ImageTensor& image) const override;
  Vec embed_image_vjp(const ImageTensor& image, const Vec& upstream) const override;
  int count_tokens(const std::string& text) const override;
  Vec embed_text(const TextPrompt& prompt) const override;

  const Mat& projection() const { return projection_; }
  const Vec& bias() const { return bias_; }

 private:
  Mat projection_;  // clip_dim x (3 n^2)
  Vec bias_;
  std::uint64_t seed_;
};

/// Smooth soft part maps: per part a sigmoid over a blurred channel mix.
class ToyPoseParser : public PoseParser {
 public:
  ToyPoseParser(int image_side, int part_count, std::vector<int> part_subset,
                std::uint64_t seed);

  BodyPartMaskSet parse(const ImageTensor& image) const override;
  Vec parse_vjp(const ImageTensor& image, const Mat& upstream) const override;

  const std::vector<int>& active_parts() const { return active_parts_; }

 private:
  int side_;
  Mat channel_mix_;  // parts x 3
  Vec part_bias_;
  std::vector<int> active_parts_;  // 1-based labels after subset filtering
};

/// 3x3 convolution logits over the three classes + per-pixel softmax.
class ToySegmenter : public Segmenter {
 public:
  ToySegmenter(int image_side, std::uint64_t seed);

  SegmentationTriple parse(const ImageTensor& image) const override;
  Vec parse_vjp(const ImageTensor& image, const Mat& upstream) const override;

 private:
  Mat logits(const ImageTensor& image) const;  // 3 x n^2
  int side_;
  // kernels_[k] is a 3 x 9 block: input channel x kernel tap.
  std::vector<Mat> kernels_;
  Vec class_bias_;
};

/// Pseudo-inverse of the toy generator; the vanilla variant solves for the
/// best single broadcast row.
class PinvEncoder : public InversionEncoder {
 public:
  PinvEncoder(const ToyGenerator& generator, LatentSpace space);
  ExtendedLatentCode invert(const ImageTensor& image) const override;

 private:
  LatentSpace space_;
  int layer_count_;
  int style_dim_;
  Mat pinv_;  // code dim x (3 n^2)
};

/// Fixed projection of the top image quarter, normalized.
class ToyFaceEmbedder : public FaceEmbedder {
 public:
  ToyFaceEmbedder(int image_side, int face_dim, std::uint64_t seed);
  std::optional<Vec> embed(const ImageTensor& image) const override;

  const Mat& projection() const { return projection_; }
  const Vec& bias() const { return bias_; }
  int quarter_rows() const { return quarter_rows_; }

 private:
  int side_;
  int quarter_rows_;
  Mat projection_;
  Vec bias_;
};

/// Shipped desk-scale stack: every model seeded from cfg.seed.
ModelStack make_toy_stack(const ToyStackConfig& cfg);

// ---------------------------------------------------------------------------
// Checkpoint contract
// ---------------------------------------------------------------------------

/// Filesystem path plus expected SHA-256 of the contents. An empty hash skips
/// verification; a mismatch is a hard error.
struct CheckpointRef {
  std::filesystem::path path;
  std::string sha256_hex;
};

std::string sha256_hex(const void* data, std::size_t size);
std::vector<std::uint8_t> load_checkpoint_bytes(const CheckpointRef& ref);

/// Serializes the toy stack configuration and derived weights.
void save_toy_checkpoint(const std::filesystem::path& path, const ToyStackConfig& cfg);
/// Loads a toy checkpoint, verifying the content hash first.
std::pair<ToyStackConfig, ModelStack> load_toy_checkpoint(const CheckpointRef& ref);

}  // namespace ganedit
