// The three-stage editing pipeline's middle: latent initialization (encoder /
// mean / style-mixing injection against a prototype bank) and the fixed-step
// first-order optimization of the composite objective.
#pragma once

#include "ganedit/core.hpp"
#include "ganedit/losses.hpp"
#include "ganedit/models.hpp"

#include <filesystem>
#include <utility>
#include <vector>

namespace ganedit {

/// Coarse / medium / fine partition of the generator layers, 1-based to match
/// config and docs; storage converts at the boundary.
struct LayerSubsets {
  int total_layers = 0;
  std::vector<int> coarse;
  std::vector<int> medium;
  std::vector<int> fine;

  /// coarse {1..4}, medium {5..8}, fine {9..L}, truncated for small L.
  static LayerSubsets standard(int total_layers);
  void validate() const;
};

/// Sampled (latent code, unit image embedding) pairs used to initialize
/// inversion toward a text target. Values are held at file precision (f32) so
/// save/load round-trips exactly.
class PrototypeBank {
 public:
  PrototypeBank(Mat codes, Mat embeddings, int layer_count, int style_dim,
                std::int64_t sampler_seed, double truncation);

  int size() const { return static_cast<int>(codes_.rows()); }
  int layer_count() const { return layer_count_; }
  int style_dim() const { return style_dim_; }
  int embed_dim() const { return static_cast<int>(embeddings_.cols()); }
  std::int64_t sampler_seed() const { return sampler_seed_; }
  double truncation() const { return truncation_; }

  const Mat& codes() const { return codes_; }            // N x (layers*style_dim)
  const Mat& embeddings() const { return embeddings_; }  // N x d_clip
  ExtendedLatentCode code_at(int i) const;

  void save(const std::filesystem::path& path) const;
  static PrototypeBank load(const std::filesystem::path& path,
                            const Generator* expected_generator = nullptr,
                            const SemanticModel* expected_semantic = nullptr);

 private:
  Mat codes_;
  Mat embeddings_;
  int layer_count_;
  int style_dim_;
  std::int64_t sampler_seed_;
  double truncation_;
};

/// Samples `count` codes from the generator prior, synthesizes and embeds each
/// one. Deterministic given the seed.
PrototypeBank build_prototype_bank(const Generator& generator,
                                   const SemanticModel& semantic, int count,
                                   std::int64_t seed, double truncation = 1.0);

/// Exact linear scan for argmax_i cos(embedding_i, text_embedding); ties break
/// to the lowest index.
std::pair<int, ExtendedLatentCode> select_prototype(const PrototypeBank& bank,
                                                    const Vec& text_embedding);

/// Rows on the medium subset come from `prototype`, all other rows from `base`.
ExtendedLatentCode inject_medium_subset(const ExtendedLatentCode& base,
                                        const ExtendedLatentCode& prototype,
                                        const LayerSubsets& subsets);

ExtendedLatentCode init_from_encoder(const ImageTensor& image, const ModelStack& models,
                                     LatentSpace space);
ExtendedLatentCode init_from_mean(const Generator& generator);

/// Dispatches on config.init_strategy. The prompt embedding and bank are only
/// consulted for injection initialization.
ExtendedLatentCode initialize_code(const ImageTensor& image,
                                   const std::optional<Vec>& prompt_embedding,
                                   const InversionConfig& config,
                                   const ModelStack& models,
                                   const PrototypeBank* bank = nullptr,
                                   const LayerSubsets* subsets = nullptr);

/// Raised when the objective turns non-finite mid-run.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(int step, const LossBreakdown& at_step);
  int step() const { return step_; }
  const LossBreakdown& breakdown() const { return breakdown_; }

 private:
  int step_;
  LossBreakdown breakdown_;
};

struct InversionResult {
  ExtendedLatentCode optimized_code;
  ImageTensor final_image;
  std::vector<LossBreakdown> trajectory;  // length == config.steps
  ExtendedLatentCode init_code;
  InversionConfig config_echo;
};

/// Runs exactly config.steps adaptive-moment updates of `objective` from
/// `init`. In vanilla mode the single free row is optimized and re-broadcast.
InversionResult optimize_code(const Objective& objective, ExtendedLatentCode init,
                              const InversionConfig& config);

/// Full per-job entry point: initializes per config.init_strategy, builds the
/// standard five-term objective, and runs the optimization. The bank is only
/// consulted for injection initialization.
InversionResult run_inversion(const ImageTensor& image, const TextPrompt& prompt,
                              const LossWeights& weights, const InversionConfig& config,
                              const ModelStack& models,
                              const PrototypeBank* bank = nullptr,
                              const LayerSubsets* subsets = nullptr);

}  // namespace ganedit
