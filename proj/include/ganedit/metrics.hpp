// Evaluation metrics: semantic relevance, pose IoU, identity similarity, FID,
// and per-prompt aggregation.
#pragma once

#include "ganedit/core.hpp"
#include "ganedit/models.hpp"

#include <optional>
#include <string>
#include <vector>

namespace ganedit {

struct MetricOptions {
  double iou_threshold = 0.5;
};

/// Per-pair scores. fid stays empty at pair level (it is a set statistic).
struct MetricReport {
  double semantic = 0.0;
  std::optional<double> iou;
  std::optional<double> identity;
  std::optional<double> fid;
};

/// cos(embed_image(image), embed_text(prompt)), in [-1, 1].
double semantic_relevance(const ImageTensor& image, const TextPrompt& prompt,
                          const SemanticModel& semantic);

/// Binarizes each part mask at the threshold and averages per-part IoU over
/// parts with a nonempty union. Empty everywhere -> absent.
std::optional<double> pose_iou(const ImageTensor& original, const ImageTensor& edited,
                               const PoseParser& pose,
                               const MetricOptions& options = {});

/// Cosine of the face embeddings; absent when detection fails on either side.
std::optional<double> identity_similarity(const ImageTensor& original,
                                          const ImageTensor& edited,
                                          const FaceEmbedder& face);

/// Frechet distance between Gaussian fits of two embedding sets (rows are
/// samples). Covariances are regularized with eps * I before the square root.
double fid_from_embeddings(const Mat& a, const Mat& b, double eps = 1e-6);

/// Embeds both image sets and applies fid_from_embeddings.
double fid(const std::vector<ImageTensor>& set_a, const std::vector<ImageTensor>& set_b,
           const ImageEmbedder& embedder, double eps = 1e-6);

/// One prompt's worth of per-pair reports plus its set-level FID.
struct PromptGroup {
  std::string prompt_id;
  std::vector<MetricReport> reports;
  std::optional<double> fid;
};

struct MetricMean {
  double mean = 0.0;
  int count = 0;
  int skipped = 0;
};

struct PromptSummary {
  std::string prompt_id;
  std::vector<double> semantic;
  std::vector<double> iou;
  std::vector<double> identity;
  std::optional<double> fid;
  double semantic_mean = 0.0;
  std::optional<double> iou_mean;
  std::optional<double> identity_mean;
};

/// Pair metrics averaged over all (image, prompt) pairs; FID averaged over
/// prompts. Per-prompt distributions are retained for box plots.
struct AggregateSummary {
  MetricMean semantic;
  MetricMean iou;
  MetricMean identity;
  MetricMean fid;
  std::vector<PromptSummary> per_prompt;
};

AggregateSummary aggregate(const std::vector<PromptGroup>& groups);

}  // namespace ganedit
