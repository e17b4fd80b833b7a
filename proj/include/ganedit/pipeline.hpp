// Operational shell: preprocessing, prompt curation, edit jobs, the full
// image x prompt matrix runner, persistence, and the declarative tool config.
#pragma once

#include "ganedit/core.hpp"
#include "ganedit/image_io.hpp"
#include "ganedit/inversion.hpp"
#include "ganedit/losses.hpp"
#include "ganedit/metrics.hpp"
#include "ganedit/models.hpp"
#include "ganedit/stitching.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ganedit {

struct PreprocessOptions {
  int crop_height = 192;
  int crop_width = 192;
  int out_side = 256;
};

/// Top-anchored crop (bottom removed, horizontally centered), bilinear resize
/// to out_side, and conversion to the canonical channels-first range.
ImageTensor preprocess_image(const RawImage& raw, const PreprocessOptions& opts = {});

struct ScoredPrompt {
  TextPrompt prompt;
  double score = 0.0;
};

struct CuratedPromptSet {
  std::vector<ScoredPrompt> prompts;  // sorted descending by score
  int keep_count = 120;
};

/// Scores each (image, prompt) pair by semantic relevance and keeps the
/// best-matching `keep` prompts. Ties keep input order.
CuratedPromptSet curate_prompts(
    const std::vector<std::pair<ImageTensor, TextPrompt>>& pairs, int keep,
    const SemanticModel& semantic);

void save_curated(const std::filesystem::path& path, const CuratedPromptSet& set);
CuratedPromptSet load_curated(const std::filesystem::path& path,
                              const SemanticModel& semantic);

struct RunOptions {
  int batch_width = 20;
  int workers = 1;
  StitchPolicy stitch;
  MetricOptions metrics;
  std::optional<LayerSubsets> subsets;
};

struct NamedImage {
  std::string id;
  ImageTensor image;
};

struct EditRecord {
  std::string image_id;
  std::string prompt_id;
  std::string prompt_text;
  InitStrategy init_strategy = InitStrategy::kEncoder;
  InversionConfig config_echo;
  LossWeights weights_echo;
  std::string input_image_path;   // paths relative to the run directory
  std::string output_image_path;
  std::string trajectory_path;
  MetricReport metrics;
  double wall_time_seconds = 0.0;
  bool failed = false;
  std::string failed_stage;
  std::string error;
};

/// Runs one (image, prompt) edit end to end and persists its artifacts under
/// out_dir. Failures are captured in the record, not thrown.
EditRecord run_edit_job(const NamedImage& input, const std::string& prompt_id,
                        const TextPrompt& prompt, const ModelStack& models,
                        const LossWeights& weights, const InversionConfig& config,
                        const RunOptions& options, const PrototypeBank* bank,
                        const std::filesystem::path& out_dir);

struct MatrixResult {
  std::vector<EditRecord> records;
  AggregateSummary summary;
  bool all_ok = false;
};

/// Runs every (image, prompt) combination, batching images per prompt, and
/// writes manifest.json, summary.json, and timings.csv under out_dir.
MatrixResult run_matrix(const std::vector<NamedImage>& images,
                        const CuratedPromptSet& prompts, const ModelStack& models,
                        const LossWeights& weights, const InversionConfig& config,
                        const RunOptions& options, const PrototypeBank* bank,
                        const std::filesystem::path& out_dir);

/// Recomputes metrics from the persisted artifacts of a previous run and
/// returns the aggregate (also written to eval_summary.json).
AggregateSummary evaluate_run(const std::filesystem::path& run_dir,
                              const ModelStack& models, const RunOptions& options);

void write_summary_json(const std::filesystem::path& path, const AggregateSummary& summary);
void write_trajectory_csv(const std::filesystem::path& path,
                          const std::vector<LossBreakdown>& trajectory);

// ---------------------------------------------------------------------------
// Declarative tool configuration
// ---------------------------------------------------------------------------

struct ModelsConfig {
  ToyStackConfig toy;
  std::optional<CheckpointRef> checkpoint;  // wins over `toy` when set
};

/// One config file drives every subcommand; CLI flags override file keys.
struct ToolConfig {
  ModelsConfig models;
  LossWeights weights;
  InversionConfig inversion;
  PreprocessOptions preprocess;
  RunOptions run;
  std::optional<LayerSubsets> subsets;
  double bank_truncation = 1.0;
  int keep_prompts = 120;
};

ToolConfig load_tool_config(const std::filesystem::path& path);
ModelStack build_model_stack(const ToolConfig& config);

/// Environment variable naming the directory used to resolve relative
/// checkpoint paths.
constexpr const char* kModelCacheEnv = "GANEDIT_MODEL_CACHE";

}  // namespace ganedit
