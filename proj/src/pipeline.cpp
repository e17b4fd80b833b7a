#include "ganedit/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <thread>

namespace ganedit {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Preprocessing
// ---------------------------------------------------------------------------

namespace {

double lerp(double a, double b, double t) { return a + t * (b - a); }

int clamp_index(int v, int hi) { return v < 0 ? 0 : (v > hi ? hi : v); }

}  // namespace

ImageTensor preprocess_image(const RawImage& raw, const PreprocessOptions& opts) {
  if (opts.crop_height < 1 || opts.crop_width < 1 || opts.out_side < 1) {
    throw ConfigError("preprocess dimensions must be positive");
  }
  if (raw.height < opts.crop_height || raw.width < opts.crop_width) {
    throw ValidationError("input " + std::to_string(raw.height) + "x" +
                          std::to_string(raw.width) + " is smaller than the crop " +
                          std::to_string(opts.crop_height) + "x" +
                          std::to_string(opts.crop_width));
  }
  const int ch = opts.crop_height;
  const int cw = opts.crop_width;
  const int out = opts.out_side;
  // Top-anchored crop (bottom removed); horizontally centered when wider.
  const int x_off = (raw.width - cw) / 2;

  Vec chw(static_cast<Eigen::Index>(3) * out * out);
  const double sy_scale = static_cast<double>(ch) / out;
  const double sx_scale = static_cast<double>(cw) / out;
  for (int y = 0; y < out; ++y) {
    const double sy = (y + 0.5) * sy_scale - 0.5;
    const int y0 = static_cast<int>(std::floor(sy));
    const double ty = sy - y0;
    const int ya = clamp_index(y0, ch - 1);
    const int yb = clamp_index(y0 + 1, ch - 1);
    for (int x = 0; x < out; ++x) {
      const double sx = (x + 0.5) * sx_scale - 0.5;
      const int x0 = static_cast<int>(std::floor(sx));
      const double tx = sx - x0;
      const int xa = clamp_index(x0, cw - 1);
      const int xb = clamp_index(x0 + 1, cw - 1);
      for (int c = 0; c < 3; ++c) {
        const double top = lerp(raw.at(ya, x_off + xa, c), raw.at(ya, x_off + xb, c), tx);
        const double bot = lerp(raw.at(yb, x_off + xa, c), raw.at(yb, x_off + xb, c), tx);
        chw[(static_cast<Eigen::Index>(c) * out + y) * out + x] = lerp(top, bot, ty);
      }
    }
  }
  return to_canonical_range(chw, 3, out, out, Interval{0.0, 255.0});
}

// ---------------------------------------------------------------------------
// Prompt curation
// ---------------------------------------------------------------------------

CuratedPromptSet curate_prompts(
    const std::vector<std::pair<ImageTensor, TextPrompt>>& pairs, int keep,
    const SemanticModel& semantic) {
  if (pairs.empty()) {
    throw ValidationError("curate needs at least one (image, prompt) pair");
  }
  if (keep < 1) {
    throw ValidationError("keep must be >= 1");
  }
  CuratedPromptSet set;
  set.keep_count = keep;
  for (const auto& [image, prompt] : pairs) {
    set.prompts.push_back({prompt, semantic_relevance(image, prompt, semantic)});
  }
  std::stable_sort(set.prompts.begin(), set.prompts.end(),
                   [](const ScoredPrompt& a, const ScoredPrompt& b) {
                     return a.score > b.score;
                   });
  if (static_cast<int>(set.prompts.size()) > keep) {
    set.prompts.resize(keep);
  }
  return set;
}

void save_curated(const fs::path& path, const CuratedPromptSet& set) {
  json j;
  j["schema"] = "ganedit-curated-v1";
  j["keep_count"] = set.keep_count;
  j["prompts"] = json::array();
  for (const ScoredPrompt& p : set.prompts) {
    j["prompts"].push_back({{"text", p.prompt.text}, {"score", p.score}});
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out || !(out << j.dump(2) << "\n")) {
    throw IoError("cannot write curated prompts: " + path.string());
  }
}

CuratedPromptSet load_curated(const fs::path& path, const SemanticModel& semantic) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open curated prompts: " + path.string());
  }
  json j;
  in >> j;
  CuratedPromptSet set;
  set.keep_count = j.value("keep_count", 120);
  for (const json& p : j.at("prompts")) {
    ScoredPrompt sp;
    sp.prompt = semantic.make_prompt(p.at("text").get<std::string>());
    sp.score = p.value("score", 0.0);
    set.prompts.push_back(std::move(sp));
  }
  return set;
}

// ---------------------------------------------------------------------------
// Persistence helpers
// ---------------------------------------------------------------------------

void write_trajectory_csv(const fs::path& path,
                          const std::vector<LossBreakdown>& trajectory) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw IoError("cannot write trajectory: " + path.string());
  }
  out << "step,clip,pose,reg,im,head,total\n";
  char buf[160];
  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    const LossBreakdown& b = trajectory[i];
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", i,
                  b.clip, b.pose, b.reg, b.im, b.head, b.total);
    out << buf;
  }
  if (!out) {
    throw IoError("failed writing trajectory: " + path.string());
  }
}

namespace {

json metric_report_to_json(const MetricReport& m) {
  json j;
  j["semantic"] = m.semantic;
  j["iou"] = m.iou ? json(*m.iou) : json(nullptr);
  j["identity"] = m.identity ? json(*m.identity) : json(nullptr);
  return j;
}

json inversion_config_to_json(const InversionConfig& c) {
  return json{{"steps", c.steps},
              {"learning_rate", c.learning_rate},
              {"betas", {c.beta1, c.beta2}},
              {"epsilon", c.epsilon},
              {"seed", c.seed},
              {"init_strategy", to_string(c.init_strategy)},
              {"latent_space", to_string(c.latent_space)}};
}

json weights_to_json(const LossWeights& w) {
  return json{{"clip", w.clip}, {"pose", w.pose}, {"reg", w.reg}, {"im", w.im},
              {"head", w.head}};
}

json record_to_json(const EditRecord& r) {
  json j;
  j["image_id"] = r.image_id;
  j["prompt_id"] = r.prompt_id;
  j["status"] = r.failed ? "failed" : "ok";
  if (r.failed) {
    j["failed_stage"] = r.failed_stage;
    j["error"] = r.error;
  } else {
    j["input_image"] = r.input_image_path;
    j["output_image"] = r.output_image_path;
    j["trajectory"] = r.trajectory_path;
    j["metrics"] = metric_report_to_json(r.metrics);
  }
  j["init_strategy"] = to_string(r.init_strategy);
  j["config"] = inversion_config_to_json(r.config_echo);
  j["weights"] = weights_to_json(r.weights_echo);
  return j;
}

json mean_to_json(const MetricMean& m) {
  return json{{"mean", m.count > 0 ? json(m.mean) : json(nullptr)},
              {"count", m.count},
              {"skipped", m.skipped}};
}

}  // namespace

void write_summary_json(const fs::path& path, const AggregateSummary& summary) {
  json j;
  j["schema"] = "ganedit-summary-v1";
  j["overall"] = {{"semantic", mean_to_json(summary.semantic)},
                  {"iou", mean_to_json(summary.iou)},
                  {"identity", mean_to_json(summary.identity)},
                  {"fid", mean_to_json(summary.fid)}};
  j["per_prompt"] = json::array();
  for (const PromptSummary& p : summary.per_prompt) {
    json pj;
    pj["prompt_id"] = p.prompt_id;
    pj["semantic"] = p.semantic;
    pj["iou"] = p.iou;
    pj["identity"] = p.identity;
    pj["fid"] = p.fid ? json(*p.fid) : json(nullptr);
    pj["semantic_mean"] = p.semantic_mean;
    pj["iou_mean"] = p.iou_mean ? json(*p.iou_mean) : json(nullptr);
    pj["identity_mean"] = p.identity_mean ? json(*p.identity_mean) : json(nullptr);
    j["per_prompt"].push_back(std::move(pj));
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out || !(out << j.dump(2) << "\n")) {
    throw IoError("cannot write summary: " + path.string());
  }
}

// ---------------------------------------------------------------------------
// Edit jobs
// ---------------------------------------------------------------------------

EditRecord run_edit_job(const NamedImage& input, const std::string& prompt_id,
                        const TextPrompt& prompt, const ModelStack& models,
                        const LossWeights& weights, const InversionConfig& config,
                        const RunOptions& options, const PrototypeBank* bank,
                        const fs::path& out_dir) {
  EditRecord rec;
  rec.image_id = input.id;
  rec.prompt_id = prompt_id;
  rec.prompt_text = prompt.text;
  rec.init_strategy = config.init_strategy;
  rec.config_echo = config;
  rec.weights_echo = weights;

  const auto start = std::chrono::steady_clock::now();
  std::string stage = "setup";
  try {
    config.validate();
    weights.validate();
    if (!models.generator || !models.semantic || !models.segmenter || !models.pose ||
        !models.face) {
      throw ConfigError("edit jobs need the full model stack attached");
    }
    fs::create_directories(out_dir / "inputs");
    fs::create_directories(out_dir / "images");
    fs::create_directories(out_dir / "trajectories");

    stage = "initialization";
    if (prompt.token_count > SemanticModel::kMaxPromptTokens) {
      throw ValidationError("prompt has " + std::to_string(prompt.token_count) +
                            " tokens, over the 76-token limit");
    }
    std::optional<Vec> prompt_embedding;
    if (weights.clip > 0.0 || config.init_strategy == InitStrategy::kInjection) {
      prompt_embedding = models.semantic->embed_text(prompt);
    }
    const LayerSubsets* subsets = options.subsets ? &*options.subsets : nullptr;
    ExtendedLatentCode init =
        initialize_code(input.image, prompt_embedding, config, models, bank, subsets);

    stage = "inversion";
    Objective objective(input.image, std::move(prompt_embedding), weights, models,
                        config.latent_space == LatentSpace::kVanilla);
    const InversionResult result = optimize_code(objective, std::move(init), config);

    stage = "segmentation";
    const SegmentationTriple seg = models.segmenter->parse(input.image);

    stage = "stitching";
    const ImageTensor stitched =
        stitch(input.image, result.final_image, seg.head(), options.stitch);

    stage = "metrics";
    rec.metrics.semantic = semantic_relevance(stitched, prompt, *models.semantic);
    rec.metrics.iou = pose_iou(input.image, stitched, *models.pose, options.metrics);
    rec.metrics.identity = identity_similarity(input.image, stitched, *models.face);

    stage = "persist";
    const std::string base = input.id + "__" + prompt_id;
    rec.input_image_path = "inputs/" + input.id + ".png";
    rec.output_image_path = "images/" + base + ".png";
    rec.trajectory_path = "trajectories/" + base + ".csv";
    if (!fs::exists(out_dir / rec.input_image_path)) {
      write_png(out_dir / rec.input_image_path, input.image);
    }
    write_png(out_dir / rec.output_image_path, stitched);
    write_trajectory_csv(out_dir / rec.trajectory_path, result.trajectory);
  } catch (const std::exception& e) {
    rec.failed = true;
    rec.failed_stage = stage;
    rec.error = e.what();
    rec.input_image_path.clear();
    rec.output_image_path.clear();
    rec.trajectory_path.clear();
  }
  rec.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

// ---------------------------------------------------------------------------
// Matrix runner
// ---------------------------------------------------------------------------

namespace {

void run_tasks(std::vector<std::function<void()>>& tasks, int workers) {
  if (workers <= 1 || tasks.size() <= 1) {
    for (auto& task : tasks) task();
    return;
  }
  std::atomic<std::size_t> next{0};
  const int pool_size = std::min<int>(workers, static_cast<int>(tasks.size()));
  std::vector<std::thread> pool;
  pool.reserve(pool_size);
  for (int i = 0; i < pool_size; ++i) {
    pool.emplace_back([&] {
      while (true) {
        const std::size_t k = next.fetch_add(1);
        if (k >= tasks.size()) break;
        tasks[k]();
      }
    });
  }
  for (auto& thread : pool) thread.join();
}

std::string prompt_id_of(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "p%03d", index);
  return buf;
}

void write_manifest(const fs::path& out_dir, const std::vector<NamedImage>& images,
                    const CuratedPromptSet& prompts,
                    const std::vector<EditRecord>& records) {
  json j;
  j["schema"] = "ganedit-run-v1";
  j["images"] = json::array();
  for (const NamedImage& image : images) {
    j["images"].push_back(image.id);
  }
  j["prompts"] = json::array();
  for (std::size_t i = 0; i < prompts.prompts.size(); ++i) {
    j["prompts"].push_back({{"id", prompt_id_of(static_cast<int>(i))},
                            {"text", prompts.prompts[i].prompt.text},
                            {"score", prompts.prompts[i].score}});
  }
  j["records"] = json::array();
  for (const EditRecord& r : records) {
    j["records"].push_back(record_to_json(r));
  }
  std::ofstream out(out_dir / "manifest.json", std::ios::trunc);
  if (!out || !(out << j.dump(2) << "\n")) {
    throw IoError("cannot write manifest");
  }
}

void write_timings(const fs::path& out_dir, const std::vector<EditRecord>& records) {
  std::ofstream out(out_dir / "timings.csv", std::ios::trunc);
  if (!out) {
    throw IoError("cannot write timings");
  }
  out << "image_id,prompt_id,wall_time_seconds\n";
  char buf[64];
  for (const EditRecord& r : records) {
    std::snprintf(buf, sizeof(buf), "%.6f\n", r.wall_time_seconds);
    out << r.image_id << "," << r.prompt_id << "," << buf;
  }
}

// Set-level FID per prompt: that prompt's edited outputs against the inputs,
// both reloaded from the persisted 8-bit artifacts.
std::optional<double> prompt_fid(const fs::path& out_dir,
                                 const std::vector<EditRecord>& prompt_records,
                                 const std::vector<std::string>& input_paths,
                                 const ImageEmbedder& embedder) {
  std::vector<ImageTensor> edited;
  for (const EditRecord& r : prompt_records) {
    if (!r.failed) {
      edited.push_back(read_canonical_png(out_dir / r.output_image_path));
    }
  }
  if (edited.size() < 2 || input_paths.size() < 2) {
    return std::nullopt;
  }
  std::vector<ImageTensor> reference;
  reference.reserve(input_paths.size());
  for (const std::string& p : input_paths) {
    reference.push_back(read_canonical_png(out_dir / p));
  }
  return fid(edited, reference, embedder);
}

}  // namespace

MatrixResult run_matrix(const std::vector<NamedImage>& images,
                        const CuratedPromptSet& prompts, const ModelStack& models,
                        const LossWeights& weights, const InversionConfig& config,
                        const RunOptions& options, const PrototypeBank* bank,
                        const fs::path& out_dir) {
  if (images.empty() || prompts.prompts.empty()) {
    throw ValidationError("matrix runs need at least one image and one prompt");
  }
  if (options.batch_width < 1) {
    throw ConfigError("batch width must be >= 1");
  }
  fs::create_directories(out_dir / "inputs");
  fs::create_directories(out_dir / "images");
  fs::create_directories(out_dir / "trajectories");

  // Inputs are shared across prompts; persist them up front.
  std::vector<std::string> input_paths;
  for (const NamedImage& image : images) {
    const std::string rel = "inputs/" + image.id + ".png";
    if (!fs::exists(out_dir / rel)) {
      write_png(out_dir / rel, image.image);
    }
    input_paths.push_back(rel);
  }

  const int n_images = static_cast<int>(images.size());
  const int n_prompts = static_cast<int>(prompts.prompts.size());
  std::vector<EditRecord> records(static_cast<std::size_t>(n_images) * n_prompts);

  // One task per batch: a batch shares one prompt and runs sequentially.
  std::vector<std::function<void()>> tasks;
  for (int ip = 0; ip < n_prompts; ++ip) {
    for (int start = 0; start < n_images; start += options.batch_width) {
      const int stop = std::min(n_images, start + options.batch_width);
      tasks.push_back([&, ip, start, stop] {
        const std::string prompt_id = prompt_id_of(ip);
        for (int ii = start; ii < stop; ++ii) {
          records[static_cast<std::size_t>(ip) * n_images + ii] =
              run_edit_job(images[ii], prompt_id, prompts.prompts[ip].prompt, models,
                           weights, config, options, bank, out_dir);
        }
      });
    }
  }
  run_tasks(tasks, options.workers);

  std::vector<PromptGroup> groups;
  for (int ip = 0; ip < n_prompts; ++ip) {
    PromptGroup group;
    group.prompt_id = prompt_id_of(ip);
    std::vector<EditRecord> prompt_records(
        records.begin() + static_cast<std::ptrdiff_t>(ip) * n_images,
        records.begin() + static_cast<std::ptrdiff_t>(ip + 1) * n_images);
    for (const EditRecord& r : prompt_records) {
      if (!r.failed) {
        group.reports.push_back(r.metrics);
      }
    }
    if (models.semantic) {
      group.fid = prompt_fid(out_dir, prompt_records, input_paths, *models.semantic);
    }
    groups.push_back(std::move(group));
  }

  MatrixResult result;
  result.records = std::move(records);
  result.summary = aggregate(groups);
  result.all_ok = std::none_of(result.records.begin(), result.records.end(),
                               [](const EditRecord& r) { return r.failed; });
  write_manifest(out_dir, images, prompts, result.records);
  write_summary_json(out_dir / "summary.json", result.summary);
  write_timings(out_dir, result.records);
  return result;
}

// ---------------------------------------------------------------------------
// Offline evaluation
// ---------------------------------------------------------------------------

AggregateSummary evaluate_run(const fs::path& run_dir, const ModelStack& models,
                              const RunOptions& options) {
  std::ifstream in(run_dir / "manifest.json");
  if (!in) {
    throw IoError("cannot open manifest under " + run_dir.string());
  }
  json j;
  in >> j;

  std::vector<std::string> input_paths;
  for (const json& id : j.at("images")) {
    input_paths.push_back("inputs/" + id.get<std::string>() + ".png");
  }

  std::vector<PromptGroup> groups;
  for (const json& pj : j.at("prompts")) {
    const std::string prompt_id = pj.at("id").get<std::string>();
    const TextPrompt prompt = models.semantic->make_prompt(pj.at("text").get<std::string>());
    PromptGroup group;
    group.prompt_id = prompt_id;
    std::vector<ImageTensor> edited;
    for (const json& rj : j.at("records")) {
      if (rj.at("prompt_id").get<std::string>() != prompt_id ||
          rj.at("status").get<std::string>() != "ok") {
        continue;
      }
      const ImageTensor input =
          read_canonical_png(run_dir / rj.at("input_image").get<std::string>());
      const ImageTensor output =
          read_canonical_png(run_dir / rj.at("output_image").get<std::string>());
      MetricReport report;
      report.semantic = semantic_relevance(output, prompt, *models.semantic);
      report.iou = pose_iou(input, output, *models.pose, options.metrics);
      report.identity = identity_similarity(input, output, *models.face);
      group.reports.push_back(report);
      edited.push_back(output);
    }
    if (edited.size() >= 2 && input_paths.size() >= 2) {
      std::vector<ImageTensor> reference;
      for (const std::string& p : input_paths) {
        reference.push_back(read_canonical_png(run_dir / p));
      }
      group.fid = fid(edited, reference, *models.semantic);
    }
    groups.push_back(std::move(group));
  }
  AggregateSummary summary = aggregate(groups);
  write_summary_json(run_dir / "eval_summary.json", summary);
  return summary;
}

// ---------------------------------------------------------------------------
// Tool configuration
// ---------------------------------------------------------------------------

namespace {

fs::path resolve_checkpoint_path(const fs::path& p) {
  if (p.is_absolute()) {
    return p;
  }
  if (const char* cache = std::getenv(kModelCacheEnv)) {
    const fs::path cached = fs::path(cache) / p;
    if (fs::exists(cached)) {
      return cached;
    }
  }
  return p;
}

LayerSubsets subsets_from_json(const json& j) {
  LayerSubsets s;
  s.total_layers = j.at("total_layers").get<int>();
  for (const json& v : j.value("coarse", json::array())) s.coarse.push_back(v.get<int>());
  for (const json& v : j.value("medium", json::array())) s.medium.push_back(v.get<int>());
  for (const json& v : j.value("fine", json::array())) s.fine.push_back(v.get<int>());
  s.validate();
  return s;
}

}  // namespace

ToolConfig load_tool_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open config: " + path.string());
  }
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config parse error in " + path.string() + ": " + e.what());
  }

  ToolConfig c;
  if (j.contains("models")) {
    const json& m = j["models"];
    if (m.contains("toy")) {
      const json& t = m["toy"];
      c.models.toy.image_side = t.value("image_side", c.models.toy.image_side);
      c.models.toy.layer_count = t.value("layer_count", c.models.toy.layer_count);
      c.models.toy.style_dim = t.value("style_dim", c.models.toy.style_dim);
      c.models.toy.clip_dim = t.value("clip_dim", c.models.toy.clip_dim);
      c.models.toy.face_dim = t.value("face_dim", c.models.toy.face_dim);
      c.models.toy.part_count = t.value("part_count", c.models.toy.part_count);
      c.models.toy.seed = t.value("seed", c.models.toy.seed);
      if (t.contains("part_subset")) {
        for (const json& v : t["part_subset"]) {
          c.models.toy.part_subset.push_back(v.get<int>());
        }
      }
    }
    if (m.contains("checkpoint")) {
      CheckpointRef ref;
      ref.path = m["checkpoint"].at("path").get<std::string>();
      ref.sha256_hex = m["checkpoint"].value("sha256", "");
      c.models.checkpoint = std::move(ref);
    }
  }
  if (j.contains("weights")) {
    const json& w = j["weights"];
    c.weights.clip = w.value("clip", c.weights.clip);
    c.weights.pose = w.value("pose", c.weights.pose);
    c.weights.reg = w.value("reg", c.weights.reg);
    c.weights.im = w.value("im", c.weights.im);
    c.weights.head = w.value("head", c.weights.head);
  }
  if (j.contains("inversion")) {
    const json& i = j["inversion"];
    c.inversion.steps = i.value("steps", c.inversion.steps);
    c.inversion.learning_rate = i.value("learning_rate", c.inversion.learning_rate);
    if (i.contains("betas")) {
      c.inversion.beta1 = i["betas"].at(0).get<double>();
      c.inversion.beta2 = i["betas"].at(1).get<double>();
    }
    c.inversion.epsilon = i.value("epsilon", c.inversion.epsilon);
    c.inversion.seed = i.value("seed", c.inversion.seed);
    if (i.contains("init_strategy")) {
      c.inversion.init_strategy =
          init_strategy_from_string(i["init_strategy"].get<std::string>());
    }
    if (i.contains("latent_space")) {
      c.inversion.latent_space =
          latent_space_from_string(i["latent_space"].get<std::string>());
    }
  }
  if (j.contains("preprocess")) {
    const json& p = j["preprocess"];
    c.preprocess.crop_height = p.value("crop_height", c.preprocess.crop_height);
    c.preprocess.crop_width = p.value("crop_width", c.preprocess.crop_width);
    c.preprocess.out_side = p.value("out_side", c.preprocess.out_side);
  }
  if (j.contains("subsets")) {
    c.subsets = subsets_from_json(j["subsets"]);
  }
  if (j.contains("stitch")) {
    const json& s = j["stitch"];
    const std::string mode = s.value("mask_mode", "soft");
    if (mode == "soft") {
      c.run.stitch.mask_mode = MaskMode::kSoft;
    } else if (mode == "hard") {
      c.run.stitch.mask_mode = MaskMode::kHard;
    } else {
      throw ConfigError("unknown stitch mask_mode: " + mode);
    }
    c.run.stitch.hard_threshold = s.value("hard_threshold", c.run.stitch.hard_threshold);
  }
  if (j.contains("metrics")) {
    c.run.metrics.iou_threshold =
        j["metrics"].value("iou_threshold", c.run.metrics.iou_threshold);
  }
  if (j.contains("run")) {
    const json& r = j["run"];
    c.run.batch_width = r.value("batch_width", c.run.batch_width);
    c.run.workers = r.value("workers", c.run.workers);
    c.keep_prompts = r.value("keep_prompts", c.keep_prompts);
  }
  if (j.contains("bank")) {
    c.bank_truncation = j["bank"].value("truncation", c.bank_truncation);
  }
  c.run.subsets = c.subsets;
  return c;
}

ModelStack build_model_stack(const ToolConfig& config) {
  if (config.models.checkpoint) {
    CheckpointRef ref = *config.models.checkpoint;
    ref.path = resolve_checkpoint_path(ref.path);
    return load_toy_checkpoint(ref).second;
  }
  return make_toy_stack(config.models.toy);
}

}  // namespace ganedit
