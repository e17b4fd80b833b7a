// Command-line front end: preprocess, curate, bank build/query, edit, matrix,
// eval, ablate, and plot subcommands over one declarative config file.
#include <CLI11.hpp>
#include <json.hpp>

#include "ganedit/pipeline.hpp"
#include "ganedit/plot.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace ganedit;
using nlohmann::json;

namespace {

struct CommonOpts {
  std::string config_path;
  std::optional<int> steps;
  std::optional<double> learning_rate;
  std::optional<std::int64_t> seed;
  std::optional<std::string> init_strategy;
  std::optional<std::string> latent_space;
  std::optional<int> workers;
  std::optional<int> batch_width;
  std::optional<double> w_clip, w_pose, w_reg, w_im, w_head;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "Path to the JSON config file");
  cmd->add_option("--steps", opts.steps, "Optimization steps");
  cmd->add_option("--learning-rate", opts.learning_rate, "Optimizer learning rate");
  cmd->add_option("--seed", opts.seed, "Job seed");
  cmd->add_option("--init", opts.init_strategy, "Init strategy: encoder|mean|injection");
  cmd->add_option("--latent-space", opts.latent_space, "Latent space: vanilla|extended");
  cmd->add_option("--workers", opts.workers, "Worker pool size");
  cmd->add_option("--batch-width", opts.batch_width, "Images per batch");
  cmd->add_option("--weight-clip", opts.w_clip, "Semantic loss weight");
  cmd->add_option("--weight-pose", opts.w_pose, "Pose loss weight");
  cmd->add_option("--weight-reg", opts.w_reg, "Latent regularizer weight");
  cmd->add_option("--weight-im", opts.w_im, "Image composition loss weight");
  cmd->add_option("--weight-head", opts.w_head, "Head composition loss weight");
}

ToolConfig resolve_config(const CommonOpts& opts) {
  ToolConfig config;
  if (!opts.config_path.empty()) {
    config = load_tool_config(opts.config_path);
  }
  if (opts.steps) config.inversion.steps = *opts.steps;
  if (opts.learning_rate) config.inversion.learning_rate = *opts.learning_rate;
  if (opts.seed) config.inversion.seed = *opts.seed;
  if (opts.init_strategy) {
    config.inversion.init_strategy = init_strategy_from_string(*opts.init_strategy);
  }
  if (opts.latent_space) {
    config.inversion.latent_space = latent_space_from_string(*opts.latent_space);
  }
  if (opts.workers) config.run.workers = *opts.workers;
  if (opts.batch_width) config.run.batch_width = *opts.batch_width;
  if (opts.w_clip) config.weights.clip = *opts.w_clip;
  if (opts.w_pose) config.weights.pose = *opts.w_pose;
  if (opts.w_reg) config.weights.reg = *opts.w_reg;
  if (opts.w_im) config.weights.im = *opts.w_im;
  if (opts.w_head) config.weights.head = *opts.w_head;
  return config;
}

std::vector<fs::path> list_pngs(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw IoError("not a directory: " + dir.string());
  }
  std::vector<fs::path> paths;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") {
      paths.push_back(entry.path());
    }
  }
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) {
    throw IoError("no .png files under " + dir.string());
  }
  return paths;
}

std::vector<NamedImage> load_canonical_dir(const fs::path& dir) {
  std::vector<NamedImage> images;
  for (const fs::path& p : list_pngs(dir)) {
    images.push_back({p.stem().string(), read_canonical_png(p)});
  }
  return images;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) {
      lines.push_back(line);
    }
  }
  return lines;
}

CuratedPromptSet load_prompts(const fs::path& path, const SemanticModel& semantic) {
  if (path.extension() == ".json") {
    return load_curated(path, semantic);
  }
  CuratedPromptSet set;
  const auto lines = read_lines(path);
  set.keep_count = static_cast<int>(lines.size());
  for (const std::string& text : lines) {
    set.prompts.push_back({semantic.make_prompt(text), 0.0});
  }
  if (set.prompts.empty()) {
    throw ValidationError("prompt file is empty: " + path.string());
  }
  return set;
}

void print_summary(const AggregateSummary& summary) {
  const auto line = [](const char* name, const MetricMean& m) {
    std::cout << "  " << name << ": ";
    if (m.count > 0) {
      std::cout << m.mean << " (n=" << m.count;
      if (m.skipped > 0) std::cout << ", skipped=" << m.skipped;
      std::cout << ")\n";
    } else {
      std::cout << "n/a\n";
    }
  };
  std::cout << "summary:\n";
  line("semantic", summary.semantic);
  line("iou", summary.iou);
  line("identity", summary.identity);
  line("fid", summary.fid);
}

int run_matrix_command(const ToolConfig& config, const fs::path& images_dir,
                       const fs::path& prompts_path, const fs::path& out_dir) {
  const ModelStack stack = build_model_stack(config);
  const std::vector<NamedImage> images = load_canonical_dir(images_dir);
  const CuratedPromptSet prompts = load_prompts(prompts_path, *stack.semantic);

  std::optional<PrototypeBank> bank;
  if (config.inversion.init_strategy == InitStrategy::kInjection) {
    throw ConfigError("matrix with injection init needs --bank (use `edit`/config)");
  }
  const MatrixResult result =
      run_matrix(images, prompts, stack, config.weights, config.inversion, config.run,
                 bank ? &*bank : nullptr, out_dir);
  int failures = 0;
  for (const EditRecord& r : result.records) {
    if (r.failed) {
      ++failures;
      std::cerr << "failed: " << r.image_id << " x " << r.prompt_id << " at "
                << r.failed_stage << ": " << r.error << "\n";
    }
  }
  std::cout << result.records.size() << " jobs, " << failures << " failed\n";
  print_summary(result.summary);
  std::cout << "artifacts under " << out_dir.string() << "\n";
  return result.all_ok ? 0 : 1;
}

int run_ablate_command(ToolConfig config, const fs::path& images_dir,
                       const fs::path& prompts_path, const fs::path& out_dir) {
  // Latent-space/init grid plus cumulative loss-term toggles.
  using Patch = std::function<void(ToolConfig&)>;
  const std::vector<std::pair<std::string, Patch>> grid = {
      {"full", [](ToolConfig&) {}},
      {"latent_vanilla_encoder",
       [](ToolConfig& c) {
         c.inversion.latent_space = LatentSpace::kVanilla;
         c.weights.reg = 0.0;
       }},
      {"latent_vanilla_mean",
       [](ToolConfig& c) {
         c.inversion.latent_space = LatentSpace::kVanilla;
         c.inversion.init_strategy = InitStrategy::kMean;
         c.weights.reg = 0.0;
       }},
      {"latent_extended_mean",
       [](ToolConfig& c) { c.inversion.init_strategy = InitStrategy::kMean; }},
      {"loss_semantic_only",
       [](ToolConfig& c) {
         c.weights.pose = 0.0;
         c.weights.reg = 0.0;
         c.weights.im = 0.0;
         c.weights.head = 0.0;
       }},
      {"loss_semantic_composition",
       [](ToolConfig& c) {
         c.weights.pose = 0.0;
         c.weights.reg = 0.0;
       }},
      {"loss_semantic_composition_reg",
       [](ToolConfig& c) { c.weights.pose = 0.0; }},
  };

  const ModelStack stack = build_model_stack(config);
  const std::vector<NamedImage> images = load_canonical_dir(images_dir);
  const CuratedPromptSet prompts = load_prompts(prompts_path, *stack.semantic);

  json report;
  report["schema"] = "ganedit-ablation-v1";
  bool all_ok = true;
  for (const auto& [name, patch] : grid) {
    ToolConfig variant = config;
    patch(variant);
    const fs::path run_dir = out_dir / name;
    std::cout << "== " << name << "\n";
    const MatrixResult result =
        run_matrix(images, prompts, stack, variant.weights, variant.inversion,
                   variant.run, nullptr, run_dir);
    all_ok = all_ok && result.all_ok;
    json entry;
    entry["run_dir"] = run_dir.string();
    entry["weights"] = {{"clip", variant.weights.clip},
                        {"pose", variant.weights.pose},
                        {"reg", variant.weights.reg},
                        {"im", variant.weights.im},
                        {"head", variant.weights.head}};
    entry["latent_space"] = to_string(variant.inversion.latent_space);
    entry["init_strategy"] = to_string(variant.inversion.init_strategy);
    entry["semantic"] = result.summary.semantic.mean;
    entry["iou"] = result.summary.iou.count ? json(result.summary.iou.mean) : json(nullptr);
    entry["identity"] =
        result.summary.identity.count ? json(result.summary.identity.mean) : json(nullptr);
    entry["fid"] = result.summary.fid.count ? json(result.summary.fid.mean) : json(nullptr);
    report["configs"][name] = std::move(entry);
    print_summary(result.summary);
  }
  fs::create_directories(out_dir);
  std::ofstream out(out_dir / "ablation_summary.json");
  out << report.dump(2) << "\n";
  std::cout << "wrote " << (out_dir / "ablation_summary.json").string() << "\n";
  return all_ok ? 0 : 1;
}

int run_plot_command(const fs::path& summary_path, const fs::path& out_dir) {
  std::ifstream in(summary_path);
  if (!in) {
    throw IoError("cannot open summary: " + summary_path.string());
  }
  json j;
  in >> j;
  fs::create_directories(out_dir);

  const auto collect = [&](const char* key) {
    std::vector<double> values;
    for (const json& p : j.at("per_prompt")) {
      if (p.contains(key) && !p[key].is_null()) {
        values.push_back(p[key].get<double>());
      }
    }
    return values;
  };
  const std::vector<std::pair<std::string, std::string>> metrics = {
      {"semantic_mean", "semantic relevance"},
      {"iou_mean", "pose iou"},
      {"identity_mean", "identity similarity"},
      {"fid", "fid"},
  };
  int rendered = 0;
  for (const auto& [key, title] : metrics) {
    const std::vector<double> values = collect(key.c_str());
    if (values.empty()) {
      std::cout << "skipping " << title << " (no values)\n";
      continue;
    }
    const std::string stem = key == "fid" ? "fid" : key.substr(0, key.find("_mean"));
    const fs::path path = out_dir / (stem + ".png");
    render_box_plot(path, title + " per prompt", values);
    std::cout << "wrote " << path.string() << "\n";
    ++rendered;
  }
  return rendered > 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Text-conditioned image editing via constrained GAN inversion"};
  app.require_subcommand(1);

  CommonOpts opts;

  auto* preprocess_cmd =
      app.add_subcommand("preprocess", "Crop, resize, and normalize raw images");
  std::string pre_in, pre_out;
  preprocess_cmd->add_option("--in", pre_in, "Directory of raw .png images")->required();
  preprocess_cmd->add_option("--out", pre_out, "Output directory")->required();
  add_common(preprocess_cmd, opts);

  auto* curate_cmd =
      app.add_subcommand("curate", "Score and keep the best-matching prompts");
  std::string cur_images, cur_prompts, cur_out;
  int cur_keep = 0;
  curate_cmd->add_option("--images", cur_images, "Directory of canonical images")
      ->required();
  curate_cmd->add_option("--prompts", cur_prompts, "Text file, one prompt per line")
      ->required();
  curate_cmd->add_option("--keep", cur_keep, "How many prompts to keep (default: config)");
  curate_cmd->add_option("--out", cur_out, "Output curated .json")->required();
  add_common(curate_cmd, opts);

  auto* bank_cmd = app.add_subcommand("bank", "Prototype bank operations");
  auto* bank_build = bank_cmd->add_subcommand("build", "Sample and embed prototypes");
  std::string bank_out;
  int bank_count = 1000;
  std::int64_t bank_seed = 1;
  double bank_truncation = -1.0;
  bank_build->add_option("--out", bank_out, "Output bank file")->required();
  bank_build->add_option("--count", bank_count, "Number of prototypes");
  bank_build->add_option("--bank-seed", bank_seed, "Sampler seed");
  bank_build->add_option("--truncation", bank_truncation, "Truncation in (0, 1]");
  add_common(bank_build, opts);

  auto* bank_query = bank_cmd->add_subcommand("query", "Find the best prototype for a text");
  std::string bankq_file, bankq_text, bankq_render;
  bank_query->add_option("--bank", bankq_file, "Bank file")->required();
  bank_query->add_option("--text", bankq_text, "Query text")->required();
  bank_query->add_option("--render", bankq_render, "Optional output .png of G(w)");
  add_common(bank_query, opts);

  auto* edit_cmd = app.add_subcommand("edit", "Edit one image with one text prompt");
  std::string edit_image, edit_text, edit_out, edit_bank;
  edit_cmd->add_option("--image", edit_image, "Canonical input .png")->required();
  edit_cmd->add_option("--text", edit_text, "Target description")->required();
  edit_cmd->add_option("--out", edit_out, "Output directory")->required();
  edit_cmd->add_option("--bank", edit_bank, "Prototype bank (for injection init)");
  add_common(edit_cmd, opts);

  auto* matrix_cmd = app.add_subcommand("matrix", "Run every image x prompt combination");
  std::string mat_images, mat_prompts, mat_out;
  matrix_cmd->add_option("--images", mat_images, "Directory of canonical images")
      ->required();
  matrix_cmd->add_option("--prompts", mat_prompts, "Curated .json or .txt prompt file")
      ->required();
  matrix_cmd->add_option("--out", mat_out, "Run directory")->required();
  add_common(matrix_cmd, opts);

  auto* eval_cmd = app.add_subcommand("eval", "Recompute metrics over an existing run");
  std::string eval_run;
  eval_cmd->add_option("--run", eval_run, "Run directory with manifest.json")->required();
  add_common(eval_cmd, opts);

  auto* ablate_cmd = app.add_subcommand("ablate", "Run the ablation toggle grid");
  std::string abl_images, abl_prompts, abl_out;
  ablate_cmd->add_option("--images", abl_images, "Directory of canonical images")
      ->required();
  ablate_cmd->add_option("--prompts", abl_prompts, "Curated .json or .txt prompt file")
      ->required();
  ablate_cmd->add_option("--out", abl_out, "Output directory")->required();
  add_common(ablate_cmd, opts);

  auto* plot_cmd = app.add_subcommand("plot", "Render box plots from a summary.json");
  std::string plot_summary, plot_out;
  plot_cmd->add_option("--summary", plot_summary, "summary.json path")->required();
  plot_cmd->add_option("--out", plot_out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (preprocess_cmd->parsed()) {
      const ToolConfig config = resolve_config(opts);
      fs::create_directories(pre_out);
      int count = 0;
      for (const fs::path& path : list_pngs(pre_in)) {
        const RawImage raw = read_png(path);
        const ImageTensor canonical = preprocess_image(raw, config.preprocess);
        write_png(fs::path(pre_out) / path.filename(), canonical);
        ++count;
      }
      std::cout << "preprocessed " << count << " images into " << pre_out << "\n";
      return 0;
    }
    if (curate_cmd->parsed()) {
      const ToolConfig config = resolve_config(opts);
      const ModelStack stack = build_model_stack(config);
      const std::vector<NamedImage> images = load_canonical_dir(cur_images);
      const std::vector<std::string> lines = read_lines(cur_prompts);
      if (lines.size() != images.size()) {
        throw ValidationError("image count (" + std::to_string(images.size()) +
                              ") and prompt count (" + std::to_string(lines.size()) +
                              ") must match for curation");
      }
      std::vector<std::pair<ImageTensor, TextPrompt>> pairs;
      for (std::size_t i = 0; i < images.size(); ++i) {
        pairs.emplace_back(images[i].image, stack.semantic->make_prompt(lines[i]));
      }
      const int keep = cur_keep > 0 ? cur_keep : config.keep_prompts;
      const CuratedPromptSet curated = curate_prompts(pairs, keep, *stack.semantic);
      save_curated(cur_out, curated);
      std::cout << "kept " << curated.prompts.size() << " of " << pairs.size()
                << " prompts -> " << cur_out << "\n";
      return 0;
    }
    if (bank_build->parsed()) {
      const ToolConfig config = resolve_config(opts);
      const ModelStack stack = build_model_stack(config);
      const double truncation =
          bank_truncation > 0.0 ? bank_truncation : config.bank_truncation;
      const PrototypeBank bank = build_prototype_bank(
          *stack.generator, *stack.semantic, bank_count, bank_seed, truncation);
      bank.save(bank_out);
      std::cout << "built bank with " << bank.size() << " prototypes -> " << bank_out
                << "\n";
      return 0;
    }
    if (bank_query->parsed()) {
      const ToolConfig config = resolve_config(opts);
      const ModelStack stack = build_model_stack(config);
      const PrototypeBank bank =
          PrototypeBank::load(bankq_file, stack.generator.get(), stack.semantic.get());
      const TextPrompt prompt = stack.semantic->make_prompt(bankq_text);
      const Vec text_embedding = stack.semantic->embed_text(prompt);
      const auto [index, code] = select_prototype(bank, text_embedding);
      const double cosine = bank.embeddings().row(index).dot(text_embedding) /
                            (bank.embeddings().row(index).norm() * text_embedding.norm());
      std::cout << "best prototype: index " << index << ", cosine " << cosine << "\n";
      if (!bankq_render.empty()) {
        write_png(bankq_render, stack.generator->synthesize(code));
        std::cout << "rendered prototype -> " << bankq_render << "\n";
      }
      return 0;
    }
    if (edit_cmd->parsed()) {
      const ToolConfig config = resolve_config(opts);
      const ModelStack stack = build_model_stack(config);
      const NamedImage input{fs::path(edit_image).stem().string(),
                             read_canonical_png(edit_image)};
      const TextPrompt prompt = stack.semantic->make_prompt(edit_text);
      std::optional<PrototypeBank> bank;
      if (!edit_bank.empty()) {
        bank = PrototypeBank::load(edit_bank, stack.generator.get(), stack.semantic.get());
      }
      const EditRecord rec =
          run_edit_job(input, "p000", prompt, stack, config.weights, config.inversion,
                       config.run, bank ? &*bank : nullptr, edit_out);
      if (rec.failed) {
        std::cerr << "edit failed at " << rec.failed_stage << ": " << rec.error << "\n";
        return 1;
      }
      std::cout << "output: " << (fs::path(edit_out) / rec.output_image_path).string()
                << "\n";
      std::cout << "semantic " << rec.metrics.semantic;
      if (rec.metrics.iou) std::cout << ", iou " << *rec.metrics.iou;
      if (rec.metrics.identity) std::cout << ", identity " << *rec.metrics.identity;
      std::cout << ", wall " << rec.wall_time_seconds << "s\n";
      return 0;
    }
    if (matrix_cmd->parsed()) {
      return run_matrix_command(resolve_config(opts), mat_images, mat_prompts, mat_out);
    }
    if (eval_cmd->parsed()) {
      const ToolConfig config = resolve_config(opts);
      const ModelStack stack = build_model_stack(config);
      const AggregateSummary summary = evaluate_run(eval_run, stack, config.run);
      print_summary(summary);
      return 0;
    }
    if (ablate_cmd->parsed()) {
      return run_ablate_command(resolve_config(opts), abl_images, abl_prompts, abl_out);
    }
    if (plot_cmd->parsed()) {
      return run_plot_command(plot_summary, plot_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
