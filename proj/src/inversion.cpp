#include "ganedit/inversion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "binio.hpp"

namespace ganedit {

// ---------------------------------------------------------------------------
// LayerSubsets
// ---------------------------------------------------------------------------

LayerSubsets LayerSubsets::standard(int total_layers) {
  LayerSubsets s;
  s.total_layers = total_layers;
  const int coarse_end = std::min(4, total_layers);
  const int medium_end = std::min(8, total_layers);
  for (int l = 1; l <= coarse_end; ++l) s.coarse.push_back(l);
  for (int l = coarse_end + 1; l <= medium_end; ++l) s.medium.push_back(l);
  for (int l = medium_end + 1; l <= total_layers; ++l) s.fine.push_back(l);
  s.validate();
  return s;
}

void LayerSubsets::validate() const {
  if (total_layers < 1) {
    throw ConfigError("layer subsets need a positive total layer count");
  }
  std::set<int> seen;
  for (const auto* subset : {&coarse, &medium, &fine}) {
    for (int l : *subset) {
      if (l < 1 || l > total_layers) {
        throw ConfigError("layer index " + std::to_string(l) + " outside 1.." +
                          std::to_string(total_layers));
      }
      if (!seen.insert(l).second) {
        throw ConfigError("layer subsets must be disjoint");
      }
    }
  }
  if (static_cast<int>(seen.size()) != total_layers) {
    throw ConfigError("layer subsets must cover every layer");
  }
}

// ---------------------------------------------------------------------------
// PrototypeBank
// ---------------------------------------------------------------------------

namespace {

// Quantize through f32 so in-memory values match the file encoding exactly.
Mat quantize_f32(Mat m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = static_cast<double>(static_cast<float>(m.data()[i]));
  }
  return m;
}

constexpr char kBankMagic[] = "PBNK1";

}  // namespace

PrototypeBank::PrototypeBank(Mat codes, Mat embeddings, int layer_count,
                             int style_dim, std::int64_t sampler_seed,
                             double truncation)
    : codes_(quantize_f32(std::move(codes))),
      embeddings_(quantize_f32(std::move(embeddings))),
      layer_count_(layer_count),
      style_dim_(style_dim),
      sampler_seed_(sampler_seed),
      truncation_(truncation) {
  if (codes_.rows() != embeddings_.rows()) {
    throw ShapeError("bank codes and embeddings disagree on entry count");
  }
  if (codes_.cols() != static_cast<Eigen::Index>(layer_count_) * style_dim_) {
    throw ShapeError("bank code width does not match layer_count * style_dim");
  }
}

ExtendedLatentCode PrototypeBank::code_at(int i) const {
  if (i < 0 || i >= size()) {
    throw RangeError("bank index out of range");
  }
  return ExtendedLatentCode(
      unflatten_code(codes_.row(i).transpose(), layer_count_, style_dim_));
}

void PrototypeBank::save(const std::filesystem::path& path) const {
  std::string buf;
  buf.append(kBankMagic, 5);
  binio::put_i64(buf, size());
  binio::put_i64(buf, layer_count_);
  binio::put_i64(buf, style_dim_);
  binio::put_i64(buf, embed_dim());
  binio::put_i64(buf, sampler_seed_);
  binio::put_f64(buf, truncation_);
  for (int i = 0; i < size(); ++i) {
    for (Eigen::Index j = 0; j < codes_.cols(); ++j) {
      binio::put_f32(buf, static_cast<float>(codes_(i, j)));
    }
  }
  for (int i = 0; i < size(); ++i) {
    for (Eigen::Index j = 0; j < embeddings_.cols(); ++j) {
      binio::put_f32(buf, static_cast<float>(embeddings_(i, j)));
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !out.write(buf.data(), static_cast<std::streamsize>(buf.size()))) {
    throw IoError("cannot write prototype bank: " + path.string());
  }
}

PrototypeBank PrototypeBank::load(const std::filesystem::path& path,
                                  const Generator* expected_generator,
                                  const SemanticModel* expected_semantic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open prototype bank: " + path.string());
  }
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  binio::Reader r(bytes.data(), bytes.size());
  char magic[5];
  r.read_raw(magic, 5);
  if (std::string_view(magic, 5) != kBankMagic) {
    throw ValidationError("not a prototype bank file: " + path.string());
  }
  const auto count = r.read_i64();
  const auto layers = r.read_i64();
  const auto dim = r.read_i64();
  const auto clip_dim = r.read_i64();
  const auto seed = r.read_i64();
  const double truncation = r.read_f64();
  if (count < 0 || layers < 1 || dim < 1 || clip_dim < 1) {
    throw ValidationError("prototype bank header is malformed");
  }
  if (expected_generator &&
      (layers != expected_generator->layer_count() ||
       dim != expected_generator->style_dim())) {
    throw ValidationError("prototype bank does not match the attached generator");
  }
  if (expected_semantic && clip_dim != expected_semantic->embed_dim()) {
    throw ValidationError("prototype bank does not match the semantic model");
  }
  Mat codes(count, layers * dim);
  for (Eigen::Index i = 0; i < count; ++i) {
    for (Eigen::Index j = 0; j < codes.cols(); ++j) {
      codes(i, j) = static_cast<double>(r.read_f32());
    }
  }
  Mat embeddings(count, clip_dim);
  for (Eigen::Index i = 0; i < count; ++i) {
    for (Eigen::Index j = 0; j < clip_dim; ++j) {
      embeddings(i, j) = static_cast<double>(r.read_f32());
    }
  }
  return PrototypeBank(std::move(codes), std::move(embeddings),
                       static_cast<int>(layers), static_cast<int>(dim), seed,
                       truncation);
}

PrototypeBank build_prototype_bank(const Generator& generator,
                                   const SemanticModel& semantic, int count,
                                   std::int64_t seed, double truncation) {
  if (count <= 0) {
    throw ConfigError("prototype bank size must be positive");
  }
  Rng rng(static_cast<std::uint64_t>(seed));
  const int code_width = generator.layer_count() * generator.style_dim();
  Mat codes(count, code_width);
  Mat embeddings(count, semantic.embed_dim());
  for (int i = 0; i < count; ++i) {
    const ExtendedLatentCode code = generator.sample_code(rng, truncation);
    codes.row(i) = flatten_code(code.rows()).transpose();
    const ImageTensor image = generator.synthesize(code);
    embeddings.row(i) = semantic.embed_image(image).transpose();
  }
  return PrototypeBank(std::move(codes), std::move(embeddings),
                       generator.layer_count(), generator.style_dim(), seed,
                       truncation);
}

std::pair<int, ExtendedLatentCode> select_prototype(const PrototypeBank& bank,
                                                    const Vec& text_embedding) {
  if (bank.size() == 0) {
    throw ValidationError("prototype bank is empty");
  }
  if (text_embedding.size() != bank.embed_dim()) {
    throw ShapeError("text embedding dimension does not match the bank");
  }
  const double text_norm = text_embedding.norm();
  if (!(text_norm > 0.0)) {
    throw RangeError("text embedding has zero norm");
  }
  int best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < bank.size(); ++i) {
    const double row_norm = bank.embeddings().row(i).norm();
    const double score =
        bank.embeddings().row(i).dot(text_embedding) / (row_norm * text_norm);
    if (score > best_score) {
      best_score = score;
      best = i;
    }
  }
  return {best, bank.code_at(best)};
}

ExtendedLatentCode inject_medium_subset(const ExtendedLatentCode& base,
                                        const ExtendedLatentCode& prototype,
                                        const LayerSubsets& subsets) {
  if (base.layer_count() != prototype.layer_count() ||
      base.style_dim() != prototype.style_dim()) {
    throw ShapeError("base and prototype codes must share one shape");
  }
  subsets.validate();
  if (subsets.total_layers != base.layer_count()) {
    throw ShapeError("layer subsets were built for a different layer count");
  }
  Mat rows = base.rows();
  for (int l : subsets.medium) {
    rows.row(l - 1) = prototype.rows().row(l - 1);
  }
  return ExtendedLatentCode(std::move(rows));
}

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

ExtendedLatentCode init_from_encoder(const ImageTensor& image, const ModelStack& models,
                                     LatentSpace space) {
  const InversionEncoder* encoder = space == LatentSpace::kVanilla
                                        ? models.vanilla_encoder.get()
                                        : models.encoder.get();
  if (!encoder) {
    throw ConfigError("no inversion encoder attached for the requested latent space");
  }
  ExtendedLatentCode code = encoder->invert(image);
  if (models.generator) {
    validate_latent(code, models.generator->layer_count());
  }
  return code;
}

ExtendedLatentCode init_from_mean(const Generator& generator) {
  return generator.mean_code();
}

ExtendedLatentCode initialize_code(const ImageTensor& image,
                                   const std::optional<Vec>& prompt_embedding,
                                   const InversionConfig& config,
                                   const ModelStack& models, const PrototypeBank* bank,
                                   const LayerSubsets* subsets) {
  switch (config.init_strategy) {
    case InitStrategy::kEncoder:
      return init_from_encoder(image, models, config.latent_space);
    case InitStrategy::kMean:
      if (!models.generator) {
        throw ConfigError("mean initialization requires an attached generator");
      }
      return init_from_mean(*models.generator);
    case InitStrategy::kInjection: {
      if (config.latent_space == LatentSpace::kVanilla) {
        throw ConfigError("injection initialization requires the extended latent space");
      }
      if (!bank) {
        throw ConfigError("injection initialization requires a prototype bank");
      }
      if (!prompt_embedding) {
        throw ConfigError("injection initialization requires a prompt embedding");
      }
      const ExtendedLatentCode base =
          init_from_encoder(image, models, LatentSpace::kExtended);
      auto [index, proto] = select_prototype(*bank, *prompt_embedding);
      (void)index;
      const LayerSubsets std_subsets =
          subsets ? *subsets : LayerSubsets::standard(base.layer_count());
      return inject_medium_subset(base, proto, std_subsets);
    }
  }
  throw ConfigError("unknown init strategy");
}

// ---------------------------------------------------------------------------
// Optimization
// ---------------------------------------------------------------------------

DivergenceError::DivergenceError(int step, const LossBreakdown& at_step)
    : std::runtime_error("objective became non-finite at step " + std::to_string(step)),
      step_(step),
      breakdown_(at_step) {}

namespace {

bool breakdown_finite(const LossBreakdown& b) {
  return std::isfinite(b.total) && std::isfinite(b.clip) && std::isfinite(b.pose) &&
         std::isfinite(b.reg) && std::isfinite(b.im) && std::isfinite(b.head);
}

}  // namespace

InversionResult optimize_code(const Objective& objective, ExtendedLatentCode init,
                              const InversionConfig& config) {
  config.validate();
  const bool vanilla = objective.vanilla_mode();
  if (vanilla && !init.is_vanilla()) {
    throw ConfigError("vanilla-space optimization requires a broadcast init code");
  }
  const int layers = init.layer_count();
  const int dim = init.style_dim();

  // Free parameters: every row, or the single shared row in vanilla mode.
  Vec theta = vanilla ? Vec(init.row(0)) : flatten_code(init.rows());

  auto code_of = [&](const Vec& params) {
    return vanilla ? ExtendedLatentCode::broadcast(params, layers)
                   : ExtendedLatentCode(unflatten_code(params, layers, dim));
  };
  auto grad_of = [&](const Mat& code_grad) -> Vec {
    if (!vanilla) {
      return flatten_code(code_grad);
    }
    return code_grad.colwise().sum().transpose();
  };

  Vec m = Vec::Zero(theta.size());
  Vec v = Vec::Zero(theta.size());
  std::vector<LossBreakdown> trajectory;
  trajectory.reserve(config.steps);

  for (int step = 0; step < config.steps; ++step) {
    Mat code_grad;
    const LossBreakdown breakdown = objective.evaluate(code_of(theta), &code_grad);
    if (!breakdown_finite(breakdown)) {
      throw DivergenceError(step, breakdown);
    }
    trajectory.push_back(breakdown);

    const Vec g = grad_of(code_grad);
    const double t = static_cast<double>(step + 1);
    m = config.beta1 * m + (1.0 - config.beta1) * g;
    v = config.beta2 * v + (1.0 - config.beta2) * g.cwiseProduct(g);
    const double m_scale = 1.0 / (1.0 - std::pow(config.beta1, t));
    const double v_scale = 1.0 / (1.0 - std::pow(config.beta2, t));
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      theta[i] -= config.learning_rate * (m[i] * m_scale) /
                  (std::sqrt(v[i] * v_scale) + config.epsilon);
    }
    if (!theta.allFinite()) {
      throw DivergenceError(step, breakdown);
    }
  }

  ExtendedLatentCode optimized = code_of(theta);
  ImageTensor final_image = objective.generator().synthesize(optimized);
  return InversionResult{std::move(optimized), std::move(final_image),
                         std::move(trajectory), std::move(init), config};
}

InversionResult run_inversion(const ImageTensor& image, const TextPrompt& prompt,
                              const LossWeights& weights, const InversionConfig& config,
                              const ModelStack& models, const PrototypeBank* bank,
                              const LayerSubsets* subsets) {
  config.validate();
  weights.validate();
  if (!models.generator || !models.semantic) {
    throw ConfigError("run_inversion needs generator and semantic handles");
  }
  if (prompt.token_count > SemanticModel::kMaxPromptTokens) {
    throw ValidationError("prompt has " + std::to_string(prompt.token_count) +
                          " tokens, over the 76-token limit");
  }
  const bool vanilla = config.latent_space == LatentSpace::kVanilla;

  // The prompt embedding is fixed during optimization; compute it once, and
  // only when something consumes it.
  std::optional<Vec> prompt_embedding;
  const bool injection = config.init_strategy == InitStrategy::kInjection;
  if (weights.clip > 0.0 || injection) {
    prompt_embedding = models.semantic->embed_text(prompt);
  }

  ExtendedLatentCode init =
      initialize_code(image, prompt_embedding, config, models, bank, subsets);

  Objective objective(image, std::move(prompt_embedding), weights, models, vanilla);
  return optimize_code(objective, std::move(init), config);
}

}  // namespace ganedit
