#include "ganedit/models.hpp"

#include <Eigen/QR>
#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>

#include "binio.hpp"

namespace ganedit {

namespace {

constexpr double kGeneratorGain = 0.15;

// 3x3 correlation with zero padding. Kernel taps are row-major (dy, dx).
void corr3x3(const double* in, int n, const double* k, double* out) {
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      double acc = 0.0;
      for (int dy = -1; dy <= 1; ++dy) {
        const int yy = y + dy;
        if (yy < 0 || yy >= n) continue;
        for (int dx = -1; dx <= 1; ++dx) {
          const int xx = x + dx;
          if (xx < 0 || xx >= n) continue;
          acc += in[yy * n + xx] * k[(dy + 1) * 3 + (dx + 1)];
        }
      }
      out[y * n + x] = acc;
    }
  }
}

// Adjoint of corr3x3: scatters upstream values back through the same taps.
void corr3x3_adjoint(const double* upstream, int n, const double* k, double* grad) {
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double u = upstream[y * n + x];
      if (u == 0.0) continue;
      for (int dy = -1; dy <= 1; ++dy) {
        const int yy = y + dy;
        if (yy < 0 || yy >= n) continue;
        for (int dx = -1; dx <= 1; ++dx) {
          const int xx = x + dx;
          if (xx < 0 || xx >= n) continue;
          grad[yy * n + xx] += u * k[(dy + 1) * 3 + (dx + 1)];
        }
      }
    }
  }
}

const double kBlurKernel[9] = {1.0 / 16, 2.0 / 16, 1.0 / 16, 2.0 / 16,
                               4.0 / 16, 2.0 / 16, 1.0 / 16, 2.0 / 16,
                               1.0 / 16};

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::uint64_t fnv1a(const std::string& text, std::uint64_t seed) {
  std::uint64_t h = 14695981039346656037ULL ^ seed;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

Vec normalized_or_throw(Vec u) {
  const double norm = u.norm();
  if (!(norm > 1e-12)) {
    throw RangeError("embedding collapsed to the zero vector");
  }
  return u / norm;
}

}  // namespace

// ---------------------------------------------------------------------------
// ToyGenerator
// ---------------------------------------------------------------------------

ToyGenerator::ToyGenerator(const ToyStackConfig& cfg, std::uint64_t seed)
    : side_(cfg.image_side),
      layer_count_(cfg.layer_count),
      style_dim_(cfg.style_dim),
      mean_code_(Mat::Zero(1, 1)) {
  Rng rng(seed);
  const int out_dim = ImageTensor::kChannels * side_ * side_;
  const int code_dim = layer_count_ * style_dim_;
  weights_ = rng.gaussian_mat(out_dim, code_dim) * (kGeneratorGain / std::sqrt(code_dim));
  style_map_ = rng.gaussian_mat(style_dim_, style_dim_) / std::sqrt(style_dim_);
  style_bias_ = rng.gaussian_vec(style_dim_) * 0.5;
  mean_code_ = ExtendedLatentCode::broadcast(style_bias_, layer_count_);
}

ImageTensor ToyGenerator::synthesize(const ExtendedLatentCode& code) const {
  validate_latent(code, layer_count_);
  if (code.style_dim() != style_dim_) {
    throw ShapeError("latent style dimension does not match generator");
  }
  Vec image = weights_ * flatten_code(code.rows());
  return ImageTensor(side_, std::move(image));
}

Mat ToyGenerator::synthesize_vjp(const ExtendedLatentCode& code,
                                 const Vec& image_grad) const {
  validate_latent(code, layer_count_);
  if (image_grad.size() != weights_.rows()) {
    throw ShapeError("image gradient size does not match generator output");
  }
  Vec flat = weights_.transpose() * image_grad;
  return unflatten_code(flat, layer_count_, style_dim_);
}

ExtendedLatentCode ToyGenerator::sample_code(Rng& rng, double truncation) const {
  if (!(truncation > 0.0) || truncation > 1.0) {
    throw ConfigError("truncation must lie in (0, 1]");
  }
  const Vec z = rng.gaussian_vec(style_dim_);
  Vec row = style_map_ * z + style_bias_;
  row = style_bias_ + truncation * (row - style_bias_);
  return ExtendedLatentCode::broadcast(row, layer_count_);
}

// ---------------------------------------------------------------------------
// ToySemanticModel
// ---------------------------------------------------------------------------

ToySemanticModel::ToySemanticModel(int image_side, int clip_dim, std::uint64_t seed)
    : seed_(seed) {
  Rng rng(seed);
  const int in_dim = ImageTensor::kChannels * image_side * image_side;
  projection_ = rng.gaussian_mat(clip_dim, in_dim) / std::sqrt(in_dim);
  bias_ = rng.gaussian_vec(clip_dim) * 0.5;
}

Vec ToySemanticModel::embed_image(const ImageTensor& image) const {
  if (image.size() != projection_.cols()) {
    throw ShapeError("image size does not match the semantic model input");
  }
  return normalized_or_throw(projection_ * image.data() + bias_);
}

Vec ToySemanticModel::embed_image_vjp(const ImageTensor& image,
                                      const Vec& upstream) const {
  const Vec u = projection_ * image.data() + bias_;
  const double norm = u.norm();
  if (!(norm > 1e-12)) {
    throw RangeError("embedding collapsed to the zero vector");
  }
  const Vec v = u / norm;
  const Vec g = (upstream - v.dot(upstream) * v) / norm;
  return projection_.transpose() * g;
}

int ToySemanticModel::count_tokens(const std::string& text) const {
  int count = 0;
  bool in_token = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      in_token = false;
    } else if (!in_token) {
      in_token = true;
      ++count;
    }
  }
  return count;
}

Vec ToySemanticModel::embed_text(const TextPrompt& prompt) const {
  if (prompt.token_count > kMaxPromptTokens) {
    throw ValidationError("prompt has " + std::to_string(prompt.token_count) +
                          " tokens, over the 76-token limit");
  }
  Rng rng(fnv1a(prompt.text, seed_));
  return normalized_or_throw(rng.gaussian_vec(embed_dim()));
}

// ---------------------------------------------------------------------------
// ToyPoseParser
// ---------------------------------------------------------------------------

ToyPoseParser::ToyPoseParser(int image_side, int part_count,
                             std::vector<int> part_subset, std::uint64_t seed)
    : side_(image_side) {
  Rng rng(seed);
  channel_mix_ = rng.gaussian_mat(part_count, ImageTensor::kChannels) * 1.5;
  part_bias_ = rng.gaussian_vec(part_count) * 0.5;
  if (part_subset.empty()) {
    for (int label = 1; label <= part_count; ++label) {
      active_parts_.push_back(label);
    }
  } else {
    std::sort(part_subset.begin(), part_subset.end());
    for (int label : part_subset) {
      if (label >= 1 && label <= part_count) {
        active_parts_.push_back(label);
      }
    }
  }
}

BodyPartMaskSet ToyPoseParser::parse(const ImageTensor& image) const {
  if (image.side() != side_) {
    throw ShapeError("image side does not match the pose parser");
  }
  const int px = side_ * side_;
  // Shared blurred channels.
  std::array<Vec, ImageTensor::kChannels> blurred;
  for (int c = 0; c < ImageTensor::kChannels; ++c) {
    blurred[c].resize(px);
    corr3x3(image.data().data() + c * px, side_, kBlurKernel, blurred[c].data());
  }
  BodyPartMaskSet set;
  set.side = side_;
  set.part_indices = active_parts_;
  set.masks.resize(static_cast<Eigen::Index>(active_parts_.size()), px);
  for (std::size_t i = 0; i < active_parts_.size(); ++i) {
    const int label = active_parts_[i] - 1;
    for (int p = 0; p < px; ++p) {
      double z = part_bias_[label];
      for (int c = 0; c < ImageTensor::kChannels; ++c) {
        z += channel_mix_(label, c) * blurred[c][p];
      }
      set.masks(static_cast<Eigen::Index>(i), p) = sigmoid(z);
    }
  }
  return set;
}

Vec ToyPoseParser::parse_vjp(const ImageTensor& image, const Mat& upstream) const {
  if (upstream.rows() != static_cast<Eigen::Index>(active_parts_.size())) {
    throw ShapeError("upstream mask gradient has the wrong part count");
  }
  const int px = side_ * side_;
  const BodyPartMaskSet set = parse(image);
  // d(mask)/d(blurred_c) = sigma' * mix, accumulated per channel, then the
  // blur adjoint carries it back to pixels.
  std::array<Vec, ImageTensor::kChannels> blur_grad;
  for (auto& g : blur_grad) g = Vec::Zero(px);
  for (std::size_t i = 0; i < active_parts_.size(); ++i) {
    const int label = active_parts_[i] - 1;
    for (int p = 0; p < px; ++p) {
      const double m = set.masks(static_cast<Eigen::Index>(i), p);
      const double local = upstream(static_cast<Eigen::Index>(i), p) * m * (1.0 - m);
      for (int c = 0; c < ImageTensor::kChannels; ++c) {
        blur_grad[c][p] += local * channel_mix_(label, c);
      }
    }
  }
  Vec grad = Vec::Zero(image.size());
  for (int c = 0; c < ImageTensor::kChannels; ++c) {
    corr3x3_adjoint(blur_grad[c].data(), side_, kBlurKernel, grad.data() + c * px);
  }
  return grad;
}

// ---------------------------------------------------------------------------
// ToySegmenter
// ---------------------------------------------------------------------------

ToySegmenter::ToySegmenter(int image_side, std::uint64_t seed) : side_(image_side) {
  Rng rng(seed);
  for (int k = 0; k < 3; ++k) {
    kernels_.push_back(rng.gaussian_mat(ImageTensor::kChannels, 9) * 0.4);
  }
  class_bias_ = rng.gaussian_vec(3) * 0.3;
}

Mat ToySegmenter::logits(const ImageTensor& image) const {
  const int px = side_ * side_;
  Mat z(3, px);
  Vec tmp(px);
  Vec kernel_row(9);
  for (int k = 0; k < 3; ++k) {
    z.row(k).setConstant(class_bias_[k]);
    for (int c = 0; c < ImageTensor::kChannels; ++c) {
      kernel_row = kernels_[k].row(c).transpose();
      corr3x3(image.data().data() + c * px, side_, kernel_row.data(), tmp.data());
      z.row(k) += tmp.transpose();
    }
  }
  return z;
}

SegmentationTriple ToySegmenter::parse(const ImageTensor& image) const {
  if (image.side() != side_) {
    throw ShapeError("image side does not match the segmenter");
  }
  Mat z = logits(image);
  const int px = side_ * side_;
  SegmentationTriple triple;
  triple.side = side_;
  triple.probs.resize(3, px);
  for (int p = 0; p < px; ++p) {
    const double m = z.col(p).maxCoeff();
    double denom = 0.0;
    for (int k = 0; k < 3; ++k) {
      triple.probs(k, p) = std::exp(z(k, p) - m);
      denom += triple.probs(k, p);
    }
    triple.probs.col(p) /= denom;
  }
  return triple;
}

Vec ToySegmenter::parse_vjp(const ImageTensor& image, const Mat& upstream) const {
  if (upstream.rows() != 3) {
    throw ShapeError("upstream segmentation gradient must have 3 rows");
  }
  const SegmentationTriple triple = parse(image);
  const int px = side_ * side_;
  // Softmax backward per pixel.
  Mat logit_grad(3, px);
  for (int p = 0; p < px; ++p) {
    const double dot = upstream.col(p).dot(triple.probs.col(p));
    for (int k = 0; k < 3; ++k) {
      logit_grad(k, p) = triple.probs(k, p) * (upstream(k, p) - dot);
    }
  }
  Vec grad = Vec::Zero(image.size());
  Vec row_grad(px);
  for (int k = 0; k < 3; ++k) {
    row_grad = logit_grad.row(k).transpose();
    Vec kernel_row(9);
    for (int c = 0; c < ImageTensor::kChannels; ++c) {
      kernel_row = kernels_[k].row(c).transpose();
      corr3x3_adjoint(row_grad.data(), side_, kernel_row.data(), grad.data() + c * px);
    }
  }
  return grad;
}

// ---------------------------------------------------------------------------
// PinvEncoder
// ---------------------------------------------------------------------------

PinvEncoder::PinvEncoder(const ToyGenerator& generator, LatentSpace space)
    : space_(space),
      layer_count_(generator.layer_count()),
      style_dim_(generator.style_dim()) {
  const Mat& a = generator.weight_matrix();
  if (space_ == LatentSpace::kExtended) {
    pinv_ = a.completeOrthogonalDecomposition().pseudoInverse();
  } else {
    // Broadcast codes see the sum of the per-layer column blocks.
    Mat b = Mat::Zero(a.rows(), style_dim_);
    for (int j = 0; j < layer_count_; ++j) {
      b += a.middleCols(static_cast<Eigen::Index>(j) * style_dim_, style_dim_);
    }
    pinv_ = b.completeOrthogonalDecomposition().pseudoInverse();
  }
}

ExtendedLatentCode PinvEncoder::invert(const ImageTensor& image) const {
  if (image.size() != pinv_.cols()) {
    throw ShapeError("image size does not match the encoder's generator");
  }
  const Vec solution = pinv_ * image.data();
  if (space_ == LatentSpace::kExtended) {
    return ExtendedLatentCode(unflatten_code(solution, layer_count_, style_dim_));
  }
  return ExtendedLatentCode::broadcast(solution, layer_count_);
}

// ---------------------------------------------------------------------------
// ToyFaceEmbedder
// ---------------------------------------------------------------------------

ToyFaceEmbedder::ToyFaceEmbedder(int image_side, int face_dim, std::uint64_t seed)
    : side_(image_side), quarter_rows_(std::max(1, image_side / 4)) {
  Rng rng(seed);
  const int in_dim = ImageTensor::kChannels * quarter_rows_ * side_;
  projection_ = rng.gaussian_mat(face_dim, in_dim) / std::sqrt(in_dim);
  bias_ = rng.gaussian_vec(face_dim) * 0.5;
}

std::optional<Vec> ToyFaceEmbedder::embed(const ImageTensor& image) const {
  if (image.side() != side_) {
    throw ShapeError("image side does not match the face embedder");
  }
  Vec top(projection_.cols());
  Eigen::Index k = 0;
  for (int c = 0; c < ImageTensor::kChannels; ++c) {
    for (int y = 0; y < quarter_rows_; ++y) {
      for (int x = 0; x < side_; ++x) {
        top[k++] = image.at(c, y, x);
      }
    }
  }
  return normalized_or_throw(projection_ * top + bias_);
}

// ---------------------------------------------------------------------------
// Stack assembly
// ---------------------------------------------------------------------------

ModelStack make_toy_stack(const ToyStackConfig& cfg) {
  if (cfg.image_side < 4 || cfg.layer_count < 2 || cfg.style_dim < 1 ||
      cfg.clip_dim < 1 || cfg.part_count < 1) {
    throw ConfigError("toy stack dimensions out of range");
  }
  Rng seeds(cfg.seed);
  const std::uint64_t gen_seed = seeds.next_u64();
  const std::uint64_t clip_seed = seeds.next_u64();
  const std::uint64_t pose_seed = seeds.next_u64();
  const std::uint64_t seg_seed = seeds.next_u64();
  const std::uint64_t face_seed = seeds.next_u64();

  auto generator = std::make_shared<ToyGenerator>(cfg, gen_seed);
  ModelStack stack;
  stack.generator = generator;
  stack.semantic = std::make_shared<ToySemanticModel>(cfg.image_side, cfg.clip_dim, clip_seed);
  stack.pose = std::make_shared<ToyPoseParser>(cfg.image_side, cfg.part_count,
                                               cfg.part_subset, pose_seed);
  stack.segmenter = std::make_shared<ToySegmenter>(cfg.image_side, seg_seed);
  stack.encoder = std::make_shared<PinvEncoder>(*generator, LatentSpace::kExtended);
  stack.vanilla_encoder = std::make_shared<PinvEncoder>(*generator, LatentSpace::kVanilla);
  stack.face = std::make_shared<ToyFaceEmbedder>(cfg.image_side, cfg.face_dim, face_seed);
  return stack;
}

// ---------------------------------------------------------------------------
// Checkpoint contract
// ---------------------------------------------------------------------------

std::string sha256_hex(const void* data, std::size_t size) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int digest_len = 0;
  if (EVP_Digest(data, size, digest, &digest_len, EVP_sha256(), nullptr) != 1) {
    throw IoError("SHA-256 computation failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * digest_len);
  for (unsigned int i = 0; i < digest_len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

std::vector<std::uint8_t> load_checkpoint_bytes(const CheckpointRef& ref) {
  std::ifstream in(ref.path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open checkpoint: " + ref.path.string());
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (!ref.sha256_hex.empty()) {
    const std::string actual = sha256_hex(bytes.data(), bytes.size());
    if (actual != ref.sha256_hex) {
      throw ValidationError("checkpoint hash mismatch for " + ref.path.string() +
                            ": expected " + ref.sha256_hex + ", got " + actual);
    }
  }
  return bytes;
}

namespace {
constexpr char kToyMagic[] = "TOYM1";
}

void save_toy_checkpoint(const std::filesystem::path& path, const ToyStackConfig& cfg) {
  std::string buf;
  buf.append(kToyMagic, 5);
  binio::put_i64(buf, cfg.image_side);
  binio::put_i64(buf, cfg.layer_count);
  binio::put_i64(buf, cfg.style_dim);
  binio::put_i64(buf, cfg.clip_dim);
  binio::put_i64(buf, cfg.face_dim);
  binio::put_i64(buf, cfg.part_count);
  binio::put_i64(buf, static_cast<std::int64_t>(cfg.seed));
  binio::put_i64(buf, static_cast<std::int64_t>(cfg.part_subset.size()));
  for (int label : cfg.part_subset) {
    binio::put_i64(buf, label);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !out.write(buf.data(), static_cast<std::streamsize>(buf.size()))) {
    throw IoError("cannot write checkpoint: " + path.string());
  }
}

std::pair<ToyStackConfig, ModelStack> load_toy_checkpoint(const CheckpointRef& ref) {
  const std::vector<std::uint8_t> bytes = load_checkpoint_bytes(ref);
  binio::Reader r(bytes.data(), bytes.size());
  char magic[5];
  r.read_raw(magic, 5);
  if (std::memcmp(magic, kToyMagic, 5) != 0) {
    throw ValidationError("not a toy model checkpoint: " + ref.path.string());
  }
  ToyStackConfig cfg;
  cfg.image_side = static_cast<int>(r.read_i64());
  cfg.layer_count = static_cast<int>(r.read_i64());
  cfg.style_dim = static_cast<int>(r.read_i64());
  cfg.clip_dim = static_cast<int>(r.read_i64());
  cfg.face_dim = static_cast<int>(r.read_i64());
  cfg.part_count = static_cast<int>(r.read_i64());
  cfg.seed = static_cast<std::uint64_t>(r.read_i64());
  const auto subset_size = r.read_i64();
  for (std::int64_t i = 0; i < subset_size; ++i) {
    cfg.part_subset.push_back(static_cast<int>(r.read_i64()));
  }
  return {cfg, make_toy_stack(cfg)};
}

}  // namespace ganedit
