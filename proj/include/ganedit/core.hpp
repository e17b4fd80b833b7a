// Canonical tensor-like value types and configuration records shared by all
// modules. Everything here is an immutable value after construction.
#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace ganedit {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct RangeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Closed value interval, used to describe external model ranges.
struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  double width() const { return hi - lo; }
};

/// 3 x n x n square image, channels-first. The canonical internal range is
/// [-1, 1]; adapters renormalize at external model boundaries.
class ImageTensor {
 public:
  static constexpr int kChannels = 3;

  ImageTensor(int side, Vec data);
  static ImageTensor zeros(int side);

  int side() const { return side_; }
  int pixel_count() const { return side_ * side_; }
  int size() const { return kChannels * side_ * side_; }
  const Vec& data() const { return data_; }

  int index(int c, int y, int x) const { return (c * side_ + y) * side_ + x; }
  double at(int c, int y, int x) const { return data_[index(c, y, x)]; }

 private:
  int side_;
  Vec data_;
};

/// Per-layer stack of style codes (N_w x d_w). A vanilla-space code is the
/// same row broadcast to every layer.
class ExtendedLatentCode {
 public:
  explicit ExtendedLatentCode(Mat rows);
  static ExtendedLatentCode broadcast(const Vec& row, int layer_count);

  int layer_count() const { return static_cast<int>(rows_.rows()); }
  int style_dim() const { return static_cast<int>(rows_.cols()); }
  const Mat& rows() const { return rows_; }
  Vec row(int layer) const { return rows_.row(layer).transpose(); }

  /// True iff every row equals row 0 exactly (absolute tolerance 0).
  bool is_vanilla() const;

 private:
  Mat rows_;
};

/// Row-major flattening used by optimizers and the toy generator: entry
/// j * d_w + k holds rows(j, k).
Vec flatten_code(const Mat& rows);
Mat unflatten_code(const Vec& flat, int layer_count, int style_dim);

/// Affine map of `data` (shape channels x height x width, values in `source`)
/// onto the canonical [-1, 1] range.
ImageTensor to_canonical_range(const Vec& data, int channels, int height,
                               int width, const Interval& source);

/// Inverse of to_canonical_range for the same interval.
Vec from_canonical_range(const ImageTensor& image, const Interval& target);

/// Returns `code` unchanged when its layer count matches the generator and all
/// values are finite; throws otherwise.
const ExtendedLatentCode& validate_latent(const ExtendedLatentCode& code,
                                          int generator_layer_count);

/// Text conditioning input. token_count is whatever the attached semantic
/// model's tokenizer reports; prompts above 76 tokens are rejected at embed
/// time.
struct TextPrompt {
  std::string text;
  int token_count = 0;
};

/// Balancing weights of the composite objective.
struct LossWeights {
  double clip = 1.0;
  double pose = 10.0;
  double reg = 1.0;
  double im = 30.0;
  double head = 1.0;

  void validate() const;
};

enum class InitStrategy { kEncoder, kMean, kInjection };
enum class LatentSpace { kVanilla, kExtended };

std::string to_string(InitStrategy s);
std::string to_string(LatentSpace s);
InitStrategy init_strategy_from_string(const std::string& s);
LatentSpace latent_space_from_string(const std::string& s);

/// Settings of the fixed-step first-order inversion.
struct InversionConfig {
  int steps = 500;
  double learning_rate = 5e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t seed = 0;
  InitStrategy init_strategy = InitStrategy::kEncoder;
  LatentSpace latent_space = LatentSpace::kExtended;

  void validate() const;
};

/// Deterministic RNG with a fully specified uniform/gaussian pipeline, so
/// seeded fixtures are stable across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1).
  double uniform();
  /// Standard normal via Box-Muller.
  double gaussian();

  Vec gaussian_vec(int n);
  Mat gaussian_mat(int rows, int cols);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace ganedit
