#include "ganedit/core.hpp"

#include <cmath>
#include <numbers>

namespace ganedit {

namespace {

bool all_finite(const Vec& v) { return v.allFinite(); }

}  // namespace

ImageTensor::ImageTensor(int side, Vec data) : side_(side), data_(std::move(data)) {
  if (side_ <= 0) {
    throw ShapeError("image side must be positive, got " + std::to_string(side_));
  }
  const auto expected = static_cast<Eigen::Index>(kChannels) * side_ * side_;
  if (data_.size() != expected) {
    throw ShapeError("image data has " + std::to_string(data_.size()) +
                     " values, expected 3x" + std::to_string(side_) + "x" +
                     std::to_string(side_));
  }
  if (!all_finite(data_)) {
    throw RangeError("image contains non-finite values");
  }
}

ImageTensor ImageTensor::zeros(int side) {
  return ImageTensor(side, Vec::Zero(static_cast<Eigen::Index>(kChannels) * side * side));
}

ExtendedLatentCode::ExtendedLatentCode(Mat rows) : rows_(std::move(rows)) {
  if (rows_.rows() < 1 || rows_.cols() < 1) {
    throw ShapeError("latent code must have at least one row and one column");
  }
  if (!rows_.allFinite()) {
    throw RangeError("latent code contains non-finite values");
  }
}

ExtendedLatentCode ExtendedLatentCode::broadcast(const Vec& row, int layer_count) {
  if (layer_count < 1) {
    throw ShapeError("layer_count must be positive");
  }
  Mat rows(layer_count, row.size());
  for (int j = 0; j < layer_count; ++j) {
    rows.row(j) = row.transpose();
  }
  return ExtendedLatentCode(std::move(rows));
}

bool ExtendedLatentCode::is_vanilla() const {
  for (Eigen::Index j = 1; j < rows_.rows(); ++j) {
    if ((rows_.row(j).array() != rows_.row(0).array()).any()) {
      return false;
    }
  }
  return true;
}

Vec flatten_code(const Mat& rows) {
  Vec flat(rows.size());
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < rows.rows(); ++j) {
    for (Eigen::Index d = 0; d < rows.cols(); ++d) {
      flat[k++] = rows(j, d);
    }
  }
  return flat;
}

Mat unflatten_code(const Vec& flat, int layer_count, int style_dim) {
  if (flat.size() != static_cast<Eigen::Index>(layer_count) * style_dim) {
    throw ShapeError("flat code size does not match layer_count x style_dim");
  }
  Mat rows(layer_count, style_dim);
  Eigen::Index k = 0;
  for (int j = 0; j < layer_count; ++j) {
    for (int d = 0; d < style_dim; ++d) {
      rows(j, d) = flat[k++];
    }
  }
  return rows;
}

ImageTensor to_canonical_range(const Vec& data, int channels, int height,
                               int width, const Interval& source) {
  if (!(source.width() > 0.0) || !std::isfinite(source.width())) {
    throw RangeError("source interval must have positive finite width");
  }
  if (channels != ImageTensor::kChannels || height != width || height <= 0) {
    throw ShapeError("expected a 3 x n x n array");
  }
  if (data.size() != static_cast<Eigen::Index>(channels) * height * width) {
    throw ShapeError("data size does not match the declared 3 x n x n shape");
  }
  if (!all_finite(data)) {
    throw RangeError("input contains non-finite values");
  }
  Vec mapped = 2.0 * (data.array() - source.lo) / source.width() - 1.0;
  return ImageTensor(height, std::move(mapped));
}

Vec from_canonical_range(const ImageTensor& image, const Interval& target) {
  if (!(target.width() > 0.0)) {
    throw RangeError("target interval must have positive width");
  }
  return ((image.data().array() + 1.0) * 0.5 * target.width() + target.lo).matrix();
}

const ExtendedLatentCode& validate_latent(const ExtendedLatentCode& code,
                                          int generator_layer_count) {
  if (code.layer_count() != generator_layer_count) {
    throw ShapeError("latent code has " + std::to_string(code.layer_count()) +
                     " layer codes, generator expects " +
                     std::to_string(generator_layer_count));
  }
  if (!code.rows().allFinite()) {
    throw RangeError("latent code contains non-finite values");
  }
  return code;
}

void LossWeights::validate() const {
  if (clip < 0 || pose < 0 || reg < 0 || im < 0 || head < 0) {
    throw ValidationError("loss weights must be nonnegative");
  }
}

std::string to_string(InitStrategy s) {
  switch (s) {
    case InitStrategy::kEncoder:
      return "encoder";
    case InitStrategy::kMean:
      return "mean";
    case InitStrategy::kInjection:
      return "injection";
  }
  return "encoder";
}

std::string to_string(LatentSpace s) {
  return s == LatentSpace::kVanilla ? "vanilla" : "extended";
}

InitStrategy init_strategy_from_string(const std::string& s) {
  if (s == "encoder") return InitStrategy::kEncoder;
  if (s == "mean") return InitStrategy::kMean;
  if (s == "injection") return InitStrategy::kInjection;
  throw ConfigError("unknown init strategy: " + s);
}

LatentSpace latent_space_from_string(const std::string& s) {
  if (s == "vanilla") return LatentSpace::kVanilla;
  if (s == "extended") return LatentSpace::kExtended;
  throw ConfigError("unknown latent space: " + s);
}

void InversionConfig::validate() const {
  if (steps < 1) {
    throw ConfigError("steps must be >= 1");
  }
  if (!(learning_rate > 0.0)) {
    throw ConfigError("learning_rate must be positive");
  }
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
    throw ConfigError("optimizer betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) {
    throw ConfigError("optimizer epsilon must be positive");
  }
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // u1 in (0, 1] keeps the log finite.
  const double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

Vec Rng::gaussian_vec(int n) {
  Vec v(n);
  for (int i = 0; i < n; ++i) {
    v[i] = gaussian();
  }
  return v;
}

Mat Rng::gaussian_mat(int rows, int cols) {
  Mat m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      m(r, c) = gaussian();
    }
  }
  return m;
}

}  // namespace ganedit
