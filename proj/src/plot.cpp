#include "ganedit/plot.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>

#include "ganedit/core.hpp"
#include "ganedit/image_io.hpp"

namespace ganedit {

namespace {

// 5x7 glyphs, one byte per row, low five bits used (bit 4 = leftmost column).
struct Glyph {
  char ch;
  std::uint8_t rows[7];
};

constexpr Glyph kFont[] = {
    {'0', {0x0e, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0e}},
    {'1', {0x04, 0x0c, 0x04, 0x04, 0x04, 0x04, 0x0e}},
    {'2', {0x0e, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1f}},
    {'3', {0x1f, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0e}},
    {'4', {0x02, 0x06, 0x0a, 0x12, 0x1f, 0x02, 0x02}},
    {'5', {0x1f, 0x10, 0x1e, 0x01, 0x01, 0x11, 0x0e}},
    {'6', {0x06, 0x08, 0x10, 0x1e, 0x11, 0x11, 0x0e}},
    {'7', {0x1f, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0e, 0x11, 0x11, 0x0e, 0x11, 0x11, 0x0e}},
    {'9', {0x0e, 0x11, 0x11, 0x0f, 0x01, 0x02, 0x0c}},
    {'A', {0x0e, 0x11, 0x11, 0x1f, 0x11, 0x11, 0x11}},
    {'B', {0x1e, 0x11, 0x11, 0x1e, 0x11, 0x11, 0x1e}},
    {'C', {0x0e, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0e}},
    {'D', {0x1c, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1c}},
    {'E', {0x1f, 0x10, 0x10, 0x1e, 0x10, 0x10, 0x1f}},
    {'F', {0x1f, 0x10, 0x10, 0x1e, 0x10, 0x10, 0x10}},
    {'G', {0x0e, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0f}},
    {'H', {0x11, 0x11, 0x11, 0x1f, 0x11, 0x11, 0x11}},
    {'I', {0x0e, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0e}},
    {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0c}},
    {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
    {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1f}},
    {'M', {0x11, 0x1b, 0x15, 0x15, 0x11, 0x11, 0x11}},
    {'N', {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11}},
    {'O', {0x0e, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0e}},
    {'P', {0x1e, 0x11, 0x11, 0x1e, 0x10, 0x10, 0x10}},
    {'Q', {0x0e, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0d}},
    {'R', {0x1e, 0x11, 0x11, 0x1e, 0x14, 0x12, 0x11}},
    {'S', {0x0f, 0x10, 0x10, 0x0e, 0x01, 0x01, 0x1e}},
    {'T', {0x1f, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
    {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0e}},
    {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0a, 0x04}},
    {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0a}},
    {'X', {0x11, 0x11, 0x0a, 0x04, 0x0a, 0x11, 0x11}},
    {'Y', {0x11, 0x11, 0x0a, 0x04, 0x04, 0x04, 0x04}},
    {'Z', {0x1f, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1f}},
    {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0c, 0x0c}},
    {'-', {0x00, 0x00, 0x00, 0x1f, 0x00, 0x00, 0x00}},
    {'+', {0x00, 0x04, 0x04, 0x1f, 0x04, 0x04, 0x00}},
    {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1f}},
    {' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
};

const Glyph* find_glyph(char c) {
  const char up = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (const Glyph& g : kFont) {
    if (g.ch == up) return &g;
  }
  return nullptr;
}

struct Color {
  std::uint8_t r, g, b;
};

constexpr Color kBlack{20, 20, 20};
constexpr Color kGrey{170, 170, 170};
constexpr Color kBox{60, 100, 180};

class Canvas {
 public:
  Canvas(int width, int height)
      : width_(width), height_(height),
        rgb_(static_cast<std::size_t>(width) * height * 3, 255) {}

  void set(int x, int y, Color c) {
    if (x < 0 || x >= width_ || y < 0 || y >= height_) return;
    const std::size_t i = (static_cast<std::size_t>(y) * width_ + x) * 3;
    rgb_[i] = c.r;
    rgb_[i + 1] = c.g;
    rgb_[i + 2] = c.b;
  }

  void hline(int x0, int x1, int y, Color c) {
    if (x0 > x1) std::swap(x0, x1);
    for (int x = x0; x <= x1; ++x) set(x, y, c);
  }

  void vline(int x, int y0, int y1, Color c) {
    if (y0 > y1) std::swap(y0, y1);
    for (int y = y0; y <= y1; ++y) set(x, y, c);
  }

  void rect(int x0, int y0, int x1, int y1, Color c) {
    hline(x0, x1, y0, c);
    hline(x0, x1, y1, c);
    vline(x0, y0, y1, c);
    vline(x1, y0, y1, c);
  }

  void dot(int x, int y, Color c) {
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        set(x + dx, y + dy, c);
      }
    }
  }

  void text(int x, int y, const std::string& s, Color c) {
    int cx = x;
    for (char ch : s) {
      if (const Glyph* g = find_glyph(ch)) {
        for (int row = 0; row < 7; ++row) {
          for (int col = 0; col < 5; ++col) {
            if (g->rows[row] & (1 << (4 - col))) {
              set(cx + col, y + row, c);
            }
          }
        }
      }
      cx += 6;
    }
  }

  int text_width(const std::string& s) const { return static_cast<int>(s.size()) * 6; }

  void save(const std::filesystem::path& path) const {
    write_png_rgb8(path, width_, height_, rgb_);
  }

  int width() const { return width_; }
  int height() const { return height_; }

 private:
  int width_, height_;
  std::vector<std::uint8_t> rgb_;
};

double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * (static_cast<double>(sorted.size()) - 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  const double t = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - t) + sorted[hi] * t;
}

std::string format_tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

}  // namespace

void render_box_plot(const std::filesystem::path& path, const std::string& title,
                     const std::vector<double>& values) {
  if (values.empty()) {
    throw ValidationError("box plot needs at least one value");
  }
  std::vector<double> sorted(values);
  std::sort(sorted.begin(), sorted.end());
  const double q1 = quantile(sorted, 0.25);
  const double med = quantile(sorted, 0.50);
  const double q3 = quantile(sorted, 0.75);
  const double iqr = q3 - q1;
  double whisker_lo = sorted.front();
  double whisker_hi = sorted.back();
  std::vector<double> outliers;
  if (iqr > 0.0) {
    const double lo_fence = q1 - 1.5 * iqr;
    const double hi_fence = q3 + 1.5 * iqr;
    whisker_lo = sorted.back();
    whisker_hi = sorted.front();
    for (double v : sorted) {
      if (v < lo_fence || v > hi_fence) {
        outliers.push_back(v);
      } else {
        whisker_lo = std::min(whisker_lo, v);
        whisker_hi = std::max(whisker_hi, v);
      }
    }
  }

  double lo = sorted.front();
  double hi = sorted.back();
  if (hi - lo < 1e-12) {
    const double pad = std::max(0.5, std::abs(hi) * 0.1);
    lo -= pad;
    hi += pad;
  } else {
    const double pad = 0.1 * (hi - lo);
    lo -= pad;
    hi += pad;
  }

  Canvas canvas(480, 360);
  const int left = 70, right = 440, top = 50, bottom = 320;
  auto y_of = [&](double v) {
    return static_cast<int>(std::lround(bottom - (v - lo) / (hi - lo) * (bottom - top)));
  };

  canvas.text((canvas.width() - canvas.text_width(title)) / 2, 18, title, kBlack);
  canvas.vline(left, top, bottom, kBlack);
  canvas.hline(left, right, bottom, kBlack);
  for (int i = 0; i <= 4; ++i) {
    const double v = lo + (hi - lo) * i / 4.0;
    const int y = y_of(v);
    canvas.hline(left - 3, left, y, kBlack);
    canvas.hline(left + 1, right, y, kGrey);
    const std::string label = format_tick(v);
    canvas.text(left - 8 - canvas.text_width(label), y - 3, label, kBlack);
  }

  const int cx = (left + right) / 2;
  const int half = 60;
  canvas.rect(cx - half, y_of(q3), cx + half, y_of(q1), kBox);
  canvas.hline(cx - half, cx + half, y_of(med), kBlack);
  canvas.vline(cx, y_of(whisker_hi), y_of(q3), kBlack);
  canvas.vline(cx, y_of(q1), y_of(whisker_lo), kBlack);
  canvas.hline(cx - half / 2, cx + half / 2, y_of(whisker_hi), kBlack);
  canvas.hline(cx - half / 2, cx + half / 2, y_of(whisker_lo), kBlack);
  for (double v : outliers) {
    canvas.dot(cx, y_of(v), kBox);
  }

  canvas.save(path);
}

}  // namespace ganedit
