#include "malforge/plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <string>

#include "malforge/error.hpp"
#include "malforge/image.hpp"

namespace fs = std::filesystem;

namespace malforge {

namespace {

struct Color {
  std::uint8_t r, g, b;
};

constexpr std::array<Color, 5> kPalette = {{{31, 119, 180}, {255, 127, 14}, {44, 160, 44}, {214, 39, 40}, {148, 103, 189}}};

Color lighten(Color c) {
  auto mix = [](std::uint8_t v) { return static_cast<std::uint8_t>(v + (255 - v) * 3 / 4); };
  return {mix(c.r), mix(c.g), mix(c.b)};
}

void line(RgbRaster& img, int x0, int y0, int x1, int y1, Color c) {
  const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
  const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    img.set(x0, y0, c.r, c.g, c.b);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

void rect(RgbRaster& img, int x0, int y0, int x1, int y1, Color c) {
  for (int y = std::min(y0, y1); y <= std::max(y0, y1); ++y) {
    for (int x = std::min(x0, x1); x <= std::max(x0, x1); ++x) img.set(x, y, c.r, c.g, c.b);
  }
}

// 5x7 glyphs, one byte per row, bit 4 is the leftmost column.
struct Glyph {
  char c;
  std::array<std::uint8_t, 7> rows;
};

constexpr Glyph kFont[] = {
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}}, {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}}, {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}}, {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}}, {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}}, {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
    {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}}, {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
    {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}}, {'D', {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C}},
    {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}}, {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
    {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}}, {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}}, {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
    {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}}, {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
    {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}}, {'N', {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11}},
    {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}, {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
    {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}}, {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
    {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}}, {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
    {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}, {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
    {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}}, {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
    {'Y', {0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04}}, {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
    {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}}, {',', {0x00, 0x00, 0x00, 0x00, 0x0C, 0x04, 0x08}},
    {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}}, {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F}},
    {':', {0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00}}, {'/', {0x00, 0x01, 0x02, 0x04, 0x08, 0x10, 0x00}},
    {'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}}, {')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}},
    {'%', {0x18, 0x19, 0x02, 0x04, 0x08, 0x13, 0x03}}, {'=', {0x00, 0x00, 0x1F, 0x00, 0x1F, 0x00, 0x00}},
    {'\\', {0x00, 0x10, 0x08, 0x04, 0x02, 0x01, 0x00}},
    {'+', {0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00}}, {'?', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x00, 0x04}},
};

constexpr int kCharWidth = 6;  // 5 columns plus spacing

const Glyph* find_glyph(char c) {
  if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
  for (const auto& g : kFont) {
    if (g.c == c) return &g;
  }
  return c == ' ' ? nullptr : find_glyph('?');
}

int text_width(const std::string& s) { return static_cast<int>(s.size()) * kCharWidth; }

void text(RgbRaster& img, int x, int y, const std::string& s, Color c) {
  for (char ch : s) {
    if (const Glyph* g = find_glyph(ch)) {
      for (int r = 0; r < 7; ++r) {
        for (int col = 0; col < 5; ++col) {
          if (g->rows[static_cast<std::size_t>(r)] & (0x10 >> col)) img.set(x + col, y + r, c.r, c.g, c.b);
        }
      }
    }
    x += kCharWidth;
  }
}

// Vertical text, read bottom to top.
void text_up(RgbRaster& img, int x, int y, const std::string& s, Color c) {
  for (char ch : s) {
    if (const Glyph* g = find_glyph(ch)) {
      for (int r = 0; r < 7; ++r) {
        for (int col = 0; col < 5; ++col) {
          if (g->rows[static_cast<std::size_t>(r)] & (0x10 >> col)) img.set(x + r, y - col, c.r, c.g, c.b);
        }
      }
    }
    y -= kCharWidth;
  }
}

std::string truncate(const std::string& s, std::size_t chars) {
  return s.size() <= chars ? s : s.substr(0, chars - 1) + ".";
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, v >= 10 ? "%.0f" : "%.2f", v);
  return buf;
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

std::vector<double> moving_average(const std::vector<double>& v, std::size_t window) {
  std::vector<double> out(v.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    sum += v[i];
    if (i >= window) sum -= v[i - window];
    out[i] = sum / static_cast<double>(std::min(i + 1, window));
  }
  return out;
}

}  // namespace

void render_loss_plot(const TrainingTrace& trace, const fs::path& path) {
  constexpr int kWidth = 800, kHeight = 400, kLeft = 60, kRight = 20, kTop = 30, kBottom = 40;
  constexpr int kPlotW = kWidth - kLeft - kRight, kPlotH = kHeight - kTop - kBottom;
  RgbRaster img(kWidth, kHeight);
  const Color axis{60, 60, 60}, grid{225, 225, 225};

  std::vector<double> g, d;
  for (const auto& p : trace.losses) {
    g.push_back(p.g_loss);
    d.push_back(p.d_loss);
  }
  double top = 0.0;
  for (double v : g) top = std::max(top, v);
  for (double v : d) top = std::max(top, v);
  top = top > 0 ? top * 1.05 : 1.0;
  const std::size_t last = g.empty() ? 0 : g.size() - 1;

  for (int k = 0; k <= 4; ++k) {
    const int y = kHeight - kBottom - k * kPlotH / 4;
    if (k > 0) line(img, kLeft + 1, y, kWidth - kRight, y, grid);
    const std::string label = tick(top * k / 4.0);
    text(img, kLeft - 6 - text_width(label), y - 3, label, axis);
    const int x = kLeft + k * kPlotW / 4;
    line(img, x, kHeight - kBottom, x, kHeight - kBottom + 4, axis);
    const std::string xl = std::to_string(static_cast<long>(std::lround(static_cast<double>(last) * k / 4.0)));
    text(img, x - text_width(xl) / 2, kHeight - kBottom + 8, xl, axis);
  }
  line(img, kLeft, kHeight - kBottom, kWidth - kRight, kHeight - kBottom, axis);
  line(img, kLeft, kTop, kLeft, kHeight - kBottom, axis);
  text(img, kLeft + (kPlotW - text_width("iteration")) / 2, kHeight - 14, "iteration", axis);
  text_up(img, 8, kTop + (kPlotH + text_width("loss")) / 2, "loss", axis);
  text(img, kLeft, 10, "AC-GAN training loss", axis);

  if (!g.empty()) {
    const std::size_t window = std::max<std::size_t>(1, g.size() / 50);
    auto draw = [&](const std::vector<double>& series, Color c) {
      auto to_xy = [&](std::size_t i, double v) {
        const double fx = series.size() > 1 ? static_cast<double>(i) / static_cast<double>(series.size() - 1) : 0.0;
        const int x = kLeft + static_cast<int>(std::lround(fx * kPlotW));
        const int y = kHeight - kBottom - static_cast<int>(std::lround(v / top * kPlotH));
        return std::pair{x, y};
      };
      const auto smooth = moving_average(series, window);
      for (const auto* s : {&series, &smooth}) {
        const Color col = s == &series ? lighten(c) : c;
        for (std::size_t i = 1; i < s->size(); ++i) {
          auto [x0, y0] = to_xy(i - 1, (*s)[i - 1]);
          auto [x1, y1] = to_xy(i, (*s)[i]);
          line(img, x0, y0, x1, y1, col);
        }
      }
    };
    draw(d, kPalette[3]);
    draw(g, kPalette[0]);
  }

  int x = kWidth - kRight - text_width("generator") - text_width("discriminator") - 40;
  for (const auto& [name, c] : {std::pair{std::string("generator"), kPalette[0]}, {"discriminator", kPalette[3]}}) {
    rect(img, x, 10, x + 8, 18, c);
    text(img, x + 12, 11, name, axis);
    x += 12 + text_width(name) + 14;
  }
  ensure_parent(path);
  write_png_rgb(path, img);
}

void render_confusion(const ConfusionMatrix& cm, const fs::path& path) {
  const int k = cm.size();
  if (k == 0) throw DataError("cannot render an empty confusion matrix");
  const int cell = std::clamp(600 / k, 8, 40);
  std::size_t longest = 0;
  for (const auto& l : cm.labels()) longest = std::max(longest, l.size());
  const std::size_t chars = std::min<std::size_t>(longest, 16);
  const int margin = static_cast<int>(chars) * kCharWidth + 24;
  const int side = k * cell;
  RgbRaster img(margin + side + 10, margin + side + 10);
  const Color ink{60, 60, 60};

  for (int t = 0; t < k; ++t) {
    const auto row = cm.row_sum(t);
    for (int p = 0; p < k; ++p) {
      const double frac = row > 0 ? static_cast<double>(cm.at(t, p)) / static_cast<double>(row) : 0.0;
      const auto shade = static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - frac)));
      rect(img, margin + p * cell + 1, margin + t * cell + 1, margin + (p + 1) * cell - 1, margin + (t + 1) * cell - 1,
           {shade, shade, static_cast<std::uint8_t>(std::max<int>(shade, 90))});
    }
  }
  for (int i = 0; i <= k; ++i) {
    line(img, margin + i * cell, margin, margin + i * cell, margin + side, {200, 200, 200});
    line(img, margin, margin + i * cell, margin + side, margin + i * cell, {200, 200, 200});
  }
  if (cell >= 8) {
    for (int i = 0; i < k; ++i) {
      const std::string label = truncate(cm.labels()[static_cast<std::size_t>(i)], chars);
      text(img, margin - 6 - text_width(label), margin + i * cell + (cell - 7) / 2, label, ink);
      text_up(img, margin + i * cell + (cell - 7) / 2, margin - 6, label, ink);
    }
  }
  text(img, 4, 4, "true \\ predicted", ink);
  ensure_parent(path);
  write_png_rgb(path, img);
}

void render_bar_chart(const std::vector<BarGroup>& groups, const fs::path& path,
                      const std::vector<std::string>& series_names) {
  constexpr int kHeight = 320, kLeft = 44, kRight = 20, kTop = 40, kBottom = 40, kBar = 14, kGap = 24;
  std::size_t series = 0;
  for (const auto& g : groups) series = std::max(series, g.values.size());
  const int group_width = static_cast<int>(series) * kBar + kGap;
  int legend_width = 0;
  for (const auto& n : series_names) legend_width += 12 + text_width(n) + 14;
  const int width = std::max({240, kLeft + kRight + static_cast<int>(groups.size()) * group_width,
                              kLeft + kRight + legend_width});
  RgbRaster img(width, kHeight);
  const Color ink{60, 60, 60};
  const int base = kHeight - kBottom, plot_h = kHeight - kTop - kBottom;
  for (int k = 0; k <= 4; ++k) {
    const int y = base - k * plot_h / 4;
    if (k > 0) line(img, kLeft, y, width - kRight, y, {225, 225, 225});
    const std::string label = tick(k / 4.0);
    text(img, kLeft - 6 - text_width(label), y - 3, label, ink);
  }
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const int x0 = kLeft + static_cast<int>(gi) * group_width + kGap / 2;
    for (std::size_t s = 0; s < groups[gi].values.size(); ++s) {
      const double v = std::clamp(groups[gi].values[s], 0.0, 1.0);
      const int h = static_cast<int>(std::lround(v * plot_h));
      const Color c = kPalette[s % kPalette.size()];
      rect(img, x0 + static_cast<int>(s) * kBar, base - h, x0 + static_cast<int>(s + 1) * kBar - 2, base, c);
    }
    const auto chars = static_cast<std::size_t>(std::max(1, group_width / kCharWidth));
    const std::string name = truncate(groups[gi].name, chars);
    text(img, x0 + (group_width - kGap - text_width(name)) / 2, base + 8, name, ink);
  }
  line(img, kLeft, base, width - kRight, base, ink);
  int x = kLeft;
  for (std::size_t s = 0; s < series_names.size(); ++s) {
    rect(img, x, 12, x + 8, 20, kPalette[s % kPalette.size()]);
    text(img, x + 12, 13, series_names[s], ink);
    x += 12 + text_width(series_names[s]) + 14;
  }
  ensure_parent(path);
  write_png_rgb(path, img);
}

}  // namespace malforge
