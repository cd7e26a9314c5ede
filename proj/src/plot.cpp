#include "trajlm/plot.hpp"

#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>

#include "trajlm/errors.hpp"

namespace trajlm {

namespace {

struct Color {
  std::uint8_t r, g, b;
};

constexpr Color kBackground{22, 24, 28};
constexpr Color kDrivable{62, 66, 74};
constexpr Color kIntersectionTint{84, 80, 62};
constexpr Color kDivider{196, 176, 80};
constexpr Color kEgo{235, 235, 235};
constexpr Color kNeighbor{130, 150, 170};
constexpr Color kTruth{90, 220, 120};
constexpr Color kPanel{14, 16, 20};
constexpr Color kPanelBorder{120, 120, 130};
constexpr Color kCaption{180, 180, 190};

const Color kPredictionPalette[] = {
    {80, 190, 255}, {255, 110, 210}, {255, 170, 70}, {250, 230, 90}, {170, 120, 255}};

Color prediction_color(std::size_t i) {
  return kPredictionPalette[i % (sizeof(kPredictionPalette) / sizeof(Color))];
}

/// 5x7 glyphs, one byte per row, bit 4 = leftmost column.
struct Glyph {
  char ch;
  std::uint8_t rows[7];
};

const Glyph kFont[] = {
    {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
    {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}},
    {'D', {0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E}},
    {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}},
    {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
    {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}},
    {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
    {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
    {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
    {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}},
    {'N', {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11}},
    {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
    {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}},
    {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
    {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}},
    {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
    {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
    {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}},
    {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
    {'Y', {0x11, 0x11, 0x0A, 0x04, 0x04, 0x04, 0x04}},
    {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
    {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
    {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
    {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
    {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
    {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
    {' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
    {'-', {0x00, 0x00, 0x00, 0x0E, 0x00, 0x00, 0x00}},
    {'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}},
    {')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}},
    {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}},
    {':', {0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00}},
};

const std::uint8_t* glyph_rows(char ch) {
  const char upper = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  for (const Glyph& g : kFont)
    if (g.ch == upper) return g.rows;
  return nullptr;  // unknown characters render as blanks
}

constexpr int kTextScale = 2;
constexpr int kGlyphW = 5 * kTextScale;
constexpr int kGlyphH = 7 * kTextScale;
constexpr int kGlyphGap = kTextScale;

int text_width(const std::string& text) {
  if (text.empty()) return 0;
  return static_cast<int>(text.size()) * (kGlyphW + kGlyphGap) - kGlyphGap;
}

class Canvas {
public:
  Canvas(std::size_t width, std::size_t height)
      : width_(width), height_(height), rgb_(width * height * 3) {}

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  const std::vector<std::uint8_t>& rgb() const { return rgb_; }

  void put(int x, int y, Color c) {
    if (x < 0 || y < 0 || x >= static_cast<int>(width_) || y >= static_cast<int>(height_)) return;
    std::uint8_t* px = &rgb_[(static_cast<std::size_t>(y) * width_ + static_cast<std::size_t>(x)) * 3];
    px[0] = c.r;
    px[1] = c.g;
    px[2] = c.b;
  }

  void fill(Color c) {
    for (std::size_t i = 0; i < width_ * height_; ++i) {
      rgb_[3 * i] = c.r;
      rgb_[3 * i + 1] = c.g;
      rgb_[3 * i + 2] = c.b;
    }
  }

  void disc(int cx, int cy, int radius, Color c) {
    for (int dy = -radius; dy <= radius; ++dy)
      for (int dx = -radius; dx <= radius; ++dx)
        if (dx * dx + dy * dy <= radius * radius) put(cx + dx, cy + dy, c);
  }

  void line(int x0, int y0, int x1, int y1, int radius, Color c) {
    const int steps = std::max({std::abs(x1 - x0), std::abs(y1 - y0), 1});
    for (int s = 0; s <= steps; ++s) {
      const double t = static_cast<double>(s) / steps;
      disc(static_cast<int>(std::lround(x0 + t * (x1 - x0))),
           static_cast<int>(std::lround(y0 + t * (y1 - y0))), radius, c);
    }
  }

  void rect(int x0, int y0, int x1, int y1, Color c) {
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) put(x, y, c);
  }

  void frame(int x0, int y0, int x1, int y1, Color c) {
    for (int x = x0; x <= x1; ++x) {
      put(x, y0, c);
      put(x, y1, c);
    }
    for (int y = y0; y <= y1; ++y) {
      put(x0, y, c);
      put(x1, y, c);
    }
  }

  void text(int x, int y, const std::string& s, Color c) {
    int cursor = x;
    for (char ch : s) {
      if (const std::uint8_t* rows = glyph_rows(ch)) {
        for (int gy = 0; gy < 7; ++gy)
          for (int gx = 0; gx < 5; ++gx)
            if (rows[gy] & (1u << (4 - gx)))
              for (int sy = 0; sy < kTextScale; ++sy)
                for (int sx = 0; sx < kTextScale; ++sx)
                  put(cursor + gx * kTextScale + sx, y + gy * kTextScale + sy, c);
      }
      cursor += kGlyphW + kGlyphGap;
    }
  }

private:
  std::size_t width_, height_;
  std::vector<std::uint8_t> rgb_;
};

/// Ego-frame meters to pixel coordinates; +x right, +y up.
struct ViewTransform {
  double half_extent;
  std::size_t width, height;

  int px(double x) const {
    return static_cast<int>(std::lround((x + half_extent) / (2.0 * half_extent) *
                                        static_cast<double>(width - 1)));
  }
  int py(double y) const {
    return static_cast<int>(std::lround(static_cast<double>(height - 1) -
                                        (y + half_extent) / (2.0 * half_extent) *
                                            static_cast<double>(height - 1)));
  }
};

void draw_polyline(Canvas& canvas, const ViewTransform& view, const std::vector<Vec2>& points,
                   int radius, Color color) {
  for (std::size_t i = 0; i + 1 < points.size(); ++i)
    canvas.line(view.px(points[i].x), view.py(points[i].y), view.px(points[i + 1].x),
                view.py(points[i + 1].y), radius, color);
  for (const Vec2& p : points) canvas.disc(view.px(p.x), view.py(p.y), radius + 1, color);
}

bool any_neighbor_present(const Scene& scene) {
  for (const Track& t : scene.neighbors)
    for (bool present : t.present)
      if (present) return true;
  return false;
}

}  // namespace

std::vector<std::string> plot_legend_entries(const Scene& scene, std::size_t n_predictions) {
  std::vector<std::string> entries = {"HISTORY"};
  if (any_neighbor_present(scene)) entries.push_back("NEIGHBORS");
  if (scene.future.has_value() && !scene.future->empty()) entries.push_back("GROUND TRUTH");
  for (std::size_t i = 1; i <= n_predictions; ++i)
    entries.push_back("PREDICTION " + std::to_string(i));
  return entries;
}

void render_scene_plot(const Scene& scene, const std::vector<PredictedTrajectory>& predictions,
                       const std::string& out_path, const PlotOptions& options) {
  const Scene view_scene = normalize_scene(scene);
  Canvas canvas(options.width, options.height);
  canvas.fill(kBackground);

  double half_extent;
  if (view_scene.map_raster.has_value()) {
    half_extent = view_scene.map_raster->extent / 2.0;
  } else {
    double reach = 5.0;
    auto widen = [&reach](const std::vector<Vec2>& pts) {
      for (const Vec2& p : pts) reach = std::max({reach, std::fabs(p.x), std::fabs(p.y)});
    };
    widen(view_scene.ego.positions);
    for (const Track& t : view_scene.neighbors)
      for (std::size_t i = 0; i < t.positions.size(); ++i)
        if (t.present[i]) reach = std::max({reach, std::fabs(t.positions[i].x), std::fabs(t.positions[i].y)});
    if (view_scene.future) widen(*view_scene.future);
    for (const PredictedTrajectory& p : predictions) widen(p.points);
    half_extent = reach + options.margin_m;
  }
  const ViewTransform view{half_extent, options.width, options.height};

  if (view_scene.map_raster.has_value()) {
    const MapRaster& raster = *view_scene.map_raster;
    for (std::size_t y = 0; y < options.height; ++y) {
      for (std::size_t x = 0; x < options.width; ++x) {
        const double mx = static_cast<double>(x) / static_cast<double>(options.width - 1) *
                              (2.0 * half_extent) - half_extent;
        const double my = (static_cast<double>(options.height - 1) - static_cast<double>(y)) /
                              static_cast<double>(options.height - 1) * (2.0 * half_extent) -
                          half_extent;
        std::size_t row, col;
        if (!raster.cell_of({mx, my}, row, col)) continue;
        Color c = kBackground;
        if (raster.at(MapRaster::kDrivable, row, col)) c = kDrivable;
        if (raster.at(MapRaster::kIntersection, row, col)) c = kIntersectionTint;
        if (raster.at(MapRaster::kLaneDivider, row, col)) c = kDivider;
        canvas.put(static_cast<int>(x), static_cast<int>(y), c);
      }
    }
  }

  // Neighbor history: segments between consecutive present steps, then dots.
  for (const Track& t : view_scene.neighbors) {
    for (std::size_t i = 0; i + 1 < t.positions.size(); ++i)
      if (t.present[i] && t.present[i + 1])
        canvas.line(view.px(t.positions[i].x), view.py(t.positions[i].y),
                    view.px(t.positions[i + 1].x), view.py(t.positions[i + 1].y), 1, kNeighbor);
    for (std::size_t i = 0; i < t.positions.size(); ++i)
      if (t.present[i]) canvas.disc(view.px(t.positions[i].x), view.py(t.positions[i].y), 2, kNeighbor);
  }

  draw_polyline(canvas, view, view_scene.ego.positions, 1, kEgo);

  if (view_scene.future.has_value() && !view_scene.future->empty()) {
    std::vector<Vec2> truth = {view_scene.ego.positions.back()};
    truth.insert(truth.end(), view_scene.future->begin(), view_scene.future->end());
    draw_polyline(canvas, view, truth, 1, kTruth);
  }
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    std::vector<Vec2> pts = {view_scene.ego.positions.back()};
    pts.insert(pts.end(), predictions[i].points.begin(), predictions[i].points.end());
    draw_polyline(canvas, view, pts, 1, prediction_color(i));
  }

  // Legend panel, one row per entry, swatch + label.
  const std::vector<std::string> entries = plot_legend_entries(view_scene, predictions.size());
  const int pad = 8, swatch = 26, gap = 8, row_h = kGlyphH + 6;
  int label_w = 0;
  for (const std::string& e : entries) label_w = std::max(label_w, text_width(e));
  const int panel_w = pad + swatch + gap + label_w + pad;
  const int panel_h = pad + static_cast<int>(entries.size()) * row_h - 6 + pad;
  canvas.rect(10, 10, 10 + panel_w, 10 + panel_h, kPanel);
  canvas.frame(10, 10, 10 + panel_w, 10 + panel_h, kPanelBorder);
  std::size_t prediction_index = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    Color c = kEgo;
    if (entries[i] == "NEIGHBORS") c = kNeighbor;
    else if (entries[i] == "GROUND TRUTH") c = kTruth;
    else if (entries[i].rfind("PREDICTION", 0) == 0) c = prediction_color(prediction_index++);
    const int y = 10 + pad + static_cast<int>(i) * row_h;
    canvas.line(10 + pad, y + kGlyphH / 2, 10 + pad + swatch, y + kGlyphH / 2, 1, c);
    canvas.text(10 + pad + swatch + gap, y, entries[i], kCaption);
  }

  canvas.text(10, static_cast<int>(options.height) - kGlyphH - 10, "EGO FRAME (M)", kCaption);
  write_png(out_path, options.width, options.height, canvas.rgb());
}

namespace {

void append_be32(std::string& out, std::uint32_t v) {
  for (int i = 3; i >= 0; --i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void append_chunk(std::string& out, const char type[4], const std::string& data) {
  append_be32(out, static_cast<std::uint32_t>(data.size()));
  out.append(type, 4);
  out += data;
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(type), 4);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(data.data()), static_cast<uInt>(data.size()));
  append_be32(out, static_cast<std::uint32_t>(crc));
}

}  // namespace

void write_png(const std::string& path, std::size_t width, std::size_t height,
               const std::vector<std::uint8_t>& rgb) {
  if (width == 0 || height == 0 || rgb.size() != width * height * 3)
    throw ConfigError("image buffer is " + std::to_string(rgb.size()) + " bytes, expected " +
                      std::to_string(width * height * 3));

  // Scanlines with a leading filter byte (0 = none) per row.
  std::vector<std::uint8_t> raw((width * 3 + 1) * height);
  for (std::size_t y = 0; y < height; ++y) {
    raw[y * (width * 3 + 1)] = 0;
    std::memcpy(&raw[y * (width * 3 + 1) + 1], &rgb[y * width * 3], width * 3);
  }
  uLongf compressed_len = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> compressed(compressed_len);
  if (compress2(compressed.data(), &compressed_len, raw.data(), static_cast<uLong>(raw.size()), 6) !=
      Z_OK)
    throw DataError("image compression failed for '" + path + "'");

  std::string blob;
  const unsigned char signature[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  blob.append(reinterpret_cast<const char*>(signature), 8);
  std::string ihdr;
  append_be32(ihdr, static_cast<std::uint32_t>(width));
  append_be32(ihdr, static_cast<std::uint32_t>(height));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(2);   // truecolor
  ihdr.push_back(0);   // compression
  ihdr.push_back(0);   // filter
  ihdr.push_back(0);   // no interlace
  append_chunk(blob, "IHDR", ihdr);
  append_chunk(blob, "IDAT",
               std::string(reinterpret_cast<const char*>(compressed.data()), compressed_len));
  append_chunk(blob, "IEND", "");

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write image file '" + path + "'");
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw DataError("cannot write image file '" + path + "'");
}

}  // namespace trajlm
