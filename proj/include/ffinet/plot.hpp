#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <fstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "ffinet/model.hpp"
#include "ffinet/scene.hpp"

namespace ffinet {

struct PlotError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
};

namespace plot_color {
inline constexpr Rgb background{255, 255, 255};
inline constexpr Rgb lane{190, 190, 190};
inline constexpr Rgb history{235, 200, 40};
inline constexpr Rgb ground_truth{220, 40, 40};
inline constexpr Rgb final_pred{40, 170, 60};
inline constexpr Rgb initial_pred{150, 60, 200};
inline constexpr Rgb current{30, 30, 30};
}  // namespace plot_color

class Canvas {
  public:
    Canvas(int width, int height, Rgb fill = plot_color::background) : w_(width), h_(height) {
        pixels_.resize(static_cast<size_t>(w_) * h_ * 3);
        for (int y = 0; y < h_; ++y)
            for (int x = 0; x < w_; ++x) set(x, y, fill);
    }

    int width() const { return w_; }
    int height() const { return h_; }

    void set(int x, int y, Rgb c) {
        if (x < 0 || y < 0 || x >= w_ || y >= h_) return;
        const size_t i = (static_cast<size_t>(y) * w_ + x) * 3;
        pixels_[i] = c.r;
        pixels_[i + 1] = c.g;
        pixels_[i + 2] = c.b;
    }

    Rgb get(int x, int y) const {
        const size_t i = (static_cast<size_t>(y) * w_ + x) * 3;
        return {pixels_[i], pixels_[i + 1], pixels_[i + 2]};
    }

    void line(double x0, double y0, double x1, double y1, Rgb c, int thickness = 1) {
        const double dx = x1 - x0, dy = y1 - y0;
        const int steps = std::max(2, static_cast<int>(std::ceil(std::max(std::abs(dx), std::abs(dy)))) + 1);
        for (int i = 0; i < steps; ++i) {
            const double t = static_cast<double>(i) / (steps - 1);
            const int px = static_cast<int>(std::lround(x0 + t * dx));
            const int py = static_cast<int>(std::lround(y0 + t * dy));
            for (int oy = -(thickness / 2); oy <= thickness / 2; ++oy)
                for (int ox = -(thickness / 2); ox <= thickness / 2; ++ox) set(px + ox, py + oy, c);
        }
    }

    void disc(double cx, double cy, int radius, Rgb c) {
        for (int oy = -radius; oy <= radius; ++oy)
            for (int ox = -radius; ox <= radius; ++ox)
                if (ox * ox + oy * oy <= radius * radius)
                    set(static_cast<int>(std::lround(cx)) + ox, static_cast<int>(std::lround(cy)) + oy, c);
    }

    // Four crossing strokes make a star marker.
    void star(double cx, double cy, int radius, Rgb c) {
        line(cx - radius, cy, cx + radius, cy, c);
        line(cx, cy - radius, cx, cy + radius, c);
        const double d = radius * 0.7071;
        line(cx - d, cy - d, cx + d, cy + d, c);
        line(cx - d, cy + d, cx + d, cy - d, c);
    }

    void write_ppm(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw PlotError("cannot open for writing: " + path.string());
        out << "P6\n" << w_ << " " << h_ << "\n255\n";
        out.write(reinterpret_cast<const char*>(pixels_.data()),
                  static_cast<std::streamsize>(pixels_.size()));
    }

    void write_png(const std::filesystem::path& path) const {
        // raw scanlines with filter byte 0, deflated with zlib
        std::vector<std::uint8_t> raw;
        raw.reserve(static_cast<size_t>(h_) * (static_cast<size_t>(w_) * 3 + 1));
        for (int y = 0; y < h_; ++y) {
            raw.push_back(0);
            const std::uint8_t* row = pixels_.data() + static_cast<size_t>(y) * w_ * 3;
            raw.insert(raw.end(), row, row + static_cast<size_t>(w_) * 3);
        }
        uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
        std::vector<std::uint8_t> comp(comp_len);
        if (compress(comp.data(), &comp_len, raw.data(), static_cast<uLong>(raw.size())) != Z_OK)
            throw PlotError("deflate failed while writing " + path.string());
        comp.resize(comp_len);

        std::ofstream out(path, std::ios::binary);
        if (!out) throw PlotError("cannot open for writing: " + path.string());
        const std::uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
        out.write(reinterpret_cast<const char*>(sig), 8);
        auto be32 = [](std::uint32_t v) {
            return std::array<std::uint8_t, 4>{static_cast<std::uint8_t>(v >> 24),
                                               static_cast<std::uint8_t>(v >> 16),
                                               static_cast<std::uint8_t>(v >> 8),
                                               static_cast<std::uint8_t>(v)};
        };
        auto chunk = [&](const char type[4], const std::uint8_t* data, std::uint32_t len) {
            auto lb = be32(len);
            out.write(reinterpret_cast<const char*>(lb.data()), 4);
            out.write(type, 4);
            if (len) out.write(reinterpret_cast<const char*>(data), len);
            uLong crc = crc32(0L, Z_NULL, 0);
            crc = crc32(crc, reinterpret_cast<const Bytef*>(type), 4);
            if (len) crc = crc32(crc, data, len);
            auto cb = be32(static_cast<std::uint32_t>(crc));
            out.write(reinterpret_cast<const char*>(cb.data()), 4);
        };
        std::uint8_t ihdr[13];
        auto wb = be32(static_cast<std::uint32_t>(w_)), hb = be32(static_cast<std::uint32_t>(h_));
        std::copy(wb.begin(), wb.end(), ihdr);
        std::copy(hb.begin(), hb.end(), ihdr + 4);
        ihdr[8] = 8;   // bit depth
        ihdr[9] = 2;   // truecolor
        ihdr[10] = ihdr[11] = ihdr[12] = 0;
        chunk("IHDR", ihdr, 13);
        chunk("IDAT", comp.data(), static_cast<std::uint32_t>(comp.size()));
        chunk("IEND", nullptr, 0);
    }

    void write(const std::filesystem::path& path) const {
        const std::string ext = path.extension().string();
        if (ext == ".ppm") write_ppm(path);
        else if (ext == ".png") write_png(path);
        else throw PlotError("unsupported image format \"" + ext + "\" (expected .ppm or .png)");
    }

  private:
    int w_, h_;
    std::vector<std::uint8_t> pixels_;
};

struct PlotOptions {
    int width = 900, height = 900;
    double margin = 10.0;  // meters around the scene bounding box
    bool draw_initial = true;
};

// Lanes grey, observed history yellow, ground-truth future red, final
// predictions green, initial prediction purple; endpoints starred, current
// positions dotted.
inline Canvas render_scene(const RawScene& scene, const ScenePredictions* preds = nullptr,
                           const PlotOptions& opt = {}) {
    if (preds && preds->scene_id != scene.scene_id)
        throw PlotError("scene/prediction id mismatch: \"" + scene.scene_id + "\" vs \"" +
                        preds->scene_id + "\"");

    double min_x = std::numeric_limits<double>::infinity(), min_y = min_x;
    double max_x = -min_x, max_y = -min_y;
    auto grow = [&](const Vec2& p) {
        min_x = std::min(min_x, p.x);
        min_y = std::min(min_y, p.y);
        max_x = std::max(max_x, p.x);
        max_y = std::max(max_y, p.y);
    };
    for (const auto& l : scene.lanes)
        for (const auto& p : l.points) grow(p);
    for (const auto& a : scene.agents)
        for (size_t t = 0; t < a.positions.size(); ++t)
            if (a.valid[t]) grow(a.positions[t]);
    if (!(min_x < max_x)) throw PlotError("scene " + scene.scene_id + " has no drawable extent");
    min_x -= opt.margin;
    min_y -= opt.margin;
    max_x += opt.margin;
    max_y += opt.margin;
    const double scale = std::min(opt.width / (max_x - min_x), opt.height / (max_y - min_y));
    auto px = [&](const Vec2& p) { return (p.x - min_x) * scale; };
    auto py = [&](const Vec2& p) { return opt.height - 1 - (p.y - min_y) * scale; };  // y up

    Canvas canvas(opt.width, opt.height);
    auto polyline = [&](const std::vector<Vec2>& pts, Rgb c, int thickness) {
        for (size_t i = 0; i + 1 < pts.size(); ++i)
            canvas.line(px(pts[i]), py(pts[i]), px(pts[i + 1]), py(pts[i + 1]), c, thickness);
    };

    for (const auto& l : scene.lanes) polyline(l.points, plot_color::lane, 2);

    for (const auto& a : scene.agents) {
        std::vector<Vec2> hist, fut;
        for (int t = 0; t < scene.obs_len; ++t)
            if (a.valid[static_cast<size_t>(t)]) hist.push_back(a.positions[static_cast<size_t>(t)]);
        for (int t = scene.obs_len; t < scene.obs_len + scene.pred_len; ++t)
            if (a.valid[static_cast<size_t>(t)]) fut.push_back(a.positions[static_cast<size_t>(t)]);
        polyline(hist, plot_color::history, 2);
        polyline(fut, plot_color::ground_truth, 2);
        if (!fut.empty()) canvas.star(px(fut.back()), py(fut.back()), 6, plot_color::ground_truth);
        if (!hist.empty()) canvas.disc(px(hist.back()), py(hist.back()), 4, plot_color::current);
    }

    if (preds) {
        for (const auto& ap : preds->agents) {
            if (opt.draw_initial) {
                polyline(ap.initial, plot_color::initial_pred, 1);
                canvas.star(px(ap.initial.back()), py(ap.initial.back()), 5, plot_color::initial_pred);
            }
            for (const auto& mode : ap.modes) {
                polyline(mode, plot_color::final_pred, 1);
                canvas.star(px(mode.back()), py(mode.back()), 5, plot_color::final_pred);
            }
        }
    }
    return canvas;
}

}  // namespace ffinet
