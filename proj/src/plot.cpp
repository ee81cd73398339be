#include "kseg/plot.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace kseg {

std::vector<double> moving_average(const std::vector<double>& y, int window) {
    if (window < 1) throw std::runtime_error("moving_average: window must be >= 1");
    if (window == 1 || y.empty()) return y;
    std::vector<double> out(y.size());
    int n = static_cast<int>(y.size());
    int half = window / 2;
    for (int i = 0; i < n; ++i) {
        int lo = std::max(0, i - half);
        int hi = std::min(n - 1, i + (window - 1 - half));
        double s = 0;
        for (int k = lo; k <= hi; ++k) s += y[static_cast<size_t>(k)];
        out[static_cast<size_t>(i)] = s / (hi - lo + 1);
    }
    return out;
}

namespace {

// Classic 5x7 column-encoded bitmap font, LSB = top row.
struct Glyph {
    char c;
    uint8_t col[5];
};
const Glyph kFont[] = {
    {' ', {0x00, 0x00, 0x00, 0x00, 0x00}}, {'%', {0x23, 0x13, 0x08, 0x64, 0x62}},
    {'(', {0x00, 0x1C, 0x22, 0x41, 0x00}}, {')', {0x00, 0x41, 0x22, 0x1C, 0x00}},
    {',', {0x00, 0x50, 0x30, 0x00, 0x00}}, {'-', {0x08, 0x08, 0x08, 0x08, 0x08}},
    {'.', {0x00, 0x60, 0x60, 0x00, 0x00}}, {'/', {0x20, 0x10, 0x08, 0x04, 0x02}},
    {'0', {0x3E, 0x51, 0x49, 0x45, 0x3E}}, {'1', {0x00, 0x42, 0x7F, 0x40, 0x00}},
    {'2', {0x42, 0x61, 0x51, 0x49, 0x46}}, {'3', {0x21, 0x41, 0x45, 0x4B, 0x31}},
    {'4', {0x18, 0x14, 0x12, 0x7F, 0x10}}, {'5', {0x27, 0x45, 0x45, 0x45, 0x39}},
    {'6', {0x3C, 0x4A, 0x49, 0x49, 0x30}}, {'7', {0x01, 0x71, 0x09, 0x05, 0x03}},
    {'8', {0x36, 0x49, 0x49, 0x49, 0x36}}, {'9', {0x06, 0x49, 0x49, 0x29, 0x1E}},
    {':', {0x00, 0x36, 0x36, 0x00, 0x00}}, {'=', {0x14, 0x14, 0x14, 0x14, 0x14}},
    {'A', {0x7E, 0x11, 0x11, 0x11, 0x7E}}, {'B', {0x7F, 0x49, 0x49, 0x49, 0x36}},
    {'C', {0x3E, 0x41, 0x41, 0x41, 0x22}}, {'D', {0x7F, 0x41, 0x41, 0x22, 0x1C}},
    {'E', {0x7F, 0x49, 0x49, 0x49, 0x41}}, {'F', {0x7F, 0x09, 0x09, 0x09, 0x01}},
    {'G', {0x3E, 0x41, 0x49, 0x49, 0x7A}}, {'H', {0x7F, 0x08, 0x08, 0x08, 0x7F}},
    {'I', {0x00, 0x41, 0x7F, 0x41, 0x00}}, {'J', {0x20, 0x40, 0x41, 0x3F, 0x01}},
    {'K', {0x7F, 0x08, 0x14, 0x22, 0x41}}, {'L', {0x7F, 0x40, 0x40, 0x40, 0x40}},
    {'M', {0x7F, 0x02, 0x0C, 0x02, 0x7F}}, {'N', {0x7F, 0x04, 0x08, 0x10, 0x7F}},
    {'O', {0x3E, 0x41, 0x41, 0x41, 0x3E}}, {'P', {0x7F, 0x09, 0x09, 0x09, 0x06}},
    {'Q', {0x3E, 0x41, 0x51, 0x21, 0x5E}}, {'R', {0x7F, 0x09, 0x19, 0x29, 0x46}},
    {'S', {0x46, 0x49, 0x49, 0x49, 0x31}}, {'T', {0x01, 0x01, 0x7F, 0x01, 0x01}},
    {'U', {0x3F, 0x40, 0x40, 0x40, 0x3F}}, {'V', {0x1F, 0x20, 0x40, 0x20, 0x1F}},
    {'W', {0x3F, 0x40, 0x38, 0x40, 0x3F}}, {'X', {0x63, 0x14, 0x08, 0x14, 0x63}},
    {'Y', {0x07, 0x08, 0x70, 0x08, 0x07}}, {'Z', {0x61, 0x51, 0x49, 0x45, 0x43}},
    {'_', {0x40, 0x40, 0x40, 0x40, 0x40}}, {'+', {0x08, 0x08, 0x3E, 0x08, 0x08}},
};

const uint8_t* find_glyph(char c) {
    c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    for (const auto& g : kFont)
        if (g.c == c) return g.col;
    return kFont[0].col;  // unknown -> blank
}

struct Canvas {
    int w, h;
    std::vector<uint8_t> px;  // RGB

    Canvas(int w_, int h_) : w(w_), h(h_), px(static_cast<size_t>(w_) * h_ * 3, 255) {}

    void set(int x, int y, const std::array<uint8_t, 3>& c) {
        if (x < 0 || y < 0 || x >= w || y >= h) return;
        size_t i = (static_cast<size_t>(y) * w + x) * 3;
        px[i] = c[0];
        px[i + 1] = c[1];
        px[i + 2] = c[2];
    }

    void line(int x0, int y0, int x1, int y1, const std::array<uint8_t, 3>& c) {
        int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
        int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
        int err = dx + dy;
        while (true) {
            set(x0, y0, c);
            if (x0 == x1 && y0 == y1) break;
            int e2 = 2 * err;
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

    void thick_line(int x0, int y0, int x1, int y1, const std::array<uint8_t, 3>& c) {
        line(x0, y0, x1, y1, c);
        line(x0 + 1, y0, x1 + 1, y1, c);
        line(x0, y0 + 1, x1, y1 + 1, c);
    }

    void text(int x, int y, const std::string& s, const std::array<uint8_t, 3>& c) {
        for (char ch : s) {
            const uint8_t* g = find_glyph(ch);
            for (int cx = 0; cx < 5; ++cx)
                for (int cy = 0; cy < 7; ++cy)
                    if (g[cx] >> cy & 1) set(x + cx, y + cy, c);
            x += 6;
        }
    }

    // Vertical text, bottom-to-top (for the y-axis label).
    void vtext(int x, int y, const std::string& s, const std::array<uint8_t, 3>& c) {
        for (char ch : s) {
            const uint8_t* g = find_glyph(ch);
            for (int cx = 0; cx < 5; ++cx)
                for (int cy = 0; cy < 7; ++cy)
                    if (g[cx] >> cy & 1) set(x + cy, y - cx, c);
            y -= 6;
        }
    }
};

std::string fmt_tick(double v) {
    char buf[32];
    double a = std::abs(v);
    if (v == 0)
        std::snprintf(buf, sizeof buf, "0");
    else if (a >= 1000 || a < 0.01)
        std::snprintf(buf, sizeof buf, "%.1e", v);
    else if (a >= 10)
        std::snprintf(buf, sizeof buf, "%.0f", v);
    else
        std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

void save_png(const std::string& path, const Canvas& cv) {
    FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw std::runtime_error("plot: cannot open " + path + " for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        std::fclose(fp);
        throw std::runtime_error("plot: libpng failure writing " + path);
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(cv.w), static_cast<png_uint_32>(cv.h), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < cv.h; ++y)
        png_write_row(png, const_cast<png_bytep>(cv.px.data() + static_cast<size_t>(y) * cv.w * 3));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

}  // namespace

void write_line_plot(const std::string& path, const std::vector<PlotSeries>& series,
                     const std::string& title, const std::string& x_label,
                     const std::string& y_label, int width, int height) {
    if (width < 200 || height < 150) throw std::runtime_error("plot: canvas too small");
    Canvas cv(width, height);
    const std::array<uint8_t, 3> black{0, 0, 0};
    const std::array<uint8_t, 3> grey{210, 210, 210};

    int left = 70, right = width - 20, top = 40, bottom = height - 50;

    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& s : series) {
        for (double v : s.x) {
            xmin = std::min(xmin, v);
            xmax = std::max(xmax, v);
        }
        for (double v : s.y) {
            if (!std::isfinite(v)) continue;
            ymin = std::min(ymin, v);
            ymax = std::max(ymax, v);
        }
    }
    if (!std::isfinite(xmin)) {
        xmin = 0;
        xmax = 1;
    }
    if (!std::isfinite(ymin)) {
        ymin = 0;
        ymax = 1;
    }
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) {
        ymax += 0.5;
        ymin -= 0.5;
    }
    double ypad = 0.05 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;

    auto px = [&](double x) {
        return left + static_cast<int>(std::lround((x - xmin) / (xmax - xmin) * (right - left)));
    };
    auto py = [&](double y) {
        return bottom - static_cast<int>(std::lround((y - ymin) / (ymax - ymin) * (bottom - top)));
    };

    const int n_ticks = 5;
    for (int t = 0; t <= n_ticks; ++t) {
        double fy = ymin + (ymax - ymin) * t / n_ticks;
        int yy = py(fy);
        cv.line(left, yy, right, yy, grey);
        std::string lab = fmt_tick(fy);
        cv.text(left - 6 * static_cast<int>(lab.size()) - 6, yy - 3, lab, black);

        double fx = xmin + (xmax - xmin) * t / n_ticks;
        int xx = px(fx);
        cv.line(xx, top, xx, bottom, grey);
        lab = fmt_tick(fx);
        cv.text(xx - 3 * static_cast<int>(lab.size()), bottom + 8, lab, black);
    }
    cv.line(left, top, left, bottom, black);
    cv.line(left, bottom, right, bottom, black);

    cv.text((left + right) / 2 - 3 * static_cast<int>(title.size()), 15, title, black);
    cv.text((left + right) / 2 - 3 * static_cast<int>(x_label.size()), height - 20, x_label, black);
    cv.vtext(12, (top + bottom) / 2 + 3 * static_cast<int>(y_label.size()), y_label, black);

    int ly = top + 6;
    for (const auto& s : series) {
        for (size_t i = 0; i + 1 < s.x.size() && i + 1 < s.y.size(); ++i) {
            if (!std::isfinite(s.y[i]) || !std::isfinite(s.y[i + 1])) continue;
            cv.thick_line(px(s.x[i]), py(s.y[i]), px(s.x[i + 1]), py(s.y[i + 1]), s.color);
        }
        if (!s.label.empty()) {
            cv.line(left + 10, ly + 3, left + 34, ly + 3, s.color);
            cv.line(left + 10, ly + 4, left + 34, ly + 4, s.color);
            cv.text(left + 40, ly, s.label, black);
            ly += 12;
        }
    }

    save_png(path, cv);
}

}  // namespace kseg
