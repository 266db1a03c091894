#pragma once

#include <cassert>
#include <stdexcept>
#include <string>
#include <vector>

namespace dtet {

/// Row-major interleaved raster of doubles.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h, int c, double fill = 0.0)
        : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill)
    {
    }

    std::size_t pixels() const { return static_cast<std::size_t>(width) * height; }
    std::size_t index(int x, int y, int c = 0) const
    {
        assert(x >= 0 && x < width && y >= 0 && y < height && c >= 0 && c < channels);
        return (static_cast<std::size_t>(y) * width + x) * channels + c;
    }
    double& at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
    double at(int x, int y, int c = 0) const { return data[index(x, y, c)]; }
    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    bool same_shape(const Image& o) const { return width == o.width && height == o.height && channels == o.channels; }
};

inline void require_same_shape(const Image& a, const Image& b, const char* what)
{
    if (!a.same_shape(b)) throw std::invalid_argument(std::string(what) + ": image shapes differ");
}

}  // namespace dtet
