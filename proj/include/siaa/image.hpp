#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace siaa {

// H x W x 3 interleaved RGB, double precision. The [0,1] pixel-range
// contract is enforced at operation boundaries (attacks, quantization,
// metrics), not by the container itself: gradients and perturbations reuse
// the same layout with unrestricted values.
struct Image {
    int height = 0;
    int width = 0;
    std::vector<double> data;  // row-major, (y * width + x) * 3 + c

    Image() = default;
    Image(int h, int w, double fill = 0.0)
        : height(h), width(w), data(static_cast<std::size_t>(h) * w * 3, fill) {}

    double& at(int y, int x, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
    double at(int y, int x, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }

    std::size_t size() const { return data.size(); }
    bool same_shape(const Image& o) const { return height == o.height && width == o.width; }
};

inline bool all_finite(const Image& img) {
    for (double v : img.data)
        if (!std::isfinite(v)) return false;
    return true;
}

inline bool is_unit_range(const Image& img, double tol = 0.0) {
    for (double v : img.data)
        if (!(v >= -tol && v <= 1.0 + tol)) return false;
    return true;
}

inline void clamp01(Image& img) {
    for (double& v : img.data) v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
}

inline double linf_distance(const Image& a, const Image& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

// Image with its dataset identity; the unit all training and evaluation
// loops operate on.
struct Sample {
    std::string id;
    int label = 0;  // 0 = real, 1 = fake
    Image image;
};

}  // namespace siaa
