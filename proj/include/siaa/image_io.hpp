#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "siaa/image.hpp"

namespace siaa {

// 8-bit RGB buffer, the storage form of adversarial outputs.
struct QuantizedImage {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> data;  // interleaved RGB
};

// round-to-nearest of 255 * pixel; input must be in [0,1]
QuantizedImage quantize_image(const Image& image);
Image dequantize_image(const QuantizedImage& q);

Image load_image(const std::filesystem::path& path);            // any OpenCV-readable format
void save_png(const std::filesystem::path& path, const Image& image);
void save_png(const std::filesystem::path& path, const QuantizedImage& image);

// quick signature check without a full decode
bool looks_like_image_file(const std::filesystem::path& path);

Image resize_image(const Image& image, int height, int width);

// encode/decode through an in-memory JPEG at the given quality, used by the
// compression-artifact augmentation
Image jpeg_roundtrip(const Image& image, int quality);

}  // namespace siaa
