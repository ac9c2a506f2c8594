#include "siaa/image_io.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "siaa/errors.hpp"

namespace siaa {

namespace {

cv::Mat to_mat8u(const Image& image) {
    cv::Mat m(image.height, image.width, CV_8UC3);
    for (int y = 0; y < image.height; ++y) {
        auto* row = m.ptr<cv::Vec3b>(y);
        for (int x = 0; x < image.width; ++x) {
            // BGR for OpenCV
            row[x][0] = static_cast<std::uint8_t>(std::lround(image.at(y, x, 2) * 255.0));
            row[x][1] = static_cast<std::uint8_t>(std::lround(image.at(y, x, 1) * 255.0));
            row[x][2] = static_cast<std::uint8_t>(std::lround(image.at(y, x, 0) * 255.0));
        }
    }
    return m;
}

Image from_mat8u(const cv::Mat& m) {
    Image img(m.rows, m.cols);
    for (int y = 0; y < m.rows; ++y) {
        const auto* row = m.ptr<cv::Vec3b>(y);
        for (int x = 0; x < m.cols; ++x) {
            img.at(y, x, 0) = row[x][2] / 255.0;
            img.at(y, x, 1) = row[x][1] / 255.0;
            img.at(y, x, 2) = row[x][0] / 255.0;
        }
    }
    return img;
}

}  // namespace

QuantizedImage quantize_image(const Image& image) {
    if (!is_unit_range(image))
        throw std::invalid_argument("quantize_image: pixels outside [0,1]");
    QuantizedImage q;
    q.height = image.height;
    q.width = image.width;
    q.data.resize(image.data.size());
    for (std::size_t i = 0; i < image.data.size(); ++i)
        q.data[i] = static_cast<std::uint8_t>(std::lround(image.data[i] * 255.0));
    return q;
}

Image dequantize_image(const QuantizedImage& q) {
    Image img(q.height, q.width);
    for (std::size_t i = 0; i < q.data.size(); ++i) img.data[i] = q.data[i] / 255.0;
    return img;
}

Image load_image(const std::filesystem::path& path) {
    cv::Mat m = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (m.empty()) throw MissingArtifactError("cannot decode image: " + path.string());
    return from_mat8u(m);
}

void save_png(const std::filesystem::path& path, const Image& image) {
    save_png(path, quantize_image(image));
}

void save_png(const std::filesystem::path& path, const QuantizedImage& image) {
    cv::Mat m(image.height, image.width, CV_8UC3);
    for (int y = 0; y < image.height; ++y) {
        auto* row = m.ptr<cv::Vec3b>(y);
        for (int x = 0; x < image.width; ++x) {
            const std::size_t i = (static_cast<std::size_t>(y) * image.width + x) * 3;
            row[x][0] = image.data[i + 2];
            row[x][1] = image.data[i + 1];
            row[x][2] = image.data[i + 0];
        }
    }
    if (!cv::imwrite(path.string(), m))
        throw MissingArtifactError("cannot write PNG: " + path.string());
}

bool looks_like_image_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return false;
    unsigned char sig[8] = {};
    in.read(reinterpret_cast<char*>(sig), sizeof sig);
    if (in.gcount() < 3) return false;
    static const unsigned char png[] = {0x89, 'P', 'N', 'G'};
    if (std::size_t(in.gcount()) >= 4 && std::equal(png, png + 4, sig)) return true;
    if (sig[0] == 0xFF && sig[1] == 0xD8 && sig[2] == 0xFF) return true;  // JPEG
    return false;
}

Image resize_image(const Image& image, int height, int width) {
    if (image.height == height && image.width == width) return image;
    cv::Mat src(image.height, image.width, CV_64FC3,
                const_cast<double*>(image.data.data()));
    cv::Mat dst;
    const int interp = (height < image.height || width < image.width) ? cv::INTER_AREA
                                                                      : cv::INTER_LINEAR;
    cv::resize(src, dst, cv::Size(width, height), 0, 0, interp);
    Image out(height, width);
    for (int y = 0; y < height; ++y) {
        const auto* row = dst.ptr<cv::Vec3d>(y);
        for (int x = 0; x < width; ++x)
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = row[x][c];
    }
    return out;
}

Image jpeg_roundtrip(const Image& image, int quality) {
    std::vector<unsigned char> buf;
    cv::imencode(".jpg", to_mat8u(image), buf, {cv::IMWRITE_JPEG_QUALITY, quality});
    cv::Mat decoded = cv::imdecode(buf, cv::IMREAD_COLOR);
    if (decoded.empty()) throw std::runtime_error("jpeg_roundtrip: decode failed");
    return from_mat8u(decoded);
}

}  // namespace siaa
