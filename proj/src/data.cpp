#include "siaa/data.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include "siaa/errors.hpp"
#include "siaa/image_io.hpp"
#include "siaa/serial.hpp"

namespace siaa {

namespace {

constexpr const char* kManifestHeader = "# siaa manifest v1";

bool has_image_extension(const std::filesystem::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::vector<int> split_indices(const DatasetManifest& m, const std::string& split, int label) {
    std::vector<int> idx;
    for (std::size_t i = 0; i < m.entries.size(); ++i)
        if (m.entries[i].split == split && m.entries[i].label == label)
            idx.push_back(static_cast<int>(i));
    return idx;
}

}  // namespace

long DatasetManifest::count(const std::string& split, int label) const {
    long n = 0;
    for (const ManifestEntry& e : entries)
        if (e.split == split && e.label == label) ++n;
    return n;
}

std::vector<const ManifestEntry*> DatasetManifest::in_split(const std::string& split) const {
    std::vector<const ManifestEntry*> out;
    for (const ManifestEntry& e : entries)
        if (e.split == split) out.push_back(&e);
    return out;
}

std::string DatasetManifest::id() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const ManifestEntry& e : entries) {
        h = fnv1a64(e.path.data(), e.path.size(), h);
        h = fnv1a64(&e.label, sizeof e.label, h);
        h = fnv1a64(e.split.data(), e.split.size(), h);
    }
    return hash_hex(h);
}

DatasetManifest load_dataset(const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    const fs::path real_dir = root / "real";
    const fs::path fake_dir = root / "fake";
    if (!fs::is_directory(real_dir) || !fs::is_directory(fake_dir))
        throw MissingArtifactError("dataset root must contain real/ and fake/: " + root.string());

    DatasetManifest manifest;
    for (const auto& [dir, label] : {std::pair{real_dir, 0}, std::pair{fake_dir, 1}}) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(dir))
            if (entry.is_regular_file() && has_image_extension(entry.path()))
                files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        for (const fs::path& f : files) {
            if (!looks_like_image_file(f)) {
                manifest.skipped_unreadable++;
                continue;
            }
            manifest.entries.push_back({f.string(), label, dir.filename().string(), ""});
        }
    }
    if (manifest.entries.empty())
        throw MissingArtifactError("dataset root contains no readable images: " + root.string());
    return manifest;
}

void make_splits(DatasetManifest& manifest, int train_per_class, int val_per_class,
                 std::uint64_t seed) {
    if (train_per_class < 0 || val_per_class < 0)
        throw std::invalid_argument("make_splits: negative split size");
    for (int label = 0; label < 2; ++label) {
        std::vector<int> idx = split_indices(manifest, "", label);
        // also reshuffle entries that already carry a split
        if (idx.empty()) {
            idx.clear();
            for (std::size_t i = 0; i < manifest.entries.size(); ++i)
                if (manifest.entries[i].label == label) idx.push_back(static_cast<int>(i));
        }
        if (static_cast<long>(idx.size()) < train_per_class + val_per_class)
            throw std::invalid_argument("make_splits: not enough entries for class " +
                                        std::to_string(label));
        Rng rng(derive_seed(seed, fnv1a64("split") + label));
        rng.shuffle(idx);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            ManifestEntry& e = manifest.entries[idx[i]];
            if (static_cast<long>(i) < train_per_class)
                e.split = "train";
            else if (static_cast<long>(i) < train_per_class + val_per_class)
                e.split = "val";
            else
                e.split = "test";
        }
    }
    manifest.seed = seed;
}

void few_shot_subset(DatasetManifest& manifest, int n_per_class, std::uint64_t seed) {
    if (n_per_class < 0) throw std::invalid_argument("few_shot_subset: negative size");
    for (int label = 0; label < 2; ++label) {
        std::vector<int> idx = split_indices(manifest, "train", label);
        if (static_cast<long>(idx.size()) < n_per_class)
            throw std::invalid_argument("few_shot_subset: train split of class " +
                                        std::to_string(label) + " has fewer than " +
                                        std::to_string(n_per_class) + " entries");
        Rng rng(derive_seed(seed, fnv1a64("few-shot") + label));
        rng.shuffle(idx);
        for (std::size_t i = n_per_class; i < idx.size(); ++i)
            manifest.entries[idx[i]].split = "unused";
    }
}

void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
    std::ostringstream out;
    out << kManifestHeader << "\n";
    out << "path,label,source,split,seed=" << manifest.seed
        << ",skipped=" << manifest.skipped_unreadable << "\n";
    for (const ManifestEntry& e : manifest.entries)
        out << e.path << "," << e.label << "," << e.source_tag << "," << e.split << "\n";
    write_text_file(path, out.str());
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::istringstream in(read_text_file(path));
    std::string line;
    if (!std::getline(in, line) || line != kManifestHeader)
        throw MissingArtifactError("not a manifest file: " + path.string());
    if (!std::getline(in, line)) throw MissingArtifactError("truncated manifest: " + path.string());

    DatasetManifest manifest;
    const auto seed_pos = line.find("seed=");
    const auto skipped_pos = line.find(",skipped=");
    if (seed_pos == std::string::npos || skipped_pos == std::string::npos)
        throw MissingArtifactError("malformed manifest header: " + path.string());
    manifest.seed = std::stoull(line.substr(seed_pos + 5, skipped_pos - seed_pos - 5));
    manifest.skipped_unreadable = std::stoi(line.substr(skipped_pos + 9));

    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ManifestEntry e;
        std::size_t p3 = line.rfind(',');
        std::size_t p2 = line.rfind(',', p3 - 1);
        std::size_t p1 = line.rfind(',', p2 - 1);
        if (p1 == std::string::npos)
            throw MissingArtifactError("malformed manifest row: " + line);
        e.path = line.substr(0, p1);
        e.label = std::stoi(line.substr(p1 + 1, p2 - p1 - 1));
        e.source_tag = line.substr(p2 + 1, p3 - p2 - 1);
        e.split = line.substr(p3 + 1);
        manifest.entries.push_back(std::move(e));
    }
    return manifest;
}

// ---------------------------------------------------------------------------
// Augmentation

void AugmentationConfig::validate() const {
    for (double p : {rotate90_p, hflip_p, jitter_p, blur_p, jpeg_p, grayscale_p, cutout_p,
                     noise_p})
        if (p < 0.0 || p > 1.0)
            throw std::invalid_argument("AugmentationConfig: probabilities must be in [0,1]");
    if (crop_scale_min <= 0.0 || crop_scale_min > crop_scale_max || crop_scale_max > 1.0)
        throw std::invalid_argument("AugmentationConfig: bad crop scale range");
    if (crop_ratio_min <= 0.0 || crop_ratio_min > crop_ratio_max)
        throw std::invalid_argument("AugmentationConfig: bad crop ratio range");
    if (jpeg_quality_min < 1 || jpeg_quality_min > jpeg_quality_max || jpeg_quality_max > 100)
        throw std::invalid_argument("AugmentationConfig: bad JPEG quality range");
    if (cutout_min < 1 || cutout_min > cutout_max)
        throw std::invalid_argument("AugmentationConfig: bad cutout range");
    if (noise_sigma < 0.0) throw std::invalid_argument("AugmentationConfig: negative noise sigma");
}

std::string AugmentationConfig::id() const {
    std::ostringstream s;
    s << enabled << ' ' << rotate90_p << ' ' << hflip_p << ' ' << crop_scale_min << ' '
      << crop_scale_max << ' ' << crop_ratio_min << ' ' << crop_ratio_max << ' ' << jitter_p
      << ' ' << jitter_brightness << ' ' << jitter_contrast << ' ' << jitter_saturation << ' '
      << jitter_hue << ' ' << blur_p << ' ' << blur_sigma_min << ' ' << blur_sigma_max << ' '
      << jpeg_p << ' ' << jpeg_quality_min << ' ' << jpeg_quality_max << ' ' << grayscale_p
      << ' ' << cutout_p << ' ' << cutout_min << ' ' << cutout_max << ' ' << noise_p << ' '
      << noise_sigma;
    return hash_hex(fnv1a64(s.str()));
}

namespace {

Image rotate90(const Image& img, int quarter_turns) {
    const int k = ((quarter_turns % 4) + 4) % 4;
    if (k == 0) return img;
    const int h = img.height, w = img.width;
    Image out(k == 2 ? h : w, k == 2 ? w : h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) {
                if (k == 1)  // 90 degrees counterclockwise
                    out.at(w - 1 - x, y, c) = img.at(y, x, c);
                else if (k == 2)
                    out.at(h - 1 - y, w - 1 - x, c) = img.at(y, x, c);
                else
                    out.at(x, h - 1 - y, c) = img.at(y, x, c);
            }
    return out;
}

Image hflip(const Image& img) {
    Image out(img.height, img.width);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) out.at(y, img.width - 1 - x, c) = img.at(y, x, c);
    return out;
}

Image random_resized_crop(const Image& img, const AugmentationConfig& cfg, Rng& rng) {
    const double area = static_cast<double>(img.height) * img.width;
    const double scale = rng.uniform(cfg.crop_scale_min, cfg.crop_scale_max);
    const double ratio = rng.uniform(cfg.crop_ratio_min, cfg.crop_ratio_max);
    int cw = static_cast<int>(std::lround(std::sqrt(area * scale * ratio)));
    int ch = static_cast<int>(std::lround(std::sqrt(area * scale / ratio)));
    cw = std::clamp(cw, 1, img.width);
    ch = std::clamp(ch, 1, img.height);
    const int x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(img.width - cw) + 1));
    const int y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(img.height - ch) + 1));

    if (ch == img.height && cw == img.width && img.height == kAugmentedSize &&
        img.width == kAugmentedSize)
        return img;  // full-frame crop of an already-sized image

    Image crop(ch, cw);
    for (int y = 0; y < ch; ++y)
        for (int x = 0; x < cw; ++x)
            for (int c = 0; c < 3; ++c) crop.at(y, x, c) = img.at(y0 + y, x0 + x, c);
    return resize_image(crop, kAugmentedSize, kAugmentedSize);
}

void color_jitter(Image& img, const AugmentationConfig& cfg, Rng& rng) {
    const double brightness = 1.0 + rng.uniform(-cfg.jitter_brightness, cfg.jitter_brightness);
    const double contrast = 1.0 + rng.uniform(-cfg.jitter_contrast, cfg.jitter_contrast);
    const double saturation = 1.0 + rng.uniform(-cfg.jitter_saturation, cfg.jitter_saturation);
    const double hue_shift = rng.uniform(-cfg.jitter_hue, cfg.jitter_hue);

    double mean = 0.0;
    for (double v : img.data) mean += v;
    mean /= static_cast<double>(img.data.size());

    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            double r = img.at(y, x, 0), g = img.at(y, x, 1), b = img.at(y, x, 2);
            r *= brightness;
            g *= brightness;
            b *= brightness;
            r = mean + contrast * (r - mean);
            g = mean + contrast * (g - mean);
            b = mean + contrast * (b - mean);
            const double luma = 0.299 * r + 0.587 * g + 0.114 * b;
            r = luma + saturation * (r - luma);
            g = luma + saturation * (g - luma);
            b = luma + saturation * (b - luma);
            // cheap hue rotation: blend each channel toward the next one
            if (hue_shift != 0.0) {
                const double t = hue_shift;
                const double r2 = (1.0 - std::abs(t)) * r + std::max(t, 0.0) * g - std::min(t, 0.0) * b;
                const double g2 = (1.0 - std::abs(t)) * g + std::max(t, 0.0) * b - std::min(t, 0.0) * r;
                const double b2 = (1.0 - std::abs(t)) * b + std::max(t, 0.0) * r - std::min(t, 0.0) * g;
                r = r2;
                g = g2;
                b = b2;
            }
            img.at(y, x, 0) = r;
            img.at(y, x, 1) = g;
            img.at(y, x, 2) = b;
        }
}

Image gaussian_blur(const Image& img, double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(2.0 * sigma)));
    std::vector<double> kernel(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        sum += kernel[i + radius];
    }
    for (double& k : kernel) k /= sum;

    Image tmp(img.height, img.width), out(img.height, img.width);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i) {
                    const int xx = std::clamp(x + i, 0, img.width - 1);
                    acc += kernel[i + radius] * img.at(y, xx, c);
                }
                tmp.at(y, x, c) = acc;
            }
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i) {
                    const int yy = std::clamp(y + i, 0, img.height - 1);
                    acc += kernel[i + radius] * tmp.at(yy, x, c);
                }
                out.at(y, x, c) = acc;
            }
    return out;
}

void grayscale(Image& img) {
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const double luma =
                0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2);
            img.at(y, x, 0) = img.at(y, x, 1) = img.at(y, x, 2) = luma;
        }
}

void cutout(Image& img, const AugmentationConfig& cfg, Rng& rng) {
    const int size = std::min({rng.uniform_int(cfg.cutout_min, cfg.cutout_max), img.height,
                               img.width});
    const int y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(img.height - size) + 1));
    const int x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(img.width - size) + 1));
    for (int y = y0; y < y0 + size; ++y)
        for (int x = x0; x < x0 + size; ++x)
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = 0.5;
}

}  // namespace

Image augment(const Image& image, const AugmentationConfig& config, Rng& rng) {
    config.validate();
    if (!config.enabled) return resize_image(image, kAugmentedSize, kAugmentedSize);

    Image out = image;
    if (rng.bernoulli(config.rotate90_p)) out = rotate90(out, static_cast<int>(rng.below(4)));
    if (rng.bernoulli(config.hflip_p)) out = hflip(out);
    out = random_resized_crop(out, config, rng);
    if (rng.bernoulli(config.jitter_p)) color_jitter(out, config, rng);
    if (rng.bernoulli(config.blur_p))
        out = gaussian_blur(out, rng.uniform(config.blur_sigma_min, config.blur_sigma_max));
    if (rng.bernoulli(config.jpeg_p)) {
        clamp01(out);
        out = jpeg_roundtrip(out, rng.uniform_int(config.jpeg_quality_min,
                                                  config.jpeg_quality_max));
    }
    if (rng.bernoulli(config.grayscale_p)) grayscale(out);
    if (rng.bernoulli(config.cutout_p)) cutout(out, config, rng);
    if (rng.bernoulli(config.noise_p))
        for (double& v : out.data) v += config.noise_sigma * rng.normal();
    clamp01(out);
    return out;
}

}  // namespace siaa
