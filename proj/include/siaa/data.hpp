#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "siaa/image.hpp"
#include "siaa/rng.hpp"

namespace siaa {

struct ManifestEntry {
    std::string path;
    int label = 0;          // 0 = real, 1 = fake
    std::string source_tag;  // class directory name
    std::string split;       // "", "train", "val", "test" or "unused"
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;
    std::uint64_t seed = 0;
    int skipped_unreadable = 0;

    long count(const std::string& split, int label) const;
    std::vector<const ManifestEntry*> in_split(const std::string& split) const;
    // stable content id for provenance records
    std::string id() const;
};

// Enumerates <root>/real and <root>/fake in lexicographic order; files that
// fail an image-signature check are skipped and counted.
DatasetManifest load_dataset(const std::filesystem::path& root);

// Seeded per-class shuffle, then train/val assignment; everything left over
// becomes the test split. Throws when a class has too few entries.
void make_splits(DatasetManifest& manifest, int train_per_class, int val_per_class,
                 std::uint64_t seed);

// Class-balanced seeded subsample of the train split; deselected entries move
// to "unused", other splits stay untouched.
void few_shot_subset(DatasetManifest& manifest, int n_per_class, std::uint64_t seed);

void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
DatasetManifest load_manifest(const std::filesystem::path& path);

// Augmentation pipeline: geometric (90-degree rotations, horizontal flips,
// random resized crop), photometric (color jitter, grayscale), and noise
// (gaussian blur, JPEG artifacts, cutout, additive noise). Output is always
// kAugmentedSize square in [0,1].
inline constexpr int kAugmentedSize = 224;

struct AugmentationConfig {
    bool enabled = true;  // master switch; off = resize to kAugmentedSize only

    double rotate90_p = 1.0;  // uniformly chosen multiple of 90 degrees, 0 included
    double hflip_p = 0.5;
    double crop_scale_min = 0.5;  // random resized crop, always applied
    double crop_scale_max = 1.0;
    double crop_ratio_min = 3.0 / 4.0;
    double crop_ratio_max = 4.0 / 3.0;

    double jitter_p = 0.8;
    double jitter_brightness = 0.4;
    double jitter_contrast = 0.4;
    double jitter_saturation = 0.4;
    double jitter_hue = 0.1;

    double blur_p = 0.5;
    double blur_sigma_min = 0.1;
    double blur_sigma_max = 2.0;

    double jpeg_p = 0.5;
    int jpeg_quality_min = 50;
    int jpeg_quality_max = 95;

    double grayscale_p = 0.2;

    double cutout_p = 0.2;
    int cutout_min = 16;
    int cutout_max = 64;

    double noise_p = 0.2;
    double noise_sigma = 0.02;

    void validate() const;
    std::string id() const;  // content hash for provenance
};

Image augment(const Image& image, const AugmentationConfig& config, Rng& rng);

}  // namespace siaa
