#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "siaa/backbone.hpp"
#include "siaa/fphead.hpp"
#include "siaa/image.hpp"

namespace siaa {

struct HeadConfig {
    int depth = 2;  // 1, 2 or 3 layers
    int hidden_dim = 256;
    int input_dim = 0;  // D_v

    void validate() const;
};

// MLP emitting a single real logit: depth-1 is linear D_v -> 1; deeper
// variants insert ReLU hidden layers of hidden_dim.
struct HeadParams {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;

    int depth() const { return static_cast<int>(weights.size()); }
    std::size_t parameter_count() const;
};

HeadParams build_head(const HeadConfig& config, std::uint64_t seed);

double head_logit(const HeadParams& head, const Eigen::VectorXd& features);

// Gradient of a scalar function of the logit w.r.t. the input features
// (upstream = d loss / d logit). Used by the white-box attack.
Eigen::VectorXd head_input_grad(const HeadParams& head, const Eigen::VectorXd& features,
                                double upstream);

struct HeadGrads {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
};

// logit plus parameter gradients for upstream = d loss / d logit
std::pair<double, HeadGrads> head_logit_with_param_grads(const HeadParams& head,
                                                         const Eigen::VectorXd& features,
                                                         double upstream);

struct TrainConfig {
    int epochs = 20;
    double learning_rate = 5e-3;
    int batch_size = 64;
    std::uint64_t seed = 0;

    void validate() const;
};

struct DetectorProvenance {
    std::string dataset_id;
    std::string augmentation_id;
    std::uint64_t seed = 0;
};

struct Detector {
    std::shared_ptr<const Backbone> backbone;
    HeadConfig config;
    HeadParams head;
    DetectorProvenance provenance;
};

struct Prediction {
    double logit = 0.0;
    double probability = 0.0;
    int label = 0;  // 1 iff probability > 0.5; exact ties resolve to 0 (real)
};

Prediction predict(const Detector& detector, const Image& image);
std::vector<Prediction> predict_batch(const Detector& detector, std::span<const Image> images);

// Binary cross-entropy over head parameters only; backbone stays frozen.
// Checkpoint selection: epoch with peak validation accuracy.
Detector train_detector(std::span<const Sample> train, std::span<const Sample> val,
                        std::shared_ptr<const Backbone> backbone, const HeadConfig& head_config,
                        const TrainConfig& train_config, const SampleTransform& transform = {},
                        const DetectorProvenance& provenance = {});

double detector_accuracy(const Detector& detector, std::span<const Sample> samples);

void save_detector(const std::filesystem::path& path, const Detector& detector);
// backbone is reattached by the caller (checkpoints store only the head and
// the backbone name, which must match)
Detector load_detector(const std::filesystem::path& path, std::shared_ptr<const Backbone> backbone);

}  // namespace siaa
