#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "siaa/backbone.hpp"
#include "siaa/image.hpp"
#include "siaa/text_encoder.hpp"

namespace siaa {

// Surrogate Feature-Processing head H(.): a linear text branch and a
// linear+ReLU vision branch projecting into a shared space of dimension
// out_dim.
struct FPHeadParams {
    Eigen::MatrixXd text_weight;    // out_dim x text_dim
    Eigen::VectorXd text_bias;      // out_dim
    Eigen::MatrixXd vision_weight;  // out_dim x vision_dim
    Eigen::VectorXd vision_bias;    // out_dim

    int out_dim() const { return static_cast<int>(text_weight.rows()); }
    int text_dim() const { return static_cast<int>(text_weight.cols()); }
    int vision_dim() const { return static_cast<int>(vision_weight.cols()); }
    void validate() const;
};

// fan-in-scaled uniform init, deterministic per seed
FPHeadParams init_fp_head(int out_dim, int text_dim, int vision_dim, std::uint64_t seed);

// rows x out_dim; text branch is a single linear layer, no nonlinearity
Eigen::MatrixXd fp_forward_text(const FPHeadParams& params, const Eigen::MatrixXd& text_embedding);
// rows x out_dim; ReLU(v W^T + b)
Eigen::MatrixXd fp_forward_vision(const FPHeadParams& params,
                                  const Eigen::MatrixXd& visual_embedding);

// Unit-norm copy; throws DegenerateInputError below norm 1e-12 instead of
// emitting NaN.
Eigen::VectorXd l2_normalize(const Eigen::VectorXd& x);

// VJP of x -> x/||x|| given the normalized output, the input norm and the
// upstream gradient.
Eigen::VectorXd l2_normalize_vjp(const Eigen::VectorXd& normalized, double norm,
                                 const Eigen::VectorXd& grad);

// beta(e) = min(1, e / (E/2)); throws on E <= 0
double beta_schedule(int epoch, int total_epochs);

struct Phase1LossTerms {
    double total = 0.0;
    double pull = 0.0;
    double push = 0.0;
    double text = 0.0;
};

// Contrastive loss on one sample's projected, l2-normalized embeddings.
// Inputs must be unit vectors (checked to 1e-3).
Phase1LossTerms phase1_loss(const Eigen::VectorXd& vision_row, const Eigen::VectorXd& text_truth,
                            const Eigen::VectorXd& text_adversarial, int epoch, int total_epochs,
                            double margin);

struct FPHeadGrads {
    Eigen::MatrixXd text_weight;
    Eigen::VectorXd text_bias;
    Eigen::MatrixXd vision_weight;
    Eigen::VectorXd vision_bias;
};

// Mean loss over a batch and its analytic gradient w.r.t. all head
// parameters, through projection and normalization. text_embedding rows are
// the class-0 and class-1 prompts; labels select t'_y per sample.
std::pair<Phase1LossTerms, FPHeadGrads> phase1_batch_gradients(
    const FPHeadParams& params, const Eigen::MatrixXd& text_embedding,
    const Eigen::MatrixXd& visual_embeddings, std::span<const int> labels, int epoch,
    int total_epochs, double margin);

struct Phase1Config {
    int epochs = 20;
    double margin = 1.0;
    double learning_rate = 5e-3;
    int batch_size = 64;
    std::uint64_t seed = 0;
    int head_dim = 0;  // 0: default to the backbone's vision_dim
    // Contrastive training normally needs both prompts represented in the
    // data; single-class corpora are rejected unless explicitly allowed.
    bool require_both_classes = true;

    void validate() const;
};

struct EpochRecord {
    int epoch = 0;
    double beta = 0.0;
    double mean_pull = 0.0;
    double mean_push = 0.0;
    double mean_text = 0.0;
    double mean_total = 0.0;
    double validation_accuracy = 0.0;
};

using TrainingTrace = std::vector<EpochRecord>;

struct Phase1Result {
    FPHeadParams params;  // checkpoint from the epoch with peak validation accuracy
    TrainingTrace trace;
    int best_epoch = -1;
    double best_validation = 0.0;
};

// Optional per-sample transform applied before encoding (the augmentation
// hook); arguments are (image, epoch, sample index within the epoch).
using SampleTransform = std::function<Image(const Image&, int, int)>;

Phase1Result train_fp_head(std::span<const Sample> train, std::span<const Sample> val,
                           const Backbone& backbone, const TextEncoder& text_encoder,
                           const Phase1Config& config, const SampleTransform& transform = {},
                           const std::string& real_prompt = kRealPrompt,
                           const std::string& fake_prompt = kFakePrompt);

// Nearest-prompt-embedding classification accuracy in [0,1]
double validate_fp_head(const FPHeadParams& params, std::span<const Sample> samples,
                        const Backbone& backbone, const TextEncoder& text_encoder,
                        const std::string& real_prompt = kRealPrompt,
                        const std::string& fake_prompt = kFakePrompt);

struct FPHeadCheckpoint {
    FPHeadParams params;
    Phase1Config config;
    std::string backbone_name;
    std::string text_encoder_name;
    std::string dataset_id;
    std::string real_prompt;
    std::string fake_prompt;
};

void save_fp_head(const std::filesystem::path& path, const FPHeadCheckpoint& checkpoint);
FPHeadCheckpoint load_fp_head(const std::filesystem::path& path);

}  // namespace siaa
