#pragma once

#include <Eigen/Core>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "siaa/detector.hpp"
#include "siaa/image.hpp"

namespace siaa {

struct OutcomeRecord {
    std::string image_id;
    int true_label = 0;
    int pre_label = 0;
    double pre_score = 0.0;  // detector probability of "fake" before the attack
    int post_label = 0;
    double post_score = 0.0;
    std::string attack_name;
    std::string source_backbone;
    std::string target_backbone;
};

// |pre-correct and flipped| / |pre-correct|; throws UndefinedMetricError when
// no record is pre-correct
double attack_success_rate(std::span<const OutcomeRecord> records);

// Rank-based AUC (probability a random positive outscores a random negative,
// ties counted 1/2). Higher score = more fake (label 1). Throws on
// single-class input.
double auc(std::span<const double> scores, std::span<const int> labels);

struct SsimParams {
    int window = 8;  // uniform window, population statistics
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 1.0;
};

// mean SSIM over all window positions and channels
double ssim(const Image& a, const Image& b, const SsimParams& params = {});

struct WpsnrParams {
    int window = 8;                  // window for the local-variance mask
    double masking_strength = 75.0;  // D in theta = D / max local variance; 0 = plain PSNR
    double dynamic_range = 1.0;
};

// PSNR with noise-visibility weighting of the error energy: per-pixel weights
// w = 1 / (1 + theta * local_variance(luma(a))), theta = masking_strength /
// max local variance. Throws UndefinedMetricError for identical images.
double wpsnr(const Image& a, const Image& b, const WpsnrParams& params = {});

struct EvaluationReport {
    double pre_auc = 0.0;
    double post_auc = 0.0;
    double asr = 0.0;
    double mean_ssim = 0.0;
    double mean_wpsnr = 0.0;  // +inf when every pair was identical
    int total = 0;
    int pre_correct = 0;
    int flipped = 0;
    int wpsnr_pairs = 0;  // pairs that contributed to mean_wpsnr
    std::vector<OutcomeRecord> records;
};

EvaluationReport evaluate_attack(const Detector& detector, std::span<const Sample> clean,
                                 std::span<const Image> adversarial,
                                 const std::string& attack_name = "",
                                 const std::string& source_backbone = "");

struct TransferCell {
    double asr = 0.0;
    double post_auc = 0.0;
    double pre_auc = 0.0;
};

struct TransferMatrix {
    std::vector<std::string> sources;
    std::vector<std::string> targets;
    std::vector<TransferCell> cells;  // row-major, sources x targets

    const TransferCell& at(std::size_t source, std::size_t target) const {
        return cells[source * targets.size() + target];
    }
};

// Adversarial images from each source backbone evaluated against each target
// detector; off-diagonal cells reuse the source images unchanged.
TransferMatrix transfer_matrix(
    const std::vector<std::pair<std::string, std::vector<Image>>>& adversarial_by_source,
    const std::vector<std::pair<std::string, const Detector*>>& detector_by_target,
    std::span<const Sample> clean);

struct EmbeddingRow {
    std::string id;
    int label = 0;
    std::string stage;  // "backbone" or "projected"
    Eigen::VectorXd values;
};

// First trainable linear layer applied after the backbone; taken either from
// an FP-head's vision branch or a detector head's first layer.
struct FirstLinear {
    Eigen::MatrixXd weight;
    Eigen::VectorXd bias;
};

FirstLinear first_linear(const FPHeadParams& fphead);
FirstLinear first_linear(const HeadParams& head);

// Two rows per sample: the raw backbone feature and the post-first-linear
// representation, for external dimensionality-reduction tooling.
std::vector<EmbeddingRow> export_embeddings(const Backbone& backbone, const FirstLinear& layer,
                                            std::span<const Sample> samples);

}  // namespace siaa
