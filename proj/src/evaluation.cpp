#include "siaa/evaluation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "siaa/errors.hpp"
#include "siaa/image_io.hpp"

namespace siaa {

namespace {

// integral image (exclusive prefix sums) for O(1) window sums
struct Integral {
    int height, width;
    std::vector<double> sums;  // (height+1) x (width+1)

    Integral(const Image& img, int channel, bool squared) : height(img.height), width(img.width) {
        sums.assign(static_cast<std::size_t>(height + 1) * (width + 1), 0.0);
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) {
                double v = img.at(y, x, channel);
                if (squared) v *= v;
                at(y + 1, x + 1) = v + at(y, x + 1) + at(y + 1, x) - at(y, x);
            }
    }

    Integral(const std::vector<double>& plane, int h, int w, bool squared)
        : height(h), width(w) {
        sums.assign(static_cast<std::size_t>(height + 1) * (width + 1), 0.0);
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) {
                double v = plane[static_cast<std::size_t>(y) * width + x];
                if (squared) v *= v;
                at(y + 1, x + 1) = v + at(y, x + 1) + at(y + 1, x) - at(y, x);
            }
    }

    double& at(int y, int x) { return sums[static_cast<std::size_t>(y) * (width + 1) + x]; }
    double at(int y, int x) const { return sums[static_cast<std::size_t>(y) * (width + 1) + x]; }

    // sum over rows [y0, y1) x cols [x0, x1)
    double window(int y0, int x0, int y1, int x1) const {
        return at(y1, x1) - at(y0, x1) - at(y1, x0) + at(y0, x0);
    }
};

struct ProductIntegral {
    int height, width;
    std::vector<double> sums;

    ProductIntegral(const Image& a, const Image& b, int channel)
        : height(a.height), width(a.width) {
        sums.assign(static_cast<std::size_t>(height + 1) * (width + 1), 0.0);
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x)
                at(y + 1, x + 1) = a.at(y, x, channel) * b.at(y, x, channel) + at(y, x + 1) +
                                   at(y + 1, x) - at(y, x);
    }

    double& at(int y, int x) { return sums[static_cast<std::size_t>(y) * (width + 1) + x]; }
    double at(int y, int x) const { return sums[static_cast<std::size_t>(y) * (width + 1) + x]; }
    double window(int y0, int x0, int y1, int x1) const {
        return at(y1, x1) - at(y0, x1) - at(y1, x0) + at(y0, x0);
    }
};

}  // namespace

double attack_success_rate(std::span<const OutcomeRecord> records) {
    long pre_correct = 0;
    long flipped = 0;
    for (const OutcomeRecord& r : records) {
        if (r.pre_label != r.true_label) continue;
        ++pre_correct;
        if (r.post_label != r.true_label) ++flipped;
    }
    if (pre_correct == 0)
        throw UndefinedMetricError("attack_success_rate: no pre-correct records");
    return static_cast<double>(flipped) / static_cast<double>(pre_correct);
}

double auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size())
        throw std::invalid_argument("auc: scores and labels differ in length");
    long positives = 0, negatives = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1)
            throw std::invalid_argument("auc: labels must be 0 or 1");
        if (!std::isfinite(scores[i])) throw std::invalid_argument("auc: non-finite score");
        (labels[i] == 1 ? positives : negatives)++;
    }
    if (positives == 0 || negatives == 0)
        throw UndefinedMetricError("auc: both classes must be present");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // twice the Mann-Whitney U of the positive class, accumulated exactly
    double twice_u = 0.0;
    double negatives_below = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        long tie_pos = 0, tie_neg = 0;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            (labels[order[j]] == 1 ? tie_pos : tie_neg)++;
            ++j;
        }
        twice_u += static_cast<double>(tie_pos) * (2.0 * negatives_below + tie_neg);
        negatives_below += tie_neg;
        i = j;
    }
    return twice_u / (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
}

double ssim(const Image& a, const Image& b, const SsimParams& params) {
    if (!a.same_shape(b)) throw std::invalid_argument("ssim: shape mismatch");
    const int w = params.window;
    if (w < 1 || a.height < w || a.width < w)
        throw std::invalid_argument("ssim: image smaller than window");

    const double c1 = params.k1 * params.dynamic_range * params.k1 * params.dynamic_range;
    const double c2 = params.k2 * params.dynamic_range * params.k2 * params.dynamic_range;
    const double inv_n = 1.0 / static_cast<double>(w * w);

    double total = 0.0;
    long count = 0;
    for (int c = 0; c < 3; ++c) {
        const Integral sa(a, c, false), sa2(a, c, true);
        const Integral sb(b, c, false), sb2(b, c, true);
        const ProductIntegral sab(a, b, c);
        for (int y = 0; y + w <= a.height; ++y)
            for (int x = 0; x + w <= a.width; ++x) {
                const double mu_a = sa.window(y, x, y + w, x + w) * inv_n;
                const double mu_b = sb.window(y, x, y + w, x + w) * inv_n;
                const double var_a = sa2.window(y, x, y + w, x + w) * inv_n - mu_a * mu_a;
                const double var_b = sb2.window(y, x, y + w, x + w) * inv_n - mu_b * mu_b;
                const double cov = sab.window(y, x, y + w, x + w) * inv_n - mu_a * mu_b;
                total += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
                         ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
                ++count;
            }
    }
    return total / static_cast<double>(count);
}

double wpsnr(const Image& a, const Image& b, const WpsnrParams& params) {
    if (!a.same_shape(b)) throw std::invalid_argument("wpsnr: shape mismatch");
    if (a.height < 1 || a.width < 1) throw std::invalid_argument("wpsnr: empty image");

    // luma of the reference drives the visibility mask
    std::vector<double> luma(static_cast<std::size_t>(a.height) * a.width);
    for (int y = 0; y < a.height; ++y)
        for (int x = 0; x < a.width; ++x)
            luma[static_cast<std::size_t>(y) * a.width + x] =
                0.299 * a.at(y, x, 0) + 0.587 * a.at(y, x, 1) + 0.114 * a.at(y, x, 2);

    const Integral s1(luma, a.height, a.width, false);
    const Integral s2(luma, a.height, a.width, true);
    const int lo = (params.window - 1) / 2;
    const int hi = params.window / 2;

    std::vector<double> variance(luma.size());
    double max_variance = 0.0;
    for (int y = 0; y < a.height; ++y)
        for (int x = 0; x < a.width; ++x) {
            const int y0 = std::max(0, y - lo), y1 = std::min(a.height, y + hi + 1);
            const int x0 = std::max(0, x - lo), x1 = std::min(a.width, x + hi + 1);
            const double n = static_cast<double>((y1 - y0) * (x1 - x0));
            const double mu = s1.window(y0, x0, y1, x1) / n;
            const double var = std::max(0.0, s2.window(y0, x0, y1, x1) / n - mu * mu);
            variance[static_cast<std::size_t>(y) * a.width + x] = var;
            max_variance = std::max(max_variance, var);
        }

    const double theta =
        (max_variance < 1e-12 || params.masking_strength <= 0.0)
            ? 0.0
            : params.masking_strength / max_variance;

    double weighted_error = 0.0;
    double weight_sum = 0.0;
    for (int y = 0; y < a.height; ++y)
        for (int x = 0; x < a.width; ++x) {
            const double w =
                1.0 / (1.0 + theta * variance[static_cast<std::size_t>(y) * a.width + x]);
            double e2 = 0.0;
            for (int c = 0; c < 3; ++c) {
                const double e = a.at(y, x, c) - b.at(y, x, c);
                e2 += e * e;
            }
            weighted_error += w * e2;
            weight_sum += w;
        }

    const double wmse = weighted_error / (3.0 * weight_sum);
    if (wmse <= 0.0)
        throw UndefinedMetricError("wpsnr: images are identical (zero weighted error)");
    return 10.0 * std::log10(params.dynamic_range * params.dynamic_range / wmse);
}

EvaluationReport evaluate_attack(const Detector& detector, std::span<const Sample> clean,
                                 std::span<const Image> adversarial,
                                 const std::string& attack_name,
                                 const std::string& source_backbone) {
    if (clean.size() != adversarial.size())
        throw std::invalid_argument("evaluate_attack: clean/adversarial size mismatch");
    if (clean.empty()) throw std::invalid_argument("evaluate_attack: empty evaluation set");

    const std::string target = detector.backbone ? detector.backbone->spec().name : "";
    EvaluationReport report;
    report.total = static_cast<int>(clean.size());

    std::vector<double> pre_scores, post_scores;
    std::vector<int> labels;
    double ssim_sum = 0.0, wpsnr_sum = 0.0;
    std::array<long, 2> class_seen{0, 0}, class_pre_correct{0, 0};

    for (std::size_t i = 0; i < clean.size(); ++i) {
        const Prediction pre = predict(detector, clean[i].image);
        const Prediction post = predict(detector, adversarial[i]);

        OutcomeRecord r;
        r.image_id = clean[i].id;
        r.true_label = clean[i].label;
        r.pre_label = pre.label;
        r.pre_score = pre.probability;
        r.post_label = post.label;
        r.post_score = post.probability;
        r.attack_name = attack_name;
        r.source_backbone = source_backbone;
        r.target_backbone = target;

        class_seen[r.true_label]++;
        if (r.pre_label == r.true_label) {
            class_pre_correct[r.true_label]++;
            report.pre_correct++;
            if (r.post_label != r.true_label) report.flipped++;
        }

        pre_scores.push_back(pre.probability);
        post_scores.push_back(post.probability);
        labels.push_back(clean[i].label);

        ssim_sum += ssim(clean[i].image, adversarial[i]);
        if (clean[i].image.data != adversarial[i].data) {
            wpsnr_sum += wpsnr(clean[i].image, adversarial[i]);
            report.wpsnr_pairs++;
        }
        report.records.push_back(std::move(r));
    }

    for (int c = 0; c < 2; ++c)
        if (class_seen[c] > 0 && class_pre_correct[c] == 0)
            throw UndefinedMetricError(
                "evaluate_attack: no pre-correct records for class " + std::to_string(c));

    report.asr = attack_success_rate(report.records);
    report.pre_auc = auc(pre_scores, labels);
    report.post_auc = auc(post_scores, labels);
    report.mean_ssim = ssim_sum / static_cast<double>(clean.size());
    report.mean_wpsnr = report.wpsnr_pairs > 0
                            ? wpsnr_sum / static_cast<double>(report.wpsnr_pairs)
                            : std::numeric_limits<double>::infinity();
    return report;
}

TransferMatrix transfer_matrix(
    const std::vector<std::pair<std::string, std::vector<Image>>>& adversarial_by_source,
    const std::vector<std::pair<std::string, const Detector*>>& detector_by_target,
    std::span<const Sample> clean) {
    if (adversarial_by_source.empty() || detector_by_target.empty())
        throw std::invalid_argument("transfer_matrix: empty source or target axis");

    TransferMatrix matrix;
    for (const auto& [name, images] : adversarial_by_source) {
        if (images.size() != clean.size())
            throw MissingArtifactError("transfer_matrix: source '" + name +
                                       "' is missing adversarial images");
        matrix.sources.push_back(name);
    }
    for (const auto& [name, detector] : detector_by_target) {
        if (!detector || !detector->backbone)
            throw MissingArtifactError("transfer_matrix: target '" + name + "' has no detector");
        matrix.targets.push_back(name);
    }

    for (const auto& [source, images] : adversarial_by_source) {
        for (const auto& [target, detector] : detector_by_target) {
            const BackboneSpec& spec = detector->backbone->spec();
            std::vector<Sample> clean_sized;
            std::vector<Image> adv_sized;
            clean_sized.reserve(clean.size());
            adv_sized.reserve(images.size());
            for (std::size_t i = 0; i < clean.size(); ++i) {
                Sample s = clean[i];
                s.image = resize_image(s.image, spec.input_height, spec.input_width);
                clean_sized.push_back(std::move(s));
                adv_sized.push_back(resize_image(images[i], spec.input_height, spec.input_width));
            }
            const EvaluationReport report =
                evaluate_attack(*detector, clean_sized, adv_sized, "siaa", source);
            matrix.cells.push_back({report.asr, report.post_auc, report.pre_auc});
        }
    }
    return matrix;
}

FirstLinear first_linear(const FPHeadParams& fphead) {
    return {fphead.vision_weight, fphead.vision_bias};
}

FirstLinear first_linear(const HeadParams& head) {
    if (head.weights.empty()) throw std::invalid_argument("first_linear: empty head");
    return {head.weights[0], head.biases[0]};
}

std::vector<EmbeddingRow> export_embeddings(const Backbone& backbone, const FirstLinear& layer,
                                            std::span<const Sample> samples) {
    if (samples.empty()) throw std::invalid_argument("export_embeddings: empty dataset");
    if (layer.weight.cols() != backbone.spec().vision_dim)
        throw std::invalid_argument("export_embeddings: layer does not match backbone");

    std::vector<EmbeddingRow> rows;
    rows.reserve(samples.size() * 2);
    for (const Sample& s : samples) {
        const Eigen::VectorXd v = backbone.encode_one(s.image);
        rows.push_back({s.id, s.label, "backbone", v});
        rows.push_back({s.id, s.label, "projected", layer.weight * v + layer.bias});
    }
    return rows;
}

}  // namespace siaa
