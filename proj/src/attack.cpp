#include "siaa/attack.hpp"

#include <cmath>
#include <stdexcept>

#include "siaa/errors.hpp"
#include "siaa/rng.hpp"

namespace siaa {

namespace {

constexpr double kNormEps = 1e-12;

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// cosine similarity and its gradient w.r.t. a; b is held fixed
std::pair<double, Eigen::VectorXd> cosine_and_grad(const Eigen::VectorXd& a,
                                                   const Eigen::VectorXd& b) {
    const double na = a.norm();
    const double nb = b.norm();
    if (na < 1e-12 || nb < 1e-12)
        throw DegenerateInputError("cosine divergence: zero-norm feature vector");
    const double cos = a.dot(b) / (na * nb);
    const Eigen::VectorXd grad = b / (na * nb) - cos / (na * na) * a;
    return {cos, grad};
}

class SiaaObjective final : public PgdObjective {
public:
    SiaaObjective(const Backbone& backbone, const FPHeadParams& fphead,
                  Eigen::VectorXd text_truth, Eigen::VectorXd text_adversarial, bool normalize)
        : backbone_(backbone),
          fphead_(fphead),
          text_truth_(std::move(text_truth)),
          text_adversarial_(std::move(text_adversarial)),
          normalize_(normalize) {}

    double value_and_grad(const Image& current, Image& grad) const override {
        const Eigen::VectorXd v = backbone_.encode_one(current);
        const Eigen::VectorXd u = fphead_.vision_weight * v + fphead_.vision_bias;
        const Eigen::VectorXd r = u.cwiseMax(0.0);

        Eigen::VectorXd projected = r;
        double r_norm = 0.0;
        if (normalize_) {
            r_norm = r.norm();
            if (r_norm < 1e-12)
                throw DegenerateInputError("siaa objective: projected feature collapsed to zero");
            projected = r / r_norm;
        }

        const double value = siaa_objective(projected, text_truth_, text_adversarial_);
        Eigen::VectorXd g = siaa_objective_grad(projected, text_truth_, text_adversarial_);
        if (normalize_) g = l2_normalize_vjp(projected, r_norm, g);
        for (Eigen::Index k = 0; k < g.size(); ++k)
            if (u(k) <= 0.0) g(k) = 0.0;
        const Eigen::VectorXd feature_grad = fphead_.vision_weight.transpose() * g;
        grad = backbone_.encode_vjp(current, feature_grad);
        return value;
    }

private:
    const Backbone& backbone_;
    const FPHeadParams& fphead_;
    Eigen::VectorXd text_truth_;
    Eigen::VectorXd text_adversarial_;
    bool normalize_;
};

class WhiteboxBceObjective final : public PgdObjective {
public:
    WhiteboxBceObjective(const Detector& detector, int label)
        : detector_(detector), label_(label) {}

    double value_and_grad(const Image& current, Image& grad) const override {
        const Eigen::VectorXd features = detector_.backbone->encode_one(current);
        const double logit = head_logit(detector_.head, features);
        const double y = static_cast<double>(label_);
        const double loss =
            std::max(logit, 0.0) - logit * y + std::log1p(std::exp(-std::abs(logit)));
        const double dlogit = 1.0 / (1.0 + std::exp(-logit)) - y;
        const Eigen::VectorXd feature_grad = head_input_grad(detector_.head, features, dlogit);
        grad = detector_.backbone->encode_vjp(current, feature_grad);
        return loss;
    }

private:
    const Detector& detector_;
    int label_;
};

// -cos between the (optionally linearly projected) feature of the current
// image and the fixed clean reference
class CosineDivergenceObjective final : public PgdObjective {
public:
    CosineDivergenceObjective(const Backbone& backbone, const Image& clean_image,
                              const Eigen::MatrixXd* weight, const Eigen::VectorXd* bias)
        : backbone_(backbone), weight_(weight), bias_(bias) {
        clean_ = project_features(backbone.encode_one(clean_image));
        if (clean_.norm() < 1e-12)
            throw DegenerateInputError("cosine divergence: clean feature has zero norm");
    }

    double value_and_grad(const Image& current, Image& grad) const override {
        const Eigen::VectorXd v = backbone_.encode_one(current);
        const Eigen::VectorXd a = project_features(v);
        const auto [cos, cos_grad] = cosine_and_grad(a, clean_);
        Eigen::VectorXd feature_grad = -cos_grad;
        if (weight_) feature_grad = weight_->transpose() * feature_grad;
        grad = backbone_.encode_vjp(current, feature_grad);
        return -cos;
    }

private:
    Eigen::VectorXd project_features(const Eigen::VectorXd& v) const {
        if (!weight_) return v;
        return *weight_ * v + *bias_;
    }

    const Backbone& backbone_;
    const Eigen::MatrixXd* weight_;
    const Eigen::VectorXd* bias_;
    Eigen::VectorXd clean_;
};

std::pair<Eigen::VectorXd, Eigen::VectorXd> projected_prompts(const FPHeadParams& fphead,
                                                              const TextEncoder& text_encoder,
                                                              int label, bool normalize) {
    const auto [truth, adversarial] = prompts_for_label(label);
    const Eigen::MatrixXd t = encode_text(text_encoder, truth, adversarial);
    const Eigen::MatrixXd s = fp_forward_text(fphead, t);
    Eigen::VectorXd ty = s.row(0).transpose();
    Eigen::VectorXd ta = s.row(1).transpose();
    if (normalize) {
        ty = l2_normalize(ty);
        ta = l2_normalize(ta);
    }
    return {ty, ta};
}

}  // namespace

void AttackConfig::validate() const {
    if (!(epsilon >= 0.0 && epsilon <= 1.0))
        throw std::invalid_argument("AttackConfig: epsilon must be in [0, 1]");
    if (iterations < 1) throw std::invalid_argument("AttackConfig: iterations must be >= 1");
    if (alpha < 0.0 || alpha > epsilon)
        throw std::invalid_argument("AttackConfig: alpha must satisfy 0 <= alpha <= epsilon");
    if (epsilon > 0.0 && alpha <= 0.0)
        throw std::invalid_argument("AttackConfig: alpha must be > 0 for a nonzero budget");
}

Image random_init(int height, int width, double epsilon, std::uint64_t seed) {
    if (epsilon < 0.0) throw std::invalid_argument("random_init: epsilon must be >= 0");
    Rng rng(seed);
    Image eta(height, width);
    for (double& v : eta.data) v = rng.uniform(-epsilon, epsilon);
    return eta;
}

Image project(const Image& candidate, const Image& origin, double epsilon) {
    if (!candidate.same_shape(origin))
        throw std::invalid_argument("project: shape mismatch");
    Image out = candidate;
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        const double lo = origin.data[i] - epsilon;
        const double hi = origin.data[i] + epsilon;
        double v = out.data[i];
        v = v < lo ? lo : (v > hi ? hi : v);
        v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        out.data[i] = v;
    }
    return out;
}

double siaa_objective(const Eigen::VectorXd& v, const Eigen::VectorXd& text_truth,
                      const Eigen::VectorXd& text_adversarial) {
    if (v.size() != text_truth.size() || v.size() != text_adversarial.size())
        throw std::invalid_argument("siaa_objective: dimension mismatch");
    if (!v.allFinite() || !text_truth.allFinite() || !text_adversarial.allFinite())
        throw std::invalid_argument("siaa_objective: non-finite input");
    return (v - text_truth).norm() - (v - text_adversarial).norm();
}

Eigen::VectorXd siaa_objective_grad(const Eigen::VectorXd& v, const Eigen::VectorXd& text_truth,
                                    const Eigen::VectorXd& text_adversarial) {
    if (v.size() != text_truth.size() || v.size() != text_adversarial.size())
        throw std::invalid_argument("siaa_objective_grad: dimension mismatch");
    const Eigen::VectorXd d_truth = v - text_truth;
    const Eigen::VectorXd d_adv = v - text_adversarial;
    return d_truth / std::sqrt(d_truth.squaredNorm() + kNormEps) -
           d_adv / std::sqrt(d_adv.squaredNorm() + kNormEps);
}

Image pgd_step(const Image& current, const Image& gradient, const Image& origin,
               const AttackConfig& config) {
    if (!current.same_shape(gradient) || !current.same_shape(origin))
        throw std::invalid_argument("pgd_step: shape mismatch");
    if (!all_finite(gradient))
        throw std::runtime_error("pgd_step: non-finite gradient, attack aborted");
    Image candidate = current;
    for (std::size_t i = 0; i < candidate.data.size(); ++i)
        candidate.data[i] += config.alpha * sign(gradient.data[i]);
    return project(candidate, origin, config.epsilon);
}

AdversarialResult run_pgd(const Image& original, const PgdObjective& objective,
                          const AttackConfig& config, std::string attack_name) {
    config.validate();
    if (!all_finite(original) || !is_unit_range(original))
        throw std::invalid_argument("run_pgd: original image must be finite and in [0,1]");

    const Image eta = random_init(original.height, original.width, config.epsilon, config.seed);
    Image current = original;
    for (std::size_t i = 0; i < current.data.size(); ++i) current.data[i] += eta.data[i];
    current = project(current, original, config.epsilon);

    AdversarialResult result;
    result.attack_name = std::move(attack_name);
    result.objective_trace.reserve(config.iterations);

    Image grad(original.height, original.width);
    for (int j = 0; j < config.iterations; ++j) {
        const double value = objective.value_and_grad(current, grad);
        if (!std::isfinite(value))
            throw std::runtime_error("run_pgd: non-finite objective, attack aborted");
        result.objective_trace.push_back(value);
        current = pgd_step(current, grad, original, config);
    }

    result.perturbation = Image(original.height, original.width);
    for (std::size_t i = 0; i < current.data.size(); ++i)
        result.perturbation.data[i] = current.data[i] - original.data[i];
    result.adversarial_image = std::move(current);
    return result;
}

AdversarialResult run_siaa(const Image& image, int label, const Backbone& backbone,
                           const TextEncoder& text_encoder, const FPHeadParams& fphead,
                           const AttackConfig& config) {
    fphead.validate();
    const auto [ty, ta] =
        projected_prompts(fphead, text_encoder, label, config.normalize_features);
    const SiaaObjective objective(backbone, fphead, ty, ta, config.normalize_features);
    return run_pgd(image, objective, config, "siaa");
}

AdversarialResult run_pgd_whitebox(const Image& image, int label, const Detector& detector,
                                   const AttackConfig& config) {
    if (!detector.backbone) throw std::invalid_argument("run_pgd_whitebox: detector lacks backbone");
    if (label != 0 && label != 1)
        throw std::invalid_argument("run_pgd_whitebox: label must be 0 or 1");
    const WhiteboxBceObjective objective(detector, label);
    return run_pgd(image, objective, config, "pgd");
}

AdversarialResult run_pgd_vit(const Image& image, const Backbone& backbone,
                              const AttackConfig& config) {
    const CosineDivergenceObjective objective(backbone, image, nullptr, nullptr);
    return run_pgd(image, objective, config, "pgd-vit");
}

AdversarialResult run_pgd_l(const Image& image, const Backbone& backbone,
                            const FPHeadParams& fphead, const AttackConfig& config) {
    fphead.validate();
    const CosineDivergenceObjective objective(backbone, image, &fphead.vision_weight,
                                              &fphead.vision_bias);
    return run_pgd(image, objective, config, "pgd-l");
}

std::pair<QuantizedImage, Image> quantize_adversarial(const Image& image) {
    QuantizedImage q = quantize_image(image);
    Image dequantized = dequantize_image(q);
    return {std::move(q), std::move(dequantized)};
}

}  // namespace siaa
