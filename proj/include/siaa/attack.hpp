#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "siaa/backbone.hpp"
#include "siaa/detector.hpp"
#include "siaa/fphead.hpp"
#include "siaa/image.hpp"
#include "siaa/image_io.hpp"
#include "siaa/text_encoder.hpp"

namespace siaa {

struct AttackConfig {
    double epsilon = 8.0 / 255.0;  // l-inf budget in pixel units
    double alpha = 2.0 / 255.0;    // step size in pixel units
    int iterations = 14;           // J
    std::uint64_t seed = 0;
    // Whether the objective operates on l2-normalized projected features,
    // matching the training-time geometry.
    bool normalize_features = true;

    void validate() const;
};

struct AdversarialResult {
    Image adversarial_image;            // I_J, in [0,1]
    Image perturbation;                 // I_J - I, |.| <= epsilon componentwise
    std::vector<double> objective_trace;  // objective at each of the J iterations
    std::string attack_name;
};

// eta ~ U([-epsilon, epsilon]^(H*W*3)), deterministic per seed
Image random_init(int height, int width, double epsilon, std::uint64_t seed);

// componentwise clamp to [origin - epsilon, origin + epsilon], then to [0,1];
// idempotent
Image project(const Image& candidate, const Image& origin, double epsilon);

// J = ||v - t_truth|| - ||v - t_adversarial||; maximized by the attack
double siaa_objective(const Eigen::VectorXd& v, const Eigen::VectorXd& text_truth,
                      const Eigen::VectorXd& text_adversarial);
// gradient w.r.t. v, with a 1e-12 guard inside each square root
Eigen::VectorXd siaa_objective_grad(const Eigen::VectorXd& v, const Eigen::VectorXd& text_truth,
                                    const Eigen::VectorXd& text_adversarial);

// current + alpha * sign(gradient), projected; throws on non-finite gradient
Image pgd_step(const Image& current, const Image& gradient, const Image& origin,
               const AttackConfig& config);

// Ascent objective evaluated per PGD iteration. Implementations return the
// objective value and fill the pixel-space gradient.
class PgdObjective {
public:
    virtual ~PgdObjective() = default;
    virtual double value_and_grad(const Image& current, Image& grad) const = 0;
};

// Shared engine: random init inside the budget, then exactly J sign-gradient
// ascent steps with projection. No early stopping.
AdversarialResult run_pgd(const Image& original, const PgdObjective& objective,
                          const AttackConfig& config, std::string attack_name);

// Gray-box attack in the surrogate FP-head space. Takes no detector by
// construction: the classification head's size and weights are unknown to it.
AdversarialResult run_siaa(const Image& image, int label, const Backbone& backbone,
                           const TextEncoder& text_encoder, const FPHeadParams& fphead,
                           const AttackConfig& config);

// White-box upper bound: maximizes detector BCE w.r.t. the true label.
AdversarialResult run_pgd_whitebox(const Image& image, int label, const Detector& detector,
                                   const AttackConfig& config);

// Feature divergence on raw backbone outputs: maximizes -cos(F(I_j), F(I)).
AdversarialResult run_pgd_vit(const Image& image, const Backbone& backbone,
                              const AttackConfig& config);

// Same divergence objective after the FP-head's trained vision projection
// (linear part only).
AdversarialResult run_pgd_l(const Image& image, const Backbone& backbone,
                            const FPHeadParams& fphead, const AttackConfig& config);

// 8-bit storage form plus its dequantized image; round trip moves each
// component by at most 1/510.
std::pair<QuantizedImage, Image> quantize_adversarial(const Image& image);

}  // namespace siaa
