#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "siaa/image.hpp"

namespace siaa {

struct BackboneSpec {
    std::string name;
    int vision_dim = 0;
    int input_height = 0;
    int input_width = 0;
    std::array<double, 3> norm_mean{0.0, 0.0, 0.0};
    std::array<double, 3> norm_std{1.0, 1.0, 1.0};

    void validate() const;  // throws std::invalid_argument
};

// (pixel - mean) / std per channel, resized to spec.input_size first when the
// shapes differ. Output reuses the Image container but is no longer bounded
// to [0,1].
Image normalize_input(const Image& image, const BackboneSpec& spec);
std::vector<Image> normalize_input(std::span<const Image> batch, const BackboneSpec& spec);

// Frozen feature extractor F(.). Implementations are immutable after
// construction and safe to share across attack workers. encode_one expects
// pixels in [0,1] at exactly spec().input size; normalization is applied
// internally so the whole pixels-to-features path is differentiable, with
// encode_vjp providing the adjoint needed by every attack.
class Backbone {
public:
    virtual ~Backbone() = default;

    virtual const BackboneSpec& spec() const = 0;
    virtual Eigen::VectorXd encode_one(const Image& image) const = 0;
    virtual Image encode_vjp(const Image& image, const Eigen::VectorXd& feature_grad) const = 0;
    virtual std::uint64_t weights_hash() const = 0;
};

// B x D_v feature matrix for a batch; throws on input size mismatch.
Eigen::MatrixXd encode_image(const Backbone& backbone, std::span<const Image> batch);
Eigen::VectorXd encode_image(const Backbone& backbone, const Image& image);

enum class ToyNonlinearity { Identity, Tanh };

// Deterministic stand-in backbone: average-pool by a fixed factor, flatten,
// multiply by a seeded random projection, then an optional tanh. Small enough
// to finite-difference and to reason about analytically (the Identity variant
// is exactly affine in the input).
class ToyBackbone final : public Backbone {
public:
    ToyBackbone(std::uint64_t seed, int vision_dim, int input_height, int input_width,
                int pool = 2, ToyNonlinearity nonlinearity = ToyNonlinearity::Tanh,
                std::array<double, 3> mean = {0.5, 0.5, 0.5},
                std::array<double, 3> std = {0.5, 0.5, 0.5}, double gain = 4.0,
                std::string name = "");

    const BackboneSpec& spec() const override { return spec_; }
    Eigen::VectorXd encode_one(const Image& image) const override;
    Image encode_vjp(const Image& image, const Eigen::VectorXd& feature_grad) const override;
    std::uint64_t weights_hash() const override;

    const Eigen::MatrixXd& projection() const { return projection_; }
    int pool() const { return pool_; }
    ToyNonlinearity nonlinearity() const { return nonlinearity_; }

private:
    Eigen::VectorXd pooled_normalized(const Image& image) const;

    BackboneSpec spec_;
    int pool_;
    ToyNonlinearity nonlinearity_;
    Eigen::MatrixXd projection_;  // vision_dim x (pooled pixels * 3)
    std::uint64_t seed_;
};

std::shared_ptr<Backbone> make_toy_backbone(std::uint64_t seed, int vision_dim,
                                            std::pair<int, int> input_size);

// Registry file: maps backbone names to construction recipes. Toy backbones
// are built in; other kinds dispatch to adapter factories registered at
// runtime, so real encoders can plug in behind the same interface.
class BackboneRegistry {
public:
    using AdapterFactory =
        std::function<std::shared_ptr<Backbone>(const std::map<std::string, std::string>&)>;

    static BackboneRegistry load(const std::filesystem::path& path);
    static void register_adapter(const std::string& kind, AdapterFactory factory);

    std::shared_ptr<Backbone> make(const std::string& name) const;
    std::vector<std::string> names() const;

private:
    struct Entry {
        std::string kind;
        std::map<std::string, std::string> fields;
    };
    std::map<std::string, Entry> entries_;
};

}  // namespace siaa
