#include "siaa/backbone.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <mutex>
#include <stdexcept>

#include "siaa/errors.hpp"
#include "siaa/image_io.hpp"
#include "siaa/rng.hpp"
#include "siaa/serial.hpp"

namespace siaa {

void BackboneSpec::validate() const {
    if (name.empty()) throw std::invalid_argument("BackboneSpec: empty name");
    if (vision_dim <= 0) throw std::invalid_argument("BackboneSpec: vision_dim must be > 0");
    if (input_height <= 0 || input_width <= 0)
        throw std::invalid_argument("BackboneSpec: input size must be > 0");
    for (double s : norm_std)
        if (!(s > 0.0)) throw std::invalid_argument("BackboneSpec: norm_std must be > 0");
    for (double m : norm_mean)
        if (!std::isfinite(m)) throw std::invalid_argument("BackboneSpec: non-finite norm_mean");
}

Image normalize_input(const Image& image, const BackboneSpec& spec) {
    spec.validate();
    if (!all_finite(image)) throw std::invalid_argument("normalize_input: non-finite pixels");
    Image resized = (image.height == spec.input_height && image.width == spec.input_width)
                        ? image
                        : resize_image(image, spec.input_height, spec.input_width);
    for (int y = 0; y < resized.height; ++y)
        for (int x = 0; x < resized.width; ++x)
            for (int c = 0; c < 3; ++c)
                resized.at(y, x, c) = (resized.at(y, x, c) - spec.norm_mean[c]) / spec.norm_std[c];
    return resized;
}

std::vector<Image> normalize_input(std::span<const Image> batch, const BackboneSpec& spec) {
    std::vector<Image> out;
    out.reserve(batch.size());
    for (const Image& img : batch) out.push_back(normalize_input(img, spec));
    return out;
}

Eigen::MatrixXd encode_image(const Backbone& backbone, std::span<const Image> batch) {
    const BackboneSpec& s = backbone.spec();
    Eigen::MatrixXd features(static_cast<Eigen::Index>(batch.size()), s.vision_dim);
    for (std::size_t i = 0; i < batch.size(); ++i)
        features.row(static_cast<Eigen::Index>(i)) = backbone.encode_one(batch[i]).transpose();
    return features;
}

Eigen::VectorXd encode_image(const Backbone& backbone, const Image& image) {
    return backbone.encode_one(image);
}

// ---------------------------------------------------------------------------
// ToyBackbone

ToyBackbone::ToyBackbone(std::uint64_t seed, int vision_dim, int input_height, int input_width,
                         int pool, ToyNonlinearity nonlinearity, std::array<double, 3> mean,
                         std::array<double, 3> std, double gain, std::string name)
    : pool_(pool), nonlinearity_(nonlinearity), seed_(seed) {
    if (pool <= 0 || input_height % pool != 0 || input_width % pool != 0)
        throw std::invalid_argument("ToyBackbone: pool must divide the input size");
    spec_.name = name.empty() ? "toy-" + std::to_string(seed) : std::move(name);
    spec_.vision_dim = vision_dim;
    spec_.input_height = input_height;
    spec_.input_width = input_width;
    spec_.norm_mean = mean;
    spec_.norm_std = std;
    spec_.validate();

    const int flat = (input_height / pool) * (input_width / pool) * 3;
    // uniform(+-sqrt(3/fan_in)) scaled by gain keeps features O(gain * input rms)
    const double bound = gain * std::sqrt(3.0 / flat);
    Rng rng(derive_seed(seed, "toy-backbone-weights"));
    projection_.resize(vision_dim, flat);
    for (int r = 0; r < vision_dim; ++r)
        for (int c = 0; c < flat; ++c) projection_(r, c) = rng.uniform(-bound, bound);
}

Eigen::VectorXd ToyBackbone::pooled_normalized(const Image& image) const {
    const int ph = spec_.input_height / pool_;
    const int pw = spec_.input_width / pool_;
    Eigen::VectorXd flat(ph * pw * 3);
    const double inv_area = 1.0 / (pool_ * pool_);
    for (int by = 0; by < ph; ++by)
        for (int bx = 0; bx < pw; ++bx)
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int dy = 0; dy < pool_; ++dy)
                    for (int dx = 0; dx < pool_; ++dx)
                        acc += (image.at(by * pool_ + dy, bx * pool_ + dx, c) -
                                spec_.norm_mean[c]) /
                               spec_.norm_std[c];
                flat((by * pw + bx) * 3 + c) = acc * inv_area;
            }
    return flat;
}

Eigen::VectorXd ToyBackbone::encode_one(const Image& image) const {
    if (image.height != spec_.input_height || image.width != spec_.input_width)
        throw std::invalid_argument("encode: image size does not match backbone input size");
    Eigen::VectorXd z = projection_ * pooled_normalized(image);
    if (nonlinearity_ == ToyNonlinearity::Tanh)
        for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = std::tanh(z(i));
    return z;
}

Image ToyBackbone::encode_vjp(const Image& image, const Eigen::VectorXd& feature_grad) const {
    if (image.height != spec_.input_height || image.width != spec_.input_width)
        throw std::invalid_argument("encode_vjp: image size does not match backbone input size");
    if (feature_grad.size() != spec_.vision_dim)
        throw std::invalid_argument("encode_vjp: gradient dimension mismatch");

    Eigen::VectorXd g = feature_grad;
    if (nonlinearity_ == ToyNonlinearity::Tanh) {
        const Eigen::VectorXd z = projection_ * pooled_normalized(image);
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            const double t = std::tanh(z(i));
            g(i) *= 1.0 - t * t;
        }
    }
    const Eigen::VectorXd flat_grad = projection_.transpose() * g;

    const int ph = spec_.input_height / pool_;
    const int pw = spec_.input_width / pool_;
    const double inv_area = 1.0 / (pool_ * pool_);
    Image grad(spec_.input_height, spec_.input_width);
    for (int by = 0; by < ph; ++by)
        for (int bx = 0; bx < pw; ++bx)
            for (int c = 0; c < 3; ++c) {
                const double v = flat_grad((by * pw + bx) * 3 + c) * inv_area / spec_.norm_std[c];
                for (int dy = 0; dy < pool_; ++dy)
                    for (int dx = 0; dx < pool_; ++dx)
                        grad.at(by * pool_ + dy, bx * pool_ + dx, c) = v;
            }
    return grad;
}

std::uint64_t ToyBackbone::weights_hash() const {
    std::uint64_t h = fnv1a64(spec_.name);
    h = hash_matrix(projection_, h);
    for (double m : spec_.norm_mean) h = fnv1a64(&m, sizeof m, h);
    for (double s : spec_.norm_std) h = fnv1a64(&s, sizeof s, h);
    return h;
}

std::shared_ptr<Backbone> make_toy_backbone(std::uint64_t seed, int vision_dim,
                                            std::pair<int, int> input_size) {
    return std::make_shared<ToyBackbone>(seed, vision_dim, input_size.first, input_size.second);
}

// ---------------------------------------------------------------------------
// Registry

namespace {
std::map<std::string, BackboneRegistry::AdapterFactory>& adapter_factories() {
    static std::map<std::string, BackboneRegistry::AdapterFactory> factories;
    return factories;
}
std::mutex adapter_mutex;
}  // namespace

void BackboneRegistry::register_adapter(const std::string& kind, AdapterFactory factory) {
    std::lock_guard<std::mutex> lock(adapter_mutex);
    adapter_factories()[kind] = std::move(factory);
}

BackboneRegistry BackboneRegistry::load(const std::filesystem::path& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw MissingArtifactError("registry parse error in " + path.string() + ": " + e.what());
    }
    if (!doc.contains("version") || doc["version"].get<int>() != 1)
        throw MissingArtifactError("registry " + path.string() + ": unsupported version");

    BackboneRegistry reg;
    for (const auto& item : doc.at("backbones")) {
        Entry e;
        e.kind = item.at("kind").get<std::string>();
        for (const auto& [key, value] : item.items()) {
            if (key == "kind") continue;
            e.fields[key] = value.is_string() ? value.get<std::string>() : value.dump();
        }
        reg.entries_[item.at("name").get<std::string>()] = std::move(e);
    }
    return reg;
}

std::vector<std::string> BackboneRegistry::names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [name, entry] : entries_) out.push_back(name);
    return out;
}

std::shared_ptr<Backbone> BackboneRegistry::make(const std::string& name) const {
    const auto it = entries_.find(name);
    if (it == entries_.end())
        throw MissingArtifactError("backbone not in registry: " + name);
    const Entry& e = it->second;

    const auto field = [&](const std::string& key, const std::string& fallback) {
        const auto f = e.fields.find(key);
        return f == e.fields.end() ? fallback : f->second;
    };

    if (e.kind == "toy") {
        const auto size = nlohmann::json::parse(field("input_size", "[16,16]"));
        std::array<double, 3> mean{0.5, 0.5, 0.5}, std{0.5, 0.5, 0.5};
        if (e.fields.count("mean")) {
            const auto m = nlohmann::json::parse(e.fields.at("mean"));
            for (int i = 0; i < 3; ++i) mean[i] = m.at(i).get<double>();
        }
        if (e.fields.count("std")) {
            const auto s = nlohmann::json::parse(e.fields.at("std"));
            for (int i = 0; i < 3; ++i) std[i] = s.at(i).get<double>();
        }
        const auto nonlin = field("nonlinearity", "tanh") == "identity"
                                ? ToyNonlinearity::Identity
                                : ToyNonlinearity::Tanh;
        return std::make_shared<ToyBackbone>(
            std::stoull(field("seed", "0")), std::stoi(field("vision_dim", "32")),
            size.at(0).get<int>(), size.at(1).get<int>(), std::stoi(field("pool", "2")),
            nonlin, mean, std, std::stod(field("gain", "4.0")), name);
    }

    std::lock_guard<std::mutex> lock(adapter_mutex);
    const auto f = adapter_factories().find(e.kind);
    if (f == adapter_factories().end())
        throw MissingArtifactError("no adapter registered for backbone kind '" + e.kind +
                                   "' (name: " + name + ")");
    return f->second(e.fields);
}

}  // namespace siaa
