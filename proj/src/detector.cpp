#include "siaa/detector.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "siaa/errors.hpp"
#include "siaa/optim.hpp"
#include "siaa/rng.hpp"
#include "siaa/serial.hpp"

namespace siaa {

namespace {

constexpr std::uint64_t kDetectorMagic = 0x3154454441414953ull;  // "SIAADET1"

std::vector<int> layer_sizes(const HeadConfig& c) {
    switch (c.depth) {
        case 1: return {c.input_dim, 1};
        case 2: return {c.input_dim, c.hidden_dim, 1};
        case 3: return {c.input_dim, c.hidden_dim, c.hidden_dim, 1};
        default: throw std::invalid_argument("HeadConfig: depth must be 1, 2 or 3");
    }
}

// numerically stable BCE on a logit; also returns d loss / d logit
std::pair<double, double> bce_with_logit(double logit, int label) {
    const double y = static_cast<double>(label);
    const double loss = std::max(logit, 0.0) - logit * y + std::log1p(std::exp(-std::abs(logit)));
    const double sigmoid = 1.0 / (1.0 + std::exp(-logit));
    return {loss, sigmoid - y};
}

struct ForwardCache {
    std::vector<Eigen::VectorXd> pre;   // pre-activations per layer
    std::vector<Eigen::VectorXd> post;  // post-ReLU activations (last layer: logit)
};

double forward(const HeadParams& head, const Eigen::VectorXd& features, ForwardCache* cache) {
    Eigen::VectorXd x = features;
    for (int l = 0; l < head.depth(); ++l) {
        Eigen::VectorXd z = head.weights[l] * x + head.biases[l];
        if (cache) cache->pre.push_back(z);
        if (l + 1 < head.depth()) z = z.cwiseMax(0.0);
        if (cache) cache->post.push_back(z);
        x = std::move(z);
    }
    return x(0);
}

}  // namespace

void HeadConfig::validate() const {
    if (depth < 1 || depth > 3) throw std::invalid_argument("HeadConfig: depth must be 1, 2 or 3");
    if (hidden_dim <= 0) throw std::invalid_argument("HeadConfig: hidden_dim must be > 0");
    if (input_dim <= 0) throw std::invalid_argument("HeadConfig: input_dim must be > 0");
}

std::size_t HeadParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& w : weights) n += static_cast<std::size_t>(w.size());
    for (const auto& b : biases) n += static_cast<std::size_t>(b.size());
    return n;
}

HeadParams build_head(const HeadConfig& config, std::uint64_t seed) {
    config.validate();
    const std::vector<int> sizes = layer_sizes(config);
    Rng rng(derive_seed(seed, "detector-head-init"));
    HeadParams head;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(sizes[l]));
        Eigen::MatrixXd w(sizes[l + 1], sizes[l]);
        for (int r = 0; r < w.rows(); ++r)
            for (int c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-bound, bound);
        Eigen::VectorXd b(sizes[l + 1]);
        for (int r = 0; r < b.size(); ++r) b(r) = rng.uniform(-bound, bound);
        head.weights.push_back(std::move(w));
        head.biases.push_back(std::move(b));
    }
    return head;
}

double head_logit(const HeadParams& head, const Eigen::VectorXd& features) {
    if (head.weights.empty() || head.weights.front().cols() != features.size())
        throw std::invalid_argument("head_logit: feature dimension mismatch");
    return forward(head, features, nullptr);
}

Eigen::VectorXd head_input_grad(const HeadParams& head, const Eigen::VectorXd& features,
                                double upstream) {
    ForwardCache cache;
    forward(head, features, &cache);
    Eigen::VectorXd g = Eigen::VectorXd::Constant(1, upstream);
    for (int l = head.depth() - 1; l >= 0; --l) {
        if (l + 1 < head.depth())  // ReLU mask on this layer's output
            for (Eigen::Index k = 0; k < g.size(); ++k)
                if (cache.pre[l](k) <= 0.0) g(k) = 0.0;
        g = head.weights[l].transpose() * g;
    }
    return g;
}

std::pair<double, HeadGrads> head_logit_with_param_grads(const HeadParams& head,
                                                         const Eigen::VectorXd& features,
                                                         double upstream) {
    ForwardCache cache;
    const double logit = forward(head, features, &cache);

    HeadGrads grads;
    grads.weights.resize(head.depth());
    grads.biases.resize(head.depth());

    Eigen::VectorXd g = Eigen::VectorXd::Constant(1, upstream);
    for (int l = head.depth() - 1; l >= 0; --l) {
        if (l + 1 < head.depth())
            for (Eigen::Index k = 0; k < g.size(); ++k)
                if (cache.pre[l](k) <= 0.0) g(k) = 0.0;
        const Eigen::VectorXd& input = l == 0 ? features : cache.post[l - 1];
        grads.weights[l] = g * input.transpose();
        grads.biases[l] = g;
        g = head.weights[l].transpose() * g;
    }
    return {logit, grads};
}

void TrainConfig::validate() const {
    if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be >= 0");
    if (learning_rate <= 0.0) throw std::invalid_argument("TrainConfig: learning rate must be > 0");
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch size must be >= 1");
}

Prediction predict(const Detector& detector, const Image& image) {
    Prediction p;
    p.logit = head_logit(detector.head, detector.backbone->encode_one(image));
    p.probability = 1.0 / (1.0 + std::exp(-p.logit));
    p.label = p.probability > 0.5 ? 1 : 0;
    return p;
}

std::vector<Prediction> predict_batch(const Detector& detector, std::span<const Image> images) {
    std::vector<Prediction> out;
    out.reserve(images.size());
    for (const Image& img : images) out.push_back(predict(detector, img));
    return out;
}

Detector train_detector(std::span<const Sample> train, std::span<const Sample> val,
                        std::shared_ptr<const Backbone> backbone, const HeadConfig& head_config,
                        const TrainConfig& train_config, const SampleTransform& transform,
                        const DetectorProvenance& provenance) {
    train_config.validate();
    HeadConfig config = head_config;
    if (config.input_dim == 0) config.input_dim = backbone->spec().vision_dim;
    config.validate();
    if (config.input_dim != backbone->spec().vision_dim)
        throw std::invalid_argument("train_detector: head input_dim does not match backbone");
    if (train.empty()) throw std::invalid_argument("train_detector: empty training set");
    bool has0 = false, has1 = false;
    for (const Sample& s : train) (s.label == 0 ? has0 : has1) = true;
    if (!has0 || !has1)
        throw std::invalid_argument("train_detector: training set must contain both classes");

    Detector detector;
    detector.backbone = backbone;
    detector.config = config;
    detector.head = build_head(config, train_config.seed);
    detector.provenance = provenance;
    detector.provenance.seed = train_config.seed;
    if (train_config.epochs == 0) return detector;

    HeadParams params = detector.head;
    Adam optimizer(train_config.learning_rate);
    for (auto& w : params.weights) optimizer.register_param(w.data(), w.size());
    for (auto& b : params.biases) optimizer.register_param(b.data(), b.size());

    std::vector<int> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    HeadParams best = params;
    double best_val = -1.0;

    for (int epoch = 0; epoch < train_config.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(train_config.seed, fnv1a64("detector-epoch") + epoch));
        shuffle_rng.shuffle(order);

        for (std::size_t start = 0; start < order.size(); start += train_config.batch_size) {
            const std::size_t count =
                std::min<std::size_t>(train_config.batch_size, order.size() - start);
            HeadGrads acc;
            acc.weights.resize(params.depth());
            acc.biases.resize(params.depth());
            for (int l = 0; l < params.depth(); ++l) {
                acc.weights[l] = Eigen::MatrixXd::Zero(params.weights[l].rows(),
                                                       params.weights[l].cols());
                acc.biases[l] = Eigen::VectorXd::Zero(params.biases[l].size());
            }
            const double inv = 1.0 / static_cast<double>(count);
            for (std::size_t b = 0; b < count; ++b) {
                const Sample& sample = train[order[start + b]];
                const Image img =
                    transform ? transform(sample.image, epoch, static_cast<int>(start + b))
                              : sample.image;
                const Eigen::VectorXd features = backbone->encode_one(img);
                const double logit = head_logit(params, features);
                const auto [loss, dlogit] = bce_with_logit(logit, sample.label);
                (void)loss;
                auto [l2, grads] = head_logit_with_param_grads(params, features, dlogit * inv);
                (void)l2;
                for (int l = 0; l < params.depth(); ++l) {
                    acc.weights[l] += grads.weights[l];
                    acc.biases[l] += grads.biases[l];
                }
            }
            std::vector<const double*> grad_blocks;
            for (const auto& w : acc.weights) grad_blocks.push_back(w.data());
            for (const auto& b : acc.biases) grad_blocks.push_back(b.data());
            optimizer.step(grad_blocks);
        }

        if (!val.empty()) {
            detector.head = params;
            const double acc_val = detector_accuracy(detector, val);
            if (acc_val > best_val) {
                best_val = acc_val;
                best = params;
            }
        }
    }

    detector.head = val.empty() ? params : best;
    return detector;
}

double detector_accuracy(const Detector& detector, std::span<const Sample> samples) {
    if (samples.empty()) throw std::invalid_argument("detector_accuracy: empty sample set");
    int correct = 0;
    for (const Sample& s : samples)
        if (predict(detector, s.image).label == s.label) ++correct;
    return static_cast<double>(correct) / static_cast<double>(samples.size());
}

void save_detector(const std::filesystem::path& path, const Detector& detector) {
    BinaryWriter w;
    w.u64(kDetectorMagic);
    w.u32(1);
    w.i32(detector.config.depth);
    w.i32(detector.config.hidden_dim);
    w.i32(detector.config.input_dim);
    w.u32(static_cast<std::uint32_t>(detector.head.depth()));
    for (int l = 0; l < detector.head.depth(); ++l) {
        w.matrix(detector.head.weights[l]);
        w.vector(detector.head.biases[l]);
    }
    w.str(detector.backbone ? detector.backbone->spec().name : "");
    w.str(detector.provenance.dataset_id);
    w.str(detector.provenance.augmentation_id);
    w.u64(detector.provenance.seed);
    w.finish(path);
}

Detector load_detector(const std::filesystem::path& path,
                       std::shared_ptr<const Backbone> backbone) {
    BinaryReader r(path);
    if (r.u64() != kDetectorMagic)
        throw MissingArtifactError("not a detector checkpoint: " + path.string());
    if (r.u32() != 1)
        throw MissingArtifactError("unsupported detector checkpoint version: " + path.string());
    Detector d;
    d.config.depth = r.i32();
    d.config.hidden_dim = r.i32();
    d.config.input_dim = r.i32();
    const std::uint32_t layers = r.u32();
    for (std::uint32_t l = 0; l < layers; ++l) {
        d.head.weights.push_back(r.matrix());
        d.head.biases.push_back(r.vector());
    }
    const std::string backbone_name = r.str();
    d.provenance.dataset_id = r.str();
    d.provenance.augmentation_id = r.str();
    d.provenance.seed = r.u64();
    if (backbone) {
        if (backbone->spec().name != backbone_name)
            throw MissingArtifactError("detector checkpoint was trained on backbone '" +
                                       backbone_name + "', got '" + backbone->spec().name + "'");
        d.backbone = std::move(backbone);
    }
    return d;
}

}  // namespace siaa
