#include "siaa/fphead.hpp"

#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "siaa/errors.hpp"
#include "siaa/optim.hpp"
#include "siaa/rng.hpp"
#include "siaa/serial.hpp"

namespace siaa {

namespace {

constexpr std::uint64_t kFpHeadMagic = 0x3148504641414953ull;  // "SIAAFPH1"
constexpr double kNormEps = 1e-12;  // inside the sqrt of distance gradients

Eigen::MatrixXd uniform_matrix(int rows, int cols, double bound, Rng& rng) {
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = rng.uniform(-bound, bound);
    return m;
}

}  // namespace

Eigen::VectorXd l2_normalize_vjp(const Eigen::VectorXd& normalized, double norm,
                                 const Eigen::VectorXd& grad) {
    return (grad - grad.dot(normalized) * normalized) / norm;
}

void FPHeadParams::validate() const {
    if (text_weight.rows() == 0 || vision_weight.rows() == 0)
        throw std::invalid_argument("FPHeadParams: empty weights");
    if (text_weight.rows() != vision_weight.rows() || text_weight.rows() != text_bias.size() ||
        vision_weight.rows() != vision_bias.size())
        throw std::invalid_argument("FPHeadParams: inconsistent output dimensions");
    if (!text_weight.allFinite() || !text_bias.allFinite() || !vision_weight.allFinite() ||
        !vision_bias.allFinite())
        throw std::invalid_argument("FPHeadParams: non-finite parameters");
}

FPHeadParams init_fp_head(int out_dim, int text_dim, int vision_dim, std::uint64_t seed) {
    if (out_dim <= 0 || text_dim <= 0 || vision_dim <= 0)
        throw std::invalid_argument("init_fp_head: dimensions must be positive");
    Rng rng(derive_seed(seed, "fp-head-init"));
    FPHeadParams p;
    const double tb = 1.0 / std::sqrt(static_cast<double>(text_dim));
    const double vb = 1.0 / std::sqrt(static_cast<double>(vision_dim));
    p.text_weight = uniform_matrix(out_dim, text_dim, tb, rng);
    p.text_bias = uniform_matrix(out_dim, 1, tb, rng).col(0);
    p.vision_weight = uniform_matrix(out_dim, vision_dim, vb, rng);
    p.vision_bias = uniform_matrix(out_dim, 1, vb, rng).col(0);
    return p;
}

Eigen::MatrixXd fp_forward_text(const FPHeadParams& params, const Eigen::MatrixXd& text_embedding) {
    if (text_embedding.cols() != params.text_dim())
        throw std::invalid_argument("fp_forward_text: dimension mismatch");
    return (text_embedding * params.text_weight.transpose()).rowwise() +
           params.text_bias.transpose();
}

Eigen::MatrixXd fp_forward_vision(const FPHeadParams& params,
                                  const Eigen::MatrixXd& visual_embedding) {
    if (visual_embedding.cols() != params.vision_dim())
        throw std::invalid_argument("fp_forward_vision: dimension mismatch");
    Eigen::MatrixXd out = (visual_embedding * params.vision_weight.transpose()).rowwise() +
                          params.vision_bias.transpose();
    return out.cwiseMax(0.0);
}

Eigen::VectorXd l2_normalize(const Eigen::VectorXd& x) {
    const double norm = x.norm();
    if (norm < 1e-12)
        throw DegenerateInputError("l2_normalize: norm below 1e-12");
    return x / norm;
}

double beta_schedule(int epoch, int total_epochs) {
    if (total_epochs <= 0) throw std::invalid_argument("beta_schedule: total epochs must be > 0");
    if (epoch < 0 || epoch > total_epochs)
        throw std::invalid_argument("beta_schedule: epoch outside [0, E]");
    return std::min(1.0, static_cast<double>(epoch) / (total_epochs / 2.0));
}

Phase1LossTerms phase1_loss(const Eigen::VectorXd& vision_row, const Eigen::VectorXd& text_truth,
                            const Eigen::VectorXd& text_adversarial, int epoch, int total_epochs,
                            double margin) {
    if (margin <= 0.0) throw std::invalid_argument("phase1_loss: margin must be > 0");
    for (const auto* v : {&vision_row, &text_truth, &text_adversarial})
        if (std::abs(v->norm() - 1.0) > 1e-3)
            throw std::invalid_argument("phase1_loss: inputs must be l2-normalized");

    Phase1LossTerms t;
    t.pull = (vision_row - text_truth).squaredNorm();
    const double push_hinge = std::max(0.0, margin - (vision_row - text_adversarial).norm());
    t.push = push_hinge * push_hinge;
    t.text = std::max(0.0, 2.0 * margin - (text_truth - text_adversarial).norm());
    t.total = beta_schedule(epoch, total_epochs) * (t.pull + t.push) + t.text;
    return t;
}

std::pair<Phase1LossTerms, FPHeadGrads> phase1_batch_gradients(
    const FPHeadParams& params, const Eigen::MatrixXd& text_embedding,
    const Eigen::MatrixXd& visual_embeddings, std::span<const int> labels, int epoch,
    int total_epochs, double margin) {
    params.validate();
    if (text_embedding.rows() != 2)
        throw std::invalid_argument("phase1_batch_gradients: text embedding must have 2 rows");
    const auto batch = static_cast<Eigen::Index>(labels.size());
    if (visual_embeddings.rows() != batch)
        throw std::invalid_argument("phase1_batch_gradients: batch size mismatch");
    if (batch == 0) throw std::invalid_argument("phase1_batch_gradients: empty batch");

    const double beta = beta_schedule(epoch, total_epochs);
    const double inv_batch = 1.0 / static_cast<double>(batch);
    const int out_dim = params.out_dim();

    // text branch forward (shared by every sample)
    Eigen::MatrixXd s = fp_forward_text(params, text_embedding);  // 2 x N
    std::array<double, 2> s_norm;
    std::array<Eigen::VectorXd, 2> s_hat;
    for (int k = 0; k < 2; ++k) {
        s_norm[k] = s.row(k).norm();
        if (s_norm[k] < 1e-12)
            throw DegenerateInputError("phase1: projected text embedding collapsed to zero");
        s_hat[k] = s.row(k).transpose() / s_norm[k];
    }

    const Eigen::VectorXd text_diff = s_hat[0] - s_hat[1];
    const double text_dist = text_diff.norm();
    const double text_dist_guarded = std::sqrt(text_diff.squaredNorm() + kNormEps);
    const double text_loss = std::max(0.0, 2.0 * margin - text_dist);

    Phase1LossTerms mean_terms;
    mean_terms.text = text_loss;

    FPHeadGrads grads;
    grads.text_weight = Eigen::MatrixXd::Zero(out_dim, params.text_dim());
    grads.text_bias = Eigen::VectorXd::Zero(out_dim);
    grads.vision_weight = Eigen::MatrixXd::Zero(out_dim, params.vision_dim());
    grads.vision_bias = Eigen::VectorXd::Zero(out_dim);

    std::array<Eigen::VectorXd, 2> s_hat_grad = {Eigen::VectorXd::Zero(out_dim),
                                                 Eigen::VectorXd::Zero(out_dim)};
    if (text_loss > 0.0) {
        // every sample contributes the same text-loss gradient; mean weight is 1
        s_hat_grad[0] -= text_diff / text_dist_guarded;
        s_hat_grad[1] += text_diff / text_dist_guarded;
    }

    for (Eigen::Index i = 0; i < batch; ++i) {
        const int y = labels[i];
        if (y != 0 && y != 1)
            throw std::invalid_argument("phase1_batch_gradients: labels must be 0 or 1");

        const Eigen::VectorXd v = visual_embeddings.row(i).transpose();
        const Eigen::VectorXd u = params.vision_weight * v + params.vision_bias;
        const Eigen::VectorXd r = u.cwiseMax(0.0);
        const double r_norm = r.norm();
        if (r_norm < 1e-12)
            throw DegenerateInputError("phase1: ReLU output collapsed to zero for a sample");
        const Eigen::VectorXd v_hat = r / r_norm;

        const Eigen::VectorXd pull_diff = v_hat - s_hat[y];
        const Eigen::VectorXd push_diff = v_hat - s_hat[1 - y];
        const double push_dist = push_diff.norm();
        const double push_dist_guarded = std::sqrt(push_diff.squaredNorm() + kNormEps);
        const double push_hinge = std::max(0.0, margin - push_dist);

        mean_terms.pull += pull_diff.squaredNorm() * inv_batch;
        mean_terms.push += push_hinge * push_hinge * inv_batch;

        // d/dv_hat of beta*(pull + push), averaged over the batch
        Eigen::VectorXd v_hat_grad = beta * inv_batch * 2.0 * pull_diff;
        if (push_hinge > 0.0)
            v_hat_grad -= beta * inv_batch * 2.0 * push_hinge / push_dist_guarded * push_diff;

        s_hat_grad[y] -= beta * inv_batch * 2.0 * pull_diff;
        if (push_hinge > 0.0)
            s_hat_grad[1 - y] += beta * inv_batch * 2.0 * push_hinge / push_dist_guarded * push_diff;

        // back through normalize, ReLU, linear
        Eigen::VectorXd u_grad = l2_normalize_vjp(v_hat, r_norm, v_hat_grad);
        for (Eigen::Index k = 0; k < u_grad.size(); ++k)
            if (u(k) <= 0.0) u_grad(k) = 0.0;
        grads.vision_weight.noalias() += u_grad * v.transpose();
        grads.vision_bias += u_grad;
    }

    for (int k = 0; k < 2; ++k) {
        const Eigen::VectorXd s_grad = l2_normalize_vjp(s_hat[k], s_norm[k], s_hat_grad[k]);
        grads.text_weight.noalias() += s_grad * text_embedding.row(k);
        grads.text_bias += s_grad;
    }

    mean_terms.total = beta * (mean_terms.pull + mean_terms.push) + mean_terms.text;
    return {mean_terms, grads};
}

double validate_fp_head(const FPHeadParams& params, std::span<const Sample> samples,
                        const Backbone& backbone, const TextEncoder& text_encoder,
                        const std::string& real_prompt, const std::string& fake_prompt) {
    if (samples.empty()) throw std::invalid_argument("validate_fp_head: empty sample set");
    const Eigen::MatrixXd t = encode_text(text_encoder, real_prompt, fake_prompt);
    const Eigen::MatrixXd s = fp_forward_text(params, t);
    const Eigen::VectorXd t0 = l2_normalize(s.row(0).transpose());
    const Eigen::VectorXd t1 = l2_normalize(s.row(1).transpose());

    int correct = 0;
    for (const Sample& sample : samples) {
        const Eigen::VectorXd v = backbone.encode_one(sample.image);
        const Eigen::MatrixXd projected = fp_forward_vision(params, v.transpose());
        const Eigen::VectorXd v_hat = l2_normalize(projected.row(0).transpose());
        const int predicted = (v_hat - t1).norm() < (v_hat - t0).norm() ? 1 : 0;
        if (predicted == sample.label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(samples.size());
}

void Phase1Config::validate() const {
    if (epochs < 0) throw std::invalid_argument("Phase1Config: epochs must be >= 0");
    if (margin <= 0.0) throw std::invalid_argument("Phase1Config: margin must be > 0");
    if (learning_rate <= 0.0) throw std::invalid_argument("Phase1Config: learning rate must be > 0");
    if (batch_size < 1) throw std::invalid_argument("Phase1Config: batch size must be >= 1");
    if (head_dim < 0) throw std::invalid_argument("Phase1Config: head_dim must be >= 0");
}

Phase1Result train_fp_head(std::span<const Sample> train, std::span<const Sample> val,
                           const Backbone& backbone, const TextEncoder& text_encoder,
                           const Phase1Config& config, const SampleTransform& transform,
                           const std::string& real_prompt, const std::string& fake_prompt) {
    config.validate();
    if (train.empty()) throw std::invalid_argument("train_fp_head: empty training set");
    if (config.require_both_classes) {
        bool has0 = false, has1 = false;
        for (const Sample& s : train) (s.label == 0 ? has0 : has1) = true;
        if (!has0 || !has1)
            throw std::invalid_argument("train_fp_head: training set must contain both classes");
    }

    const int out_dim = config.head_dim > 0 ? config.head_dim : backbone.spec().vision_dim;
    Phase1Result result;
    result.params = init_fp_head(out_dim, text_encoder.spec().text_dim,
                                 backbone.spec().vision_dim, config.seed);
    if (config.epochs == 0) {
        if (!val.empty())
            result.best_validation = validate_fp_head(result.params, val, backbone, text_encoder,
                                                      real_prompt, fake_prompt);
        return result;
    }

    const Eigen::MatrixXd text_embedding = encode_text(text_encoder, real_prompt, fake_prompt);

    FPHeadParams params = result.params;
    Adam optimizer(config.learning_rate);
    optimizer.register_param(params.text_weight.data(), params.text_weight.size());
    optimizer.register_param(params.text_bias.data(), params.text_bias.size());
    optimizer.register_param(params.vision_weight.data(), params.vision_weight.size());
    optimizer.register_param(params.vision_bias.data(), params.vision_bias.size());

    std::vector<int> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    FPHeadParams best = params;
    double best_val = -1.0;
    int best_epoch = -1;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(config.seed, fnv1a64("phase1-epoch") + epoch));
        shuffle_rng.shuffle(order);

        double sum_pull = 0.0, sum_push = 0.0, sum_text = 0.0, sum_total = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t count = std::min<std::size_t>(config.batch_size,
                                                            order.size() - start);
            Eigen::MatrixXd visual(count, backbone.spec().vision_dim);
            std::vector<int> labels(count);
            for (std::size_t b = 0; b < count; ++b) {
                const Sample& sample = train[order[start + b]];
                labels[b] = sample.label;
                const Image img = transform
                                      ? transform(sample.image, epoch,
                                                  static_cast<int>(start + b))
                                      : sample.image;
                visual.row(static_cast<Eigen::Index>(b)) = backbone.encode_one(img).transpose();
            }
            auto [terms, grads] = phase1_batch_gradients(params, text_embedding, visual, labels,
                                                         epoch, config.epochs, config.margin);
            optimizer.step({grads.text_weight.data(), grads.text_bias.data(),
                            grads.vision_weight.data(), grads.vision_bias.data()});
            sum_pull += terms.pull * count;
            sum_push += terms.push * count;
            sum_text += terms.text * count;
            sum_total += terms.total * count;
        }

        EpochRecord record;
        record.epoch = epoch;
        record.beta = beta_schedule(epoch, config.epochs);
        const double n = static_cast<double>(train.size());
        record.mean_pull = sum_pull / n;
        record.mean_push = sum_push / n;
        record.mean_text = sum_text / n;
        record.mean_total = sum_total / n;
        if (!val.empty()) {
            record.validation_accuracy =
                validate_fp_head(params, val, backbone, text_encoder, real_prompt, fake_prompt);
            if (record.validation_accuracy > best_val) {
                best_val = record.validation_accuracy;
                best = params;
                best_epoch = epoch;
            }
        }
        result.trace.push_back(record);
    }

    if (!val.empty()) {
        result.params = best;
        result.best_epoch = best_epoch;
        result.best_validation = best_val;
    } else {
        result.params = params;
        result.best_epoch = config.epochs - 1;
    }
    return result;
}

void save_fp_head(const std::filesystem::path& path, const FPHeadCheckpoint& checkpoint) {
    checkpoint.params.validate();
    BinaryWriter w;
    w.u64(kFpHeadMagic);
    w.u32(1);
    w.matrix(checkpoint.params.text_weight);
    w.vector(checkpoint.params.text_bias);
    w.matrix(checkpoint.params.vision_weight);
    w.vector(checkpoint.params.vision_bias);
    w.i32(checkpoint.config.epochs);
    w.f64(checkpoint.config.margin);
    w.f64(checkpoint.config.learning_rate);
    w.i32(checkpoint.config.batch_size);
    w.u64(checkpoint.config.seed);
    w.i32(checkpoint.config.head_dim);
    w.str(checkpoint.backbone_name);
    w.str(checkpoint.text_encoder_name);
    w.str(checkpoint.dataset_id);
    w.str(checkpoint.real_prompt);
    w.str(checkpoint.fake_prompt);
    w.finish(path);
}

FPHeadCheckpoint load_fp_head(const std::filesystem::path& path) {
    BinaryReader r(path);
    if (r.u64() != kFpHeadMagic)
        throw MissingArtifactError("not an FP-head checkpoint: " + path.string());
    if (r.u32() != 1)
        throw MissingArtifactError("unsupported FP-head checkpoint version: " + path.string());
    FPHeadCheckpoint c;
    c.params.text_weight = r.matrix();
    c.params.text_bias = r.vector();
    c.params.vision_weight = r.matrix();
    c.params.vision_bias = r.vector();
    c.config.epochs = r.i32();
    c.config.margin = r.f64();
    c.config.learning_rate = r.f64();
    c.config.batch_size = r.i32();
    c.config.seed = r.u64();
    c.config.head_dim = r.i32();
    c.backbone_name = r.str();
    c.text_encoder_name = r.str();
    c.dataset_id = r.str();
    c.real_prompt = r.str();
    c.fake_prompt = r.str();
    c.params.validate();
    return c;
}

}  // namespace siaa
