#include "siaa/text_encoder.hpp"

#include <stdexcept>

#include "siaa/errors.hpp"
#include "siaa/rng.hpp"

namespace siaa {

void TextEncoderSpec::validate() const {
    if (name.empty()) throw std::invalid_argument("TextEncoderSpec: empty name");
    if (text_dim <= 0) throw std::invalid_argument("TextEncoderSpec: text_dim must be > 0");
}

Eigen::MatrixXd encode_text(const TextEncoder& encoder, const std::string& ground_truth_prompt,
                            const std::string& adversarial_prompt) {
    Eigen::MatrixXd t(2, encoder.spec().text_dim);
    t.row(0) = encoder.encode_one(ground_truth_prompt).transpose();
    t.row(1) = encoder.encode_one(adversarial_prompt).transpose();
    return t;
}

std::pair<std::string, std::string> prompts_for_label(int label, const std::string& real_prompt,
                                                      const std::string& fake_prompt) {
    if (label != 0 && label != 1)
        throw std::invalid_argument("prompts_for_label: label must be 0 or 1");
    return label == 0 ? std::pair{real_prompt, fake_prompt} : std::pair{fake_prompt, real_prompt};
}

ToyTextEncoder::ToyTextEncoder(std::uint64_t seed, int text_dim) : seed_(seed) {
    spec_.name = "toy-text-" + std::to_string(seed);
    spec_.text_dim = text_dim;
    spec_.validate();
}

Eigen::VectorXd ToyTextEncoder::encode_one(const std::string& prompt) const {
    if (prompt.empty()) throw DegenerateInputError("encode_text: empty prompt");
    Rng rng(derive_seed(seed_, fnv1a64(prompt)));
    Eigen::VectorXd v(spec_.text_dim);
    for (int i = 0; i < spec_.text_dim; ++i) v(i) = rng.uniform(-1.0, 1.0);
    const double norm = v.norm();
    // a zero draw across all dims is not reachable in practice, but stay safe
    return norm > 0.0 ? Eigen::VectorXd(v / norm) : Eigen::VectorXd::Unit(spec_.text_dim, 0);
}

std::uint64_t ToyTextEncoder::weights_hash() const {
    std::uint64_t h = fnv1a64(spec_.name);
    return fnv1a64(&seed_, sizeof seed_, h);
}

}  // namespace siaa
