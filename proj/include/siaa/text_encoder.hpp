#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <utility>

namespace siaa {

struct TextEncoderSpec {
    std::string name;
    int text_dim = 0;

    void validate() const;  // throws std::invalid_argument
};

// Frozen text encoder G(.). Deterministic per prompt; immutable after
// construction.
class TextEncoder {
public:
    virtual ~TextEncoder() = default;
    virtual const TextEncoderSpec& spec() const = 0;
    virtual Eigen::VectorXd encode_one(const std::string& prompt) const = 0;  // throws on empty
    virtual std::uint64_t weights_hash() const = 0;
};

// 2 x D_t matrix: row 0 = ground-truth prompt, row 1 = adversarial-target prompt.
Eigen::MatrixXd encode_text(const TextEncoder& encoder, const std::string& ground_truth_prompt,
                            const std::string& adversarial_prompt);

inline constexpr const char* kRealPrompt = "The image is real";
inline constexpr const char* kFakePrompt = "The image is fake";

// (ground-truth, adversarial) prompt pair for a label
std::pair<std::string, std::string> prompts_for_label(int label,
                                                      const std::string& real_prompt = kRealPrompt,
                                                      const std::string& fake_prompt = kFakePrompt);

// Seeded hash-to-unit-vector map. Stands in for a real text encoder in tests
// and toy pipelines: reproducible per (seed, prompt), distinct prompts map to
// distinct directions almost surely.
class ToyTextEncoder final : public TextEncoder {
public:
    ToyTextEncoder(std::uint64_t seed, int text_dim);

    const TextEncoderSpec& spec() const override { return spec_; }
    Eigen::VectorXd encode_one(const std::string& prompt) const override;
    std::uint64_t weights_hash() const override;

private:
    TextEncoderSpec spec_;
    std::uint64_t seed_;
};

}  // namespace siaa
