#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "alc/label_grid.hpp"
#include "alc/losses.hpp"
#include "alc/rng.hpp"
#include "alc/tensor.hpp"

namespace alc {

// Small 2D encoder-decoder: per level two 3x3 convs + ReLU, 2x2 max
// pooling down, nearest upsampling and skip concatenation up, dropout
// in front of each decoder level, 1x1 head, per-pixel softmax.
struct Arch {
    int in_channels = 1;
    std::vector<int> widths = {8, 16, 32};
    int n_classes = 2;
    double dropout_rate = 0.1;

    int depth() const { return static_cast<int>(widths.size()); }
    int pool_factor() const;  // input sides must be divisible by this
    void validate() const;
    bool operator==(const Arch&) const = default;
};

struct NamedTensor {
    std::string name;
    Tensor value;
};

struct ModelState {
    Arch arch;
    std::vector<NamedTensor> params;

    Tensor* find(const std::string& name);
    const Tensor* find(const std::string& name) const;
    std::size_t param_count() const;
};

// Fan-in scaled uniform weights, zero biases; draw order follows the
// parameter list, so equal (arch, seed) states are bit-identical.
ModelState init_params(const Arch& arch, Rng& rng);
ModelState zeros_like(const ModelState& s);

enum class ForwardKind { kDeterministic, kStochastic };

struct ForwardMode {
    ForwardKind kind = ForwardKind::kDeterministic;
    double dropout_rate = 0.1;
    double input_noise_sigma = 0.05;
    std::uint64_t rng_seed = 0;
};

// Activations recorded by forward for the exact reverse pass.
struct Tape {
    std::vector<Tensor> enc_in;      // conv_a input per encoder level
    std::vector<Tensor> enc_mid;     // ReLU output of conv_a
    std::vector<Tensor> enc_out;     // ReLU output of conv_b (skip source)
    std::vector<std::vector<int>> pool_argmax;  // flat input index per pooled cell
    std::vector<Tensor> dec_in;      // dropout-scaled concat input per decoder level
    std::vector<Tensor> dec_mask;    // dropout multipliers; numel 0 when inactive
    std::vector<Tensor> dec_mid;     // ReLU output of conv_a
    std::vector<Tensor> dec_out;     // ReLU output of conv_b
    Tensor prob;                     // softmax output, (H,W,C)
};

// Returns per-pixel class probabilities, shape (H,W,C). The image is
// (H,W); stochastic mode adds N(0, sigma^2) input noise and applies
// inverted dropout, both driven by mode.rng_seed.
Tensor forward(const ModelState& state, const Tensor& image, const ForwardMode& mode);
Tensor forward(const ModelState& state, const Tensor& image, const ForwardMode& mode,
               Tape& tape);

// dprob is dLoss/dprob, shape (H,W,C); returns dLoss/dparams with the
// same named shapes as state.params.
ModelState backward(const ModelState& state, const Tape& tape, const Tensor& dprob);

enum class LossTerm { kHs, kLs, kN };

struct LossItem {
    Tensor image;
    LabelGrid label;                          // seg target for this item's term
    LossTerm term = LossTerm::kHs;
    const Tensor* consistency_stack = nullptr;  // (m,H,W,C) teacher stack, optional
    std::uint64_t forward_seed = 0;
};

struct LossBreakdown {
    double hs = 0.0;
    double ls = 0.0;
    double n = 0.0;
    double c = 0.0;
    double total = 0.0;
};

// One student pass per item; each seg term is the mean over its items
// and the consistency term the mean over items carrying a stack. When
// grad_out is non-null it receives the exact reverse-mode gradient of
// the weighted total. Throws on a non-finite loss.
LossBreakdown loss_and_grad(const ModelState& state, const std::vector<LossItem>& batch,
                            const LossSpec& spec, const ForwardMode& base_mode,
                            ModelState* grad_out);

// Raw little-endian float32 of every parameter in list order.
void save_model_blob(const ModelState& s, const std::filesystem::path& file);
void load_model_blob(ModelState& s, const std::filesystem::path& file);

}  // namespace alc
