#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "citymorph/ops.hpp"
#include "citymorph/tensor.hpp"

namespace citymorph {

struct GeneratorConfig {
    int input_channels = 3; // ntl+dem+water, or dem+water+population; +1 if noise
    int base_channels = 8;
    int max_resolution = 32; // power of 2, 8..256
    bool noise_enabled = false;

    void validate() const;
    // Number of halvings between max_resolution and the 4x4 bottleneck.
    int levels() const;
    int final_stage() const { return levels(); }
    static int stage_resolution(int stage) { return 4 << stage; }
    // Feature width at encoder level j (resolution max_resolution / 2^j).
    int width_at_level(int j) const;
};

// Progressive-growing position: stage k emits resolution 4*2^k; alpha fades
// the new layer in; the loss flags follow the grow-then-add-losses rule.
struct StageState {
    int stage_index = 0;
    double alpha = 1.0;
    bool adversarial_active = false;
    bool geo_active = false;
};

struct LossWeights {
    double lambda_l1 = 50.0;
    double lambda_geo = 100.0;
};

// During growth only the weighted L1 term applies; at the final stage the
// active flags add the adversarial and water-constraint terms.
double total_g_objective(double adv, double l1, double geo, const LossWeights& w,
                         const StageState& stage);

namespace detail {

template <typename T>
struct ConvLayer {
    TensorPtr<T> kernel, bias;
    int stride = 1, pad = 0;
    ops::SpectralState<T> sn;
    bool sn_enabled = false;

    TensorPtr<T> operator()(const TensorPtr<T>& x, bool train) {
        TensorPtr<T> k = kernel;
        if (sn_enabled) k = ops::spectral_norm(kernel, sn, train);
        return ops::conv2d(x, k, bias, stride, pad);
    }
};

template <typename T>
struct NormLayer {
    TensorPtr<T> gain, shift;
    ops::BatchNormState<T> state;

    TensorPtr<T> operator()(const TensorPtr<T>& x, bool train) {
        return ops::batch_norm(x, gain, shift, state, train);
    }
};

} // namespace detail

// U-Net generator with a fixed encoder and a progressively grown decoder.
// Skip connections join encoder features to the decoder stage of the same
// resolution; each stage owns a 1x1 to-image head with a sigmoid.
template <typename T>
class Generator {
public:
    Generator(const GeneratorConfig& config, uint64_t init_seed);

    // inputs: (B, input_channels, R, R) at full resolution. Output:
    // (B, 1, 4*2^stage, 4*2^stage) strictly inside (0,1). During fade-in the
    // image is alpha*(new head) + (1-alpha)*upsample2x(previous head).
    TensorPtr<T> forward(const TensorPtr<T>& inputs, int stage, double alpha, bool train);

    const GeneratorConfig& config() const { return config_; }
    std::vector<std::pair<std::string, TensorPtr<T>>> params();
    std::vector<std::pair<std::string, std::vector<T>*>> buffers();

private:
    GeneratorConfig config_;
    detail::ConvLayer<T> enc_in_;
    std::vector<detail::ConvLayer<T>> enc_;
    std::vector<detail::NormLayer<T>> enc_norm_;
    std::vector<detail::ConvLayer<T>> dec_;
    std::vector<detail::NormLayer<T>> dec_norm_;
    std::vector<detail::ConvLayer<T>> to_image_;
};

// Conditional score network, a mirror of the decoder: per-stage from-image
// heads, shared downsampling trunk, unbounded scalar score (least-squares
// objective, so no output sigmoid). Channel widths are half the generator's
// and there are no skip connections.
template <typename T>
class Discriminator {
public:
    Discriminator(const GeneratorConfig& config, bool spectral_norm, uint64_t init_seed);

    // candidate: (B, 1, r, r), conditioning: (B, input_channels, r, r) where
    // r = 4*2^stage. Returns (B, 1, 1, 1) scores. During fade-in the trunk
    // input is alpha*(new path) + (1-alpha)*(from-image of the downsampled
    // pair).
    TensorPtr<T> forward(const TensorPtr<T>& candidate, const TensorPtr<T>& conditioning,
                         int stage, double alpha, bool train);

    std::vector<std::pair<std::string, TensorPtr<T>>> params();
    std::vector<std::pair<std::string, std::vector<T>*>> buffers();

private:
    GeneratorConfig config_;
    bool spectral_norm_ = false;
    std::vector<detail::ConvLayer<T>> from_image_;
    std::vector<detail::ConvLayer<T>> blocks_;
    detail::ConvLayer<T> head_conv_;
    detail::ConvLayer<T> head_out_;
};

} // namespace citymorph
