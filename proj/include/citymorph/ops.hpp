#pragma once

#include <utility>
#include <vector>

#include "citymorph/tensor.hpp"

namespace citymorph::ops {

// Cross-correlation; output spatial dims = floor((in + 2*pad - k)/stride) + 1.
template <typename T>
TensorPtr<T> conv2d(const TensorPtr<T>& input, const TensorPtr<T>& kernel,
                    const TensorPtr<T>& bias, int stride, int padding);

// Nearest-neighbor 2x upsampling; backward sums each 2x2 block.
template <typename T>
TensorPtr<T> upsample2x(const TensorPtr<T>& input);

// 2x2 average pooling; requires even spatial dims.
template <typename T>
TensorPtr<T> downsample2x_avg(const TensorPtr<T>& input);

template <typename T>
TensorPtr<T> relu(const TensorPtr<T>& input);
template <typename T>
TensorPtr<T> leaky_relu(const TensorPtr<T>& input, T slope = T(0.2));
template <typename T>
TensorPtr<T> sigmoid(const TensorPtr<T>& input);

template <typename T>
TensorPtr<T> concat_channels(const TensorPtr<T>& a, const TensorPtr<T>& b);

// alpha*a + (1-alpha)*b. Exact pass-through at alpha 0 and 1.
template <typename T>
TensorPtr<T> blend(const TensorPtr<T>& a, const TensorPtr<T>& b, T alpha);

// Running statistics for one batch-norm layer, updated with momentum 0.9 in
// train mode.
template <typename T>
struct BatchNormState {
    std::vector<T> running_mean;
    std::vector<T> running_var;
    explicit BatchNormState(int channels = 0)
        : running_mean(channels, T(0)), running_var(channels, T(1)) {}
};

template <typename T>
TensorPtr<T> batch_norm(const TensorPtr<T>& input, const TensorPtr<T>& gain,
                        const TensorPtr<T>& shift, BatchNormState<T>& state, bool train);

// Power-iteration state for one spectrally normalized kernel.
template <typename T>
struct SpectralState {
    std::vector<T> u;   // left singular vector estimate, length out-channels
    T sigma = T(1);     // latest top-singular-value estimate
};

// Returns kernel / sigma_estimate. update=true runs one power-iteration step
// first. The u/v vectors are buffers: the backward pass treats them as
// constants but does differentiate through sigma's linear dependence on the
// kernel.
template <typename T>
TensorPtr<T> spectral_norm(const TensorPtr<T>& kernel, SpectralState<T>& state, bool update);

// Losses (scalar tensors). All means are per-element so weights stay
// resolution independent.
template <typename T>
TensorPtr<T> l1_loss(const TensorPtr<T>& generated, const TensorPtr<T>& label);
template <typename T>
TensorPtr<T> geo_loss(const TensorPtr<T>& generated, const TensorPtr<T>& water);
template <typename T>
TensorPtr<T> lsgan_d_loss(const TensorPtr<T>& score_real, const TensorPtr<T>& score_fake);
template <typename T>
TensorPtr<T> lsgan_g_loss(const TensorPtr<T>& score_fake);

// Weighted sum of scalar tensors.
template <typename T>
TensorPtr<T> add_scaled(const std::vector<std::pair<TensorPtr<T>, T>>& terms);

} // namespace citymorph::ops
