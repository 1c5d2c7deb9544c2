#include "citymorph/nets.hpp"

#include <cmath>

#include "citymorph/rng.hpp"

namespace citymorph {

void GeneratorConfig::validate() const {
    if (max_resolution < 8 || (max_resolution & (max_resolution - 1)) != 0)
        throw ArgumentError("max_resolution must be a power of two >= 8");
    if (max_resolution > 256) throw ArgumentError("max_resolution above 256 is unsupported");
    if (base_channels < 4) throw ArgumentError("base_channels must be >= 4");
    if (input_channels < 1) throw ArgumentError("input_channels must be >= 1");
}

int GeneratorConfig::levels() const {
    int j = 0, r = max_resolution;
    while (r > 4) {
        r /= 2;
        ++j;
    }
    return j;
}

int GeneratorConfig::width_at_level(int j) const {
    const int64_t cap = static_cast<int64_t>(base_channels) * 8;
    const int64_t w = static_cast<int64_t>(base_channels) << j;
    return static_cast<int>(w < cap ? w : cap);
}

double total_g_objective(double adv, double l1, double geo, const LossWeights& w,
                         const StageState& stage) {
    double total = w.lambda_l1 * l1;
    if (stage.adversarial_active) total += adv;
    if (stage.geo_active) total += w.lambda_geo * geo;
    return total;
}

namespace {

template <typename T>
detail::ConvLayer<T> make_conv(Rng& rng, int cout, int cin, int k, int stride, int pad) {
    detail::ConvLayer<T> layer;
    layer.stride = stride;
    layer.pad = pad;
    const int64_t fan_in = static_cast<int64_t>(cin) * k * k;
    const double std = std::sqrt(2.0 / static_cast<double>(fan_in));
    std::vector<T> kv(static_cast<size_t>(cout) * cin * k * k);
    for (auto& v : kv) v = static_cast<T>(rng.gaussian() * std);
    layer.kernel = make_tensor<T>({cout, cin, k, k}, std::move(kv), true);
    layer.bias = make_tensor<T>({1, cout, 1, 1}, std::vector<T>(cout, T(0)), true);
    return layer;
}

template <typename T>
detail::NormLayer<T> make_norm(int channels) {
    detail::NormLayer<T> layer;
    layer.gain = make_tensor<T>({1, channels, 1, 1}, std::vector<T>(channels, T(1)), true);
    layer.shift = make_tensor<T>({1, channels, 1, 1}, std::vector<T>(channels, T(0)), true);
    layer.state = ops::BatchNormState<T>(channels);
    return layer;
}

template <typename T>
void push_conv(std::vector<std::pair<std::string, TensorPtr<T>>>& out, const std::string& name,
               detail::ConvLayer<T>& layer) {
    out.emplace_back(name + ".k", layer.kernel);
    out.emplace_back(name + ".b", layer.bias);
}

template <typename T>
void push_norm(std::vector<std::pair<std::string, TensorPtr<T>>>& out, const std::string& name,
               detail::NormLayer<T>& layer) {
    out.emplace_back(name + ".g", layer.gain);
    out.emplace_back(name + ".s", layer.shift);
}

} // namespace

template <typename T>
Generator<T>::Generator(const GeneratorConfig& config, uint64_t init_seed) : config_(config) {
    config_.validate();
    Rng rng(mix_seed(init_seed, 0x6e6774ULL));
    const int J = config_.levels();

    enc_in_ = make_conv<T>(rng, config_.width_at_level(0), config_.input_channels, 3, 1, 1);
    for (int j = 1; j <= J; ++j) {
        enc_.push_back(
            make_conv<T>(rng, config_.width_at_level(j), config_.width_at_level(j - 1), 4, 2, 1));
        enc_norm_.push_back(make_norm<T>(config_.width_at_level(j)));
    }
    // dec_[k] produces the stage-k features at resolution 4*2^k.
    dec_.push_back(make_conv<T>(rng, config_.width_at_level(J), config_.width_at_level(J), 3, 1, 1));
    dec_norm_.push_back(make_norm<T>(config_.width_at_level(J)));
    for (int k = 1; k <= J; ++k) {
        const int in_ch = config_.width_at_level(J - k + 1) + config_.width_at_level(J - k);
        dec_.push_back(make_conv<T>(rng, config_.width_at_level(J - k), in_ch, 3, 1, 1));
        dec_norm_.push_back(make_norm<T>(config_.width_at_level(J - k)));
    }
    for (int k = 0; k <= J; ++k)
        to_image_.push_back(make_conv<T>(rng, 1, config_.width_at_level(J - k), 1, 1, 0));
}

template <typename T>
TensorPtr<T> Generator<T>::forward(const TensorPtr<T>& inputs, int stage, double alpha,
                                   bool train) {
    const int J = config_.levels();
    if (stage < 0 || stage > J)
        throw ArgumentError("generator stage " + std::to_string(stage) +
                            " is outside the configured range");
    if (inputs->shape.c != config_.input_channels || inputs->shape.h != config_.max_resolution ||
        inputs->shape.w != config_.max_resolution)
        throw ShapeError("generator expects (B," + std::to_string(config_.input_channels) + "," +
                         std::to_string(config_.max_resolution) + "," +
                         std::to_string(config_.max_resolution) + "), got " +
                         inputs->shape.str());

    std::vector<TensorPtr<T>> enc_feats;
    enc_feats.push_back(ops::leaky_relu(enc_in_(inputs, train)));
    for (int j = 1; j <= J; ++j)
        enc_feats.push_back(
            ops::leaky_relu(enc_norm_[j - 1](enc_[j - 1](enc_feats.back(), train), train)));

    TensorPtr<T> d = ops::leaky_relu(dec_norm_[0](dec_[0](enc_feats[J], train), train));
    TensorPtr<T> prev_image;
    const bool fading = stage >= 1 && alpha < 1.0;
    for (int s = 1; s <= stage; ++s) {
        if (s == stage && fading)
            prev_image = ops::sigmoid(to_image_[stage - 1](d, train));
        TensorPtr<T> up = ops::upsample2x(d);
        d = ops::leaky_relu(
            dec_norm_[s](dec_[s](ops::concat_channels(up, enc_feats[J - s]), train), train));
    }
    TensorPtr<T> image = ops::sigmoid(to_image_[stage](d, train));
    if (fading) image = ops::blend(image, ops::upsample2x(prev_image), static_cast<T>(alpha));
    return image;
}

template <typename T>
std::vector<std::pair<std::string, TensorPtr<T>>> Generator<T>::params() {
    std::vector<std::pair<std::string, TensorPtr<T>>> out;
    push_conv(out, "enc0", enc_in_);
    for (size_t j = 0; j < enc_.size(); ++j) {
        push_conv(out, "enc" + std::to_string(j + 1), enc_[j]);
        push_norm(out, "enc" + std::to_string(j + 1) + ".bn", enc_norm_[j]);
    }
    for (size_t k = 0; k < dec_.size(); ++k) {
        push_conv(out, "dec" + std::to_string(k), dec_[k]);
        push_norm(out, "dec" + std::to_string(k) + ".bn", dec_norm_[k]);
    }
    for (size_t k = 0; k < to_image_.size(); ++k)
        push_conv(out, "toimg" + std::to_string(k), to_image_[k]);
    return out;
}

template <typename T>
std::vector<std::pair<std::string, std::vector<T>*>> Generator<T>::buffers() {
    std::vector<std::pair<std::string, std::vector<T>*>> out;
    for (size_t j = 0; j < enc_norm_.size(); ++j) {
        out.emplace_back("enc" + std::to_string(j + 1) + ".bn.rm",
                         &enc_norm_[j].state.running_mean);
        out.emplace_back("enc" + std::to_string(j + 1) + ".bn.rv",
                         &enc_norm_[j].state.running_var);
    }
    for (size_t k = 0; k < dec_norm_.size(); ++k) {
        out.emplace_back("dec" + std::to_string(k) + ".bn.rm", &dec_norm_[k].state.running_mean);
        out.emplace_back("dec" + std::to_string(k) + ".bn.rv", &dec_norm_[k].state.running_var);
    }
    return out;
}

template <typename T>
Discriminator<T>::Discriminator(const GeneratorConfig& config, bool spectral_norm,
                                uint64_t init_seed)
    : config_(config), spectral_norm_(spectral_norm) {
    config_.validate();
    Rng rng(mix_seed(init_seed, 0x64697363ULL));
    const int J = config_.levels();
    const int in_ch = 1 + config_.input_channels;
    auto width = [&](int level) { return std::max(2, config_.width_at_level(level) / 2); };

    for (int k = 0; k <= J; ++k)
        from_image_.push_back(make_conv<T>(rng, width(J - k), in_ch, 1, 1, 0));
    blocks_.push_back(detail::ConvLayer<T>{}); // stage 0 has no down block
    for (int k = 1; k <= J; ++k)
        blocks_.push_back(make_conv<T>(rng, width(J - k + 1), width(J - k), 3, 1, 1));
    head_conv_ = make_conv<T>(rng, width(J), width(J), 4, 1, 0);
    head_out_ = make_conv<T>(rng, 1, width(J), 1, 1, 0);

    if (spectral_norm_) {
        for (auto& layer : from_image_) layer.sn_enabled = true;
        for (size_t k = 1; k < blocks_.size(); ++k) blocks_[k].sn_enabled = true;
        head_conv_.sn_enabled = true;
        head_out_.sn_enabled = true;
    }
}

template <typename T>
TensorPtr<T> Discriminator<T>::forward(const TensorPtr<T>& candidate,
                                       const TensorPtr<T>& conditioning, int stage, double alpha,
                                       bool train) {
    const int J = config_.levels();
    if (stage < 0 || stage > J)
        throw ArgumentError("discriminator stage " + std::to_string(stage) +
                            " is outside the configured range");
    const int res = GeneratorConfig::stage_resolution(stage);
    if (candidate->shape.h != res || candidate->shape.w != res || candidate->shape.c != 1)
        throw ShapeError("discriminator candidate must be (B,1," + std::to_string(res) + "," +
                         std::to_string(res) + "), got " + candidate->shape.str());
    if (conditioning->shape.h != res || conditioning->shape.w != res ||
        conditioning->shape.c != config_.input_channels)
        throw ShapeError("discriminator conditioning shape mismatch: " +
                         conditioning->shape.str());

    TensorPtr<T> x = ops::concat_channels(candidate, conditioning);
    TensorPtr<T> h = ops::leaky_relu(from_image_[stage](x, train));
    if (stage >= 1) {
        h = ops::downsample2x_avg(ops::leaky_relu(blocks_[stage](h, train)));
        if (alpha < 1.0) {
            TensorPtr<T> old =
                ops::leaky_relu(from_image_[stage - 1](ops::downsample2x_avg(x), train));
            h = ops::blend(h, old, static_cast<T>(alpha));
        }
        for (int s = stage - 1; s >= 1; --s)
            h = ops::downsample2x_avg(ops::leaky_relu(blocks_[s](h, train)));
    }
    return head_out_(ops::leaky_relu(head_conv_(h, train)), train);
}

template <typename T>
std::vector<std::pair<std::string, TensorPtr<T>>> Discriminator<T>::params() {
    std::vector<std::pair<std::string, TensorPtr<T>>> out;
    for (size_t k = 0; k < from_image_.size(); ++k)
        push_conv(out, "frgb" + std::to_string(k), from_image_[k]);
    for (size_t k = 1; k < blocks_.size(); ++k)
        push_conv(out, "blk" + std::to_string(k), blocks_[k]);
    push_conv(out, "head0", head_conv_);
    push_conv(out, "head1", head_out_);
    return out;
}

template <typename T>
std::vector<std::pair<std::string, std::vector<T>*>> Discriminator<T>::buffers() {
    std::vector<std::pair<std::string, std::vector<T>*>> out;
    if (!spectral_norm_) return out;
    for (size_t k = 0; k < from_image_.size(); ++k)
        out.emplace_back("frgb" + std::to_string(k) + ".snu", &from_image_[k].sn.u);
    for (size_t k = 1; k < blocks_.size(); ++k)
        out.emplace_back("blk" + std::to_string(k) + ".snu", &blocks_[k].sn.u);
    out.emplace_back("head0.snu", &head_conv_.sn.u);
    out.emplace_back("head1.snu", &head_out_.sn.u);
    return out;
}

template class Generator<float>;
template class Generator<double>;
template class Discriminator<float>;
template class Discriminator<double>;

} // namespace citymorph
