#include "citymorph/ops.hpp"

#include <cmath>

#include "citymorph/kernels.hpp"

namespace citymorph::ops {

using kernels::ConvDims;

namespace {

template <typename T>
bool any_requires(const std::initializer_list<TensorPtr<T>>& ts) {
    for (const auto& t : ts)
        if (t->requires_grad) return true;
    return false;
}

} // namespace

template <typename T>
TensorPtr<T> conv2d(const TensorPtr<T>& input, const TensorPtr<T>& kernel,
                    const TensorPtr<T>& bias, int stride, int padding) {
    if (stride < 1) throw ArgumentError("conv2d stride must be >= 1");
    if (padding < 0) throw ArgumentError("conv2d padding must be >= 0");
    if (kernel->shape.c != input->shape.c)
        throw ShapeError("conv2d channel mismatch: input " + input->shape.str() + " kernel " +
                         kernel->shape.str());
    if (bias->shape.numel() != kernel->shape.n)
        throw ShapeError("conv2d bias size must equal out-channels");

    ConvDims d;
    d.n = input->shape.n;
    d.cin = input->shape.c;
    d.hin = input->shape.h;
    d.win = input->shape.w;
    d.cout = kernel->shape.n;
    d.kh = kernel->shape.h;
    d.kw = kernel->shape.w;
    d.stride = stride;
    d.pad = padding;
    d.hout = (d.hin + 2 * padding - d.kh) / stride + 1;
    d.wout = (d.win + 2 * padding - d.kw) / stride + 1;
    if (d.hout < 1 || d.wout < 1)
        throw ShapeError("conv2d produces an empty output for input " + input->shape.str());

    auto out = make_tensor<T>({d.n, d.cout, d.hout, d.wout});
    kernels::conv2d_forward(input->val.data(), kernel->val.data(), bias->val.data(),
                            out->val.data(), d);
    out->requires_grad = any_requires<T>({input, kernel, bias});
    if (out->requires_grad) {
        out->parents = {input, kernel, bias};
        out->backward_fn = [input, kernel, bias, d](TensorNode<T>& node) {
            if (input->requires_grad)
                kernels::conv2d_backward_input(node.grad.data(), kernel->val.data(),
                                               input->grad.data(), d);
            if (kernel->requires_grad)
                kernels::conv2d_backward_kernel(node.grad.data(), input->val.data(),
                                                kernel->grad.data(), d);
            if (bias->requires_grad)
                kernels::conv2d_backward_bias(node.grad.data(), bias->grad.data(), d);
        };
    }
    return out;
}

template <typename T>
TensorPtr<T> upsample2x(const TensorPtr<T>& input) {
    const Shape s = input->shape;
    auto out = make_tensor<T>({s.n, s.c, 2 * s.h, 2 * s.w});
    kernels::upsample2x_forward(input->val.data(), out->val.data(), s.n, s.c, s.h, s.w);
    out->requires_grad = input->requires_grad;
    if (out->requires_grad) {
        out->parents = {input};
        out->backward_fn = [input, s](TensorNode<T>& node) {
            kernels::upsample2x_backward(node.grad.data(), input->grad.data(), s.n, s.c, s.h,
                                         s.w);
        };
    }
    return out;
}

template <typename T>
TensorPtr<T> downsample2x_avg(const TensorPtr<T>& input) {
    const Shape s = input->shape;
    if (s.h % 2 != 0 || s.w % 2 != 0)
        throw ShapeError("downsample2x_avg requires even spatial dims, got " + s.str());
    auto out = make_tensor<T>({s.n, s.c, s.h / 2, s.w / 2});
    kernels::downsample2x_forward(input->val.data(), out->val.data(), s.n, s.c, s.h, s.w);
    out->requires_grad = input->requires_grad;
    if (out->requires_grad) {
        out->parents = {input};
        out->backward_fn = [input, s](TensorNode<T>& node) {
            kernels::downsample2x_backward(node.grad.data(), input->grad.data(), s.n, s.c, s.h,
                                           s.w);
        };
    }
    return out;
}

namespace {

template <typename T, typename F, typename G>
TensorPtr<T> elementwise(const TensorPtr<T>& input, F fwd, G dval) {
    auto out = make_tensor<T>(input->shape);
    const size_t count = input->val.size();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < static_cast<int64_t>(count); ++i) out->val[i] = fwd(input->val[i]);
    out->requires_grad = input->requires_grad;
    if (out->requires_grad) {
        out->parents = {input};
        out->backward_fn = [input, dval](TensorNode<T>& node) {
            const size_t count = node.grad.size();
#pragma omp parallel for schedule(static)
            for (int64_t i = 0; i < static_cast<int64_t>(count); ++i)
                input->grad[i] += node.grad[i] * dval(input->val[i], node.val[i]);
        };
    }
    return out;
}

} // namespace

template <typename T>
TensorPtr<T> relu(const TensorPtr<T>& input) {
    return elementwise<T>(
        input, [](T x) { return x > T(0) ? x : T(0); },
        [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <typename T>
TensorPtr<T> leaky_relu(const TensorPtr<T>& input, T slope) {
    return elementwise<T>(
        input, [slope](T x) { return x > T(0) ? x : slope * x; },
        [slope](T x, T) { return x > T(0) ? T(1) : slope; });
}

template <typename T>
TensorPtr<T> sigmoid(const TensorPtr<T>& input) {
    return elementwise<T>(
        input, [](T x) { return T(1) / (T(1) + std::exp(-x)); },
        [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
TensorPtr<T> concat_channels(const TensorPtr<T>& a, const TensorPtr<T>& b) {
    const Shape sa = a->shape, sb = b->shape;
    if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w)
        throw ShapeError("concat_channels mismatch: " + sa.str() + " vs " + sb.str());
    auto out = make_tensor<T>({sa.n, sa.c + sb.c, sa.h, sa.w});
    const int64_t plane = static_cast<int64_t>(sa.h) * sa.w;
    for (int n = 0; n < sa.n; ++n) {
        std::copy(a->val.begin() + n * sa.c * plane, a->val.begin() + (n + 1) * sa.c * plane,
                  out->val.begin() + static_cast<int64_t>(n) * (sa.c + sb.c) * plane);
        std::copy(b->val.begin() + n * sb.c * plane, b->val.begin() + (n + 1) * sb.c * plane,
                  out->val.begin() + (static_cast<int64_t>(n) * (sa.c + sb.c) + sa.c) * plane);
    }
    out->requires_grad = any_requires<T>({a, b});
    if (out->requires_grad) {
        out->parents = {a, b};
        out->backward_fn = [a, b, sa, sb, plane](TensorNode<T>& node) {
            for (int n = 0; n < sa.n; ++n) {
                const int64_t base = static_cast<int64_t>(n) * (sa.c + sb.c) * plane;
                if (a->requires_grad)
                    for (int64_t i = 0; i < sa.c * plane; ++i)
                        a->grad[n * sa.c * plane + i] += node.grad[base + i];
                if (b->requires_grad)
                    for (int64_t i = 0; i < sb.c * plane; ++i)
                        b->grad[n * sb.c * plane + i] += node.grad[base + sa.c * plane + i];
            }
        };
    }
    return out;
}

template <typename T>
TensorPtr<T> blend(const TensorPtr<T>& a, const TensorPtr<T>& b, T alpha) {
    if (a->shape != b->shape)
        throw ShapeError("blend shape mismatch: " + a->shape.str() + " vs " + b->shape.str());
    auto out = make_tensor<T>(a->shape);
    for (size_t i = 0; i < out->val.size(); ++i)
        out->val[i] = alpha * a->val[i] + (T(1) - alpha) * b->val[i];
    out->requires_grad = any_requires<T>({a, b});
    if (out->requires_grad) {
        out->parents = {a, b};
        out->backward_fn = [a, b, alpha](TensorNode<T>& node) {
            for (size_t i = 0; i < node.grad.size(); ++i) {
                if (a->requires_grad) a->grad[i] += alpha * node.grad[i];
                if (b->requires_grad) b->grad[i] += (T(1) - alpha) * node.grad[i];
            }
        };
    }
    return out;
}

template <typename T>
TensorPtr<T> batch_norm(const TensorPtr<T>& input, const TensorPtr<T>& gain,
                        const TensorPtr<T>& shift, BatchNormState<T>& state, bool train) {
    const Shape s = input->shape;
    const int c = s.c;
    if (gain->shape.numel() != c || shift->shape.numel() != c)
        throw ShapeError("batch_norm gain/shift must have one value per channel");
    if (static_cast<int>(state.running_mean.size()) != c)
        throw ShapeError("batch_norm state channel mismatch");
    if (train && s.n < 2) throw ArgumentError("batch_norm train mode needs batch >= 2");

    const T eps = T(1e-5);
    std::vector<T> mean(c), var(c);
    if (train) {
        kernels::batch_stats(input->val.data(), mean.data(), var.data(), s.n, c, s.h, s.w);
        for (int ch = 0; ch < c; ++ch) {
            state.running_mean[ch] = T(0.9) * state.running_mean[ch] + T(0.1) * mean[ch];
            state.running_var[ch] = T(0.9) * state.running_var[ch] + T(0.1) * var[ch];
        }
    } else {
        mean = state.running_mean;
        var = state.running_var;
    }

    auto out = make_tensor<T>(s);
    const int64_t plane = static_cast<int64_t>(s.h) * s.w;
    std::vector<T> inv_std(c);
    for (int ch = 0; ch < c; ++ch) inv_std[ch] = T(1) / std::sqrt(var[ch] + eps);
#pragma omp parallel for collapse(2) schedule(static)
    for (int b = 0; b < s.n; ++b)
        for (int ch = 0; ch < c; ++ch) {
            const int64_t base = (static_cast<int64_t>(b) * c + ch) * plane;
            for (int64_t i = 0; i < plane; ++i)
                out->val[base + i] =
                    gain->val[ch] * (input->val[base + i] - mean[ch]) * inv_std[ch] +
                    shift->val[ch];
        }

    out->requires_grad = any_requires<T>({input, gain, shift});
    if (out->requires_grad) {
        out->parents = {input, gain, shift};
        out->backward_fn = [input, gain, shift, s, plane, mean, inv_std, train,
                            c](TensorNode<T>& node) {
            const T count = T(s.n) * T(plane);
#pragma omp parallel for schedule(static)
            for (int ch = 0; ch < c; ++ch) {
                // Channel-wise reductions of gy and gy*xhat.
                T sum_gy = T(0), sum_gy_xhat = T(0);
                for (int b = 0; b < s.n; ++b) {
                    const int64_t base = (static_cast<int64_t>(b) * c + ch) * plane;
                    for (int64_t i = 0; i < plane; ++i) {
                        const T xhat = (input->val[base + i] - mean[ch]) * inv_std[ch];
                        sum_gy += node.grad[base + i];
                        sum_gy_xhat += node.grad[base + i] * xhat;
                    }
                }
                if (gain->requires_grad) gain->grad[ch] += sum_gy_xhat;
                if (shift->requires_grad) shift->grad[ch] += sum_gy;
                if (!input->requires_grad) continue;
                for (int b = 0; b < s.n; ++b) {
                    const int64_t base = (static_cast<int64_t>(b) * c + ch) * plane;
                    for (int64_t i = 0; i < plane; ++i) {
                        const T xhat = (input->val[base + i] - mean[ch]) * inv_std[ch];
                        T g = node.grad[base + i];
                        if (train) g -= sum_gy / count + xhat * sum_gy_xhat / count;
                        input->grad[base + i] += gain->val[ch] * inv_std[ch] * g;
                    }
                }
            }
        };
    }
    return out;
}

template <typename T>
TensorPtr<T> spectral_norm(const TensorPtr<T>& kernel, SpectralState<T>& state, bool update) {
    const int rows = kernel->shape.n;
    const int64_t cols = kernel->shape.numel() / rows;
    const T tiny = T(1e-12);
    if (static_cast<int>(state.u.size()) != rows) {
        // Deterministic fixed start vector; power iteration washes it out.
        state.u.assign(rows, T(0));
        state.u[0] = T(1);
    }

    auto mat = [&](int r, int64_t cidx) { return kernel->val[r * cols + cidx]; };
    std::vector<T> v(cols, T(0));
    std::vector<T> u = state.u;
    // v = normalize(W^T u)
    for (int r = 0; r < rows; ++r)
        for (int64_t cidx = 0; cidx < cols; ++cidx) v[cidx] += mat(r, cidx) * u[r];
    T vnorm = T(0);
    for (T x : v) vnorm += x * x;
    vnorm = std::sqrt(vnorm);
    if (vnorm > tiny)
        for (T& x : v) x /= vnorm;
    // u' = normalize(W v)
    std::vector<T> wu(rows, T(0));
    for (int r = 0; r < rows; ++r)
        for (int64_t cidx = 0; cidx < cols; ++cidx) wu[r] += mat(r, cidx) * v[cidx];
    T unorm = T(0);
    for (T x : wu) unorm += x * x;
    unorm = std::sqrt(unorm);
    if (unorm > tiny)
        for (T& x : wu) x /= unorm;
    // sigma = u'^T W v
    T sigma = T(0);
    for (int r = 0; r < rows; ++r)
        for (int64_t cidx = 0; cidx < cols; ++cidx) sigma += wu[r] * mat(r, cidx) * v[cidx];
    if (sigma < T(1e-8)) sigma = T(1e-8);
    if (update) {
        state.u = wu;
        state.sigma = sigma;
    }

    auto out = make_tensor<T>(kernel->shape);
    for (size_t i = 0; i < out->val.size(); ++i) out->val[i] = kernel->val[i] / sigma;
    out->requires_grad = kernel->requires_grad;
    if (out->requires_grad) {
        out->parents = {kernel};
        // d(W/sigma)/dW with sigma = u^T W v and u, v held constant:
        //   gW = gOut/sigma - (u v^T) * sum(gOut . W) / sigma^2
        out->backward_fn = [kernel, wu, v, sigma, rows, cols](TensorNode<T>& node) {
            T dot = T(0);
            for (size_t i = 0; i < node.grad.size(); ++i) dot += node.grad[i] * kernel->val[i];
            for (int r = 0; r < rows; ++r)
                for (int64_t cidx = 0; cidx < cols; ++cidx)
                    kernel->grad[r * cols + cidx] +=
                        node.grad[r * cols + cidx] / sigma -
                        wu[r] * v[cidx] * dot / (sigma * sigma);
        };
    }
    return out;
}

template <typename T>
TensorPtr<T> l1_loss(const TensorPtr<T>& generated, const TensorPtr<T>& label) {
    if (generated->shape != label->shape)
        throw ShapeError("l1_loss shape mismatch: " + generated->shape.str() + " vs " +
                         label->shape.str());
    const T count = T(generated->val.size());
    T acc = T(0);
    for (size_t i = 0; i < generated->val.size(); ++i)
        acc += std::abs(generated->val[i] - label->val[i]);
    auto out = make_tensor<T>({1, 1, 1, 1}, {acc / count});
    out->requires_grad = any_requires<T>({generated, label});
    if (out->requires_grad) {
        out->parents = {generated, label};
        out->backward_fn = [generated, label, count](TensorNode<T>& node) {
            const T g = node.grad[0] / count;
            for (size_t i = 0; i < generated->val.size(); ++i) {
                const T diff = generated->val[i] - label->val[i];
                const T sgn = diff > T(0) ? T(1) : (diff < T(0) ? T(-1) : T(0));
                if (generated->requires_grad) generated->grad[i] += g * sgn;
                if (label->requires_grad) label->grad[i] -= g * sgn;
            }
        };
    }
    return out;
}

template <typename T>
TensorPtr<T> geo_loss(const TensorPtr<T>& generated, const TensorPtr<T>& water) {
    if (generated->shape != water->shape)
        throw ShapeError("geo_loss shape mismatch: " + generated->shape.str() + " vs " +
                         water->shape.str());
    for (T v : water->val)
        if (v != T(0) && v != T(1)) throw ArgumentError("geo_loss water mask must be binary");
    const T count = T(generated->val.size());
    T acc = T(0);
    for (size_t i = 0; i < generated->val.size(); ++i) acc += water->val[i] * generated->val[i];
    auto out = make_tensor<T>({1, 1, 1, 1}, {acc / count});
    out->requires_grad = generated->requires_grad;
    if (out->requires_grad) {
        out->parents = {generated};
        out->backward_fn = [generated, water, count](TensorNode<T>& node) {
            const T g = node.grad[0] / count;
            for (size_t i = 0; i < generated->val.size(); ++i)
                generated->grad[i] += g * water->val[i];
        };
    }
    return out;
}

template <typename T>
TensorPtr<T> lsgan_d_loss(const TensorPtr<T>& score_real, const TensorPtr<T>& score_fake) {
    if (score_real->val.empty() || score_fake->val.empty())
        throw ArgumentError("lsgan_d_loss needs non-empty score batches");
    const T nr = T(score_real->val.size());
    const T nf = T(score_fake->val.size());
    T acc = T(0);
    for (T s : score_real->val) acc += (s - T(1)) * (s - T(1)) / (T(2) * nr);
    for (T s : score_fake->val) acc += s * s / (T(2) * nf);
    auto out = make_tensor<T>({1, 1, 1, 1}, {acc});
    out->requires_grad = any_requires<T>({score_real, score_fake});
    if (out->requires_grad) {
        out->parents = {score_real, score_fake};
        out->backward_fn = [score_real, score_fake, nr, nf](TensorNode<T>& node) {
            const T g = node.grad[0];
            if (score_real->requires_grad)
                for (size_t i = 0; i < score_real->val.size(); ++i)
                    score_real->grad[i] += g * (score_real->val[i] - T(1)) / nr;
            if (score_fake->requires_grad)
                for (size_t i = 0; i < score_fake->val.size(); ++i)
                    score_fake->grad[i] += g * score_fake->val[i] / nf;
        };
    }
    return out;
}

template <typename T>
TensorPtr<T> lsgan_g_loss(const TensorPtr<T>& score_fake) {
    if (score_fake->val.empty()) throw ArgumentError("lsgan_g_loss needs a non-empty batch");
    const T n = T(score_fake->val.size());
    T acc = T(0);
    for (T s : score_fake->val) acc += (s - T(1)) * (s - T(1)) / (T(2) * n);
    auto out = make_tensor<T>({1, 1, 1, 1}, {acc});
    out->requires_grad = score_fake->requires_grad;
    if (out->requires_grad) {
        out->parents = {score_fake};
        out->backward_fn = [score_fake, n](TensorNode<T>& node) {
            const T g = node.grad[0];
            for (size_t i = 0; i < score_fake->val.size(); ++i)
                score_fake->grad[i] += g * (score_fake->val[i] - T(1)) / n;
        };
    }
    return out;
}

template <typename T>
TensorPtr<T> add_scaled(const std::vector<std::pair<TensorPtr<T>, T>>& terms) {
    if (terms.empty()) throw ArgumentError("add_scaled needs at least one term");
    T acc = T(0);
    bool requires = false;
    for (const auto& [t, coeff] : terms) {
        acc += coeff * t->scalar();
        requires = requires || t->requires_grad;
    }
    auto out = make_tensor<T>({1, 1, 1, 1}, {acc});
    out->requires_grad = requires;
    if (requires) {
        for (const auto& [t, coeff] : terms) out->parents.push_back(t);
        std::vector<T> coeffs;
        std::vector<TensorPtr<T>> ts;
        for (const auto& [t, coeff] : terms) {
            ts.push_back(t);
            coeffs.push_back(coeff);
        }
        out->backward_fn = [ts, coeffs](TensorNode<T>& node) {
            for (size_t i = 0; i < ts.size(); ++i)
                if (ts[i]->requires_grad) ts[i]->grad[0] += coeffs[i] * node.grad[0];
        };
    }
    return out;
}

#define CITYMORPH_INSTANTIATE_OPS(T)                                                           \
    template TensorPtr<T> conv2d<T>(const TensorPtr<T>&, const TensorPtr<T>&,                 \
                                    const TensorPtr<T>&, int, int);                           \
    template TensorPtr<T> upsample2x<T>(const TensorPtr<T>&);                                 \
    template TensorPtr<T> downsample2x_avg<T>(const TensorPtr<T>&);                           \
    template TensorPtr<T> relu<T>(const TensorPtr<T>&);                                       \
    template TensorPtr<T> leaky_relu<T>(const TensorPtr<T>&, T);                              \
    template TensorPtr<T> sigmoid<T>(const TensorPtr<T>&);                                    \
    template TensorPtr<T> concat_channels<T>(const TensorPtr<T>&, const TensorPtr<T>&);       \
    template TensorPtr<T> blend<T>(const TensorPtr<T>&, const TensorPtr<T>&, T);              \
    template TensorPtr<T> batch_norm<T>(const TensorPtr<T>&, const TensorPtr<T>&,             \
                                        const TensorPtr<T>&, BatchNormState<T>&, bool);       \
    template TensorPtr<T> spectral_norm<T>(const TensorPtr<T>&, SpectralState<T>&, bool);     \
    template TensorPtr<T> l1_loss<T>(const TensorPtr<T>&, const TensorPtr<T>&);               \
    template TensorPtr<T> geo_loss<T>(const TensorPtr<T>&, const TensorPtr<T>&);              \
    template TensorPtr<T> lsgan_d_loss<T>(const TensorPtr<T>&, const TensorPtr<T>&);          \
    template TensorPtr<T> lsgan_g_loss<T>(const TensorPtr<T>&);                               \
    template TensorPtr<T> add_scaled<T>(const std::vector<std::pair<TensorPtr<T>, T>>&);

CITYMORPH_INSTANTIATE_OPS(float)
CITYMORPH_INSTANTIATE_OPS(double)

#undef CITYMORPH_INSTANTIATE_OPS

} // namespace citymorph::ops
