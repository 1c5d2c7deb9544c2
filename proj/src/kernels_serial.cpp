#include "citymorph/kernels.hpp"

// Plain single-threaded loops, structured the same way as the OpenMP kernels
// so the two paths must agree bit-for-bit.

namespace citymorph::kernels::serial {

template <typename T>
void conv2d_forward(const T* x, const T* k, const T* bias, T* y, const ConvDims& d) {
    for (int b = 0; b < d.n; ++b) {
        for (int oc = 0; oc < d.cout; ++oc) {
            const T bias_v = bias ? bias[oc] : T(0);
            T* yp = y + (static_cast<int64_t>(b) * d.cout + oc) * d.hout * d.wout;
            for (int oh = 0; oh < d.hout; ++oh) {
                for (int ow = 0; ow < d.wout; ++ow) {
                    T acc = bias_v;
                    for (int ic = 0; ic < d.cin; ++ic) {
                        const T* xp = x + (static_cast<int64_t>(b) * d.cin + ic) * d.hin * d.win;
                        const T* kp =
                            k + ((static_cast<int64_t>(oc) * d.cin + ic) * d.kh) * d.kw;
                        for (int kh = 0; kh < d.kh; ++kh) {
                            const int ih = oh * d.stride + kh - d.pad;
                            if (ih < 0 || ih >= d.hin) continue;
                            for (int kw = 0; kw < d.kw; ++kw) {
                                const int iw = ow * d.stride + kw - d.pad;
                                if (iw < 0 || iw >= d.win) continue;
                                acc += xp[ih * d.win + iw] * kp[kh * d.kw + kw];
                            }
                        }
                    }
                    yp[oh * d.wout + ow] = acc;
                }
            }
        }
    }
}

template <typename T>
void conv2d_backward_input(const T* gy, const T* k, T* gx, const ConvDims& d) {
    for (int b = 0; b < d.n; ++b) {
        for (int ic = 0; ic < d.cin; ++ic) {
            T* gxp = gx + (static_cast<int64_t>(b) * d.cin + ic) * d.hin * d.win;
            for (int ih = 0; ih < d.hin; ++ih) {
                for (int iw = 0; iw < d.win; ++iw) {
                    T acc = T(0);
                    for (int oc = 0; oc < d.cout; ++oc) {
                        const T* gyp =
                            gy + (static_cast<int64_t>(b) * d.cout + oc) * d.hout * d.wout;
                        const T* kp =
                            k + ((static_cast<int64_t>(oc) * d.cin + ic) * d.kh) * d.kw;
                        for (int kh = 0; kh < d.kh; ++kh) {
                            const int num_h = ih + d.pad - kh;
                            if (num_h < 0 || num_h % d.stride != 0) continue;
                            const int oh = num_h / d.stride;
                            if (oh >= d.hout) continue;
                            for (int kw = 0; kw < d.kw; ++kw) {
                                const int num_w = iw + d.pad - kw;
                                if (num_w < 0 || num_w % d.stride != 0) continue;
                                const int ow = num_w / d.stride;
                                if (ow >= d.wout) continue;
                                acc += gyp[oh * d.wout + ow] * kp[kh * d.kw + kw];
                            }
                        }
                    }
                    gxp[ih * d.win + iw] += acc;
                }
            }
        }
    }
}

template <typename T>
void conv2d_backward_kernel(const T* gy, const T* x, T* gk, const ConvDims& d) {
    for (int oc = 0; oc < d.cout; ++oc) {
        for (int ic = 0; ic < d.cin; ++ic) {
            T* gkp = gk + ((static_cast<int64_t>(oc) * d.cin + ic) * d.kh) * d.kw;
            for (int kh = 0; kh < d.kh; ++kh) {
                for (int kw = 0; kw < d.kw; ++kw) {
                    T acc = T(0);
                    for (int b = 0; b < d.n; ++b) {
                        const T* gyp =
                            gy + (static_cast<int64_t>(b) * d.cout + oc) * d.hout * d.wout;
                        const T* xp =
                            x + (static_cast<int64_t>(b) * d.cin + ic) * d.hin * d.win;
                        for (int oh = 0; oh < d.hout; ++oh) {
                            const int ih = oh * d.stride + kh - d.pad;
                            if (ih < 0 || ih >= d.hin) continue;
                            for (int ow = 0; ow < d.wout; ++ow) {
                                const int iw = ow * d.stride + kw - d.pad;
                                if (iw < 0 || iw >= d.win) continue;
                                acc += gyp[oh * d.wout + ow] * xp[ih * d.win + iw];
                            }
                        }
                    }
                    gkp[kh * d.kw + kw] += acc;
                }
            }
        }
    }
}

template <typename T>
void conv2d_backward_bias(const T* gy, T* gb, const ConvDims& d) {
    for (int oc = 0; oc < d.cout; ++oc) {
        T acc = T(0);
        for (int b = 0; b < d.n; ++b) {
            const T* gyp = gy + (static_cast<int64_t>(b) * d.cout + oc) * d.hout * d.wout;
            for (int i = 0; i < d.hout * d.wout; ++i) acc += gyp[i];
        }
        gb[oc] += acc;
    }
}

template <typename T>
void upsample2x_forward(const T* x, T* y, int n, int c, int h, int w) {
    for (int b = 0; b < n; ++b) {
        for (int ch = 0; ch < c; ++ch) {
            const T* xp = x + (static_cast<int64_t>(b) * c + ch) * h * w;
            T* yp = y + (static_cast<int64_t>(b) * c + ch) * (2 * h) * (2 * w);
            for (int i = 0; i < 2 * h; ++i)
                for (int j = 0; j < 2 * w; ++j) yp[i * 2 * w + j] = xp[(i / 2) * w + j / 2];
        }
    }
}

template <typename T>
void upsample2x_backward(const T* gy, T* gx, int n, int c, int h, int w) {
    for (int b = 0; b < n; ++b) {
        for (int ch = 0; ch < c; ++ch) {
            const T* gyp = gy + (static_cast<int64_t>(b) * c + ch) * (2 * h) * (2 * w);
            T* gxp = gx + (static_cast<int64_t>(b) * c + ch) * h * w;
            for (int i = 0; i < h; ++i)
                for (int j = 0; j < w; ++j)
                    gxp[i * w + j] += gyp[(2 * i) * 2 * w + 2 * j] +
                                      gyp[(2 * i) * 2 * w + 2 * j + 1] +
                                      gyp[(2 * i + 1) * 2 * w + 2 * j] +
                                      gyp[(2 * i + 1) * 2 * w + 2 * j + 1];
        }
    }
}

template <typename T>
void downsample2x_forward(const T* x, T* y, int n, int c, int h, int w) {
    for (int b = 0; b < n; ++b) {
        for (int ch = 0; ch < c; ++ch) {
            const T* xp = x + (static_cast<int64_t>(b) * c + ch) * h * w;
            T* yp = y + (static_cast<int64_t>(b) * c + ch) * (h / 2) * (w / 2);
            for (int i = 0; i < h / 2; ++i)
                for (int j = 0; j < w / 2; ++j)
                    yp[i * (w / 2) + j] = (xp[(2 * i) * w + 2 * j] + xp[(2 * i) * w + 2 * j + 1] +
                                           xp[(2 * i + 1) * w + 2 * j] +
                                           xp[(2 * i + 1) * w + 2 * j + 1]) /
                                          T(4);
        }
    }
}

template <typename T>
void downsample2x_backward(const T* gy, T* gx, int n, int c, int h, int w) {
    for (int b = 0; b < n; ++b) {
        for (int ch = 0; ch < c; ++ch) {
            const T* gyp = gy + (static_cast<int64_t>(b) * c + ch) * (h / 2) * (w / 2);
            T* gxp = gx + (static_cast<int64_t>(b) * c + ch) * h * w;
            for (int i = 0; i < h; ++i)
                for (int j = 0; j < w; ++j)
                    gxp[i * w + j] += gyp[(i / 2) * (w / 2) + j / 2] / T(4);
        }
    }
}

template <typename T>
void batch_stats(const T* x, T* mean, T* var, int n, int c, int h, int w) {
    for (int ch = 0; ch < c; ++ch) {
        T sum = T(0), sq = T(0);
        for (int b = 0; b < n; ++b) {
            const T* xp = x + (static_cast<int64_t>(b) * c + ch) * h * w;
            for (int i = 0; i < h * w; ++i) {
                sum += xp[i];
                sq += xp[i] * xp[i];
            }
        }
        const T count = T(n) * T(h) * T(w);
        mean[ch] = sum / count;
        var[ch] = sq / count - mean[ch] * mean[ch];
        if (var[ch] < T(0)) var[ch] = T(0);
    }
}

#define CITYMORPH_INSTANTIATE_SERIAL(T)                                                      \
    template void conv2d_forward<T>(const T*, const T*, const T*, T*, const ConvDims&);      \
    template void conv2d_backward_input<T>(const T*, const T*, T*, const ConvDims&);         \
    template void conv2d_backward_kernel<T>(const T*, const T*, T*, const ConvDims&);        \
    template void conv2d_backward_bias<T>(const T*, T*, const ConvDims&);                    \
    template void upsample2x_forward<T>(const T*, T*, int, int, int, int);                   \
    template void upsample2x_backward<T>(const T*, T*, int, int, int, int);                  \
    template void downsample2x_forward<T>(const T*, T*, int, int, int, int);                 \
    template void downsample2x_backward<T>(const T*, T*, int, int, int, int);                \
    template void batch_stats<T>(const T*, T*, T*, int, int, int, int);

CITYMORPH_INSTANTIATE_SERIAL(float)
CITYMORPH_INSTANTIATE_SERIAL(double)

#undef CITYMORPH_INSTANTIATE_SERIAL

} // namespace citymorph::kernels::serial
