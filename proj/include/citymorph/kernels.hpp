#pragma once

#include <cstdint>

namespace citymorph::kernels {

struct ConvDims {
    int n = 1;
    int cin = 1, hin = 1, win = 1;
    int cout = 1, kh = 1, kw = 1;
    int hout = 1, wout = 1;
    int stride = 1, pad = 0;
};

// OpenMP kernels. Every loop is gather-style: each output element is owned by
// exactly one thread and its accumulation order is fixed, so results are
// bit-identical for any thread count. Backward kernels accumulate (+=).
template <typename T>
void conv2d_forward(const T* x, const T* k, const T* bias, T* y, const ConvDims& d);
template <typename T>
void conv2d_backward_input(const T* gy, const T* k, T* gx, const ConvDims& d);
template <typename T>
void conv2d_backward_kernel(const T* gy, const T* x, T* gk, const ConvDims& d);
template <typename T>
void conv2d_backward_bias(const T* gy, T* gb, const ConvDims& d);

template <typename T>
void upsample2x_forward(const T* x, T* y, int n, int c, int h, int w);
template <typename T>
void upsample2x_backward(const T* gy, T* gx, int n, int c, int h, int w);

template <typename T>
void downsample2x_forward(const T* x, T* y, int n, int c, int h, int w);
template <typename T>
void downsample2x_backward(const T* gy, T* gx, int n, int c, int h, int w);

// Per-channel batch statistics over (n, h, w); mean and biased variance.
template <typename T>
void batch_stats(const T* x, T* mean, T* var, int n, int c, int h, int w);

// Serial reference implementations, kept for correctness tests and the
// kernel benchmark.
namespace serial {

template <typename T>
void conv2d_forward(const T* x, const T* k, const T* bias, T* y, const ConvDims& d);
template <typename T>
void conv2d_backward_input(const T* gy, const T* k, T* gx, const ConvDims& d);
template <typename T>
void conv2d_backward_kernel(const T* gy, const T* x, T* gk, const ConvDims& d);
template <typename T>
void conv2d_backward_bias(const T* gy, T* gb, const ConvDims& d);

template <typename T>
void upsample2x_forward(const T* x, T* y, int n, int c, int h, int w);
template <typename T>
void upsample2x_backward(const T* gy, T* gx, int n, int c, int h, int w);

template <typename T>
void downsample2x_forward(const T* x, T* y, int n, int c, int h, int w);
template <typename T>
void downsample2x_backward(const T* gy, T* gx, int n, int c, int h, int w);

template <typename T>
void batch_stats(const T* x, T* mean, T* var, int n, int c, int h, int w);

} // namespace serial

} // namespace citymorph::kernels
