#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "citymorph/tensor.hpp"

namespace citymorph {

// Adam with the b1=0.5, b2=0.99 setting used for both networks.
template <typename T>
struct AdamState {
    T beta1 = T(0.5);
    T beta2 = T(0.99);
    T eps = T(1e-8);
    int64_t step = 0;
    // name -> (first moment, second moment), dimension-matched to the param
    std::map<std::string, std::pair<std::vector<T>, std::vector<T>>> moments;
};

template <typename T>
void adam_step(const std::vector<std::pair<std::string, TensorPtr<T>>>& params,
               AdamState<T>& state, T lr);

// Cosine annealing with warm restarts: within a cycle of length T_i,
// lr = base*(1+cos(pi*t/T_i))/2; cycle lengths grow by period_mult.
double cosine_warm_restart_lr(int64_t iter, double base_lr, int64_t period0,
                              int period_mult = 2);

} // namespace citymorph
