#include "citymorph/optim.hpp"

#include <cmath>

namespace citymorph {

template <typename T>
void adam_step(const std::vector<std::pair<std::string, TensorPtr<T>>>& params,
               AdamState<T>& state, T lr) {
    state.step += 1;
    const T bc1 = T(1) - std::pow(state.beta1, T(state.step));
    const T bc2 = T(1) - std::pow(state.beta2, T(state.step));
    for (const auto& [name, p] : params) {
        auto& [m, v] = state.moments[name];
        if (m.size() != p->val.size()) {
            m.assign(p->val.size(), T(0));
            v.assign(p->val.size(), T(0));
        }
        for (size_t i = 0; i < p->val.size(); ++i) {
            const T g = p->grad[i];
            m[i] = state.beta1 * m[i] + (T(1) - state.beta1) * g;
            v[i] = state.beta2 * v[i] + (T(1) - state.beta2) * g * g;
            const T mhat = m[i] / bc1;
            const T vhat = v[i] / bc2;
            p->val[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

template void adam_step<float>(const std::vector<std::pair<std::string, TensorPtr<float>>>&,
                               AdamState<float>&, float);
template void adam_step<double>(const std::vector<std::pair<std::string, TensorPtr<double>>>&,
                                AdamState<double>&, double);

double cosine_warm_restart_lr(int64_t iter, double base_lr, int64_t period0, int period_mult) {
    if (period0 < 1) throw ArgumentError("scheduler period0 must be >= 1");
    int64_t start = 0;
    int64_t period = period0;
    while (iter >= start + period) {
        start += period;
        period *= period_mult;
    }
    const double t = static_cast<double>(iter - start);
    return base_lr * (1.0 + std::cos(M_PI * t / static_cast<double>(period))) / 2.0;
}

} // namespace citymorph
