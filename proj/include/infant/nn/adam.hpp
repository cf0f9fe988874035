#pragma once

#include <cstdint>

#include "infant/nn/tensor.hpp"

namespace infant::nn {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double max_grad_norm = 0.0;  // 0 disables global-norm clipping

    void validate() const;
};

template <class T>
struct AdamState {
    AdamConfig cfg;
    std::int64_t step = 0;
    ParamSet<T> m, v;

    static AdamState init(const ParamSet<T>& like, AdamConfig cfg);
};

// Global L2 norm, accumulated in double in parameter order.
template <class T>
double grad_norm(const ParamSet<T>& grads);

// One bias-corrected Adam step. Throws NumericError on non-finite gradients.
template <class T>
void adam_update(AdamState<T>& state, ParamSet<T>& params, const ParamSet<T>& grads);

}  // namespace infant::nn
