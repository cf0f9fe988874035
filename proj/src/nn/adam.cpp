#include "infant/nn/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace infant::nn {

void AdamConfig::validate() const {
    if (!(lr > 0.0)) throw std::invalid_argument("adam: lr must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
        throw std::invalid_argument("adam: betas must be in [0, 1)");
    if (!(eps > 0.0)) throw std::invalid_argument("adam: eps must be > 0");
    if (max_grad_norm < 0.0) throw std::invalid_argument("adam: max_grad_norm must be >= 0");
}

template <class T>
AdamState<T> AdamState<T>::init(const ParamSet<T>& like, AdamConfig cfg) {
    cfg.validate();
    return AdamState{cfg, 0, like.zeros_like(), like.zeros_like()};
}

template <class T>
double grad_norm(const ParamSet<T>& grads) {
    double s = 0.0;
    for (int i = 0; i < grads.size(); ++i)
        for (T x : grads[i].data) s += static_cast<double>(x) * static_cast<double>(x);
    return std::sqrt(s);
}

template <class T>
void adam_update(AdamState<T>& st, ParamSet<T>& params, const ParamSet<T>& grads) {
    if (params.size() != grads.size() || params.size() != st.m.size())
        throw std::invalid_argument("adam_update: parameter count mismatch");
    if (!grads.all_finite()) throw NumericError("adam_update: non-finite gradient");
    double clip = 1.0;
    if (st.cfg.max_grad_norm > 0.0) {
        const double n = grad_norm(grads);
        if (n > st.cfg.max_grad_norm) clip = st.cfg.max_grad_norm / n;
    }
    ++st.step;
    const double b1 = st.cfg.beta1, b2 = st.cfg.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(st.step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(st.step));
    for (int i = 0; i < params.size(); ++i) {
        if (!params[i].same_shape(grads[i])) throw std::invalid_argument("adam_update: shape mismatch at " + params.name(i));
        auto& p = params[i].data;
        auto& m = st.m[i].data;
        auto& v = st.v[i].data;
        const auto& g = grads[i].data;
        for (std::size_t k = 0; k < p.size(); ++k) {
            const double gk = static_cast<double>(g[k]) * clip;
            const double mk = b1 * m[k] + (1.0 - b1) * gk;
            const double vk = b2 * v[k] + (1.0 - b2) * gk * gk;
            m[k] = static_cast<T>(mk);
            v[k] = static_cast<T>(vk);
            p[k] = static_cast<T>(p[k] - st.cfg.lr * (mk / c1) / (std::sqrt(vk / c2) + st.cfg.eps));
        }
    }
}

template struct AdamState<float>;
template struct AdamState<double>;
template double grad_norm<float>(const ParamSet<float>&);
template double grad_norm<double>(const ParamSet<double>&);
template void adam_update<float>(AdamState<float>&, ParamSet<float>&, const ParamSet<float>&);
template void adam_update<double>(AdamState<double>&, ParamSet<double>&, const ParamSet<double>&);

}  // namespace infant::nn
