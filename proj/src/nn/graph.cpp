#include "infant/nn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace infant::nn {

namespace {

void shape_error(const char* op, const std::string& what) {
    throw std::invalid_argument(std::string(op) + ": " + what);
}

template <class T>
T sigm(T x) {
    return T(1) / (T(1) + std::exp(-x));
}

}  // namespace

template <class T>
Tensor<T>& Graph<T>::grad_ref(int id) {
    Node& n = nodes_[id];
    if (n.grad.empty() && !val(id).empty()) n.grad = Tensor<T>(val(id).rows, val(id).cols);
    return n.grad;
}

template <class T>
Var Graph<T>::push(const char* op, Tensor<T> value, std::array<int, 3> in, std::function<void(Graph&, int)> back) {
    if (!value.all_finite()) throw NumericError(std::string("non-finite output from op '") + op + "'");
    Node n;
    n.value = std::move(value);
    n.op = op;
    n.in = in;
    if (record_) {
        for (int i : in)
            if (i >= 0 && nodes_[i].needs_grad) n.needs_grad = true;
        if (n.needs_grad) n.back = std::move(back);
    }
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

template <class T>
void Graph<T>::check(Var v) const {
    if (v.id < 0 || v.id >= static_cast<int>(nodes_.size())) throw std::invalid_argument("Graph: invalid Var");
}

template <class T>
Var Graph<T>::input(Tensor<T> value) {
    return push("input", std::move(value), {-1, -1, -1}, nullptr);
}

template <class T>
Var Graph<T>::input_ref(const Tensor<T>& value) {
    if (!value.all_finite()) throw NumericError("non-finite output from op 'input'");
    Node n;
    n.ref = &value;
    n.op = "input";
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

template <class T>
std::vector<Var> Graph<T>::bind(const ParamSet<T>& params, bool check_finite) {
    std::vector<Var> out;
    out.reserve(params.size());
    for (int i = 0; i < params.size(); ++i) {
        if (check_finite && !params[i].all_finite()) throw NumericError("non-finite parameter '" + params.name(i) + "'");
        Node n;
        n.ref = &params[i];
        n.op = "param";
        n.needs_grad = record_;
        nodes_.push_back(std::move(n));
        out.push_back(Var{static_cast<int>(nodes_.size()) - 1});
    }
    return out;
}

template <class T>
const Tensor<T>& Graph<T>::value(Var v) const {
    check(v);
    return val(v.id);
}

template <class T>
const Tensor<T>* Graph<T>::grad(Var v) const {
    check(v);
    const Node& n = nodes_[v.id];
    return n.grad.empty() ? nullptr : &n.grad;
}

template <class T>
ParamSet<T> Graph<T>::param_grads(const ParamSet<T>& params, std::span<const Var> bound) const {
    if (static_cast<int>(bound.size()) != params.size()) throw std::invalid_argument("param_grads: size mismatch");
    ParamSet<T> out = params.zeros_like();
    for (int i = 0; i < params.size(); ++i)
        if (const Tensor<T>* g = grad(bound[i])) out[i] = *g;
    return out;
}

// ---- linear algebra ----

template <class T>
Var Graph<T>::matmul(Var a, Var w) {
    check(a);
    check(w);
    const Tensor<T>& A = val(a.id);
    const Tensor<T>& W = val(w.id);
    if (A.cols != W.rows) shape_error("matmul", "inner dimensions differ");
    const int R = A.rows, I = A.cols, O = W.cols;
    Tensor<T> out(R, O);
    for (int r = 0; r < R; ++r) {
        T* dst = out.row(r);
        const T* ar = A.row(r);
        for (int i = 0; i < I; ++i) {
            const T s = ar[i];
            if (s == T(0)) continue;
            const T* wr = W.row(i);
            for (int o = 0; o < O; ++o) dst[o] += s * wr[o];
        }
    }
    return push("matmul", std::move(out), {a.id, w.id, -1}, [](Graph& g, int self) {
        const Node& n = g.nodes_[self];
        const Tensor<T>& G = n.grad;
        const int ia = n.in[0], iw = n.in[1];
        const Tensor<T>& A = g.val(ia);
        const Tensor<T>& W = g.val(iw);
        const int R = A.rows, I = A.cols, O = W.cols;
        if (g.nodes_[ia].needs_grad) {
            Tensor<T> Wt(O, I);
            for (int i = 0; i < I; ++i)
                for (int o = 0; o < O; ++o) Wt(o, i) = W(i, o);
            Tensor<T>& dA = g.grad_ref(ia);
            for (int r = 0; r < R; ++r) {
                T* dst = dA.row(r);
                const T* gr = G.row(r);
                for (int o = 0; o < O; ++o) {
                    const T s = gr[o];
                    if (s == T(0)) continue;
                    const T* wt = Wt.row(o);
                    for (int i = 0; i < I; ++i) dst[i] += s * wt[i];
                }
            }
        }
        if (g.nodes_[iw].needs_grad) {
            Tensor<T>& dW = g.grad_ref(iw);
            for (int r = 0; r < R; ++r) {
                const T* ar = A.row(r);
                const T* gr = G.row(r);
                for (int i = 0; i < I; ++i) {
                    const T s = ar[i];
                    if (s == T(0)) continue;
                    T* dst = dW.row(i);
                    for (int o = 0; o < O; ++o) dst[o] += s * gr[o];
                }
            }
        }
    });
}

template <class T>
Var Graph<T>::add(Var a, Var b) {
    check(a);
    check(b);
    const Tensor<T>& A = val(a.id);
    const Tensor<T>& B = val(b.id);
    if (!A.same_shape(B)) shape_error("add", "shape mismatch");
    Tensor<T> out = A;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += B.data[i];
    return push("add", std::move(out), {a.id, b.id, -1}, [](Graph& g, int self) {
        const Node& n = g.nodes_[self];
        for (int k = 0; k < 2; ++k) {
            if (!g.nodes_[n.in[k]].needs_grad) continue;
            Tensor<T>& d = g.grad_ref(n.in[k]);
            for (std::size_t i = 0; i < d.size(); ++i) d.data[i] += n.grad.data[i];
        }
    });
}

template <class T>
Var Graph<T>::sub(Var a, Var b) {
    check(a);
    check(b);
    const Tensor<T>& A = val(a.id);
    const Tensor<T>& B = val(b.id);
    if (!A.same_shape(B)) shape_error("sub", "shape mismatch");
    Tensor<T> out = A;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] -= B.data[i];
    return push("sub", std::move(out), {a.id, b.id, -1}, [](Graph& g, int self) {
        const Node& n = g.nodes_[self];
        for (int k = 0; k < 2; ++k) {
            if (!g.nodes_[n.in[k]].needs_grad) continue;
            const T sign = k == 0 ? T(1) : T(-1);
            Tensor<T>& d = g.grad_ref(n.in[k]);
            for (std::size_t i = 0; i < d.size(); ++i) d.data[i] += sign * n.grad.data[i];
        }
    });
}

template <class T>
Var Graph<T>::mul(Var a, Var b) {
    check(a);
    check(b);
    const Tensor<T>& A = val(a.id);
    const Tensor<T>& B = val(b.id);
    if (!A.same_shape(B)) shape_error("mul", "shape mismatch");
    Tensor<T> out = A;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= B.data[i];
    return push("mul", std::move(out), {a.id, b.id, -1}, [](Graph& g, int self) {
        const Node& n = g.nodes_[self];
        for (int k = 0; k < 2; ++k) {
            if (!g.nodes_[n.in[k]].needs_grad) continue;
            const Tensor<T>& other = g.val(n.in[1 - k]);
            Tensor<T>& d = g.grad_ref(n.in[k]);
            for (std::size_t i = 0; i < d.size(); ++i) d.data[i] += n.grad.data[i] * other.data[i];
        }
    });
}

template <class T>
Var Graph<T>::add_row(Var a, Var bias) {
    check(a);
    check(bias);
    const Tensor<T>& A = val(a.id);
    const Tensor<T>& b = val(bias.id);
    if (b.rows != 1 || b.cols != A.cols) shape_error("add_row", "bias must be [1, cols]");
    Tensor<T> out = A;
    for (int r = 0; r < out.rows; ++r) {
        T* dst = out.row(r);
        for (int c = 0; c < out.cols; ++c) dst[c] += b.data[c];
    }
    return push("add_row", std::move(out), {a.id, bias.id, -1}, [](Graph& g, int self) {
        const Node& n = g.nodes_[self];
        const Tensor<T>& G = n.grad;
        if (g.nodes_[n.in[0]].needs_grad) {
            Tensor<T>& d = g.grad_ref(n.in[0]);
            for (std::size_t i = 0; i < d.size(); ++i) d.data[i] += G.data[i];
        }
        if (g.nodes_[n.in[1]].needs_grad) {
            Tensor<T>& d = g.grad_ref(n.in[1]);
            for (int r = 0; r < G.rows; ++r) {
                const T* gr = G.row(r);
                for (int c = 0; c < G.cols; ++c) d.data[c] += gr[c];
            }
        }
    });
}

// ---- elementwise ----

template <class T>
Var Graph<T>::scale(Var a, T s) {
    check(a);
    Tensor<T> out = val(a.id);
    for (auto& x : out.data) x *= s;
    return push("scale", std::move(out), {a.id, -1, -1}, [s](Graph& g, int self) {
        const Node& n = g.nodes_[self];
        Tensor<T>& d = g.grad_ref(n.in[0]);
        for (std::size_t i = 0; i < d.size(); ++i) d.data[i] += s * n.grad.data[i];
    });
}

template <class T>
Var Graph<T>::add_scalar(Var a, T s) {
    check(a);
    Tensor<T> out = val(a.id);
    for (auto& x : out.data) x += s;
    return push("add_scalar", std::move(out), {a.id, -1, -1}, [](Graph& g, int self) {
        const Node& n = g.nodes_[self];
        Tensor<T>& d = g.grad_ref(n.in[0]);
        for (std::size_t i = 0; i < d.size(); ++i) d.data[i] += n.grad.data[i];
    });
}

// Unary ops whose derivative is a function of (input, output).
#define INFANT_UNARY(NAME, FWD, DERIV)                                                     \
    template <class T>                                                                     \
    Var Graph<T>::NAME(Var a) {                                                            \
        check(a);                                                                          \
        Tensor<T> out = val(a.id);                                                         \
        for (auto& x : out.data) x = (FWD);                                                \
        return push(#NAME, std::move(out), {a.id, -1, -1}, [](Graph& g, int self) {        \
            const Node& n = g.nodes_[self];                                                \
            const Tensor<T>& X = g.val(n.in[0]);                                           \
            Tensor<T>& d = g.grad_ref(n.in[0]);                                            \
            for (std::size_t i = 0; i < d.size(); ++i) {                                   \
                const T x = X.data[i];                                                     \
                const T y = n.value.data[i];                                               \
                (void)x;                                                                   \
                (void)y;                                                                   \
                d.data[i] += n.grad.data[i] * (DERIV);                                     \
            }                                                                              \
        });                                                                                \
    }

INFANT_UNARY(sigmoid, sigm(x), y * (T(1) - y))
INFANT_UNARY(tanh, std::tanh(x), T(1) - y * y)
INFANT_UNARY(relu, x > T(0) ? x : T(0), x > T(0) ? T(1) : T(0))
INFANT_UNARY(exp, std::exp(x), y)
INFANT_UNARY(square, x * x, T(2) * x)

#undef INFANT_UNARY

// ---- structural ----

template <class T>
Var Graph<T>::concat_cols(std::span<const Var> parts) {
    if (parts.empty()) shape_error("concat_cols", "no inputs");
    if (parts.size() > 3) {
        // Tape nodes hold up to three inputs; fold longer lists left to right.
        Var acc = concat_cols(parts.subspan(0, 3));
        for (std::size_t k = 3; k < parts.size(); k += 2) {
            const std::size_t take = std::min<std::size_t>(2, parts.size() - k);
            std::array<Var, 3> next{acc, parts[k], take == 2 ? parts[k + 1] : Var{}};
            acc = concat_cols(std::span<const Var>(next.data(), 1 + take));
        }
        return acc;
    }
    const int R = val(parts[0].id).rows;
    int C = 0;
    std::array<int, 3> in{-1, -1, -1};
    for (std::size_t k = 0; k < parts.size(); ++k) {
        check(parts[k]);
        if (val(parts[k].id).rows != R) shape_error("concat_cols", "row count mismatch");
        C += val(parts[k].id).cols;
        in[k] = parts[k].id;
    }
    Tensor<T> out(R, C);
    for (int r = 0; r < R; ++r) {
        T* dst = out.row(r);
        for (std::size_t k = 0; k < parts.size(); ++k) {
            const Tensor<T>& P = val(parts[k].id);
            std::copy(P.row(r), P.row(r) + P.cols, dst);
            dst += P.cols;
        }
    }
    return push("concat_cols", std::move(out), in, [](Graph& g, int self) {
        const Node& n = g.nodes_[self];
        int offset = 0;
        for (int k = 0; k < 3 && n.in[k] >= 0; ++k) {
            const int id = n.in[k];
            const int w = g.val(id).cols;
            if (g.nodes_[id].needs_grad) {
                Tensor<T>& d = g.grad_ref(id);
                for (int r = 0; r < d.rows; ++r) {
                    const T* src = n.grad.row(r) + offset;
                    T* dst = d.row(r);
                    for (int c = 0; c < w; ++c) dst[c] += src[c];
                }
            }
            offset += w;
        }
    });
}

template <class T>
Var Graph<T>::slice_cols(Var a, int start, int len) {
    check(a);
    const Tensor<T>& A = val(a.id);
    if (start < 0 || len < 0 || start + len > A.cols) shape_error("slice_cols", "range out of bounds");
    Tensor<T> out(A.rows, len);
    for (int r = 0; r < A.rows; ++r) std::copy(A.row(r) + start, A.row(r) + start + len, out.row(r));
    return push("slice_cols", std::move(out), {a.id, -1, -1}, [start, len](Graph& g, int self) {
        const Node& n = g.nodes_[self];
        Tensor<T>& d = g.grad_ref(n.in[0]);
        for (int r = 0; r < d.rows; ++r) {
            const T* src = n.grad.row(r);
            T* dst = d.row(r) + start;
            for (int c = 0; c < len; ++c) dst[c] += src[c];
        }
    });
}

template <class T>
Var Graph<T>::where(const Tensor<T>& mask, Var src, Var a) {
    check(src);
    check(a);
    const Tensor<T>& S = val(src.id);
    const Tensor<T>& A = val(a.id);
    if (!S.same_shape(A) || !mask.same_shape(A)) shape_error("where", "shape mismatch");
    Tensor<T> out = A;
    for (std::size_t i = 0; i < out.size(); ++i)
        if (mask.data[i] != T(0)) out.data[i] = S.data[i];
    return push("where", std::move(out), {src.id, a.id, -1}, [mask](Graph& g, int self) {
        const Node& n = g.nodes_[self];
        for (int k = 0; k < 2; ++k) {
            if (!g.nodes_[n.in[k]].needs_grad) continue;
            Tensor<T>& d = g.grad_ref(n.in[k]);
            for (std::size_t i = 0; i < d.size(); ++i) {
                const bool take_src = mask.data[i] != T(0);
                if (take_src == (k == 0)) d.data[i] += n.grad.data[i];
            }
        }
    });
}

template <class T>
Var Graph<T>::normalize_pairs(Var a, std::span<const int> pair_offsets) {
    check(a);
    const Tensor<T>& A = val(a.id);
    std::vector<int> offs(pair_offsets.begin(), pair_offsets.end());
    for (int o : offs)
        if (o < 0 || o + 1 >= A.cols) shape_error("normalize_pairs", "pair offset out of range");
    constexpr T kMinNorm = T(1e-6);
    Tensor<T> out = A;
    for (int r = 0; r < A.rows; ++r) {
        T* dst = out.row(r);
        for (int o : offs) {
            const T x = dst[o], y = dst[o + 1];
            const T len = std::sqrt(x * x + y * y);
            if (len < kMinNorm) {
                dst[o] = T(0);
                dst[o + 1] = T(1);
            } else {
                dst[o] = x / len;
                dst[o + 1] = y / len;
            }
        }
    }
    return push("normalize_pairs", std::move(out), {a.id, -1, -1}, [offs](Graph& g, int self) {
        const Node& n = g.nodes_[self];
        const Tensor<T>& X = g.val(n.in[0]);
        Tensor<T>& d = g.grad_ref(n.in[0]);
        std::vector<char> paired(X.cols, 0);
        for (int o : offs) paired[o] = paired[o + 1] = 1;
        for (int r = 0; r < X.rows; ++r) {
            const T* xr = X.row(r);
            const T* gr = n.grad.row(r);
            T* dr = d.row(r);
            for (int c = 0; c < X.cols; ++c)
                if (!paired[c]) dr[c] += gr[c];
            for (int o : offs) {
                const T x = xr[o], y = xr[o + 1];
                const T len = std::sqrt(x * x + y * y);
                if (len < kMinNorm) continue;
                const T inv3 = T(1) / (len * len * len);
                const T gu = gr[o], gv = gr[o + 1];
                dr[o] += (gu * y * y - gv * x * y) * inv3;
                dr[o + 1] += (gv * x * x - gu * x * y) * inv3;
            }
        }
    });
}

template <class T>
Var Graph<T>::masked_sq_error(Var pred, const Tensor<T>& target, const Tensor<T>& mask) {
    check(pred);
    const Tensor<T>& P = val(pred.id);
    if (!target.same_shape(P) || !mask.same_shape(P)) shape_error("masked_sq_error", "shape mismatch");
    Tensor<T> out(P.rows, P.cols);
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (mask.data[i] == T(0)) continue;
        const T e = P.data[i] - target.data[i];
        out.data[i] = e * e;
    }
    return push("masked_sq_error", std::move(out), {pred.id, -1, -1}, [target, mask](Graph& g, int self) {
        const Node& n = g.nodes_[self];
        const Tensor<T>& P = g.val(n.in[0]);
        Tensor<T>& d = g.grad_ref(n.in[0]);
        for (std::size_t i = 0; i < d.size(); ++i)
            if (mask.data[i] != T(0)) d.data[i] += T(2) * (P.data[i] - target.data[i]) * n.grad.data[i];
    });
}

// ---- reductions ----

template <class T>
Var Graph<T>::sum_all(Var a) {
    check(a);
    const Tensor<T>& A = val(a.id);
    T s = T(0);
    for (T x : A.data) s += x;
    return push("sum_all", Tensor<T>(1, 1, s), {a.id, -1, -1}, [](Graph& g, int self) {
        const Node& n = g.nodes_[self];
        const T gs = n.grad.data[0];
        Tensor<T>& d = g.grad_ref(n.in[0]);
        for (auto& x : d.data) x += gs;
    });
}

template <class T>
Var Graph<T>::mean_all(Var a) {
    check(a);
    const std::size_t count = val(a.id).size();
    if (count == 0) shape_error("mean_all", "empty input");
    return scale(sum_all(a), T(1) / static_cast<T>(count));
}

template <class T>
Var Graph<T>::row_sum(Var a) {
    check(a);
    const Tensor<T>& A = val(a.id);
    Tensor<T> out(A.rows, 1);
    for (int r = 0; r < A.rows; ++r) {
        T s = T(0);
        for (int c = 0; c < A.cols; ++c) s += A(r, c);
        out.data[r] = s;
    }
    return push("row_sum", std::move(out), {a.id, -1, -1}, [](Graph& g, int self) {
        const Node& n = g.nodes_[self];
        Tensor<T>& d = g.grad_ref(n.in[0]);
        for (int r = 0; r < d.rows; ++r) {
            const T gr = n.grad.data[r];
            T* dr = d.row(r);
            for (int c = 0; c < d.cols; ++c) dr[c] += gr;
        }
    });
}

template <class T>
Var Graph<T>::log_softmax(Var a) {
    check(a);
    const Tensor<T>& A = val(a.id);
    if (A.cols == 0) shape_error("log_softmax", "zero columns");
    Tensor<T> out(A.rows, A.cols);
    for (int r = 0; r < A.rows; ++r) {
        const T* ar = A.row(r);
        const T m = *std::max_element(ar, ar + A.cols);
        T z = T(0);
        for (int c = 0; c < A.cols; ++c) z += std::exp(ar[c] - m);
        const T lz = m + std::log(z);
        for (int c = 0; c < A.cols; ++c) out(r, c) = ar[c] - lz;
    }
    return push("log_softmax", std::move(out), {a.id, -1, -1}, [](Graph& g, int self) {
        const Node& n = g.nodes_[self];
        Tensor<T>& d = g.grad_ref(n.in[0]);
        for (int r = 0; r < d.rows; ++r) {
            const T* gr = n.grad.row(r);
            const T* yr = n.value.row(r);
            T gsum = T(0);
            for (int c = 0; c < d.cols; ++c) gsum += gr[c];
            T* dr = d.row(r);
            for (int c = 0; c < d.cols; ++c) dr[c] += gr[c] - std::exp(yr[c]) * gsum;
        }
    });
}

template <class T>
Var Graph<T>::gather(Var a, std::span<const int> cols) {
    check(a);
    const Tensor<T>& A = val(a.id);
    if (static_cast<int>(cols.size()) != A.rows) shape_error("gather", "one index per row required");
    std::vector<int> idx(cols.begin(), cols.end());
    Tensor<T> out(A.rows, 1);
    for (int r = 0; r < A.rows; ++r) {
        if (idx[r] < 0 || idx[r] >= A.cols) shape_error("gather", "index out of range");
        out.data[r] = A(r, idx[r]);
    }
    return push("gather", std::move(out), {a.id, -1, -1}, [idx](Graph& g, int self) {
        const Node& n = g.nodes_[self];
        Tensor<T>& d = g.grad_ref(n.in[0]);
        for (int r = 0; r < d.rows; ++r) d(r, idx[r]) += n.grad.data[r];
    });
}

template <class T>
Var Graph<T>::clamp(Var a, T lo, T hi) {
    check(a);
    if (!(lo <= hi)) shape_error("clamp", "lo > hi");
    Tensor<T> out = val(a.id);
    for (auto& x : out.data) x = std::clamp(x, lo, hi);
    return push("clamp", std::move(out), {a.id, -1, -1}, [lo, hi](Graph& g, int self) {
        const Node& n = g.nodes_[self];
        const Tensor<T>& X = g.val(n.in[0]);
        Tensor<T>& d = g.grad_ref(n.in[0]);
        for (std::size_t i = 0; i < d.size(); ++i)
            if (X.data[i] >= lo && X.data[i] <= hi) d.data[i] += n.grad.data[i];
    });
}

template <class T>
Var Graph<T>::minimum(Var a, Var b) {
    check(a);
    check(b);
    const Tensor<T>& A = val(a.id);
    const Tensor<T>& B = val(b.id);
    if (!A.same_shape(B)) shape_error("minimum", "shape mismatch");
    Tensor<T> out = A;
    for (std::size_t i = 0; i < out.size(); ++i)
        if (B.data[i] < A.data[i]) out.data[i] = B.data[i];
    return push("minimum", std::move(out), {a.id, b.id, -1}, [](Graph& g, int self) {
        const Node& n = g.nodes_[self];
        const Tensor<T>& A = g.val(n.in[0]);
        const Tensor<T>& B = g.val(n.in[1]);
        for (int k = 0; k < 2; ++k) {
            if (!g.nodes_[n.in[k]].needs_grad) continue;
            Tensor<T>& d = g.grad_ref(n.in[k]);
            for (std::size_t i = 0; i < d.size(); ++i) {
                const bool pick_a = A.data[i] <= B.data[i];
                if (pick_a == (k == 0)) d.data[i] += n.grad.data[i];
            }
        }
    });
}

template <class T>
Var Graph<T>::lstm_cell(Var gates, Var c) {
    check(gates);
    check(c);
    const Tensor<T>& Z = val(gates.id);
    const Tensor<T>& C = val(c.id);
    const int H = C.cols;
    if (Z.cols != 4 * H || Z.rows != C.rows) shape_error("lstm_cell", "gates must be [R, 4H] with c [R, H]");
    Tensor<T> out(C.rows, 2 * H);
    for (int r = 0; r < C.rows; ++r) {
        const T* z = Z.row(r);
        const T* cr = C.row(r);
        T* h = out.row(r);
        T* cn = h + H;
        for (int k = 0; k < H; ++k) {
            const T i = sigm(z[k]), f = sigm(z[H + k]), gg = std::tanh(z[2 * H + k]), o = sigm(z[3 * H + k]);
            cn[k] = f * cr[k] + i * gg;
            h[k] = o * std::tanh(cn[k]);
        }
    }
    return push("lstm_cell", std::move(out), {gates.id, c.id, -1}, [H](Graph& g, int self) {
        const Node& n = g.nodes_[self];
        const Tensor<T>& Z = g.val(n.in[0]);
        const Tensor<T>& C = g.val(n.in[1]);
        const bool need_z = g.nodes_[n.in[0]].needs_grad;
        const bool need_c = g.nodes_[n.in[1]].needs_grad;
        Tensor<T>* dZ = need_z ? &g.grad_ref(n.in[0]) : nullptr;
        Tensor<T>* dC = need_c ? &g.grad_ref(n.in[1]) : nullptr;
        for (int r = 0; r < C.rows; ++r) {
            const T* z = Z.row(r);
            const T* cr = C.row(r);
            const T* cn = n.value.row(r) + H;
            const T* gh = n.grad.row(r);
            const T* gc = gh + H;
            for (int k = 0; k < H; ++k) {
                const T i = sigm(z[k]), f = sigm(z[H + k]), gg = std::tanh(z[2 * H + k]), o = sigm(z[3 * H + k]);
                const T tc = std::tanh(cn[k]);
                const T dc = gc[k] + gh[k] * o * (T(1) - tc * tc);
                if (dZ) {
                    T* dz = dZ->row(r);
                    dz[k] += dc * gg * i * (T(1) - i);
                    dz[H + k] += dc * cr[k] * f * (T(1) - f);
                    dz[2 * H + k] += dc * i * (T(1) - gg * gg);
                    dz[3 * H + k] += gh[k] * tc * o * (T(1) - o);
                }
                if (dC) dC->row(r)[k] += dc * f;
            }
        }
    });
}

template <class T>
void Graph<T>::backward(Var loss) {
    check(loss);
    if (!record_) throw std::logic_error("backward: graph was built without recording");
    const Tensor<T>& L = val(loss.id);
    if (L.rows != 1 || L.cols != 1) shape_error("backward", "loss must be a [1,1] scalar");
    if (!nodes_[loss.id].needs_grad) return;
    for (auto& n : nodes_) n.grad = Tensor<T>();
    grad_ref(loss.id).data[0] = T(1);
    for (int id = loss.id; id >= 0; --id) {
        Node& n = nodes_[id];
        if (!n.needs_grad || !n.back || n.grad.empty()) continue;
        n.back(*this, id);
        for (int in : n.in) {
            if (in < 0 || nodes_[in].grad.empty()) continue;
            if (!nodes_[in].grad.all_finite())
                throw NumericError(std::string("non-finite gradient from op '") + n.op + "'");
        }
    }
}

template class Graph<float>;
template class Graph<double>;

}  // namespace infant::nn
