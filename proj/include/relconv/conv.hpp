#pragma once

#include <vector>

#include "relconv/pooling.hpp"
#include "relconv/tensor.hpp"

namespace relconv {

namespace testing {
/// Fault-injection hook for the gradient checker: flips the sign of the
/// kernel gradient computed by the convolution backward step.
inline thread_local bool conv_grad_sign_flip = false;
}  // namespace testing

/// P cross-relation filters; one (s x D) kernel per relation per filter,
/// stored as a single (P, R, s, D) tensor whose relation axis follows the
/// graph's canonical relation order.
struct FilterBank {
    Tensor kernels;  // (P, R, s, D)

    std::size_t filters() const { return kernels.extent(0); }
    std::size_t relations() const { return kernels.extent(1); }
    std::size_t window() const { return kernels.extent(2); }
    std::size_t dim() const { return kernels.extent(3); }
};

namespace detail {

// out[p, m] = sum_{r, j, c} x[r, m+j, c] * kernel[p, r, j, c]
// Shared by conv_filter (P = 1) and conv_all. Stride 1, no bias, no
// nonlinearity; zero relation slices contribute nothing by linearity.
inline Tensor conv_core(const Tensor& x, const Tensor& kernel, std::size_t p, std::size_t rels,
                        std::size_t s, std::size_t d, Shape out_shape, Tape* tape) {
    const std::size_t k = x.extent(1);
    const std::size_t len = k - s + 1;
    std::vector<double> out(p * len, 0.0);
    const auto& xd = x.data();
    const auto& kd = kernel.data();
    for (std::size_t f = 0; f < p; ++f) {
        for (std::size_t m = 0; m < len; ++m) {
            double acc = 0.0;
            for (std::size_t r = 0; r < rels; ++r) {
                for (std::size_t j = 0; j < s; ++j) {
                    const double* xrow = xd.data() + (r * k + m + j) * d;
                    const double* krow = kd.data() + ((f * rels + r) * s + j) * d;
                    for (std::size_t c = 0; c < d; ++c) acc += xrow[c] * krow[c];
                }
            }
            out[f * len + m] = acc;
        }
    }
    Tensor h = Tensor::from_data(std::move(out_shape), std::move(out),
                                 x.requires_grad() || kernel.requires_grad());
    if (tape && h.requires_grad()) {
        auto xn = x.node(), kn = kernel.node(), hn = h.node();
        tape->record([xn, kn, hn, p, rels, s, d, k, len] {
            if (!hn->grad) return;
            const auto& g = *hn->grad;
            if (xn->requires_grad) {
                auto& gx = xn->grad_buffer();
                for (std::size_t f = 0; f < p; ++f)
                    for (std::size_t m = 0; m < len; ++m) {
                        const double gv = g[f * len + m];
                        if (gv == 0.0) continue;
                        for (std::size_t r = 0; r < rels; ++r)
                            for (std::size_t j = 0; j < s; ++j) {
                                double* xrow = gx.data() + (r * k + m + j) * d;
                                const double* krow = kn->data.data() + ((f * rels + r) * s + j) * d;
                                for (std::size_t c = 0; c < d; ++c) xrow[c] += gv * krow[c];
                            }
                    }
            }
            if (kn->requires_grad) {
                const double sign = testing::conv_grad_sign_flip ? -1.0 : 1.0;
                auto& gk = kn->grad_buffer();
                for (std::size_t f = 0; f < p; ++f)
                    for (std::size_t m = 0; m < len; ++m) {
                        const double gv = sign * g[f * len + m];
                        if (gv == 0.0) continue;
                        for (std::size_t r = 0; r < rels; ++r)
                            for (std::size_t j = 0; j < s; ++j) {
                                const double* xrow = xn->data.data() + (r * k + m + j) * d;
                                double* krow = gk.data() + ((f * rels + r) * s + j) * d;
                                for (std::size_t c = 0; c < d; ++c) krow[c] += gv * xrow[c];
                            }
                    }
            }
        });
    }
    return h;
}

inline void check_conv_shapes(const Tensor& x, std::size_t rels, std::size_t s, std::size_t d) {
    if (x.rank() != 3) throw std::invalid_argument("conv: pooled tensor must be (R,k,D)");
    if (x.extent(0) != rels || x.extent(2) != d) {
        throw std::invalid_argument("conv: kernel relation/feature axes do not match pooled tensor " +
                                    shape_str(x.shape()));
    }
    if (s > x.extent(1)) {
        throw std::invalid_argument("conv: window " + std::to_string(s) + " exceeds pooling size " +
                                    std::to_string(x.extent(1)));
    }
}

}  // namespace detail

/// Single-filter cross-relation convolution: slides an (s x D) window down
/// the k pooled rows, summing row inner products across every relation.
/// Output length k - s + 1.
inline Tensor conv_filter(const PooledNeighborhood& x, const Tensor& kernel, Tape* tape = nullptr) {
    if (kernel.rank() != 3) throw std::invalid_argument("conv_filter: kernel must be (R,s,D)");
    const std::size_t rels = kernel.extent(0), s = kernel.extent(1), d = kernel.extent(2);
    detail::check_conv_shapes(x.x, rels, s, d);
    return detail::conv_core(x.x, kernel, 1, rels, s, d, {x.x.extent(1) - s + 1}, tape);
}

/// All filters at once; row p of the (P, k-s+1) result is conv_filter with
/// the p-th kernel.
inline Tensor conv_all(const PooledNeighborhood& x, const FilterBank& bank, Tape* tape = nullptr) {
    const std::size_t rels = bank.relations(), s = bank.window(), d = bank.dim();
    detail::check_conv_shapes(x.x, rels, s, d);
    return detail::conv_core(x.x, bank.kernels, bank.filters(), rels, s, d,
                             {bank.filters(), x.x.extent(1) - s + 1}, tape);
}

struct MlpParams {
    Tensor w1, b1;  // (in, hidden), (hidden)
    Tensor w2, b2;  // (hidden, out), (out)
};

struct NodeEmbedding {
    Tensor embedding;  // (H)
    Tensor responses;  // raw filter responses fed to the MLP
};

/// Fuses flattened filter responses into the node embedding with two affine
/// layers and a ReLU in between.
inline NodeEmbedding fuse_mlp(const Tensor& responses, const MlpParams& mlp, Tape* tape = nullptr) {
    if (responses.rank() != 1 || responses.extent(0) != mlp.w1.extent(0)) {
        throw std::invalid_argument("fuse_mlp: responses " + shape_str(responses.shape()) +
                                    " do not match first layer " + shape_str(mlp.w1.shape()));
    }
    Tensor row = reshape(responses, {1, responses.extent(0)}, tape);
    Tensor hidden = relu(add_rows(matmul(row, mlp.w1, tape), mlp.b1, tape), tape);
    Tensor out = add_rows(matmul(hidden, mlp.w2, tape), mlp.b2, tape);
    return {reshape(out, {mlp.w2.extent(1)}, tape), responses};
}

}  // namespace relconv
