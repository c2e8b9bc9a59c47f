#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "relconv/common.hpp"
#include "relconv/tensor.hpp"

namespace relconv {

struct EigenDecomposition {
    std::vector<double> values;   // descending
    std::vector<double> vectors;  // column j (row-major v[i*n+j]) pairs with values[j]
};

/// Cyclic Jacobi sweeps for a symmetric matrix (row-major, n x n).
/// Converges quadratically; n stays small here (embedding widths).
inline EigenDecomposition jacobi_eigen(std::vector<double> a, std::size_t n, std::size_t max_sweeps = 100) {
    if (a.size() != n * n) throw std::invalid_argument("jacobi_eigen: matrix size mismatch");
    std::vector<double> v(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;

    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(a[i * n + i]));
    scale = std::max(scale, 1.0);

    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a[p * n + q] * a[p * n + q];
        if (std::sqrt(off) < 1e-15 * scale) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a[p * n + q];
                if (apq == 0.0) continue;
                const double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t i = 0; i < n; ++i) {
                    const double aip = a[i * n + p], aiq = a[i * n + q];
                    a[i * n + p] = c * aip - s * aiq;
                    a[i * n + q] = s * aip + c * aiq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double api = a[p * n + i], aqi = a[q * n + i];
                    a[p * n + i] = c * api - s * aqi;
                    a[q * n + i] = s * api + c * aqi;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vip = v[i * n + p], viq = v[i * n + q];
                    v[i * n + p] = c * vip - s * viq;
                    v[i * n + q] = s * vip + c * viq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return a[x * n + x] > a[y * n + y]; });
    EigenDecomposition out;
    out.values.resize(n);
    out.vectors.assign(n * n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        out.values[j] = a[order[j] * n + order[j]];
        for (std::size_t i = 0; i < n; ++i) out.vectors[i * n + j] = v[i * n + order[j]];
    }
    return out;
}

/// Column means of an (n x d) row-major matrix.
inline std::vector<double> column_means(const std::vector<double>& x, std::size_t n, std::size_t d) {
    std::vector<double> mu(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) mu[j] += x[i * d + j];
    for (double& m : mu) m /= static_cast<double>(n);
    return mu;
}

/// Sample covariance (divisor n-1) of mean-centered rows.
inline std::vector<double> covariance_matrix(const std::vector<double>& x, std::size_t n, std::size_t d) {
    if (n < 2) throw data_error("covariance: need at least 2 rows");
    const std::vector<double> mu = column_means(x, n, d);
    std::vector<double> cov(d * d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t a = 0; a < d; ++a) {
            const double xa = x[i * d + a] - mu[a];
            if (xa == 0.0) continue;
            for (std::size_t b = a; b < d; ++b) cov[a * d + b] += xa * (x[i * d + b] - mu[b]);
        }
    }
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = a; b < d; ++b) {
            cov[a * d + b] /= static_cast<double>(n - 1);
            cov[b * d + a] = cov[a * d + b];
        }
    return cov;
}

struct PcaResult {
    std::vector<double> mean;        // d
    std::vector<double> components;  // 2 x d, row-major (component major)
    std::vector<double> eigenvalues; // all d, descending
    std::vector<double> projected;   // n x 2
};

/// Projects rows onto the top-2 eigenvectors of the covariance. Each
/// component's sign is fixed so its largest-magnitude entry is positive.
inline PcaResult pca2(const std::vector<double>& x, std::size_t n, std::size_t d) {
    PcaResult out;
    out.mean = column_means(x, n, d);
    EigenDecomposition eig = jacobi_eigen(covariance_matrix(x, n, d), d);
    out.eigenvalues = eig.values;
    out.components.assign(2 * d, 0.0);
    const std::size_t comps = std::min<std::size_t>(2, d);
    for (std::size_t c = 0; c < comps; ++c) {
        std::size_t arg = 0;
        for (std::size_t i = 1; i < d; ++i)
            if (std::abs(eig.vectors[i * d + c]) > std::abs(eig.vectors[arg * d + c])) arg = i;
        const double flip = eig.vectors[arg * d + c] < 0.0 ? -1.0 : 1.0;
        for (std::size_t i = 0; i < d; ++i) out.components[c * d + i] = flip * eig.vectors[i * d + c];
    }
    out.projected.assign(n * 2, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < comps; ++c) {
            double acc = 0.0;
            for (std::size_t j = 0; j < d; ++j)
                acc += (x[i * d + j] - out.mean[j]) * out.components[c * d + j];
            out.projected[i * 2 + c] = acc;
        }
    }
    return out;
}

}  // namespace relconv
