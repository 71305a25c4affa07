#include "riskhjb/finite_difference.hpp"

#include <algorithm>
#include <cmath>

namespace riskhjb {

void first_derivative_stencil(const Grid& grid, std::size_t node, int dim, const StencilSink& sink) {
    const int i = grid.coordinate_index(node, dim);
    const int last = grid.points(dim) - 1;
    const double h = grid.spacing()[dim];
    const std::size_t s = grid.stride(dim);
    if (i > 0 && i < last) {
        sink(node + s, 0.5 / h);
        sink(node - s, -0.5 / h);
    } else if (i == 0) {
        sink(node, -1.5 / h);
        sink(node + s, 2.0 / h);
        sink(node + 2 * s, -0.5 / h);
    } else {
        sink(node, 1.5 / h);
        sink(node - s, -2.0 / h);
        sink(node - 2 * s, 0.5 / h);
    }
}

void second_derivative_stencil(const Grid& grid, std::size_t node, int i, int j, const StencilSink& sink) {
    auto interior = [&](int d) {
        const int k = grid.coordinate_index(node, d);
        return k > 0 && k < grid.points(d) - 1;
    };
    if (!interior(i) || !interior(j)) return;
    const double hi = grid.spacing()[i];
    const std::size_t si = grid.stride(i);
    if (i == j) {
        const double w = 1.0 / (hi * hi);
        sink(node + si, w);
        sink(node, -2.0 * w);
        sink(node - si, w);
        return;
    }
    const double hj = grid.spacing()[j];
    const std::size_t sj = grid.stride(j);
    const double w = 0.25 / (hi * hj);
    sink(node + si + sj, w);
    sink(node - si - sj, w);
    sink(node + si - sj, -w);
    sink(node - si + sj, -w);
}

Vector nodal_gradient(const Grid& grid, const Vector& values, std::size_t node) {
    Vector g = Vector::Zero(grid.dims());
    for (int d = 0; d < grid.dims(); ++d) {
        double acc = 0.0;
        first_derivative_stencil(grid, node, d, [&](std::size_t c, double w) { acc += w * values[static_cast<Eigen::Index>(c)]; });
        g[d] = acc;
    }
    return g;
}

Matrix nodal_hessian(const Grid& grid, const Vector& values, std::size_t node) {
    const int n = grid.dims();
    Matrix hess = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = i; j < n; ++j) {
            double acc = 0.0;
            second_derivative_stencil(grid, node, i, j, [&](std::size_t c, double w) { acc += w * values[static_cast<Eigen::Index>(c)]; });
            hess(i, j) = acc;
            hess(j, i) = acc;
        }
    }
    return hess;
}

double interpolate(const Grid& grid, const Vector& values, const Vector& x) {
    const int n = grid.dims();
    if (x.size() != n) throw InterpolationError("query point has wrong dimension");
    if (values.size() != static_cast<Eigen::Index>(grid.size())) {
        throw InterpolationError("field size does not match grid");
    }
    std::size_t base = 0;
    double frac[8];
    std::size_t step[8];
    if (n > 8) throw InterpolationError("interpolation supports at most 8 dimensions");
    for (int d = 0; d < n; ++d) {
        const double h = grid.spacing()[d];
        const double pos = std::clamp((x[d] - grid.lower()[d]) / h, 0.0, static_cast<double>(grid.points(d) - 1));
        int i = static_cast<int>(std::floor(pos));
        if (i >= grid.points(d) - 1) i = grid.points(d) - 2;
        frac[d] = pos - i;
        step[d] = grid.stride(d);
        base += static_cast<std::size_t>(i) * grid.stride(d);
    }
    double acc = 0.0;
    for (unsigned corner = 0; corner < (1u << n); ++corner) {
        double w = 1.0;
        std::size_t idx = base;
        for (int d = 0; d < n; ++d) {
            if (corner & (1u << d)) {
                w *= frac[d];
                idx += step[d];
            } else {
                w *= 1.0 - frac[d];
            }
        }
        if (w != 0.0) acc += w * values[static_cast<Eigen::Index>(idx)];
    }
    return acc;
}

}  // namespace riskhjb
