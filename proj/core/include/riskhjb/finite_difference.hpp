#pragma once

#include "riskhjb/market_model.hpp"
#include "riskhjb/types.hpp"

#include <cstddef>
#include <functional>

namespace riskhjb {

/// Receives (column, weight) pairs of a linear stencil.
using StencilSink = std::function<void(std::size_t, double)>;

/// Emits the weights of d/dx_dim at `node`: central in the interior,
/// second-order one-sided on the faces.
void first_derivative_stencil(const Grid& grid, std::size_t node, int dim, const StencilSink& sink);

/// Emits the weights of d2/dx_i dx_j at `node`. Central differences; nothing
/// is emitted when the node lies on a face normal to i or j.
void second_derivative_stencil(const Grid& grid, std::size_t node, int i, int j, const StencilSink& sink);

Vector nodal_gradient(const Grid& grid, const Vector& values, std::size_t node);

/// Central Hessian; entries along face-normal directions are zero.
Matrix nodal_hessian(const Grid& grid, const Vector& values, std::size_t node);

/// Multilinear interpolation; coordinates outside the box are clamped onto it.
double interpolate(const Grid& grid, const Vector& values, const Vector& x);

}  // namespace riskhjb
