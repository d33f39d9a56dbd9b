#pragma once

// Dense numeric kernels behind the tape's heavy operations.
//
// The top-level functions are OpenMP-parallel; `serial::` holds the plain
// reference loops they are tested against. Every parallel kernel partitions
// work by output element, so each output is accumulated in the same order as
// the reference and results agree to rounding (exactly, without FMA contraction).

#include <cstddef>
#include <span>

namespace rtrack::kernels {

struct MatDims {
  std::size_t m, k, n;
};

/// c[m,n] = a[m,k] * b[k,n]
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, MatDims d);
/// ga[m,k] += g[m,n] * b[k,n]^T
void matmul_grad_a(std::span<const double> g, std::span<const double> b, std::span<double> ga, MatDims d);
/// gb[k,n] += a[m,k]^T * g[m,n]
void matmul_grad_b(std::span<const double> a, std::span<const double> g, std::span<double> gb, MatDims d);

struct GridDims {
  std::size_t height, width, channels;
};

/// Bilinear lookup of an H*W*C channel-last grid at `points` (x = column,
/// y = row, in grid units). Coordinates are clamped to the grid extent.
void bilinear_sample(std::span<const double> grid, GridDims d, std::span<const double> points,
                     std::span<double> out);
/// Accumulates gradients of bilinear_sample. Either output span may be empty
/// to skip it. Clamped coordinates receive zero gradient.
void bilinear_sample_grad(std::span<const double> grid, GridDims d, std::span<const double> points,
                          std::span<const double> g, std::span<double> ggrid, std::span<double> gpoints);

namespace serial {
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, MatDims d);
void matmul_grad_a(std::span<const double> g, std::span<const double> b, std::span<double> ga, MatDims d);
void matmul_grad_b(std::span<const double> a, std::span<const double> g, std::span<double> gb, MatDims d);
void bilinear_sample(std::span<const double> grid, GridDims d, std::span<const double> points,
                     std::span<double> out);
void bilinear_sample_grad(std::span<const double> grid, GridDims d, std::span<const double> points,
                          std::span<const double> g, std::span<double> ggrid, std::span<double> gpoints);
}  // namespace serial

}  // namespace rtrack::kernels
