#include "rtrack/kernels.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rtrack::kernels {

namespace {

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 15;

struct Corner {
  std::size_t x0, x1, y0, y1;
  double wx, wy;
  bool x_free, y_free;  // false when the coordinate was clamped
};

Corner locate(double x, double y, const GridDims& d) {
  const double max_x = static_cast<double>(d.width - 1);
  const double max_y = static_cast<double>(d.height - 1);
  Corner c{};
  c.x_free = x >= 0.0 && x <= max_x;
  c.y_free = y >= 0.0 && y <= max_y;
  const double cx = std::clamp(x, 0.0, max_x);
  const double cy = std::clamp(y, 0.0, max_y);
  c.x0 = std::min(static_cast<std::size_t>(std::floor(cx)), d.width - 1);
  c.y0 = std::min(static_cast<std::size_t>(std::floor(cy)), d.height - 1);
  c.x1 = std::min(c.x0 + 1, d.width - 1);
  c.y1 = std::min(c.y0 + 1, d.height - 1);
  c.wx = cx - static_cast<double>(c.x0);
  c.wy = cy - static_cast<double>(c.y0);
  return c;
}

inline void sample_one(const double* grid, const GridDims& d, const Corner& c, double* out) {
  const std::size_t C = d.channels;
  const double* f00 = grid + (c.y0 * d.width + c.x0) * C;
  const double* f01 = grid + (c.y0 * d.width + c.x1) * C;
  const double* f10 = grid + (c.y1 * d.width + c.x0) * C;
  const double* f11 = grid + (c.y1 * d.width + c.x1) * C;
  const double w00 = (1 - c.wy) * (1 - c.wx), w01 = (1 - c.wy) * c.wx;
  const double w10 = c.wy * (1 - c.wx), w11 = c.wy * c.wx;
  for (std::size_t ch = 0; ch < C; ++ch) {
    out[ch] = w00 * f00[ch] + w01 * f01[ch] + w10 * f10[ch] + w11 * f11[ch];
  }
}

inline void point_grad_one(const double* grid, const GridDims& d, const Corner& c, const double* g,
                           double* gp) {
  const std::size_t C = d.channels;
  const double* f00 = grid + (c.y0 * d.width + c.x0) * C;
  const double* f01 = grid + (c.y0 * d.width + c.x1) * C;
  const double* f10 = grid + (c.y1 * d.width + c.x0) * C;
  const double* f11 = grid + (c.y1 * d.width + c.x1) * C;
  double gx = 0.0, gy = 0.0;
  for (std::size_t ch = 0; ch < C; ++ch) {
    gx += g[ch] * ((1 - c.wy) * (f01[ch] - f00[ch]) + c.wy * (f11[ch] - f10[ch]));
    gy += g[ch] * ((1 - c.wx) * (f10[ch] - f00[ch]) + c.wx * (f11[ch] - f01[ch]));
  }
  if (c.x_free && c.x1 != c.x0) gp[0] += gx;
  if (c.y_free && c.y1 != c.y0) gp[1] += gy;
}

inline void grid_grad_one(const GridDims& d, const Corner& c, const double* g, double* gg,
                          std::size_t ch_begin, std::size_t ch_end) {
  const std::size_t C = d.channels;
  double* g00 = gg + (c.y0 * d.width + c.x0) * C;
  double* g01 = gg + (c.y0 * d.width + c.x1) * C;
  double* g10 = gg + (c.y1 * d.width + c.x0) * C;
  double* g11 = gg + (c.y1 * d.width + c.x1) * C;
  const double w00 = (1 - c.wy) * (1 - c.wx), w01 = (1 - c.wy) * c.wx;
  const double w10 = c.wy * (1 - c.wx), w11 = c.wy * c.wx;
  for (std::size_t ch = ch_begin; ch < ch_end; ++ch) {
    g00[ch] += w00 * g[ch];
    g01[ch] += w01 * g[ch];
    g10[ch] += w10 * g[ch];
    g11[ch] += w11 * g[ch];
  }
}

}  // namespace

namespace serial {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, MatDims d) {
  for (std::size_t i = 0; i < d.m; ++i) {
    for (std::size_t j = 0; j < d.n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < d.k; ++p) acc += a[i * d.k + p] * b[p * d.n + j];
      c[i * d.n + j] = acc;
    }
  }
}

void matmul_grad_a(std::span<const double> g, std::span<const double> b, std::span<double> ga, MatDims d) {
  for (std::size_t i = 0; i < d.m; ++i) {
    for (std::size_t p = 0; p < d.k; ++p) {
      double acc = 0.0;
      for (std::size_t j = 0; j < d.n; ++j) acc += g[i * d.n + j] * b[p * d.n + j];
      ga[i * d.k + p] += acc;
    }
  }
}

void matmul_grad_b(std::span<const double> a, std::span<const double> g, std::span<double> gb, MatDims d) {
  for (std::size_t p = 0; p < d.k; ++p) {
    for (std::size_t j = 0; j < d.n; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < d.m; ++i) acc += a[i * d.k + p] * g[i * d.n + j];
      gb[p * d.n + j] += acc;
    }
  }
}

void bilinear_sample(std::span<const double> grid, GridDims d, std::span<const double> points,
                     std::span<double> out) {
  const std::size_t n = points.size() / 2;
  for (std::size_t p = 0; p < n; ++p) {
    sample_one(grid.data(), d, locate(points[2 * p], points[2 * p + 1], d), out.data() + p * d.channels);
  }
}

void bilinear_sample_grad(std::span<const double> grid, GridDims d, std::span<const double> points,
                          std::span<const double> g, std::span<double> ggrid, std::span<double> gpoints) {
  const std::size_t n = points.size() / 2;
  for (std::size_t p = 0; p < n; ++p) {
    const Corner c = locate(points[2 * p], points[2 * p + 1], d);
    const double* gp = g.data() + p * d.channels;
    if (!gpoints.empty()) point_grad_one(grid.data(), d, c, gp, gpoints.data() + 2 * p);
    if (!ggrid.empty()) grid_grad_one(d, c, gp, ggrid.data(), 0, d.channels);
  }
}

}  // namespace serial

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, MatDims d) {
  const auto m = static_cast<std::ptrdiff_t>(d.m);
  const double* __restrict pa = a.data();
  const double* __restrict pb = b.data();
  double* __restrict pc = c.data();
#pragma omp parallel for schedule(static) if (d.m * d.k * d.n > kParallelWork)
  for (std::ptrdiff_t i = 0; i < m; ++i) {
    double* row = pc + i * d.n;
    std::fill(row, row + d.n, 0.0);
    for (std::size_t p = 0; p < d.k; ++p) {
      const double av = pa[i * d.k + p];
      const double* brow = pb + p * d.n;
#pragma omp simd
      for (std::size_t j = 0; j < d.n; ++j) row[j] += av * brow[j];
    }
  }
}

void matmul_grad_a(std::span<const double> g, std::span<const double> b, std::span<double> ga, MatDims d) {
  const auto m = static_cast<std::ptrdiff_t>(d.m);
  const double* __restrict pg = g.data();
  const double* __restrict pb = b.data();
  double* __restrict pa = ga.data();
#pragma omp parallel for schedule(static) if (d.m * d.k * d.n > kParallelWork)
  for (std::ptrdiff_t i = 0; i < m; ++i) {
    const double* grow = pg + i * d.n;
    for (std::size_t p = 0; p < d.k; ++p) {
      const double* brow = pb + p * d.n;
      double acc = 0.0;
#pragma omp simd reduction(+ : acc)
      for (std::size_t j = 0; j < d.n; ++j) acc += grow[j] * brow[j];
      pa[i * d.k + p] += acc;
    }
  }
}

void matmul_grad_b(std::span<const double> a, std::span<const double> g, std::span<double> gb, MatDims d) {
  const auto k = static_cast<std::ptrdiff_t>(d.k);
  const double* __restrict pa = a.data();
  const double* __restrict pg = g.data();
  double* __restrict pb = gb.data();
#pragma omp parallel for schedule(static) if (d.m * d.k * d.n > kParallelWork)
  for (std::ptrdiff_t p = 0; p < k; ++p) {
    double* out = pb + p * d.n;
    for (std::size_t i = 0; i < d.m; ++i) {
      const double av = pa[i * d.k + p];
      if (av == 0.0) continue;
      const double* grow = pg + i * d.n;
#pragma omp simd
      for (std::size_t j = 0; j < d.n; ++j) out[j] += av * grow[j];
    }
  }
}

void bilinear_sample(std::span<const double> grid, GridDims d, std::span<const double> points,
                     std::span<double> out) {
  const auto n = static_cast<std::ptrdiff_t>(points.size() / 2);
#pragma omp parallel for schedule(static) if (points.size() / 2 * d.channels > kParallelWork)
  for (std::ptrdiff_t p = 0; p < n; ++p) {
    sample_one(grid.data(), d, locate(points[2 * p], points[2 * p + 1], d), out.data() + p * d.channels);
  }
}

void bilinear_sample_grad(std::span<const double> grid, GridDims d, std::span<const double> points,
                          std::span<const double> g, std::span<double> ggrid, std::span<double> gpoints) {
  const std::size_t n = points.size() / 2;
  const bool big = n * d.channels > kParallelWork;
  if (!gpoints.empty()) {
#pragma omp parallel for schedule(static) if (big)
    for (std::ptrdiff_t p = 0; p < static_cast<std::ptrdiff_t>(n); ++p) {
      const Corner c = locate(points[2 * p], points[2 * p + 1], d);
      point_grad_one(grid.data(), d, c, g.data() + p * d.channels, gpoints.data() + 2 * p);
    }
  }
  if (!ggrid.empty()) {
    // Scatter: threads own disjoint channel ranges so no two write the same cell.
#pragma omp parallel if (big)
    {
#ifdef _OPENMP
      const std::size_t threads = static_cast<std::size_t>(omp_get_num_threads());
      const std::size_t tid = static_cast<std::size_t>(omp_get_thread_num());
#else
      const std::size_t threads = 1, tid = 0;
#endif
      const std::size_t begin = d.channels * tid / threads;
      const std::size_t end = d.channels * (tid + 1) / threads;
      for (std::size_t p = 0; p < n && begin < end; ++p) {
        const Corner c = locate(points[2 * p], points[2 * p + 1], d);
        grid_grad_one(d, c, g.data() + p * d.channels, ggrid.data(), begin, end);
      }
    }
  }
}

}  // namespace rtrack::kernels
