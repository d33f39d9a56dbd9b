#include <doctest.h>

#include <vector>

#include "rtrack/kernels.hpp"
#include "rtrack/rng.hpp"

using namespace rtrack;
using namespace rtrack::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t id, double lo = -1.0, double hi = 1.0) {
  Rng rng = Rng::keyed(5, rng_domain::kTest, id);
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

void check_close(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
}

}  // namespace

// Shapes straddle the size at which the kernels switch to parallel loops.
TEST_CASE("parallel matmul kernels agree with the serial reference") {
  for (const MatDims d : {MatDims{3, 4, 5}, MatDims{256, 16, 32}, MatDims{300, 70, 90}}) {
    const auto a = random_vec(d.m * d.k, 1), b = random_vec(d.k * d.n, 2), g = random_vec(d.m * d.n, 3);
    std::vector<double> c1(d.m * d.n), c2(d.m * d.n);
    serial::matmul(a, b, c1, d);
    matmul(a, b, c2, d);
    check_close(c1, c2);

    std::vector<double> ga1(d.m * d.k, 0.5), ga2(d.m * d.k, 0.5);
    serial::matmul_grad_a(g, b, ga1, d);
    matmul_grad_a(g, b, ga2, d);
    check_close(ga1, ga2);

    std::vector<double> gb1(d.k * d.n, -0.5), gb2(d.k * d.n, -0.5);
    serial::matmul_grad_b(a, g, gb1, d);
    matmul_grad_b(a, g, gb2, d);
    check_close(gb1, gb2);
  }
}

TEST_CASE("parallel bilinear kernels agree with the serial reference") {
  const GridDims d{16, 16, 32};
  const auto grid = random_vec(d.height * d.width * d.channels, 4);
  for (const std::size_t n : {std::size_t{5}, std::size_t{2304}}) {
    const auto pts = random_vec(n * 2, 5, -1.0, 16.0);  // some points clamp
    const auto g = random_vec(n * d.channels, 6);
    std::vector<double> o1(n * d.channels), o2(n * d.channels);
    serial::bilinear_sample(grid, d, pts, o1);
    bilinear_sample(grid, d, pts, o2);
    check_close(o1, o2);

    std::vector<double> gg1(grid.size()), gg2(grid.size()), gp1(pts.size()), gp2(pts.size());
    serial::bilinear_sample_grad(grid, d, pts, g, gg1, gp1);
    bilinear_sample_grad(grid, d, pts, g, gg2, gp2);
    check_close(gg1, gg2);
    check_close(gp1, gp2);
  }
}

TEST_CASE("bilinear sampling identities") {
  const GridDims d{2, 2, 1};
  const std::vector<double> grid{1.0, 3.0, 5.0, 7.0};
  std::vector<double> out(1);
  const std::vector<double> at_center{1.0, 0.0};
  bilinear_sample(grid, d, at_center, out);
  CHECK(out[0] == 3.0);
  const std::vector<double> midway{0.5, 0.0};
  bilinear_sample(grid, d, midway, out);
  CHECK(out[0] == 2.0);
  const std::vector<double> outside{-3.0, 9.0};
  bilinear_sample(grid, d, outside, out);
  CHECK(out[0] == 5.0);

  std::vector<double> gp(2);
  const std::vector<double> g{1.0};
  bilinear_sample_grad(grid, d, outside, g, {}, gp);
  CHECK(gp[0] == 0.0);
  CHECK(gp[1] == 0.0);
}
