#pragma once

// Internal helpers shared by the geometric modules.  Not a stable interface.

#include <cstdint>
#include <memory>
#include <vector>

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>

#include "toricbar/toric_geometry.hpp"

namespace toricbar::detail {

struct GridSpline {
  boost::math::interpolators::cardinal_cubic_b_spline<double> s;
};

std::shared_ptr<const GridSpline> make_grid_spline(const std::vector<double>& values);

struct FaceGeometry {
  double f = 0.0;
  Vec spherical_gradient;
  Vec gauss;
  double period = 0.0;
};

// No smoothness or open-face checks: also valid on the closure of the face,
// where it evaluates the formulas of the given face.
FaceGeometry face_geometry(const ToricDomain& domain, const Face& face, const Vec& theta);

bool in_open_face(const Face& face, const Vec& theta, double tol);

// Orthonormal basis of the tangent space of the face sphere at theta, as the
// columns of an n x (d-1) matrix.
Mat tangent_frame(const Face& face, const Vec& theta);

inline std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Compositions k of N into d nonnegative parts, lexicographic order.
template <class Fn>
void for_each_composition(int d, int N, Fn&& fn) {
  std::vector<int> k(d, 0);
  auto rec = [&](auto&& self, int pos, int remaining) -> void {
    if (pos == d - 1) {
      k[pos] = remaining;
      fn(static_cast<const std::vector<int>&>(k));
      return;
    }
    for (int v = 0; v <= remaining; ++v) {
      k[pos] = v;
      self(self, pos + 1, remaining - v);
    }
  };
  rec(rec, 0, N);
}

// Position of k in the for_each_composition order.
inline std::size_t composition_rank(const std::vector<int>& k, int N) {
  const int d = static_cast<int>(k.size());
  std::uint64_t rank = 0;
  std::uint64_t remaining = static_cast<std::uint64_t>(N);
  for (int a = 0; a + 1 < d; ++a) {
    const std::uint64_t r = static_cast<std::uint64_t>(d - a);
    // compositions of remaining into r parts whose first part is < k[a]
    rank += binomial(remaining + r - 1, r - 1) - binomial(remaining - k[a] + r - 1, r - 1);
    remaining -= static_cast<std::uint64_t>(k[a]);
  }
  return static_cast<std::size_t>(rank);
}

}  // namespace toricbar::detail
