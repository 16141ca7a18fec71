#pragma once

// Brute-force references for orbit enumeration: plain lattice scans with
// closed-form support functions, no Gauss map involved.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

namespace oracle {

struct LatticeClass {
  std::vector<int> face;
  std::vector<long> p;
  double action;
  bool degenerate;
};

// Calls fn(p) for every p in Z^d with all components >= 1 and |p| <= R.
inline void for_each_positive_point(int d, double R, const std::function<void(const std::vector<long>&)>& fn) {
  std::vector<long> p(d, 1);
  const long top = static_cast<long>(std::floor(R));
  std::function<void(int, double)> rec = [&](int k, double used) {
    if (k == d) {
      fn(p);
      return;
    }
    for (long x = 1; x <= top; ++x) {
      const double u = used + double(x) * double(x);
      if (u > R * R + 1e-9) break;
      p[k] = x;
      rec(k + 1, u);
    }
  };
  rec(0, 0.0);
}

inline void for_each_face(int n, const std::function<void(const std::vector<int>&)>& fn) {
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    std::vector<int> face;
    for (int i = 0; i < n; ++i)
      if (mask & (1u << i)) face.push_back(i);
    fn(face);
  }
}

// Round ball of radius R: the support function is R|p| and every positive
// direction is a normal at an interior point.
inline std::vector<LatticeClass> ball_spectrum(int n, double R, double s_max) {
  std::vector<LatticeClass> out;
  for_each_face(n, [&](const std::vector<int>& face) {
    for_each_positive_point(static_cast<int>(face.size()), s_max / R, [&](const std::vector<long>& p) {
      double q = 0;
      for (long x : p) q += double(x) * double(x);
      const double a = R * std::sqrt(q);
      if (a <= s_max * (1 + 1e-12)) out.push_back({face, p, a, false});
    });
  });
  return out;
}

// Simplex sum x_i / a_i <= 1: the support function of p is max_i p_i a_i,
// attained at a vertex.  An interior face class exists only when the maximum
// is shared by every coordinate of the face, and then the maximizer is the
// whole face (degenerate).
inline std::vector<LatticeClass> simplex_spectrum(const std::vector<double>& a, double s_max) {
  const int n = static_cast<int>(a.size());
  std::vector<LatticeClass> out;
  for_each_face(n, [&](const std::vector<int>& face) {
    // max_i p_i a_i <= s bounds each coordinate separately
    const int d = static_cast<int>(face.size());
    std::vector<long> p(d, 1);
    std::function<void(int)> rec = [&](int k) {
      if (k == d) {
        double hi = 0, lo = INFINITY;
        for (int j = 0; j < d; ++j) {
          hi = std::max(hi, p[j] * a[face[j]]);
          lo = std::min(lo, p[j] * a[face[j]]);
        }
        if (d == 1 || hi - lo <= 1e-9 * hi) out.push_back({face, p, hi, d > 1});
        return;
      }
      for (p[k] = 1; p[k] * a[face[k]] <= s_max * (1 + 1e-12); ++p[k]) rec(k + 1);
    };
    rec(0);
  });
  return out;
}

}  // namespace oracle
