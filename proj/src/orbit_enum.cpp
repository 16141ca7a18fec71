#include "toricbar/orbit_enum.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>

#include "toricbar/error.hpp"
#include "toricbar/geometry_detail.hpp"
#include "toricbar/parallel.hpp"

namespace toricbar {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2;
constexpr int kEdgeSupportGrid = 256;
constexpr int kEdgeInvertGrid = 512;
constexpr double kActionDedup = 1e-9;
constexpr double kAngleDedup = 1e-8;
constexpr double kNewtonTol = 1e-12;
constexpr double kNewtonStepTol = 1e-10;
constexpr int kNewtonMaxIter = 100;

Vec embed(const Face& face, int n, const LatticeVec& p) {
  Vec v = Vec::Zero(n);
  for (int k = 0; k < face.dim(); ++k) v[face.index[k]] = static_cast<double>(p[k]);
  return v;
}

Vec edge_point(const Face& face, int n, double phi) {
  Vec t = Vec::Zero(n);
  t[face.index[0]] = std::cos(phi);
  t[face.index[1]] = std::sin(phi);
  return t;
}

double angle_between(const Vec& a, const Vec& b) {
  return 2.0 * std::asin(std::min(1.0, 0.5 * (a / a.norm() - b / b.norm()).norm()));
}

std::string face_name(const Face& face) {
  std::vector<int> one;
  for (int i : face.index) one.push_back(i + 1);
  return fmt::format("{{{}}}", fmt::join(one, ","));
}

// Minimize fn over R^k by Nelder-Mead; fn may return +inf outside the domain.
template <class Fn>
Vec nelder_mead(Fn&& fn, const Vec& x0, double step, double ftol, int max_iter) {
  const int k = static_cast<int>(x0.size());
  std::vector<Vec> pts(k + 1, x0);
  std::vector<double> val(k + 1);
  for (int i = 0; i < k; ++i) pts[i + 1][i] += step;
  for (int i = 0; i <= k; ++i) val[i] = fn(pts[i]);
  std::vector<int> order(k + 1);
  for (int it = 0; it < max_iter; ++it) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return val[a] < val[b]; });
    const int best = order.front(), worst = order.back(), second = order[k - 1];
    if (std::abs(val[worst] - val[best]) <= ftol * std::max(1.0, std::abs(val[best])) &&
        (pts[worst] - pts[best]).norm() < 1e-12) {
      break;
    }
    Vec centroid = Vec::Zero(k);
    for (int i = 0; i <= k; ++i) {
      if (i != worst) centroid += pts[i];
    }
    centroid /= k;
    const Vec xr = centroid + (centroid - pts[worst]);
    const double fr = fn(xr);
    if (fr < val[best]) {
      const Vec xe = centroid + 2.0 * (centroid - pts[worst]);
      const double fe = fn(xe);
      if (fe < fr) {
        pts[worst] = xe;
        val[worst] = fe;
      } else {
        pts[worst] = xr;
        val[worst] = fr;
      }
    } else if (fr < val[second]) {
      pts[worst] = xr;
      val[worst] = fr;
    } else {
      const Vec xc = centroid + 0.5 * (pts[worst] - centroid);
      const double fc = fn(xc);
      if (fc < val[worst]) {
        pts[worst] = xc;
        val[worst] = fc;
      } else {
        for (int i = 0; i <= k; ++i) {
          if (i == best) continue;
          pts[i] = pts[best] + 0.5 * (pts[i] - pts[best]);
          val[i] = fn(pts[i]);
        }
      }
    }
  }
  return pts[static_cast<std::size_t>(std::min_element(val.begin(), val.end()) - val.begin())];
}

// Support over the closed face for an n-vector p supported on the face.
SupportResult support_closed(const ToricDomain& D, const Face& face, const Vec& p, int edge_grid = kEdgeSupportGrid) {
  const int n = D.n();
  const int d = face.dim();
  auto h = [&](const Vec& theta) { return p.dot(theta) / D.gauge(theta); };
  SupportResult out;
  if (d == 1) {
    out.theta = Vec::Zero(n);
    out.theta[face.index[0]] = 1.0;
    out.action = h(out.theta);
    out.interior = true;
    return out;
  }
  if (d == 2) {
    const int N = edge_grid;
    const double dphi = kHalfPi / N;
    std::vector<double> vals(N + 1);
    for (int k = 0; k <= N; ++k) vals[k] = h(edge_point(face, n, k * dphi));
    const int kb = static_cast<int>(std::max_element(vals.begin(), vals.end()) - vals.begin());
    const double lo = std::max(0.0, (kb - 1) * dphi), hi = std::min(kHalfPi, (kb + 1) * dphi);
    auto [phi, negv] = boost::math::tools::brent_find_minima(
        [&](double x) { return -h(edge_point(face, n, x)); }, lo, hi, std::numeric_limits<double>::digits / 2);
    double best = -negv;
    double best_phi = phi;
    if (vals[kb] >= best) {
      best = vals[kb];
      best_phi = kb * dphi;
    }
    out.action = best;
    out.theta = edge_point(face, n, best_phi);
    const double boundary = std::max(vals.front(), vals.back());
    const double near = best - 1e-10 * std::max(1.0, std::abs(best));
    int first = -1, last = -1;
    bool inner = false;
    for (int k = 0; k <= N; ++k) {
      if (vals[k] >= near) {
        if (first < 0) first = k;
        last = k;
        inner |= (k > 0 && k < N);
      }
    }
    if (first >= 0 && last - first > 2.5 && inner) {
      out.unique = false;
      out.interior = true;
      return out;
    }
    out.interior = best > boundary + 1e-12 * std::max(1.0, std::abs(best)) && best_phi > 1e-9 &&
                   best_phi < kHalfPi - 1e-9;
    return out;
  }
  // d >= 3: boundary through the facets, interior by grid + Nelder-Mead in
  // the barycentric chart u_1..u_{d-1}.
  double boundary = -std::numeric_limits<double>::infinity();
  for (int skip = 0; skip < d; ++skip) {
    Face sub;
    for (int k = 0; k < d; ++k) {
      if (k != skip) sub.index.push_back(face.index[k]);
    }
    Vec ps = Vec::Zero(n);
    for (int i : sub.index) ps[i] = p[i];
    boundary = std::max(boundary, support_closed(D, sub, ps, 64).action);  // value only
  }
  const int M = d == 3 ? 24 : 10;
  auto theta_of = [&](const Vec& u) -> std::optional<Vec> {
    Vec full(d);
    double rest = 1.0;
    for (int k = 0; k < d - 1; ++k) {
      if (u[k] < 0.0) return std::nullopt;
      full[k] = u[k];
      rest -= u[k];
    }
    if (rest < 0.0) return std::nullopt;
    full[d - 1] = rest;
    return face_point(face, n, full);
  };
  std::vector<std::pair<std::vector<int>, double>> grid;
  double gbest = -std::numeric_limits<double>::infinity();
  Vec ubest;
  detail::for_each_composition(d, M, [&](const std::vector<int>& k) {
    Vec u(d);
    for (int i = 0; i < d; ++i) u[i] = static_cast<double>(k[i]) / M;
    const double v = h(face_point(face, n, u));
    grid.emplace_back(k, v);
    if (v > gbest) {
      gbest = v;
      ubest = u.head(d - 1);
    }
  });
  const Vec u = nelder_mead(
      [&](const Vec& x) {
        const auto t = theta_of(x);
        return t ? -h(*t) : std::numeric_limits<double>::infinity();
      },
      ubest, 0.5 / M, 1e-15, 400);
  const Vec theta = *theta_of(u);
  double best = h(theta);
  out.theta = theta;
  if (gbest > best) {
    best = gbest;
    Vec full(d);
    full.head(d - 1) = ubest;
    full[d - 1] = 1.0 - ubest.sum();
    out.theta = face_point(face, n, full);
  }
  out.action = std::max(best, boundary);
  const double near = out.action - 1e-10 * std::max(1.0, std::abs(out.action));
  std::vector<int> lo(d, M), hi(d, 0);
  bool inner = false;
  int count = 0;
  for (const auto& [k, v] : grid) {
    if (v < near) continue;
    ++count;
    bool interior_pt = true;
    for (int i = 0; i < d; ++i) {
      lo[i] = std::min(lo[i], k[i]);
      hi[i] = std::max(hi[i], k[i]);
      interior_pt &= k[i] > 0;
    }
    inner |= interior_pt;
  }
  int spread = 0;
  for (int i = 0; i < d; ++i) spread = std::max(spread, hi[i] - lo[i]);
  if (count > 1 && spread > 2.5 && inner) {
    out.unique = false;
    out.interior = true;
    return out;
  }
  out.interior = best > boundary + 1e-12 * std::max(1.0, std::abs(best)) && out.theta.minCoeff() >= 0.0;
  for (int i : face.index) out.interior = out.interior && out.theta[i] > 1e-9;
  return out;
}

// Multistart Gauss inversion for one face, with the start grid cached across
// directions.
class GaussInverter {
 public:
  GaussInverter(const ToricDomain& D, const Face& face, InvertOptions opt) : D_(D), face_(face) {
    const int d = face.dim();
    if (d == 2) {
      N_ = opt.grid > 0 ? opt.grid : kEdgeInvertGrid;
      for (int k = 0; k <= N_; ++k) {
        const double phi = k * kHalfPi / N_;
        const Vec G = detail::face_geometry(D, face, edge_point(face, D.n(), phi)).gauss;
        psi_.push_back(std::atan2(G[face.index[1]], G[face.index[0]]));
      }
    } else if (d >= 3) {
      N_ = opt.grid > 0 ? opt.grid : (d == 3 ? 16 : 8);
      detail::for_each_composition(d, N_, [&](const std::vector<int>& k) {
        if (std::find(k.begin(), k.end(), 0) != k.end()) return;
        Vec u(d);
        for (int i = 0; i < d; ++i) u[i] = static_cast<double>(k[i]) / N_;
        const Vec th = face_point(face, D.n(), u);
        starts_.push_back(th);
        start_gauss_.push_back(detail::face_geometry(D, face, th).gauss);
        start_comp_.push_back(k);
      });
    }
  }

  GaussPreimages solve(const Vec& v) const {
    const int d = face_.dim();
    GaussPreimages out;
    if (d == 1) {
      if (v[face_.index[0]] > 0.5) {
        Vec e = Vec::Zero(D_.n());
        e[face_.index[0]] = 1.0;
        out.thetas.push_back(e);
      }
      return out;
    }
    if (d == 2) {
      solve_edge(v, out);
    } else {
      solve_newton(v, out);
    }
    // dedupe
    std::vector<Vec> uniq;
    for (const Vec& t : out.thetas) {
      bool dup = false;
      for (const Vec& u : uniq) dup |= angle_between(t, u) < kAngleDedup;
      if (!dup) uniq.push_back(t);
    }
    out.thetas = std::move(uniq);
    return out;
  }

 private:
  double psi_at(double phi) const {
    const Vec G = detail::face_geometry(D_, face_, edge_point(face_, D_.n(), phi)).gauss;
    return std::atan2(G[face_.index[1]], G[face_.index[0]]);
  }

  void solve_edge(const Vec& v, GaussPreimages& out) const {
    const int n = D_.n();
    const double target = std::atan2(v[face_.index[1]], v[face_.index[0]]);
    const double dphi = kHalfPi / N_;
    auto r = [&](double phi) { return psi_at(phi) - target; };
    std::vector<double> rv(psi_.size());
    for (std::size_t k = 0; k < psi_.size(); ++k) rv[k] = psi_[k] - target;
    out.best_residual = std::numeric_limits<double>::infinity();
    for (double x : rv) out.best_residual = std::min(out.best_residual, std::abs(x));
    auto accept = [&](double phi) {
      if (phi > 1e-9 && phi < kHalfPi - 1e-9) out.thetas.push_back(edge_point(face_, n, phi));
    };
    for (int k = 0; k < N_; ++k) {
      const double a = k * dphi, b = (k + 1) * dphi;
      if (rv[k] == 0.0) {
        accept(a);
        continue;
      }
      if ((rv[k] < 0.0) != (rv[k + 1] < 0.0) && rv[k + 1] != 0.0) {
        std::uintmax_t iters = 100;
        auto [x0, x1] = boost::math::tools::toms748_solve(r, a, b, rv[k], rv[k + 1],
                                                          boost::math::tools::eps_tolerance<double>(52), iters);
        const double phi = std::abs(r(x0)) <= std::abs(r(x1)) ? x0 : x1;
        out.best_residual = std::min(out.best_residual, std::abs(r(phi)));
        accept(phi);
      }
    }
    if (rv[N_] == 0.0) accept(N_ * dphi);
    // roots where the residual touches zero without changing sign
    for (int k = 1; k < N_; ++k) {
      const double ak = std::abs(rv[k]);
      if (ak > 1e-3 || ak > std::abs(rv[k - 1]) || ak > std::abs(rv[k + 1])) continue;
      if ((rv[k - 1] < 0.0) != (rv[k] < 0.0) || (rv[k + 1] < 0.0) != (rv[k] < 0.0)) continue;
      auto [phi, val] = boost::math::tools::brent_find_minima([&](double x) { return std::abs(r(x)); },
                                                              (k - 1) * dphi, (k + 1) * dphi,
                                                              std::numeric_limits<double>::digits / 2);
      out.best_residual = std::min(out.best_residual, val);
      if (val < 1e-10) accept(phi);
    }
  }

  void solve_newton(const Vec& v, GaussPreimages& out) const {
    const int n = D_.n();
    const int d = face_.dim();
    const Mat B = detail::tangent_frame(face_, v);  // basis of v-perp in V_face
    auto residual = [&](const Vec& th, double* along) {
      const Vec G = detail::face_geometry(D_, face_, th).gauss;
      if (along) *along = G.dot(v);
      return Vec(B.transpose() * G);
    };
    auto open = [&](const Vec& th) {
      for (int i : face_.index) {
        if (!(th[i] > 0.0)) return false;
      }
      return true;
    };
    // starts: the best few grid points by angle plus local minima of the angle
    std::vector<double> ang(starts_.size());
    for (std::size_t i = 0; i < starts_.size(); ++i) ang[i] = angle_between(start_gauss_[i], v);
    std::vector<std::size_t> order(starts_.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return ang[a] < ang[b]; });
    std::vector<std::size_t> chosen;
    for (std::size_t i = 0; i < std::min<std::size_t>(3, order.size()); ++i) chosen.push_back(order[i]);
    for (std::size_t i = 0; i < starts_.size() && chosen.size() < 12; ++i) {
      if (ang[i] > 0.3 || std::find(chosen.begin(), chosen.end(), i) != chosen.end()) continue;
      bool local_min = true;
      for (std::size_t j = 0; j < starts_.size() && local_min; ++j) {
        int dist = 0;
        for (int a = 0; a < d; ++a) dist += std::abs(start_comp_[i][a] - start_comp_[j][a]);
        if (dist == 2 && ang[j] < ang[i]) local_min = false;
      }
      if (local_min) chosen.push_back(i);
    }
    out.best_residual = std::numeric_limits<double>::infinity();
    double best_min_coord = 0.0;
    auto newton_step = [&](const Vec& th, const Vec& r, Mat& F) {
      F = detail::tangent_frame(face_, th);
      const double hstep = 1e-7;
      Mat J(d - 1, d - 1);
      for (int k = 0; k < d - 1; ++k) {
        const Vec tp = (th + hstep * F.col(k)).normalized();
        const Vec tm = (th - hstep * F.col(k)).normalized();
        J.col(k) = (residual(tp, nullptr) - residual(tm, nullptr)) / (2 * hstep);
      }
      return Vec(J.colPivHouseholderQr().solve(-r));
    };
    for (std::size_t s : chosen) {
      Vec th = starts_[s];
      double along = 0.0;
      Vec r = residual(th, &along);
      Mat F;
      double last_step = std::numeric_limits<double>::infinity();
      for (int it = 0; it < kNewtonMaxIter; ++it) {
        Vec w = newton_step(th, r, F);
        if (!w.allFinite()) break;
        last_step = w.norm();
        // converged in position, not only in residual: where G is flat at the
        // face boundary the residual gets tiny long before theta settles
        if (r.norm() < kNewtonTol && last_step < kNewtonStepTol) break;
        if (w.norm() > 0.3) w *= 0.3 / w.norm();
        bool moved = false;
        for (int bt = 0; bt < 30; ++bt) {
          const Vec cand = (th + F * w).normalized();
          if (open(cand)) {
            double al = 0.0;
            const Vec rc = residual(cand, &al);
            if (rc.norm() <= r.norm()) {
              th = cand;
              r = rc;
              along = al;
              moved = true;
              break;
            }
          }
          w *= 0.5;
        }
        if (!moved) break;
      }
      double min_coord = 1.0;
      for (int i : face_.index) min_coord = std::min(min_coord, th[i]);
      if (r.norm() < out.best_residual) {
        out.best_residual = r.norm();
        best_min_coord = min_coord;
      }
      if (!(r.norm() < kNewtonTol && last_step < kNewtonStepTol && along > 0.0 && min_coord > 1e-9)) continue;
      if (min_coord < 1e-3) {
        // Reject the limit of a root sitting on the face boundary: if
        // dropping the tiny coordinates still maps onto v, the direction
        // belongs to the boundary image.
        Vec tb = th;
        for (int i : face_.index) {
          if (tb[i] < 1e-3) tb[i] = 0.0;
        }
        tb.normalize();
        if (angle_between(detail::face_geometry(D_, face_, tb).gauss, v) < 1e-8) continue;
      }
      out.thetas.push_back(th);
    }
    if (out.thetas.empty() && out.best_residual < 1e-4 && best_min_coord > 1e-3) out.incomplete = true;
  }

  const ToricDomain& D_;
  Face face_;
  int N_ = 0;
  std::vector<double> psi_;
  std::vector<Vec> starts_;
  std::vector<Vec> start_gauss_;
  std::vector<std::vector<int>> start_comp_;
};

// Directions covered by G over the closed face, with a sampling margin.
class DirectionCone {
 public:
  DirectionCone(const ToricDomain& D, const Face& face) : d_(face.dim()) {
    const int n = D.n();
    if (d_ == 2) {
      const int N = 1024;
      double prev = 0.0;
      for (int k = 0; k <= N; ++k) {
        const Vec G = detail::face_geometry(D, face, edge_point(face, n, k * kHalfPi / N)).gauss;
        const double a = std::atan2(G[face.index[1]], G[face.index[0]]);
        lo_ = std::min(lo_, a);
        hi_ = std::max(hi_, a);
        if (k > 0) gap_ = std::max(gap_, std::abs(a - prev));
        prev = a;
      }
      lo_ -= gap_ + 1e-9;
      hi_ += gap_ + 1e-9;
      return;
    }
    const int M = d_ == 3 ? 40 : 10;
    std::vector<std::vector<int>> comps;
    detail::for_each_composition(d_, M, [&](const std::vector<int>& k) {
      Vec u(d_);
      for (int i = 0; i < d_; ++i) u[i] = static_cast<double>(k[i]) / M;
      const Vec G = detail::face_geometry(D, face, face_point(face, n, u)).gauss;
      Vec g(d_);
      for (int i = 0; i < d_; ++i) g[i] = G[face.index[i]];
      samples_.push_back(g);
      comps.push_back(k);
    });
    radius_.assign(samples_.size(), 0.0);
    for (std::size_t idx = 0; idx < comps.size(); ++idx) {
      for (int a = 0; a < d_; ++a) {
        for (int b = 0; b < d_; ++b) {
          if (a == b || comps[idx][b] == 0) continue;
          auto nb = comps[idx];
          ++nb[a];
          --nb[b];
          const std::size_t j = detail::composition_rank(nb, M);
          const double ang = angle_between(samples_[idx], samples_[j]);
          radius_[idx] = std::max(radius_[idx], ang);
        }
      }
    }
    double rmax = 0.0;
    for (double& r : radius_) {
      r = 1.5 * r + 1e-9;
      rmax = std::max(rmax, r);
    }
    lower_.assign(d_, 1.0);
    for (const Vec& g : samples_) {
      for (int i = 0; i < d_; ++i) lower_[i] = std::min(lower_[i], g[i]);
    }
    for (double& l : lower_) l -= rmax;
  }

  bool contains(const Vec& v) const {
    if (d_ == 2) {
      const double a = std::atan2(v[1], v[0]);
      return a >= lo_ && a <= hi_;
    }
    const Vec u = v / v.norm();
    for (int i = 0; i < d_; ++i) {
      if (u[i] < lower_[i]) return false;
    }
    for (std::size_t k = 0; k < samples_.size(); ++k) {
      if (angle_between(u, samples_[k]) <= radius_[k]) return true;
    }
    return false;
  }

 private:
  int d_;
  double lo_ = std::numeric_limits<double>::infinity();
  double hi_ = -std::numeric_limits<double>::infinity();
  double gap_ = 0.0;
  std::vector<Vec> samples_;
  std::vector<double> radius_;
  std::vector<double> lower_;
};

long gcd_all(const LatticeVec& p) {
  long g = 0;
  for (long x : p) g = std::gcd(g, std::abs(x));
  return g;
}

// Primitive p in Z^d with 0 < |p| <= R accepted by the cone.
std::vector<LatticeVec> primitive_candidates(int d, double R, const DirectionCone& cone) {
  std::vector<LatticeVec> out;
  const long B = static_cast<long>(std::floor(R + 1e-9));
  LatticeVec p(d, -B);
  const double R2 = R * R * (1 + 1e-12);
  for (;;) {
    double n2 = 0.0;
    for (long x : p) n2 += static_cast<double>(x) * static_cast<double>(x);
    if (n2 > 0.0 && n2 <= R2) {
      Vec v(d);
      for (int i = 0; i < d; ++i) v[i] = static_cast<double>(p[i]);
      if (gcd_all(p) == 1 && cone.contains(v)) out.push_back(p);
    }
    int i = 0;
    while (i < d && p[i] == B) p[i++] = -B;
    if (i == d) break;
    ++p[i];
  }
  return out;
}

int default_m_resolution(int n) { return n <= 2 ? 512 : (n == 3 ? 96 : 24); }

struct BaseClass {
  double action;
  bool degenerate;
  std::optional<Vec> theta;
};

}  // namespace

SupportResult support_action(const ToricDomain& domain, const Face& face, const LatticeVec& p) {
  if (!domain.flags().convex) {
    throw Error(ErrorKind::Unsupported, "support_action needs a convex descriptor; use invert_gauss");
  }
  if (static_cast<int>(p.size()) != face.dim()) {
    throw Error(ErrorKind::InvalidParameter, "p must have one coordinate per face index");
  }
  if (std::all_of(p.begin(), p.end(), [](long x) { return x == 0; })) {
    throw Error(ErrorKind::InvalidParameter, "p must be nonzero");
  }
  return support_closed(domain, face, embed(face, domain.n(), p));
}

GaussPreimages invert_gauss(const ToricDomain& domain, const Face& face, const Vec& v, InvertOptions options) {
  if (!domain.smooth()) throw Error(ErrorKind::Unsupported, "Gauss map of a nonsmooth descriptor");
  if (v.size() != domain.n() || std::abs(v.norm() - 1.0) > 1e-10) {
    throw Error(ErrorKind::InvalidParameter, "v must be a unit vector");
  }
  for (int i = 0; i < v.size(); ++i) {
    if (!std::binary_search(face.index.begin(), face.index.end(), i) && v[i] != 0.0) {
      throw Error(ErrorKind::InvalidParameter, "v must lie in the span of the face");
    }
  }
  return GaussInverter(domain, face, options).solve(v);
}

double gauss_jacobian_min_sv(const ToricDomain& domain, const Face& face, const Vec& theta) {
  const int d = face.dim();
  if (d == 1) return 1.0;
  const Vec G = detail::face_geometry(domain, face, theta).gauss;
  const Mat F = detail::tangent_frame(face, theta);
  const Mat FG = detail::tangent_frame(face, G);
  const double h = 1e-6;
  Mat J(d - 1, d - 1);
  for (int k = 0; k < d - 1; ++k) {
    const Vec gp = detail::face_geometry(domain, face, (theta + h * F.col(k)).normalized()).gauss;
    const Vec gm = detail::face_geometry(domain, face, (theta - h * F.col(k)).normalized()).gauss;
    J.col(k) = FG.transpose() * (gp - gm) / (2 * h);
  }
  return Eigen::JacobiSVD<Mat>(J).singularValues().minCoeff();
}

Spectrum enumerate_spectrum(const ToricDomain& domain, double s_max, EnumOptions options) {
  if (!(s_max > 0.0) || !std::isfinite(s_max)) {
    throw Error(ErrorKind::InvalidParameter, fmt::format("s_max must be positive and finite, got {}", s_max));
  }
  if (!domain.smooth()) throw Error(ErrorKind::Unsupported, "orbit enumeration needs a smooth descriptor");
  EnumMethod method = options.method;
  if (method == EnumMethod::Auto) method = domain.flags().convex ? EnumMethod::Support : EnumMethod::Gauss;
  if (method == EnumMethod::Support && !domain.flags().convex) {
    throw Error(ErrorKind::Unsupported, "support enumeration needs a convex descriptor");
  }
  const int n = domain.n();
  Spectrum out;
  out.s_max = s_max;
  out.m = m_bounds(domain, options.m_resolution > 0 ? options.m_resolution : default_m_resolution(n));
  const double s_cap = s_max * (1 + 1e-12);
  bool any_degenerate = false;
  for (const FaceConstants& fc : out.m.faces) {
    const Face& face = fc.face;
    const int d = face.dim();
    if (d == 1) {
      Vec e = Vec::Zero(n);
      e[face.index[0]] = 1.0;
      const double T = domain.radial(e);
      for (long k = 1; k * T <= s_cap; ++k) out.classes.push_back({face, {k}, k * T, k == 1, false, e});
      continue;
    }
    const DirectionCone cone(domain, face);
    const auto cands = primitive_candidates(d, s_max / fc.m_delta, cone);
    std::optional<GaussInverter> inverter;
    if (method == EnumMethod::Gauss) inverter.emplace(domain, face, options.invert);
    std::vector<std::vector<BaseClass>> found(cands.size());
    std::vector<char> incomplete(cands.size(), 0);
    parallel_for(cands.size(), [&](std::size_t i) {
      const LatticeVec& p = cands[i];
      const Vec pv = embed(face, n, p);
      if (method == EnumMethod::Support) {
        const SupportResult sr = support_closed(domain, face, pv);
        if (sr.interior && sr.action > 0.0) {
          found[i].push_back({sr.action, !sr.unique, sr.unique ? std::optional<Vec>(sr.theta) : std::nullopt});
        }
      } else {
        const GaussPreimages pre = inverter->solve(pv / pv.norm());
        incomplete[i] = pre.incomplete;
        for (const Vec& th : pre.thetas) {
          found[i].push_back({pv.norm() * detail::face_geometry(domain, face, th).period, false, th});
        }
      }
    });
    for (std::size_t i = 0; i < cands.size(); ++i) {
      if (incomplete[i]) {
        out.warnings.push_back(fmt::format("incomplete Gauss inversion on face {} for p = ({})", face_name(face),
                                           fmt::join(cands[i], ", ")));
      }
      for (const BaseClass& b : found[i]) {
        any_degenerate |= b.degenerate;
        for (long k = 1; k * b.action <= s_cap; ++k) {
          LatticeVec kp = cands[i];
          for (long& x : kp) x *= k;
          out.classes.push_back({face, std::move(kp), k * b.action, k == 1, b.degenerate, b.theta});
        }
      }
    }
  }
  if (any_degenerate) {
    out.warnings.push_back("degenerate (flat) classes present; each is counted with weight 2^d");
  }
  std::sort(out.classes.begin(), out.classes.end(), [](const OrbitClass& a, const OrbitClass& b) {
    if (a.action != b.action) return a.action < b.action;
    if (a.face != b.face) return a.face < b.face;
    return a.p < b.p;
  });
  return out;
}

GeneratorCount count_generators(const Spectrum& spectrum, double s) {
  if (s > spectrum.s_max * (1 + 1e-12)) {
    throw Error(ErrorKind::InvalidParameter,
                fmt::format("s = {} exceeds the enumerated range {}", s, spectrum.s_max));
  }
  GeneratorCount out;
  out.s = s;
  bool degenerate = false;
  const double cap = s * (1 + 1e-12);  // same slack as the enumeration cap
  for (const OrbitClass& c : spectrum.classes) {
    if (c.action > cap) break;
    ++out.per_face[c.face];
    out.total_generators += std::uint64_t{1} << c.face.dim();
    degenerate |= c.degenerate;
  }
  if (degenerate) {
    out.caveats.push_back("degenerate classes counted with the Morse-Bott weight 2^d of a nondegenerate torus");
  }
  return out;
}

GeneratorCount generator_count(const ToricDomain& domain, double s, EnumOptions options) {
  if (!(s > 0.0) || !std::isfinite(s)) {
    throw Error(ErrorKind::InvalidParameter, fmt::format("s must be positive and finite, got {}", s));
  }
  const Spectrum sp = enumerate_spectrum(domain, s + 2 * kActionDedup, options);
  for (const OrbitClass& c : sp.classes) {
    if (std::abs(c.action - s) <= kActionDedup) {
      throw Error(ErrorKind::SpectralValue,
                  fmt::format("s = {} collides with the action {:.12g} of p = ({}) on face {}", s, c.action,
                              fmt::join(c.p, ", "), face_name(c.face)));
    }
  }
  GeneratorCount out = count_generators(sp, s);
  for (const auto& w : sp.warnings) out.caveats.push_back(w);
  return out;
}

double lattice_remainder(int d, double C) {
  const double V = std::pow(std::numbers::pi, d / 2.0) / boost::math::tgamma(d / 2.0 + 1.0);
  if (!(C > V)) {
    throw Error(ErrorKind::InvalidParameter, fmt::format("C = {} does not exceed the unit-ball volume {}", C, V));
  }
  const double a = std::sqrt(static_cast<double>(d)) / 2.0;
  double best = V * std::pow(a, d);  // R = 0
  if (d >= 2) {
    const double q = std::pow(C / V, 1.0 / (d - 1));
    const double R = a / (q - 1.0);
    best = std::max(best, V * std::pow(R + a, d) - C * std::pow(R, d));
  }
  return best;
}

BoundCertificate certify_bound(const Spectrum& sp, int n, std::vector<double> s_list, double fiber_bound) {
  if (s_list.empty()) throw Error(ErrorKind::InvalidParameter, "certify_bound needs at least one s");
  for (double s : s_list) {
    if (!(s > 0.0) || !std::isfinite(s)) throw Error(ErrorKind::InvalidParameter, "s values must be positive");
  }
  if (!(fiber_bound >= 1.0)) throw Error(ErrorKind::InvalidParameter, "fiber bound must be >= 1");
  std::sort(s_list.begin(), s_list.end());
  BoundCertificate cert;
  cert.m_used = sp.m.m;
  cert.fiber_bound = fiber_bound;
  const double faces = std::ldexp(1.0, n) - 1.0;
  cert.C_n = std::ldexp(1.0, n) * faces * cert.C * std::pow(cert.m_used, -n) * fiber_bound;
  cert.C_0 = 1.0;
  for (const FaceConstants& fc : sp.m.faces) {
    cert.C_0 += std::ldexp(1.0, fc.face.dim()) * fiber_bound * (cert.C + lattice_remainder(fc.face.dim(), cert.C));
  }
  cert.ok = true;
  for (double s : s_list) {
    const auto g = count_generators(sp, s);
    const double bound = cert.C_n * std::pow(s, n) + cert.C_0;
    cert.checks.push_back({s, g.total_generators, bound});
    cert.ok = cert.ok && static_cast<double>(g.total_generators) <= bound;
  }
  cert.checked_up_to = s_list.back();
  if (s_list.size() >= 2 && s_list.front() < s_list.back()) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& c : cert.checks) {
      const double x = std::log(c.s), y = std::log(static_cast<double>(c.generators));
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double k = static_cast<double>(cert.checks.size());
    cert.fitted_degree = (k * sxy - sx * sy) / (k * sxx - sx * sx);
  }
  return cert;
}

BoundCertificate certify_bound(const ToricDomain& domain, std::vector<double> s_list, double fiber_bound,
                               EnumOptions options) {
  if (s_list.empty()) throw Error(ErrorKind::InvalidParameter, "certify_bound needs at least one s");
  const double top = *std::max_element(s_list.begin(), s_list.end());
  if (!(top > 0.0) || !std::isfinite(top)) throw Error(ErrorKind::InvalidParameter, "s values must be positive");
  return certify_bound(enumerate_spectrum(domain, top, options), domain.n(), std::move(s_list), fiber_bound);
}

namespace {

struct RegularityReport {
  double worst_sv = std::numeric_limits<double>::infinity();
  int fiber = 0;
  std::string worst;
};

RegularityReport regularity(const ToricDomain& D, double R, const InvertOptions& opt) {
  RegularityReport rep;
  for (const Face& face : enumerate_faces(D.n())) {
    const int d = face.dim();
    if (d == 1) {
      rep.fiber = std::max(rep.fiber, 1);
      continue;
    }
    const DirectionCone cone(D, face);
    const GaussInverter inv(D, face, opt);
    for (const LatticeVec& p : primitive_candidates(d, R, cone)) {
      const Vec pv = embed(face, D.n(), p);
      const GaussPreimages pre = inv.solve(pv / pv.norm());
      rep.fiber = std::max(rep.fiber, static_cast<int>(pre.thetas.size()));
      for (const Vec& th : pre.thetas) {
        const double sv = gauss_jacobian_min_sv(D, face, th);
        if (sv < rep.worst_sv) {
          rep.worst_sv = sv;
          rep.worst = fmt::format("face {}, p = ({})", face_name(face), fmt::join(p, ", "));
        }
      }
    }
  }
  return rep;
}

}  // namespace

Regularization regularize_analytic(const ToricDomain& domain, double s_max, std::uint64_t seed,
                                   RegularizeOptions options) {
  if (!domain.flags().analytic || !domain.smooth()) {
    throw Error(ErrorKind::InvalidParameter, "regularize_analytic needs a real-analytic descriptor");
  }
  if (!(s_max > 0.0)) throw Error(ErrorKind::InvalidParameter, "s_max must be positive");
  const int n = domain.n();
  const double R = s_max / m_bounds(domain, default_m_resolution(n)).m;
  Regularization out;
  out.lambda = Mat::Identity(n, n);
  RegularityReport rep = regularity(domain, R, options.invert);
  out.worst_singular_value = rep.worst_sv;
  out.fiber_bound = rep.fiber;
  if (rep.worst_sv >= options.threshold) return out;
  std::string worst = rep.worst;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N(0.0, options.angle_scale);
  for (int t = 1; t <= options.max_tries; ++t) {
    // small rotation in each face span, composed over the faces in order
    Mat lambda = Mat::Identity(n, n);
    for (const Face& face : enumerate_faces(n)) {
      if (face.dim() < 2) continue;
      Mat S = Mat::Zero(n, n);
      for (int a = 0; a < face.dim(); ++a) {
        for (int b = a + 1; b < face.dim(); ++b) {
          const double x = N(rng) / face.dim();
          S(face.index[a], face.index[b]) = x;
          S(face.index[b], face.index[a]) = -x;
        }
      }
      const Mat I = Mat::Identity(n, n);
      const Mat cayley = (I - S).lu().solve(I + S);
      lambda = cayley * lambda;
    }
    std::optional<ToricDomain> Dl;
    try {
      Dl.emplace(domain.rotated(lambda));
    } catch (const Error&) {
      continue;
    }
    rep = regularity(*Dl, R, options.invert);
    out.tries = t;
    if (rep.worst_sv >= options.threshold) {
      out.lambda = lambda;
      out.worst_singular_value = rep.worst_sv;
      out.fiber_bound = rep.fiber;
      return out;
    }
    worst = rep.worst;
  }
  throw Error(ErrorKind::NoRegularPerturbation,
              fmt::format("no regular rotation found in {} tries; worst direction {}", options.max_tries, worst));
}

nlohmann::json spectrum_to_json(const Spectrum& spectrum) {
  nlohmann::json classes = nlohmann::json::array();
  for (const OrbitClass& c : spectrum.classes) {
    nlohmann::json face = nlohmann::json::array();
    for (int i : c.face.index) face.push_back(i + 1);
    nlohmann::json j{{"face", face},           {"p", c.p},
                     {"action", c.action},     {"primitive", c.primitive},
                     {"degenerate", c.degenerate}};
    if (c.theta) j["theta"] = std::vector<double>(c.theta->data(), c.theta->data() + c.theta->size());
    classes.push_back(std::move(j));
  }
  return {{"s_max", spectrum.s_max}, {"m", spectrum.m.m}, {"classes", classes}, {"warnings", spectrum.warnings}};
}

}  // namespace toricbar
