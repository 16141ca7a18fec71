#include "toricbar/toric_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <fmt/format.h>

#include "toricbar/error.hpp"
#include "toricbar/geometry_detail.hpp"

namespace toricbar {

namespace {

constexpr double kSphereTol = 1e-12;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorKind::InvalidParameter, what);
}

bool even_integer(double p) { return p == std::round(p) && std::fmod(p, 2.0) == 0.0; }

double rolled_root(const RolledDisk& d, double ct, double c2) {
  const double disc = std::max(0.0, ct * ct - c2 + d.rho * d.rho);
  return d.plus ? ct + std::sqrt(disc) : ct - std::sqrt(disc);
}

double grid_value(const RadialGrid& g, const detail::GridSpline* spline, double phi, double* slope) {
  const std::size_t m = g.values.size() - 1;
  const double h = (std::numbers::pi / 2) / static_cast<double>(m);
  if (spline) {
    if (slope) *slope = spline->s.prime(phi);
    return spline->s(phi);
  }
  const double x = std::clamp(phi / h, 0.0, static_cast<double>(m));
  const std::size_t k = std::min(m - 1, static_cast<std::size_t>(x));
  const double t = x - static_cast<double>(k);
  if (slope) *slope = (g.values[k + 1] - g.values[k]) / h;
  return (1 - t) * g.values[k] + t * g.values[k + 1];
}

}  // namespace

std::vector<Face> enumerate_faces(int n) {
  require(n >= 1 && n <= 16, fmt::format("dimension n = {} out of range", n));
  std::vector<Face> faces;
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    Face f;
    for (int i = 0; i < n; ++i) {
      if (mask & (1u << i)) f.index.push_back(i);
    }
    faces.push_back(std::move(f));
  }
  std::sort(faces.begin(), faces.end(), [](const Face& a, const Face& b) {
    return a.dim() != b.dim() ? a.dim() < b.dim() : a.index < b.index;
  });
  return faces;
}

ToricDomain::ToricDomain(int n, Descriptor descriptor) : n_(n), descriptor_(std::move(descriptor)) {
  require(n >= 1 && n <= 16, fmt::format("dimension n = {} out of range", n));
  auto positive = [](double x) { return std::isfinite(x) && x > 0.0; };
  std::visit(overloaded{
                 [&](const Ellipsoid& e) {
                   require(static_cast<int>(e.a.size()) == n, "ellipsoid needs n semi-axes");
                   for (double a : e.a) require(positive(a), "ellipsoid axes must be positive");
                   flags_ = {true, false, true, false};
                 },
                 [&](const PNormBody& b) {
                   require(static_cast<int>(b.r.size()) == n, "p-norm body needs n radii");
                   for (double r : b.r) require(positive(r), "p-norm radii must be positive");
                   require(std::isfinite(b.p) && b.p > 1.0, "p-norm exponent must lie in (1, inf)");
                   flags_ = {true, false, even_integer(b.p), false};
                 },
                 [&](const QuarterBall& q) {
                   require(positive(q.R), "quarter ball radius must be positive");
                   flags_ = {true, false, true, false};
                 },
                 [&](const RolledDisk& d) {
                   require(n == 2, "rolled disk domains are two-dimensional");
                   require(positive(d.rho) && std::isfinite(d.c[0]) && std::isfinite(d.c[1]),
                           "rolled disk needs a finite center and positive radius");
                   const double c2 = d.c[0] * d.c[0] + d.c[1] * d.c[1];
                   for (int k = 0; k <= 1000; ++k) {
                     const double phi = (std::numbers::pi / 2) * k / 1000.0;
                     const double ct = d.c[0] * std::cos(phi) + d.c[1] * std::sin(phi);
                     require(ct * ct - c2 + d.rho * d.rho >= -1e-12 && rolled_root(d, ct, c2) > 0.0,
                             "rolled disk: some ray in the quadrant misses the arc");
                   }
                   flags_ = {d.plus, !d.plus, false, true};
                 },
                 [&](const RadialGrid& g) {
                   require(n == 2, "radial grids are two-dimensional");
                   require(g.values.size() >= (g.cubic ? 5u : 2u), "radial grid too small");
                   for (double v : g.values) require(positive(v), "radial grid values must be positive");
                   flags_ = {!g.concave, g.concave, false, !g.cubic};
                   if (g.cubic) spline_ = detail::make_grid_spline(g.values);
                 },
             },
             descriptor_);
}

ToricDomain ToricDomain::rotated(const Mat& rotation) const {
  if (std::holds_alternative<RolledDisk>(descriptor_) || std::holds_alternative<RadialGrid>(descriptor_)) {
    throw Error(ErrorKind::Unsupported, "rotation needs a descriptor defined beyond the quadrant");
  }
  require(rotation.rows() == n_ && rotation.cols() == n_, "rotation has the wrong size");
  require((rotation.transpose() * rotation - Mat::Identity(n_, n_)).norm() < 1e-10, "rotation must be orthogonal");
  ToricDomain out = *this;
  out.rotation_ = rotation_ ? Mat(rotation * *rotation_) : rotation;
  // f must stay positive on the quadrant.
  for (const Face& face : enumerate_faces(n_)) {
    for (const Vec& u : simplex_grid(face.dim(), std::min(40, 200 / face.dim()))) {
      const Vec theta = face_point(face, n_, u);
      const double g = out.gauge(theta);
      if (!(g > 0.0) || !std::isfinite(g)) {
        throw Error(ErrorKind::InvalidParameter, "rotated descriptor is not positive on the quadrant");
      }
    }
  }
  return out;
}

double ToricDomain::raw_gauge(const Vec& x) const {
  return std::visit(overloaded{
                        [&](const Ellipsoid& e) {
                          double g = 0.0;
                          for (int i = 0; i < n_; ++i) g += x[i] / e.a[i];
                          return g;
                        },
                        [&](const PNormBody& b) {
                          // scale out the largest term to avoid under/overflow
                          double big = 0.0;
                          for (int i = 0; i < n_; ++i) big = std::max(big, std::abs(x[i]) / b.r[i]);
                          if (big == 0.0) return 0.0;
                          double s = 0.0;
                          for (int i = 0; i < n_; ++i) s += std::pow(std::abs(x[i]) / b.r[i] / big, b.p);
                          return big * std::pow(s, 1.0 / b.p);
                        },
                        [&](const QuarterBall& q) { return x.norm() / q.R; },
                        [&](const RolledDisk& d) {
                          const double r = x.norm();
                          const double c2 = d.c[0] * d.c[0] + d.c[1] * d.c[1];
                          const double ct = (d.c[0] * x[0] + d.c[1] * x[1]) / r;
                          return r / rolled_root(d, ct, c2);
                        },
                        [&](const RadialGrid& g) {
                          return x.norm() / grid_value(g, spline_.get(), std::atan2(x[1], x[0]), nullptr);
                        },
                    },
                    descriptor_);
}

Vec ToricDomain::raw_gauge_gradient(const Vec& x) const {
  return std::visit(overloaded{
                        [&](const Ellipsoid& e) {
                          Vec g(n_);
                          for (int i = 0; i < n_; ++i) g[i] = 1.0 / e.a[i];
                          return g;
                        },
                        [&](const PNormBody& b) {
                          const double gx = raw_gauge(x);
                          Vec g(n_);
                          for (int i = 0; i < n_; ++i) {
                            const double t = std::abs(x[i]) / b.r[i] / gx;
                            g[i] = std::copysign(std::pow(t, b.p - 1.0) / b.r[i], x[i]);
                          }
                          return g;
                        },
                        [&](const QuarterBall& q) { return Vec(x / (x.norm() * q.R)); },
                        [&](const RolledDisk& d) {
                          // outer normal of the arc, scaled so <grad g, y> = 1 at y = f theta
                          const Vec theta = x / x.norm();
                          const double c2 = d.c[0] * d.c[0] + d.c[1] * d.c[1];
                          const double f = rolled_root(d, d.c[0] * theta[0] + d.c[1] * theta[1], c2);
                          Vec nrm(2);
                          nrm << f * theta[0] - d.c[0], f * theta[1] - d.c[1];
                          if (!d.plus) nrm = -nrm;
                          return Vec(nrm / nrm.dot(f * theta));
                        },
                        [&](const RadialGrid& g) {
                          const double phi = std::atan2(x[1], x[0]);
                          double slope = 0.0;
                          const double f = grid_value(g, spline_.get(), phi, &slope);
                          Vec theta(2), t(2);
                          theta << std::cos(phi), std::sin(phi);
                          t << -std::sin(phi), std::cos(phi);
                          return Vec(theta / f - slope * t / (f * f));
                        },
                    },
                    descriptor_);
}

double ToricDomain::gauge(const Vec& x) const {
  if (rotation_) return raw_gauge(rotation_->transpose() * x);
  return raw_gauge(x);
}

Vec ToricDomain::gauge_gradient(const Vec& x) const {
  if (rotation_) return *rotation_ * raw_gauge_gradient(rotation_->transpose() * x);
  return raw_gauge_gradient(x);
}

double ToricDomain::radial(const Vec& theta) const {
  if (theta.size() != n_) throw Error(ErrorKind::DomainError, "theta has the wrong dimension");
  if (std::abs(theta.norm() - 1.0) > kSphereTol || theta.minCoeff() < -kSphereTol) {
    throw Error(ErrorKind::DomainError, "theta is not a unit vector of the closed quadrant");
  }
  return 1.0 / gauge(theta);
}

Vec face_point(const Face& face, int n, const Vec& u) {
  Vec theta = Vec::Zero(n);
  for (int k = 0; k < face.dim(); ++k) theta[face.index[k]] = u[k];
  const double r = theta.norm();
  if (!(r > 0.0)) throw Error(ErrorKind::DomainError, "face chart point is zero");
  return theta / r;
}

namespace detail {

std::shared_ptr<const GridSpline> make_grid_spline(const std::vector<double>& values) {
  const double h = (std::numbers::pi / 2) / static_cast<double>(values.size() - 1);
  return std::make_shared<const GridSpline>(GridSpline{{values.begin(), values.end(), 0.0, h}});
}

bool in_open_face(const Face& face, const Vec& theta, double tol) {
  if (std::abs(theta.norm() - 1.0) > tol) return false;
  std::size_t k = 0;
  for (int i = 0; i < theta.size(); ++i) {
    const bool inside = k < face.index.size() && face.index[k] == i;
    if (inside) {
      ++k;
      if (!(theta[i] > tol)) return false;
    } else if (std::abs(theta[i]) > tol) {
      return false;
    }
  }
  return true;
}

Mat tangent_frame(const Face& face, const Vec& theta) {
  const int n = static_cast<int>(theta.size());
  const int d = face.dim();
  Mat frame(n, d - 1);
  int col = 0;
  for (int k = 0; k < d && col < d - 1; ++k) {
    Vec v = Vec::Zero(n);
    v[face.index[k]] = 1.0;
    v -= v.dot(theta) * theta;
    for (int j = 0; j < col; ++j) v -= v.dot(frame.col(j)) * frame.col(j);
    const double nv = v.norm();
    if (nv < 1e-8) continue;  // e_k nearly parallel to theta, or dependent
    frame.col(col++) = v / nv;
  }
  if (col < d - 1) {
    throw Error(ErrorKind::DomainError, "could not build a tangent frame");
  }
  return frame;
}

FaceGeometry face_geometry(const ToricDomain& domain, const Face& face, const Vec& theta) {
  FaceGeometry out;
  if (const auto* q = std::get_if<QuarterBall>(&domain.descriptor())) {
    // constant f: exact values, no rounding noise from the gauge
    out.f = out.period = q->R;
    out.spherical_gradient = Vec::Zero(theta.size());
    out.gauss = theta;
    return out;
  }
  const Vec grad = domain.gauge_gradient(theta);
  const double g = domain.gauge(theta);
  out.f = 1.0 / g;
  // grad of the degree-0 extension of f is (g theta - grad g) / g^2
  Vec spherical = Vec::Zero(theta.size());
  if (face.dim() > 1) {
    const Mat frame = tangent_frame(face, theta);
    const Vec df = frame.transpose() * Vec((g * theta - grad) / (g * g));
    spherical = frame * df;
  }
  out.spherical_gradient = spherical;
  const Vec q = spherical / out.f;
  const double scale = std::sqrt(1.0 + q.squaredNorm());
  out.gauss = (theta - q) / scale;
  for (int i = 0; i < theta.size(); ++i) {
    if (!std::binary_search(face.index.begin(), face.index.end(), i)) out.gauss[i] = 0.0;
  }
  out.period = out.f / scale;
  return out;
}

}  // namespace detail

namespace {

void require_smooth_open(const ToricDomain& domain, const Face& face, const Vec& theta) {
  if (!domain.smooth()) {
    throw Error(ErrorKind::Unsupported, "Gauss map of a nonsmooth descriptor");
  }
  if (theta.size() != domain.n() || !detail::in_open_face(face, theta, kSphereTol)) {
    throw Error(ErrorKind::DomainError, "theta is not in the open face");
  }
}

}  // namespace

Vec spherical_gradient(const ToricDomain& domain, const Face& face, const Vec& theta) {
  require_smooth_open(domain, face, theta);
  return detail::face_geometry(domain, face, theta).spherical_gradient;
}

Vec gauss_map(const ToricDomain& domain, const Face& face, const Vec& theta) {
  require_smooth_open(domain, face, theta);
  return detail::face_geometry(domain, face, theta).gauss;
}

double period_coeff(const ToricDomain& domain, const Face& face, const Vec& theta) {
  require_smooth_open(domain, face, theta);
  return detail::face_geometry(domain, face, theta).period;
}

std::vector<Vec> simplex_grid(int d, int resolution) {
  require(d >= 1 && resolution >= 1, "simplex grid needs d >= 1 and resolution >= 1");
  std::vector<Vec> out;
  detail::for_each_composition(d, resolution, [&](const std::vector<int>& k) {
    Vec u(d);
    for (int i = 0; i < d; ++i) u[i] = static_cast<double>(k[i]) / resolution;
    out.push_back(u);
  });
  return out;
}

MBounds m_bounds(const ToricDomain& domain, int resolution) {
  require(resolution >= 2, fmt::format("m_bounds resolution must be >= 2, got {}", resolution));
  if (!domain.smooth()) throw Error(ErrorKind::Unsupported, "m_bounds needs a smooth descriptor");
  const int n = domain.n();
  MBounds out;
  out.m = std::numeric_limits<double>::infinity();
  for (const Face& face : enumerate_faces(n)) {
    FaceConstants fc;
    fc.face = face;
    fc.grid_resolution = resolution;
    const int d = face.dim();
    if (d == 1) {
      Vec e = Vec::Zero(n);
      e[face.index[0]] = 1.0;
      fc.m_delta = fc.grid_min = domain.radial(e);
    } else {
      // T and theta on the closed face grid, in composition order
      std::vector<double> T;
      std::vector<Vec> thetas;
      std::vector<std::vector<int>> comps;
      detail::for_each_composition(d, resolution, [&](const std::vector<int>& k) {
        Vec u(d);
        if (d == 2) {
          // uniform in angle on edges
          const double phi = (std::numbers::pi / 2) * k[1] / resolution;
          u << std::cos(phi), std::sin(phi);
        } else {
          for (int i = 0; i < d; ++i) u[i] = static_cast<double>(k[i]) / resolution;
        }
        thetas.push_back(face_point(face, n, u));
        T.push_back(detail::face_geometry(domain, face, thetas.back()).period);
        comps.push_back(k);
      });
      // Second-order covering margin: every point of the face is within r of
      // a grid point i, and T >= T_i - |grad T_i| r - K r^2 / 2 there, with
      // |grad T_i| bounded by the incident difference slopes (plus their own
      // O(K h) error) and K by the largest second difference.
      const std::size_t npts = comps.size();
      std::vector<double> local(npts, 0.0);
      double h = 0.0;
      double lip = 0.0;
      double curv = 0.0;
      auto angle = [&](std::size_t i, std::size_t j) {
        return 2.0 * std::asin(std::min(1.0, 0.5 * (thetas[i] - thetas[j]).norm()));
      };
      for (std::size_t idx = 0; idx < npts; ++idx) {
        const auto& k = comps[idx];
        for (int a = 0; a < d; ++a) {
          for (int b = a + 1; b < d; ++b) {
            std::optional<std::size_t> fwd, bwd;
            if (k[b] > 0) {
              std::vector<int> nb = k;
              ++nb[a];
              --nb[b];
              fwd = detail::composition_rank(nb, resolution);
            }
            if (k[a] > 0) {
              std::vector<int> nb = k;
              --nb[a];
              ++nb[b];
              bwd = detail::composition_rank(nb, resolution);
            }
            double s_f = 0.0, s_b = 0.0, h_f = 0.0, h_b = 0.0;
            if (fwd) {
              h_f = angle(idx, *fwd);
              h = std::max(h, h_f);
              s_f = (T[*fwd] - T[idx]) / h_f;
              lip = std::max(lip, std::abs(s_f));
              local[idx] = std::max(local[idx], std::abs(s_f));
            }
            if (bwd) {
              h_b = angle(idx, *bwd);
              s_b = (T[idx] - T[*bwd]) / h_b;
              local[idx] = std::max(local[idx], std::abs(s_b));
            }
            if (fwd && bwd) curv = std::max(curv, 2.0 * std::abs(s_f - s_b) / (h_f + h_b));
          }
        }
      }
      const double r = h * std::sqrt(d - 1.0) / 2.0;
      const double grad_factor = std::sqrt(d - 1.0);
      double lower = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < npts; ++i) {
        const double g = grad_factor * (local[i] + curv * h / 2.0);
        lower = std::min(lower, T[i] - g * r - curv * r * r / 2.0);
      }
      fc.grid_min = *std::min_element(T.begin(), T.end());
      fc.lipschitz = lip;
      // never looser than the plain Lipschitz margin
      fc.m_delta = std::max(lower, fc.grid_min - lip * r);
    }
    if (!(fc.m_delta > 0.0)) {
      throw Error(ErrorKind::MarginError,
                  fmt::format("certified lower bound for m on a {}-face is not positive; raise the resolution", d));
    }
    out.m = std::min(out.m, fc.m_delta);
    out.faces.push_back(std::move(fc));
  }
  return out;
}

ToricDomain domain_from_json(const nlohmann::json& j) {
  try {
    const int n = j.at("n").get<int>();
    const auto& d = j.at("descriptor");
    const std::string type = d.at("type").get<std::string>();
    Descriptor desc;
    if (type == "ellipsoid") {
      desc = Ellipsoid{d.at("a").get<std::vector<double>>()};
    } else if (type == "pnorm") {
      desc = PNormBody{d.at("r").get<std::vector<double>>(), d.at("p").get<double>()};
    } else if (type == "quarter_ball") {
      desc = QuarterBall{d.at("R").get<double>()};
    } else if (type == "rolled_disk_plus" || type == "rolled_disk_minus") {
      const auto c = d.at("c").get<std::vector<double>>();
      if (c.size() != 2) throw Error(ErrorKind::ParseError, "rolled disk center needs two coordinates");
      desc = RolledDisk{{c[0], c[1]}, d.at("rho").get<double>(), type == "rolled_disk_plus"};
    } else if (type == "radial_grid") {
      const std::string interp = d.value("interpolation", "linear");
      if (interp != "linear" && interp != "cubic") {
        throw Error(ErrorKind::ParseError, fmt::format("unknown interpolation '{}'", interp));
      }
      desc = RadialGrid{d.at("values").get<std::vector<double>>(), interp == "cubic",
                        d.value("class", "convex") == "concave"};
    } else {
      throw Error(ErrorKind::ParseError, fmt::format("unknown descriptor type '{}'", type));
    }
    ToricDomain dom(n, std::move(desc));
    if (j.contains("rotation")) {
      const auto rows = j.at("rotation").get<std::vector<std::vector<double>>>();
      Mat R(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != static_cast<std::size_t>(R.cols())) {
          throw Error(ErrorKind::ParseError, "ragged rotation matrix");
        }
        for (std::size_t c = 0; c < rows[r].size(); ++c) R(r, c) = rows[r][c];
      }
      dom = dom.rotated(R);
    }
    return dom;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, e.what());
  }
}

nlohmann::json domain_to_json(const ToricDomain& domain) {
  nlohmann::json d = std::visit(
      overloaded{
          [](const Ellipsoid& e) { return nlohmann::json{{"type", "ellipsoid"}, {"a", e.a}}; },
          [](const PNormBody& b) { return nlohmann::json{{"type", "pnorm"}, {"r", b.r}, {"p", b.p}}; },
          [](const QuarterBall& q) { return nlohmann::json{{"type", "quarter_ball"}, {"R", q.R}}; },
          [](const RolledDisk& r) {
            return nlohmann::json{{"type", r.plus ? "rolled_disk_plus" : "rolled_disk_minus"},
                                  {"c", {r.c[0], r.c[1]}},
                                  {"rho", r.rho}};
          },
          [](const RadialGrid& g) {
            return nlohmann::json{{"type", "radial_grid"},
                                  {"values", g.values},
                                  {"interpolation", g.cubic ? "cubic" : "linear"},
                                  {"class", g.concave ? "concave" : "convex"}};
          },
      },
      domain.descriptor());
  nlohmann::json j{{"n", domain.n()}, {"descriptor", d}};
  if (domain.rotation()) {
    std::vector<std::vector<double>> rows;
    const Mat& R = *domain.rotation();
    for (Eigen::Index r = 0; r < R.rows(); ++r) {
      rows.emplace_back();
      for (Eigen::Index c = 0; c < R.cols(); ++c) rows.back().push_back(R(r, c));
    }
    j["rotation"] = rows;
  }
  return j;
}

void write_mesh_csv(const ToricDomain& domain, int resolution, std::ostream& out) {
  require(resolution >= 1, "mesh resolution must be >= 1");
  const int n = domain.n();
  for (int i = 0; i < n; ++i) out << "theta_" << (i + 1) << ',';
  out << "f\n";
  for (const Face& face : enumerate_faces(n)) {
    detail::for_each_composition(face.dim(), resolution, [&](const std::vector<int>& k) {
      if (std::find(k.begin(), k.end(), 0) != k.end() && face.dim() > 1) return;  // lower faces list it
      Vec u(face.dim());
      for (int i = 0; i < face.dim(); ++i) u[i] = static_cast<double>(k[i]) / resolution;
      const Vec theta = face_point(face, n, u);
      for (int i = 0; i < n; ++i) out << fmt::format("{:.17g},", theta[i]);
      out << fmt::format("{:.17g}\n", domain.radial(theta));
    });
  }
}

}  // namespace toricbar
