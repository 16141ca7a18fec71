#include "toricbar/mollify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/tools/roots.hpp>
#include <fmt/format.h>

#include "toricbar/error.hpp"
#include "toricbar/parallel.hpp"

namespace toricbar {

namespace {

constexpr double kFdStep = 1e-6;
constexpr double kTransversal = 1e-3;  // min discriminant / rho^2 for rolled disks on U

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorKind::InvalidParameter, what);
}

// Unit directions of U (plus its boundary).
std::vector<Vec> neighborhood_mesh(int n, double margin, int mesh) {
  std::vector<Vec> out;
  if (n == 2) {
    const int m = mesh > 0 ? mesh : 2001;
    const double lo = -margin, hi = std::numbers::pi / 2 + margin;
    for (int k = 0; k < m; ++k) {
      const double phi = lo + (hi - lo) * k / (m - 1);
      Vec t(2);
      t << std::cos(phi), std::sin(phi);
      out.push_back(t);
    }
    return out;
  }
  const int m = mesh > 0 ? mesh : (n == 3 ? 41 : 13);
  const double s = std::sin(margin);
  std::vector<int> k(n, 0);
  for (;;) {
    Vec x(n);
    for (int i = 0; i < n; ++i) x[i] = -1.0 + 2.0 * k[i] / (m - 1);
    const double r = x.norm();
    if (r > 1e-9) {
      x /= r;
      if (x.minCoeff() >= -s) out.push_back(x);
    }
    int j = 0;
    while (j < n && k[j] == m - 1) k[j++] = 0;
    if (j == n) break;
    ++k[j];
  }
  return out;
}

void check_extension(const ToricDomain& domain, const std::vector<Vec>& mesh) {
  const auto& desc = domain.descriptor();
  if (std::holds_alternative<RadialGrid>(desc))
    throw Error(ErrorKind::ExtensionUnavailable, "radial grids carry no extension beyond the quadrant");
  if (const auto* d = std::get_if<RolledDisk>(&desc)) {
    const double c2 = d->c[0] * d->c[0] + d->c[1] * d->c[1];
    for (const Vec& t : mesh) {
      const double ct = t[0] * d->c[0] + t[1] * d->c[1];
      const double disc = ct * ct - c2 + d->rho * d->rho;
      if (disc < kTransversal * d->rho * d->rho)
        throw Error(ErrorKind::ExtensionUnavailable,
                    fmt::format("rolled disk: the ray at angle {:.4f} does not cross the circle transversally",
                                std::atan2(t[1], t[0])));
      const double root = d->plus ? ct + std::sqrt(disc) : ct - std::sqrt(disc);
      if (!(root > 0.0))
        throw Error(ErrorKind::ExtensionUnavailable, "rolled disk: the arc leaves the neighborhood of the quadrant");
    }
  }
  for (const Vec& t : mesh) {
    const double F = domain.gauge(t);
    if (!std::isfinite(F) || F <= 0.0)
      throw Error(ErrorKind::ExtensionUnavailable, "the gauge is not positive on the neighborhood of the quadrant");
  }
}

}  // namespace

bool HomogeneousField::contains_ball(const Vec& x, double radius) const {
  const double s = std::sin(margin_);
  const double r = x.norm();
  for (int i = 0; i < x.size(); ++i)
    if (x[i] + s * r < radius * (1.0 + s)) return false;
  return x.sum() - radius * std::sqrt(static_cast<double>(x.size())) >= tip_;
}

HomogeneousField build_field(const ToricDomain& domain, FieldOptions options) {
  require(options.margin > 0.0 && options.margin < std::numbers::pi / 4, "margin must lie in (0, pi/4)");
  require(options.tip_factor > 0.0 && options.tip_factor < 1.0, "tip factor must lie in (0, 1)");
  const ClassFlags flags = domain.flags();
  if (!flags.convex && !flags.concave)
    throw Error(ErrorKind::InvalidParameter, "mollification needs a convex or concave domain");

  const int n = domain.n();
  const auto U = neighborhood_mesh(n, options.margin, options.mesh);
  check_extension(domain, U);

  HomogeneousField F(domain);
  F.sign_ = flags.convex ? 1.0 : -1.0;
  F.margin_ = options.margin;

  double lip = 0.0, inf_inv = std::numeric_limits<double>::infinity(), resid = 0.0;
  for (const Vec& t : U) {
    const double F0 = domain.gauge(t);
    inf_inv = std::min(inf_inv, F0);
    Vec g(n);
    for (int i = 0; i < n; ++i) {
      Vec a = t, b = t;
      a[i] += kFdStep;
      b[i] -= kFdStep;
      g[i] = (domain.gauge(a) - domain.gauge(b)) / (2 * kFdStep);
    }
    lip = std::max(lip, g.norm());
    for (double s : {0.5, 2.0, 3.0}) resid = std::max(resid, std::abs(domain.gauge(s * t) - s * F0) / s);
  }
  F.lipschitz_ = lip;
  F.inf_inv_f_ = inf_inv;
  F.homogeneity_residual_ = resid;

  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const Vec& t : surface_directions(n, n == 2 ? 2001 : 60)) {
    const double f = domain.radial(t);
    lo = std::min(lo, f);
    hi = std::max(hi, f);
  }
  F.min_f_ = lo;
  F.max_f_ = hi;
  F.tip_ = options.tip_factor * lo;
  return F;
}

double MollifiedField::value(const Vec& x) const {
  if (!field_.contains_ball(x, eta_))
    throw Error(ErrorKind::MarginError, "the mollifier support leaves the truncated cone; shrink eta");
  double acc = 0.0;
  Vec y(x.size());
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    y = x - eta_ * nodes_[k];
    acc += weights_[k] * field_.value(y);
  }
  return acc;
}

MollifiedField mollify(const HomogeneousField& field, double eta, MollifyOptions options) {
  require(std::isfinite(eta) && eta > 0.0, "eta must be positive");
  const int n = field.n();
  if (3.0 * eta > field.margin() * (1.0 + 1e-12))
    throw Error(ErrorKind::MarginError,
                fmt::format("eta = {} exceeds a third of the angular margin {}", eta, field.margin()));
  // lowest sample of the surface solve: 0.6 min f on an axis
  Vec probe = Vec::Zero(n);
  probe[0] = 0.6 * field.min_f();
  if (!field.contains_ball(probe, eta))
    throw Error(ErrorKind::MarginError, fmt::format("eta = {} is too large for the cone around the surface", eta));

  const int N = options.nodes > 0 ? options.nodes : (n == 2 ? 24 : 14);
  require(N >= 2, "need at least two nodes per axis");
  MollifiedField M(field, eta);
  std::vector<int> k(n, 0);
  double mass = 0.0;
  for (;;) {
    Vec z(n);
    for (int i = 0; i < n; ++i) z[i] = -1.0 + (2.0 * k[i] + 1.0) / N;
    const double r2 = z.squaredNorm();
    if (r2 < 1.0) {
      const double w = std::exp(-1.0 / (1.0 - r2));
      M.nodes_.push_back(z);
      M.weights_.push_back(w);
      mass += w;
    }
    int j = 0;
    while (j < n && k[j] == N - 1) k[j++] = 0;
    if (j == n) break;
    ++k[j];
  }
  for (double& w : M.weights_) w /= mass;
  return M;
}

std::vector<Vec> surface_directions(int n, int samples) {
  require(samples >= 2, "need at least two surface samples");
  std::vector<Vec> out;
  if (n == 2) {
    for (int k = 0; k < samples; ++k) {
      const double phi = (std::numbers::pi / 2) * k / (samples - 1);
      Vec t(2);
      t << std::cos(phi), std::sin(phi);
      out.push_back(t);
    }
    return out;
  }
  for (Vec u : simplex_grid(n, samples)) out.push_back(u / u.norm());
  return out;
}

double surface_radius(const MollifiedField& M, const Vec& theta, double strictify) {
  const double f0 = 1.0 / M.field().value(theta);
  auto g = [&](double r) { return M.value(r * theta) + strictify * r * r - 1.0; };
  double lo = 0.6 * f0, hi = 1.6 * f0;
  const double glo = g(lo), ghi = g(hi);
  if (!(glo < 0.0 && ghi > 0.0))
    throw Error(ErrorKind::InconsistentSurface,
                fmt::format("no sign change of F_eta - 1 on [{}, {}] along the ray", lo, hi));
  std::uintmax_t iters = 200;
  const auto [a, b] = boost::math::tools::toms748_solve(g, lo, hi, glo, ghi,
                                                        boost::math::tools::eps_tolerance<double>(50), iters);
  return 0.5 * (a + b);
}

RadialBound radial_bound(const MollifiedField& M, int samples, double margin) {
  require(margin >= 0.0 && margin < 1.0, "xi margin must lie in [0, 1)");
  const int n = M.field().n();
  const auto dirs = surface_directions(n, samples > 0 ? samples : (n == 2 ? 257 : 24));
  std::vector<double> q(dirs.size());
  parallel_for(dirs.size(), [&](std::size_t i) {
    const double r = surface_radius(M, dirs[i]);
    const double h = 1e-4 * r;
    q[i] = (M.value((r + h) * dirs[i]) - M.value((r - h) * dirs[i])) / (2 * h);
  });
  RadialBound out;
  out.xi_hat = *std::min_element(q.begin(), q.end());
  out.xi_target = (1.0 - margin) * M.field().inf_inv_f();
  if (!(out.xi_hat > 0.0))
    throw Error(ErrorKind::SmoothingFailure,
                fmt::format("radial derivative of F_eta not positive (xi = {}); shrink eta", out.xi_hat));
  if (out.xi_hat < out.xi_target)
    throw Error(ErrorKind::SmoothingFailure,
                fmt::format("xi = {} below the target {}; shrink eta", out.xi_hat, out.xi_target));
  return out;
}

double m_lower_bound(double min_f, double L, double xi) {
  require(min_f > 0.0 && L >= 0.0 && xi > 0.0, "m bound needs min f > 0, L >= 0, xi > 0");
  const double t = L / xi;
  return min_f / (2.0 * std::sqrt(1.0 + t * t));
}

double m_lower_bound_absolute(double min_f, double max_f, double L, double xi) {
  require(min_f > 0.0 && max_f > 0.0 && L >= 0.0 && xi > 0.0, "m bound needs positive inputs");
  const double t = L / (xi * max_f);
  return min_f / (2.0 * std::sqrt(1.0 + t * t));
}

ToricDomain MollifiedDomain::domain() const { return ToricDomain(2, f_eta); }

MollifiedDomain mollify_domain(const HomogeneousField& field, double eta, PipelineOptions options) {
  if (field.n() != 2) throw Error(ErrorKind::Unsupported, "the f_eta table is a two-dimensional radial grid");
  require(options.samples >= 5, "need at least five f_eta samples");
  const MollifiedField M = mollify(field, eta, options.mollify);

  MollifiedDomain out;
  out.eta = eta;
  out.L = field.lipschitz();
  out.xi = radial_bound(M, options.samples, options.xi_margin);

  const double eps = options.strictify >= 0.0 ? options.strictify : 1e-6 * field.min_f() * field.min_f();
  const auto dirs = surface_directions(2, options.samples);
  std::vector<double> f(dirs.size());
  parallel_for(dirs.size(), [&](std::size_t i) { f[i] = surface_radius(M, dirs[i], field.sign() * eps); });

  const double h = (std::numbers::pi / 2) / (options.samples - 1);
  const std::size_t last = f.size() - 1;
  for (std::size_t i = 0; i <= last; ++i) {
    double d;
    if (i == 0)
      d = (-3 * f[0] + 4 * f[1] - f[2]) / (2 * h);
    else if (i == last)
      d = (3 * f[last] - 4 * f[last - 1] + f[last - 2]) / (2 * h);
    else
      d = (f[i + 1] - f[i - 1]) / (2 * h);
    out.grad_max = std::max(out.grad_max, std::abs(d));
    out.sup_diff = std::max(out.sup_diff, std::abs(f[i] - field.domain().radial(dirs[i])));
  }
  out.grad_bound_absolute = 1.1 * out.L / out.xi.xi_hat;
  out.grad_bound = out.grad_bound_absolute * *std::max_element(f.begin(), f.end());
  out.grad_ok = out.grad_max <= out.grad_bound;

  out.m_lower = m_lower_bound(field.min_f(), out.L, out.xi.xi_target);
  out.m_lower_xi_hat = m_lower_bound(field.min_f(), out.L, out.xi.xi_hat);
  out.m_lower_absolute = m_lower_bound_absolute(field.min_f(), field.max_f(), out.L, out.xi.xi_target);
  out.f_eta = RadialGrid{std::move(f), true, field.sign() < 0};
  out.grid_m = m_bounds(out.domain(), options.m_resolution).m;
  if (out.grid_m < out.m_lower)
    throw Error(ErrorKind::SmoothingFailure,
                fmt::format("grid m = {} of f_eta below the uniform bound {}", out.grid_m, out.m_lower));
  return out;
}

nlohmann::json mollify_report(const MollifiedDomain& M) {
  return {{"eta", M.eta},
          {"xi", M.xi.xi_hat},
          {"xi_target", M.xi.xi_target},
          {"L", M.L},
          {"m_lower", M.m_lower},
          {"m_lower_xi_hat", M.m_lower_xi_hat},
          {"m_lower_absolute", M.m_lower_absolute},
          {"grid_m", M.grid_m},
          {"grad_max", M.grad_max},
          {"grad_bound", M.grad_bound},
          {"grad_bound_absolute", M.grad_bound_absolute},
          {"grad_ok", M.grad_ok},
          {"sup_diff", M.sup_diff},
          {"samples", M.f_eta.values.size()}};
}

}  // namespace toricbar
