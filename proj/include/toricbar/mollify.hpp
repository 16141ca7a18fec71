#pragma once

// Smoothing of nonsmooth convex (or concave) toric domains through the
// homogeneous function F(x) = |x| / f(x/|x|): convolve F with a bump of
// radius eta, read off the new radial function f_eta from F_eta = 1, and
// bound the period coefficient of f_eta from below uniformly in eta.

#include <vector>

#include <json.hpp>

#include "toricbar/toric_geometry.hpp"

namespace toricbar {

struct FieldOptions {
  double margin = 0.15;     // angular width of the neighborhood U beyond the quadrant (radians)
  double tip_factor = 0.2;  // the cone is cut at sum x_i >= tip_factor * min f
  int mesh = 0;             // directions used for L and the f statistics, 0 = default
};

// F on the cone over U = {theta : theta_i >= -sin(margin) for all i}.  The
// extension is the descriptor's own formula evaluated off the quadrant.
class HomogeneousField {
 public:
  int n() const noexcept { return domain_.n(); }
  const ToricDomain& domain() const noexcept { return domain_; }
  double sign() const noexcept { return sign_; }  // +1: F convex, -1: F concave
  double margin() const noexcept { return margin_; }
  double tip() const noexcept { return tip_; }
  double lipschitz() const noexcept { return lipschitz_; }
  double min_f() const noexcept { return min_f_; }  // over the closed quadrant
  double max_f() const noexcept { return max_f_; }
  double inf_inv_f() const noexcept { return inf_inv_f_; }  // inf of 1/f over U
  double homogeneity_residual() const noexcept { return homogeneity_residual_; }

  double value(const Vec& x) const { return domain_.gauge(x); }
  // Whether the closed ball B(x, radius) lies in the truncated cone.
  bool contains_ball(const Vec& x, double radius) const;

 private:
  friend HomogeneousField build_field(const ToricDomain& domain, FieldOptions options);
  explicit HomogeneousField(ToricDomain domain) : domain_(std::move(domain)) {}

  ToricDomain domain_;
  double sign_ = 1.0;
  double margin_ = 0.0;
  double tip_ = 0.0;
  double lipschitz_ = 0.0;
  double min_f_ = 0.0;
  double max_f_ = 0.0;
  double inf_inv_f_ = 0.0;
  double homogeneity_residual_ = 0.0;
};

// ExtensionUnavailable for grids and for rolled disks whose circle does not
// meet every ray of U transversally (e.g. a circle tangent to an axis);
// InvalidParameter for domains that are neither convex nor concave.
HomogeneousField build_field(const ToricDomain& domain, FieldOptions options = {});

struct MollifyOptions {
  int nodes = 0;  // midpoint nodes per axis of [-1, 1]^n, 0 = default (24 for n = 2, 14 for n = 3)
};

// F_eta(x) = sum_k w_k F(x - eta z_k): the bump exp(-1/(1 - |z|^2)) sampled
// at the midpoints z_k of a cube grid inside the unit ball, normalized to
// unit mass.  The node set is symmetric, so affine F are reproduced.
class MollifiedField {
 public:
  const HomogeneousField& field() const noexcept { return field_; }
  double eta() const noexcept { return eta_; }
  std::size_t node_count() const noexcept { return weights_.size(); }

  // MarginError when B(x, eta) leaves the truncated cone.
  double value(const Vec& x) const;

 private:
  friend MollifiedField mollify(const HomogeneousField& field, double eta, MollifyOptions options);
  MollifiedField(HomogeneousField field, double eta) : field_(std::move(field)), eta_(eta) {}

  HomogeneousField field_;
  double eta_;
  std::vector<Vec> nodes_;
  std::vector<double> weights_;
};

// MarginError unless 3 eta <= margin and the balls around the surface
// samples stay inside the cone.
MollifiedField mollify(const HomogeneousField& field, double eta, MollifyOptions options = {});

// Directions used to sample surfaces: the uniform angle grid of a RadialGrid
// with `samples` values for n = 2, the normalized simplex grid otherwise.
std::vector<Vec> surface_directions(int n, int samples);

// Radius r > 0 with F_eta(r theta) + strictify r^2 = 1 (bracketed solve);
// InconsistentSurface when the bracket does not change sign.
double surface_radius(const MollifiedField& M, const Vec& theta, double strictify = 0.0);

struct RadialBound {
  double xi_hat = 0.0;     // min radial difference quotient of F_eta on its unit surface
  double xi_target = 0.0;  // (1 - margin) inf_U 1/f
};

// SmoothingFailure when xi_hat <= 0 or xi_hat < xi_target (shrink eta).
RadialBound radial_bound(const MollifiedField& M, int samples = 0, double margin = 0.25);

// m >= min f / (2 sqrt(1 + (L / xi)^2)).  Nonincreasing in L, homogeneous of
// degree one under f -> c f (L and xi scale alike).
double m_lower_bound(double min_f, double L, double xi);
// The same bound with the gradient estimate |grad f_eta| <= L / xi read as an
// absolute bound: min f / (2 sqrt(1 + L^2 / (xi max f)^2)).  Reported only.
double m_lower_bound_absolute(double min_f, double max_f, double L, double xi);

struct PipelineOptions {
  MollifyOptions mollify;
  int samples = 257;         // f_eta table size (n = 2)
  int m_resolution = 512;    // grid for the direct m of f_eta
  double strictify = -1.0;   // eps of eps |x|^2, negative = 1e-6 (min f)^2
  double xi_margin = 0.25;
};

struct MollifiedDomain {
  double eta = 0.0;
  double L = 0.0;
  RadialBound xi;
  double m_lower = 0.0;           // from xi_target, hence eta independent
  double m_lower_xi_hat = 0.0;    // same formula with the measured xi_hat
  double m_lower_absolute = 0.0;
  double grid_m = 0.0;            // m_bounds of f_eta
  // |d f_eta / d phi| = |dF_eta / d phi| / (dF_eta / dr) <= L f_eta / xi.
  double grad_max = 0.0;          // finite-difference max |d f_eta / d phi|
  double grad_bound = 0.0;        // 1.1 L max f_eta / xi_hat
  double grad_bound_absolute = 0.0;  // 1.1 L / xi_hat, valid when f_eta <= 1
  bool grad_ok = false;
  double sup_diff = 0.0;          // max |f_eta - f| on the table
  RadialGrid f_eta;

  ToricDomain domain() const;  // cubic RadialGrid of f_eta
};

// n = 2 (the exported table is a RadialGrid).  Runs mollify, radial_bound,
// extraction and the m comparison; SmoothingFailure when grid m < m_lower.
MollifiedDomain mollify_domain(const HomogeneousField& field, double eta, PipelineOptions options = {});

// {eta, xi, L, m_lower} plus the diagnostics.
nlohmann::json mollify_report(const MollifiedDomain& M);

}  // namespace toricbar
