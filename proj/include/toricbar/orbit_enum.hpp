#pragma once

// Rational invariant tori of toric domains: one class per face and integer
// rotation vector p (iterates included), with action <p, x> at the boundary
// point whose outer normal is p/|p|.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "toricbar/toric_geometry.hpp"

namespace toricbar {

using LatticeVec = std::vector<long>;

struct OrbitClass {
  Face face;
  LatticeVec p;  // coordinates in the face
  double action = 0.0;
  bool primitive = true;
  bool degenerate = false;
  std::optional<Vec> theta;
};

struct SupportResult {
  double action = 0.0;
  Vec theta;             // a maximizer
  bool unique = true;    // false when the maximizing set has positive diameter
  bool interior = false; // the maximizing set meets the open face
};

// max <p, f(theta) theta> over the closed face; p in face coordinates.
// Convex descriptors only (Unsupported otherwise).
SupportResult support_action(const ToricDomain& domain, const Face& face, const LatticeVec& p);

struct GaussPreimages {
  std::vector<Vec> thetas;
  bool incomplete = false;  // some start got close but did not converge
  double best_residual = 0.0;
};

struct InvertOptions {
  int grid = 0;  // multistart grid resolution, 0 = default for the face dimension
};

// All theta in the open face with G(theta) = v (v a unit n-vector in V_face).
GaussPreimages invert_gauss(const ToricDomain& domain, const Face& face, const Vec& v, InvertOptions options = {});

// Smallest singular value of the differential of G at theta (tangent frames
// at theta and at G(theta)); 1 on vertex faces.
double gauss_jacobian_min_sv(const ToricDomain& domain, const Face& face, const Vec& theta);

enum class EnumMethod { Auto, Support, Gauss };

struct EnumOptions {
  EnumMethod method = EnumMethod::Auto;  // Auto: support for convex, Gauss otherwise
  int m_resolution = 0;                  // 0 = default per face dimension
  InvertOptions invert;
};

struct Spectrum {
  double s_max = 0.0;
  MBounds m;
  std::vector<OrbitClass> classes;  // sorted by action
  std::vector<std::string> warnings;
};

Spectrum enumerate_spectrum(const ToricDomain& domain, double s_max, EnumOptions options = {});

struct GeneratorCount {
  double s = 0.0;
  std::map<Face, std::uint64_t> per_face;  // torus counts
  std::uint64_t total_generators = 1;
  std::vector<std::string> caveats;
};

// Counts classes with action <= s from an existing spectrum (s <= s_max).
// No spectral-value check.
GeneratorCount count_generators(const Spectrum& spectrum, double s);

// Throws SpectralValue when s is within 1e-9 of an action.
GeneratorCount generator_count(const ToricDomain& domain, double s, EnumOptions options = {});

struct BoundCheck {
  double s = 0.0;
  std::uint64_t generators = 0;
  double bound = 0.0;
};

struct BoundCertificate {
  double m_used = 0.0;
  double C = 6.0;
  double fiber_bound = 1.0;
  double C_n = 0.0;
  double C_0 = 0.0;
  double checked_up_to = 0.0;
  bool ok = false;
  std::optional<double> fitted_degree;  // log-log slope over the checked s
  std::vector<BoundCheck> checks;
};

// Lattice remainder sup_{R >= 0} [V_d (R + sqrt(d)/2)^d - C R^d].
double lattice_remainder(int d, double C);

// C_n = 2^n (2^n - 1) C m^{-n} N and C_0 = 1 + N sum_faces 2^d (C + remainder_d),
// N the fiber bound (1 for convex or concave domains), checked against the
// inclusive generator count at each s.
BoundCertificate certify_bound(const ToricDomain& domain, std::vector<double> s_list, double fiber_bound = 1.0,
                               EnumOptions options = {});
// Same, from a spectrum already enumerated up to max(s_list) for an n-dimensional domain.
BoundCertificate certify_bound(const Spectrum& spectrum, int n, std::vector<double> s_list, double fiber_bound = 1.0);

struct RegularizeOptions {
  double threshold = 1e-4;  // smallest admissible Jacobian singular value
  int max_tries = 64;
  double angle_scale = 0.02;
  InvertOptions invert;
};

struct Regularization {
  Mat lambda;           // composed per-face rotation, identity if none needed
  int fiber_bound = 0;  // empirical max preimage count
  int tries = 0;
  double worst_singular_value = 0.0;
};

Regularization regularize_analytic(const ToricDomain& domain, double s_max, std::uint64_t seed,
                                   RegularizeOptions options = {});

nlohmann::json spectrum_to_json(const Spectrum& spectrum);

}  // namespace toricbar
