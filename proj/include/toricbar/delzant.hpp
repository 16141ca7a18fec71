#pragma once

// Closed toric manifolds through their moment polytopes: Delzant checks,
// face direction lattices, and fixed-point counts of the k-th iterate of the
// toric Hamiltonian H = h o mu.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "toricbar/orbit_enum.hpp"

namespace toricbar {

// <v, x> <= c
struct Inequality {
  LatticeVec v;
  double c = 0.0;
};

struct DelzantPolytope {
  int n = 0;
  std::vector<Inequality> ineqs;
};

struct DelzantReport {
  bool ok = false;
  std::vector<std::string> violations;
  std::vector<Vec> vertices;
  std::vector<std::vector<int>> vertex_facets;  // active inequalities per vertex
};

// Malformed input (sizes, zero normals) throws InvalidParameter; geometric
// failures are listed in the report.
DelzantReport validate_delzant(const DelzantPolytope& P);

struct PolytopeFace {
  std::vector<int> active;  // tight inequalities, sorted; empty for the interior
  int dim = 0;
  std::vector<LatticeVec> basis;  // canonical basis of the direction lattice
  std::vector<Vec> vertices;
};

// All faces, vertices first, then by dimension and active set.  Throws
// NonDelzant when validation fails.
std::vector<PolytopeFace> polytope_faces(const DelzantPolytope& P);

// Row Hermite normal form (positive pivots, reduced above), zero rows dropped.
std::vector<LatticeVec> hermite_normal_form(std::vector<LatticeVec> rows);

// Lattice of integer vectors orthogonal to the normals of the active set.
std::vector<LatticeVec> face_lattice_basis(const DelzantPolytope& P, const std::vector<int>& active);

struct QuadraticH {
  Mat Q;  // h = x'Qx / 2 + <l, x>, Q symmetrized on construction
  Vec l;
};

struct PolynomialH {
  struct Term {
    double c = 0.0;
    std::vector<int> e;
  };
  std::vector<Term> terms;
};

struct HFlags {
  bool convex = false;
  bool concave = false;
  bool strict = false;  // definite Hessian (quadratic only)
  bool analytic = true;
};

class Hamiltonian {
 public:
  Hamiltonian(int n, std::variant<QuadraticH, PolynomialH> form);

  int n() const noexcept { return n_; }
  const std::variant<QuadraticH, PolynomialH>& form() const noexcept { return form_; }
  HFlags flags() const noexcept { return flags_; }
  bool quadratic() const noexcept { return std::holds_alternative<QuadraticH>(form_); }

  double value(const Vec& x) const;
  Vec gradient(const Vec& x) const;
  Mat hessian(const Vec& x) const;

  Hamiltonian shifted(const Vec& lambda) const;  // h + <lambda, x>
  Hamiltonian strictified(double eps) const;     // h + eps |x|^2

 private:
  int n_;
  std::variant<QuadraticH, PolynomialH> form_;
  HFlags flags_;
};

Hamiltonian linear_hamiltonian(const Vec& l);

// Derivatives of h along the face basis at w in the open face.
Vec face_gradient(const DelzantPolytope& P, const Hamiltonian& h, const PolytopeFace& face, const Vec& w);

enum class CountMode { Divisor, QLeK };

struct CountOptions {
  CountMode mode = CountMode::Divisor;
  double strictify = 0.0;  // eps of the eps |x|^2 perturbation, 0 = off
  int grid = 0;            // multistart grid per face dimension (polynomial h), 0 = default
};

struct FaceCount {
  std::vector<int> active;
  int dim = 0;
  std::uint64_t tori = 0;
  bool degenerate = false;  // whole face fixed (constant rational gradient)
};

struct FixedPointCount {
  int k = 0;
  CountMode mode = CountMode::Divisor;
  std::vector<FaceCount> faces;
  std::uint64_t total = 0;  // sum of 2^d tori
  double min_hessian_sv = 0.0;  // smallest face-Hessian singular value at a solution
  std::vector<std::string> warnings;
};

FixedPointCount count_fixed_points(const DelzantPolytope& P, const Hamiltonian& h, int k, CountOptions options = {});

struct KBoundCheck {
  int k = 0;
  std::uint64_t total = 0;
  double bound = 0.0;
};

struct KBoundCertificate {
  double C_n = 0.0;
  double C_0 = 0.0;
  int checked_up_to = 0;
  bool ok = false;
  std::optional<double> fitted_degree;
  std::vector<KBoundCheck> checks;
};

// Per face, the (1/k)-lattice points in the bounding box of the gradient
// image number at most prod (k w_j + 1); the bound sums these with the
// 2^d splitting, using k^|S| <= k^n for k >= 1.  The degree is fitted
// over the checked k >= fit_from, which keeps the O(k^{n-1}) boundary terms
// from dominating small k.
KBoundCertificate certify_k_bound(const DelzantPolytope& P, const Hamiltonian& h, std::vector<int> k_list,
                                  CountOptions options = {}, int fit_from = 1);

struct ShiftResult {
  Vec lambda;
  int tries = 0;
  double min_hessian_sv = 0.0;
};

// Searches small linear shifts h + <lambda, x> until no solution for
// k = 1..k_max has a face-Hessian singular value below threshold.
ShiftResult regularize_shift(const DelzantPolytope& P, const Hamiltonian& h, int k_max, std::uint64_t seed,
                             double threshold = 1e-6, int max_tries = 32, double scale = 1e-3);

DelzantPolytope polytope_from_json(const nlohmann::json& j);
nlohmann::json polytope_to_json(const DelzantPolytope& P);
Hamiltonian hamiltonian_from_json(const nlohmann::json& j, int n);

// k,total,face_breakdown with the breakdown as "[active]=tori" items.
void write_counts_csv(std::ostream& os, const std::vector<FixedPointCount>& counts);

}  // namespace toricbar
