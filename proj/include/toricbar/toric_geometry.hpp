#pragma once

// Toric domains described by a radial function f on the closed spherical
// simplex (the unit vectors in the closed positive quadrant).  Everything is
// expressed through the gauge g(x) = |x| / f(x/|x|), whose gradient at a
// boundary point is an outer normal; the Gauss map of a face is then the
// normalized restriction of grad g to the coordinates of that face.

#include <array>
#include <iosfwd>
#include <memory>
#include <optional>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace toricbar {

namespace detail {
struct GridSpline;
}

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct Ellipsoid {
  std::vector<double> a;
};

struct PNormBody {
  std::vector<double> r;
  double p = 2.0;
};

struct QuarterBall {
  double R = 1.0;
};

// Region between the origin and the far (plus) or near (minus) arc of the
// circle |x - c| = rho, n = 2 only.
struct RolledDisk {
  std::array<double, 2> c{1.0, 1.0};
  double rho = 1.0;
  bool plus = true;
};

// n = 2 only.  values[k] = f(cos phi_k, sin phi_k) on the uniform grid
// phi_k = k * (pi/2) / (values.size() - 1).
struct RadialGrid {
  std::vector<double> values;
  bool cubic = false;
  bool concave = false;
};

using Descriptor = std::variant<Ellipsoid, PNormBody, QuarterBall, RolledDisk, RadialGrid>;

struct ClassFlags {
  bool convex = false;
  bool concave = false;
  bool analytic = false;
  bool nonsmooth = false;
};

struct Face {
  std::vector<int> index;  // sorted, zero based
  int dim() const noexcept { return static_cast<int>(index.size()); }
  bool operator==(const Face&) const = default;
  auto operator<=>(const Face&) const = default;
};

// All 2^n - 1 faces, ordered by dimension then lexicographically.
std::vector<Face> enumerate_faces(int n);

class ToricDomain {
 public:
  ToricDomain(int n, Descriptor descriptor);

  int n() const noexcept { return n_; }
  const Descriptor& descriptor() const noexcept { return descriptor_; }
  ClassFlags flags() const noexcept { return flags_; }
  bool smooth() const noexcept { return !flags_.nonsmooth; }

  // Domain composed with an orthogonal map: f_R(theta) = f(R^T theta).
  // Requires the descriptor to be defined near the quadrant (not for
  // RadialGrid or RolledDisk).
  ToricDomain rotated(const Mat& rotation) const;
  const std::optional<Mat>& rotation() const noexcept { return rotation_; }

  // f(theta).  theta must be a unit vector with nonnegative coordinates
  // (tolerance 1e-12); otherwise DomainError.
  double radial(const Vec& theta) const;

  // Gauge g and its Euclidean gradient at a point x of the closed quadrant
  // (x != 0).  Used by the geometric kernel; available for nonsmooth
  // descriptors too, where it is an outer normal of the smooth arc.
  double gauge(const Vec& x) const;
  Vec gauge_gradient(const Vec& x) const;

 private:
  double raw_gauge(const Vec& x) const;
  Vec raw_gauge_gradient(const Vec& x) const;

  int n_;
  Descriptor descriptor_;
  ClassFlags flags_;
  std::optional<Mat> rotation_;
  std::shared_ptr<const detail::GridSpline> spline_;
};

// Unit vector of the face chart: normalize(sum_i u_i e_{I_i}).
Vec face_point(const Face& face, int n, const Vec& u);

// Spherical gradient of f restricted to V_face, as an n-vector (zero outside
// the face), computed in a Gram-Schmidt tangent frame.
Vec spherical_gradient(const ToricDomain& domain, const Face& face, const Vec& theta);

// G_face(theta): unit vector in V_face (n-vector, zero outside the face).
Vec gauss_map(const ToricDomain& domain, const Face& face, const Vec& theta);

// T(theta) = f(theta) <theta, G(theta)>.
double period_coeff(const ToricDomain& domain, const Face& face, const Vec& theta);

struct FaceConstants {
  Face face;
  double m_delta = 0.0;
  double grid_min = 0.0;
  double lipschitz = 0.0;
  int grid_resolution = 0;
};

struct MBounds {
  std::vector<FaceConstants> faces;
  double m = 0.0;
};

// Grid infimum of T per face minus a Lipschitz covering margin.
MBounds m_bounds(const ToricDomain& domain, int resolution);

// Points u of the closed simplex grid {u = k / N, k in Z^d_{>=0}, |k| = N}.
std::vector<Vec> simplex_grid(int d, int resolution);

ToricDomain domain_from_json(const nlohmann::json& j);
nlohmann::json domain_to_json(const ToricDomain& domain);

// CSV "theta_1,...,theta_n,f" over the grid of every face.
void write_mesh_csv(const ToricDomain& domain, int resolution, std::ostream& out);

}  // namespace toricbar
