#include "toricbar/delzant.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <limits>
#include <random>
#include <set>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "toricbar/error.hpp"
#include "toricbar/parallel.hpp"

namespace toricbar {

namespace {

constexpr double kFeasTol = 1e-9;
constexpr double kNewtonTol = 1e-12;
constexpr int kNewtonMaxIter = 60;

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorKind::InvalidParameter, what);
}

// Bareiss fraction-free determinant, exact for the small normals we see.
long long int_det(std::vector<std::vector<long long>> a) {
  const int n = static_cast<int>(a.size());
  long long sign = 1, prev = 1;
  for (int k = 0; k < n; ++k) {
    if (a[k][k] == 0) {
      int r = k + 1;
      while (r < n && a[r][k] == 0) ++r;
      if (r == n) return 0;
      std::swap(a[k], a[r]);
      sign = -sign;
    }
    for (int i = k + 1; i < n; ++i) {
      for (int j = k + 1; j < n; ++j) {
        const __int128 num = static_cast<__int128>(a[i][j]) * a[k][k] - static_cast<__int128>(a[i][k]) * a[k][j];
        a[i][j] = static_cast<long long>(num / prev);
      }
    }
    prev = a[k][k];
  }
  return sign * a[n - 1][n - 1];
}

double slack(const Inequality& q, const Vec& x) {
  double s = q.c;
  for (std::size_t i = 0; i < q.v.size(); ++i) s -= static_cast<double>(q.v[i]) * x[static_cast<int>(i)];
  return s;
}

double tol_for(const Inequality& q) { return kFeasTol * (1.0 + std::abs(q.c)); }

void check_shape(const DelzantPolytope& P) {
  require(P.n >= 1 && P.n <= 8, fmt::format("polytope dimension {} out of range", P.n));
  require(static_cast<int>(P.ineqs.size()) >= P.n + 1, "a bounded polytope needs at least n + 1 inequalities");
  for (const Inequality& q : P.ineqs) {
    require(static_cast<int>(q.v.size()) == P.n, "inequality normal has the wrong length");
    require(std::any_of(q.v.begin(), q.v.end(), [](long x) { return x != 0; }), "zero inequality normal");
    require(std::isfinite(q.c), "inequality bound must be finite");
  }
}

template <class Fn>
void for_each_subset(int m, int r, Fn&& fn) {
  std::vector<int> idx(r);
  std::iota(idx.begin(), idx.end(), 0);
  if (r > m) return;
  for (;;) {
    fn(idx);
    int i = r - 1;
    while (i >= 0 && idx[i] == m - r + i) --i;
    if (i < 0) return;
    ++idx[i];
    for (int j = i + 1; j < r; ++j) idx[j] = idx[j - 1] + 1;
  }
}

Mat normals(const DelzantPolytope& P, const std::vector<int>& rows) {
  Mat A(rows.size(), P.n);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (int j = 0; j < P.n; ++j) A(r, j) = static_cast<double>(P.ineqs[rows[r]].v[j]);
  return A;
}

Mat basis_matrix(const std::vector<LatticeVec>& basis, int n) {
  Mat B(n, basis.size());
  for (std::size_t j = 0; j < basis.size(); ++j)
    for (int i = 0; i < n; ++i) B(i, j) = static_cast<double>(basis[j][i]);
  return B;
}

bool in_open_face(const DelzantPolytope& P, const PolytopeFace& F, const Vec& w, double scale = 1.0) {
  std::size_t a = 0;
  for (std::size_t i = 0; i < P.ineqs.size(); ++i) {
    const double s = slack(P.ineqs[i], w);
    if (a < F.active.size() && F.active[a] == static_cast<int>(i)) {
      if (std::abs(s) > scale * tol_for(P.ineqs[i])) return false;
      ++a;
    } else if (s <= scale * tol_for(P.ineqs[i])) {
      return false;
    }
  }
  return true;
}

}  // namespace

DelzantReport validate_delzant(const DelzantPolytope& P) {
  check_shape(P);
  const int n = P.n;
  const int m = static_cast<int>(P.ineqs.size());
  DelzantReport rep;
  for (int i = 0; i < m; ++i) {
    const long g = std::accumulate(P.ineqs[i].v.begin(), P.ineqs[i].v.end(), 0L,
                                   [](long a, long b) { return std::gcd(a, b); });
    if (g != 1) rep.violations.push_back(fmt::format("normal {} ({}) is not primitive", i, fmt::join(P.ineqs[i].v, ", ")));
  }
  for_each_subset(m, n, [&](const std::vector<int>& rows) {
    std::vector<std::vector<long long>> a(n, std::vector<long long>(n));
    for (int r = 0; r < n; ++r)
      for (int j = 0; j < n; ++j) a[r][j] = P.ineqs[rows[r]].v[j];
    if (int_det(a) == 0) return;
    Vec c(n);
    for (int r = 0; r < n; ++r) c[r] = P.ineqs[rows[r]].c;
    const Vec x = normals(P, rows).partialPivLu().solve(c);
    for (const Inequality& q : P.ineqs)
      if (slack(q, x) < -tol_for(q)) return;
    for (const Vec& y : rep.vertices)
      if ((y - x).norm() <= kFeasTol * (1.0 + x.norm())) return;
    std::vector<int> active;
    for (int i = 0; i < m; ++i)
      if (std::abs(slack(P.ineqs[i], x)) <= tol_for(P.ineqs[i])) active.push_back(i);
    rep.vertices.push_back(x);
    rep.vertex_facets.push_back(active);
  });
  if (rep.vertices.empty()) rep.violations.push_back("no vertices: the polytope is empty or unbounded");
  for (std::size_t v = 0; v < rep.vertices.size(); ++v) {
    const auto& act = rep.vertex_facets[v];
    const std::string where = fmt::format("vertex ({:.6g})", fmt::join(rep.vertices[v], ", "));
    if (static_cast<int>(act.size()) != n) {
      rep.violations.push_back(fmt::format("{} lies on {} facets, expected {}", where, act.size(), n));
      continue;
    }
    std::vector<std::vector<long long>> a(n, std::vector<long long>(n));
    for (int r = 0; r < n; ++r)
      for (int j = 0; j < n; ++j) a[r][j] = P.ineqs[act[r]].v[j];
    const long long det = int_det(a);
    if (std::llabs(det) != 1) {
      rep.violations.push_back(fmt::format("{}: normals have determinant {}", where, det));
    }
    // each edge ray leaving the vertex must be cut off by another facet
    const Mat A = normals(P, act);
    const Mat E = A.partialPivLu().inverse();
    for (int j = 0; j < n; ++j) {
      const Vec dir = -E.col(j);
      bool cut = false;
      for (int i = 0; i < m && !cut; ++i) {
        if (std::find(act.begin(), act.end(), i) != act.end()) continue;
        double dot = 0;
        for (int t = 0; t < n; ++t) dot += static_cast<double>(P.ineqs[i].v[t]) * dir[t];
        cut = dot > 1e-12;
      }
      if (!cut) rep.violations.push_back(fmt::format("{}: unbounded edge", where));
    }
  }
  rep.ok = rep.violations.empty();
  return rep;
}

std::vector<LatticeVec> hermite_normal_form(std::vector<LatticeVec> rows) {
  if (rows.empty()) return rows;
  const std::size_t cols = rows[0].size();
  std::size_t pr = 0;
  for (std::size_t c = 0; c < cols && pr < rows.size(); ++c) {
    // gcd-combine rows pr.. so only row pr is nonzero in column c
    for (;;) {
      std::size_t best = rows.size();
      for (std::size_t r = pr; r < rows.size(); ++r) {
        if (rows[r][c] != 0 && (best == rows.size() || std::labs(rows[r][c]) < std::labs(rows[best][c]))) best = r;
      }
      if (best == rows.size()) break;
      std::swap(rows[pr], rows[best]);
      bool done = true;
      for (std::size_t r = pr + 1; r < rows.size(); ++r) {
        const long q = rows[r][c] / rows[pr][c];
        if (q != 0)
          for (std::size_t j = 0; j < cols; ++j) rows[r][j] -= q * rows[pr][j];
        done = done && rows[r][c] == 0;
      }
      if (done) break;
    }
    if (rows[pr][c] == 0) continue;
    if (rows[pr][c] < 0)
      for (auto& x : rows[pr]) x = -x;
    for (std::size_t r = 0; r < pr; ++r) {
      long q = rows[r][c] / rows[pr][c];
      if (rows[r][c] - q * rows[pr][c] < 0) --q;
      if (q != 0)
        for (std::size_t j = 0; j < cols; ++j) rows[r][j] -= q * rows[pr][j];
    }
    ++pr;
  }
  rows.resize(pr);
  return rows;
}

std::vector<LatticeVec> face_lattice_basis(const DelzantPolytope& P, const std::vector<int>& active) {
  const int n = P.n;
  const std::size_t m = active.size();
  for (int i : active) require(i >= 0 && i < static_cast<int>(P.ineqs.size()), "active index out of range");
  // rows (A^T e_j | e_j); unimodular row reduction leaves the kernel in the
  // rows whose first m entries vanish
  std::vector<LatticeVec> aug(n, LatticeVec(m + n, 0));
  for (int j = 0; j < n; ++j) {
    for (std::size_t r = 0; r < m; ++r) aug[j][r] = P.ineqs[active[r]].v[j];
    aug[j][m + j] = 1;
  }
  aug = hermite_normal_form(std::move(aug));
  std::vector<LatticeVec> kernel;
  for (const auto& row : aug) {
    if (std::all_of(row.begin(), row.begin() + static_cast<long>(m), [](long x) { return x == 0; })) {
      kernel.emplace_back(row.begin() + static_cast<long>(m), row.end());
    }
  }
  return hermite_normal_form(std::move(kernel));
}

std::vector<PolytopeFace> polytope_faces(const DelzantPolytope& P) {
  const DelzantReport rep = validate_delzant(P);
  if (!rep.ok) throw Error(ErrorKind::NonDelzant, fmt::format("{}", fmt::join(rep.violations, "; ")));
  std::map<std::vector<int>, PolytopeFace> faces;
  for (std::size_t v = 0; v < rep.vertices.size(); ++v) {
    const auto& act = rep.vertex_facets[v];
    for (unsigned mask = 0; mask < (1u << act.size()); ++mask) {
      std::vector<int> S;
      for (std::size_t i = 0; i < act.size(); ++i)
        if (mask & (1u << i)) S.push_back(act[i]);
      auto [it, fresh] = faces.try_emplace(S);
      if (fresh) {
        it->second.active = S;
        it->second.dim = P.n - static_cast<int>(S.size());
        it->second.basis = face_lattice_basis(P, S);
      }
      it->second.vertices.push_back(rep.vertices[v]);
    }
  }
  std::vector<PolytopeFace> out;
  for (auto& [k, f] : faces) out.push_back(std::move(f));
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.dim < b.dim; });
  return out;
}

// Hamiltonians

Hamiltonian::Hamiltonian(int n, std::variant<QuadraticH, PolynomialH> form) : n_(n), form_(std::move(form)) {
  require(n >= 1, "dimension must be positive");
  if (auto* q = std::get_if<QuadraticH>(&form_)) {
    require(q->Q.rows() == n && q->Q.cols() == n, "Q must be n x n");
    if (q->l.size() == 0) q->l = Vec::Zero(n);
    require(q->l.size() == n, "linear part must have length n");
    require(q->Q.allFinite() && q->l.allFinite(), "quadratic coefficients must be finite");
    q->Q = (q->Q + q->Q.transpose()) / 2;
    const Vec ev = Eigen::SelfAdjointEigenSolver<Mat>(q->Q).eigenvalues();
    const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
    const double lo = ev.minCoeff(), hi = ev.maxCoeff();
    flags_.convex = lo >= -1e-14 * scale;
    flags_.concave = hi <= 1e-14 * scale;
    flags_.strict = lo > 1e-12 * scale || hi < -1e-12 * scale;
  } else {
    for (const auto& t : std::get<PolynomialH>(form_).terms) {
      require(static_cast<int>(t.e.size()) == n, "polynomial exponent has the wrong length");
      require(std::all_of(t.e.begin(), t.e.end(), [](int e) { return e >= 0; }), "negative exponent");
      require(std::isfinite(t.c), "polynomial coefficient must be finite");
    }
  }
}

namespace {

double ipow(double x, int e) {
  double r = 1.0;
  for (int i = 0; i < e; ++i) r *= x;
  return r;
}

}  // namespace

double Hamiltonian::value(const Vec& x) const {
  if (const auto* q = std::get_if<QuadraticH>(&form_)) return 0.5 * x.dot(q->Q * x) + q->l.dot(x);
  double s = 0;
  for (const auto& t : std::get<PolynomialH>(form_).terms) {
    double m = t.c;
    for (int i = 0; i < n_; ++i) m *= ipow(x[i], t.e[i]);
    s += m;
  }
  return s;
}

Vec Hamiltonian::gradient(const Vec& x) const {
  if (const auto* q = std::get_if<QuadraticH>(&form_)) return q->Q * x + q->l;
  Vec g = Vec::Zero(n_);
  for (const auto& t : std::get<PolynomialH>(form_).terms) {
    for (int i = 0; i < n_; ++i) {
      if (t.e[i] == 0) continue;
      double m = t.c * t.e[i];
      for (int j = 0; j < n_; ++j) m *= ipow(x[j], t.e[j] - (j == i));
      g[i] += m;
    }
  }
  return g;
}

Mat Hamiltonian::hessian(const Vec& x) const {
  if (const auto* q = std::get_if<QuadraticH>(&form_)) return q->Q;
  Mat H = Mat::Zero(n_, n_);
  for (const auto& t : std::get<PolynomialH>(form_).terms) {
    for (int i = 0; i < n_; ++i) {
      for (int k = i; k < n_; ++k) {
        std::vector<int> e = t.e;
        double m = t.c * e[i];
        --e[i];
        if (e[i] < 0 || e[k] == 0) continue;
        m *= e[k];
        --e[k];
        for (int j = 0; j < n_; ++j) m *= ipow(x[j], e[j]);
        H(i, k) += m;
        if (k != i) H(k, i) += m;
      }
    }
  }
  return H;
}

Hamiltonian Hamiltonian::shifted(const Vec& lambda) const {
  require(lambda.size() == n_, "shift has the wrong length");
  if (const auto* q = std::get_if<QuadraticH>(&form_)) return Hamiltonian(n_, QuadraticH{q->Q, q->l + lambda});
  PolynomialH p = std::get<PolynomialH>(form_);
  for (int i = 0; i < n_; ++i) {
    std::vector<int> e(n_, 0);
    e[i] = 1;
    p.terms.push_back({lambda[i], e});
  }
  return Hamiltonian(n_, p);
}

Hamiltonian Hamiltonian::strictified(double eps) const {
  require(eps >= 0.0 && std::isfinite(eps), "strictification eps must be >= 0");
  if (const auto* q = std::get_if<QuadraticH>(&form_)) {
    return Hamiltonian(n_, QuadraticH{q->Q + 2 * eps * Mat::Identity(n_, n_), q->l});
  }
  PolynomialH p = std::get<PolynomialH>(form_);
  for (int i = 0; i < n_; ++i) {
    std::vector<int> e(n_, 0);
    e[i] = 2;
    p.terms.push_back({eps, e});
  }
  return Hamiltonian(n_, p);
}

Hamiltonian linear_hamiltonian(const Vec& l) { return Hamiltonian(static_cast<int>(l.size()), QuadraticH{Mat::Zero(l.size(), l.size()), l}); }

Vec face_gradient(const DelzantPolytope& P, const Hamiltonian& h, const PolytopeFace& face, const Vec& w) {
  require(h.n() == P.n && w.size() == P.n, "dimension mismatch");
  if (!in_open_face(P, face, w)) {
    throw Error(ErrorKind::DomainError, fmt::format("w = ({}) is not in the open face [{}]", fmt::join(w, ", "),
                                                    fmt::join(face.active, ",")));
  }
  return basis_matrix(face.basis, P.n).transpose() * h.gradient(w);
}

namespace {

// Lattice target values g = z / q in the box [lo, hi].  Divisor mode uses the
// single denominator k; q <= k mode uses every q <= k with the value reduced.
template <class Fn>
void for_each_target(const Vec& lo, const Vec& hi, int k, CountMode mode, Fn&& fn) {
  const int d = static_cast<int>(lo.size());
  const int q0 = mode == CountMode::Divisor ? k : 1;
  for (int q = q0; q <= k; ++q) {
    std::vector<long> a(d), b(d);
    bool empty = false;
    for (int j = 0; j < d; ++j) {
      a[j] = static_cast<long>(std::ceil(q * lo[j] - 1e-9));
      b[j] = static_cast<long>(std::floor(q * hi[j] + 1e-9));
      empty |= a[j] > b[j];
    }
    if (empty) continue;
    std::vector<long> z = a;
    for (;;) {
      long g = q;
      for (long x : z) g = std::gcd(g, x);
      if (mode == CountMode::Divisor || g == 1) {
        Vec t(d);
        for (int j = 0; j < d; ++j) t[j] = static_cast<double>(z[j]) / q;
        fn(t);
      }
      int j = 0;
      while (j < d && z[j] == b[j]) {
        z[j] = a[j];
        ++j;
      }
      if (j == d) break;
      ++z[j];
    }
  }
}

struct FaceFrame {
  Mat B;   // n x d lattice basis
  Vec w0;  // a vertex
  std::vector<Vec> t_vertices;
};

FaceFrame frame(const DelzantPolytope& P, const PolytopeFace& F) {
  FaceFrame fr;
  fr.B = basis_matrix(F.basis, P.n);
  fr.w0 = F.vertices.front();
  const auto qr = fr.B.colPivHouseholderQr();
  for (const Vec& v : F.vertices) fr.t_vertices.push_back(qr.solve(Vec(v - fr.w0)));
  return fr;
}

// Sample points of the face in t coordinates: grid over the t bounding box,
// kept when inside the closed face.
std::vector<Vec> face_samples(const DelzantPolytope& P, const PolytopeFace& F, const FaceFrame& fr, int G,
                              double& spacing) {
  const int d = F.dim;
  Vec lo = fr.t_vertices[0], hi = fr.t_vertices[0];
  for (const Vec& t : fr.t_vertices) {
    lo = lo.cwiseMin(t);
    hi = hi.cwiseMax(t);
  }
  spacing = ((hi - lo) / G).maxCoeff();
  std::vector<Vec> out;
  std::vector<int> idx(d, 0);
  for (;;) {
    Vec t(d);
    for (int j = 0; j < d; ++j) t[j] = lo[j] + (hi[j] - lo[j]) * idx[j] / G;
    const Vec w = fr.w0 + fr.B * t;
    bool inside = true;
    for (std::size_t i = 0; i < P.ineqs.size() && inside; ++i)
      inside = slack(P.ineqs[i], w) >= -tol_for(P.ineqs[i]) * 1e3;
    if (inside) out.push_back(t);
    int j = 0;
    while (j < d && idx[j] == G) {
      idx[j] = 0;
      ++j;
    }
    if (j == d) break;
    ++idx[j];
  }
  return out;
}

struct GradientBox {
  Vec lo, hi;
};

// Exact for quadratic h (affine gradient, image = hull of the vertex
// images); sampled with a Hessian-norm margin otherwise.
GradientBox gradient_box(const DelzantPolytope& P, const Hamiltonian& h, const PolytopeFace& F, const FaceFrame& fr,
                         int G) {
  GradientBox box;
  auto grow = [&](const Vec& g) {
    if (box.lo.size() == 0) {
      box.lo = box.hi = g;
    } else {
      box.lo = box.lo.cwiseMin(g);
      box.hi = box.hi.cwiseMax(g);
    }
  };
  if (h.quadratic()) {
    for (const Vec& v : F.vertices) grow(fr.B.transpose() * h.gradient(v));
    return box;
  }
  double spacing = 0;
  double lip = 0;
  for (const Vec& t : face_samples(P, F, fr, G, spacing)) {
    const Vec w = fr.w0 + fr.B * t;
    grow(fr.B.transpose() * h.gradient(w));
    lip = std::max(lip, (fr.B.transpose() * h.hessian(w) * fr.B).norm());
  }
  const double margin = 1.25 * lip * spacing * std::sqrt(static_cast<double>(F.dim));
  box.lo.array() -= margin;
  box.hi.array() += margin;
  return box;
}

int default_grid(int d) { return d == 1 ? 64 : (d == 2 ? 24 : 10); }

struct FaceResult {
  FaceCount count;
  double min_sv = std::numeric_limits<double>::infinity();
  std::vector<std::string> warnings;
};

FaceResult count_face(const DelzantPolytope& P, const Hamiltonian& h, const PolytopeFace& F, int k,
                      const CountOptions& opt) {
  FaceResult res;
  res.count.active = F.active;
  res.count.dim = F.dim;
  const int d = F.dim;
  const FaceFrame fr = frame(P, F);
  const std::string name = fmt::format("[{}]", fmt::join(F.active, ","));
  if (h.quadratic()) {
    const auto& q = std::get<QuadraticH>(h.form());
    const Mat M = fr.B.transpose() * q.Q * fr.B;
    const Vec c0 = fr.B.transpose() * h.gradient(fr.w0);
    const Vec sv = M.jacobiSvd().singularValues();
    if (M.norm() <= 1e-14) {
      // constant gradient: the whole face is fixed or nothing is
      bool rational = false;
      for (int q2 = opt.mode == CountMode::Divisor ? k : 1; q2 <= k && !rational; ++q2) {
        rational = ((c0 * q2).array() - (c0 * q2).array().round()).abs().maxCoeff() < 1e-9;
      }
      if (rational) {
        res.count.tori = 1;
        res.count.degenerate = true;
        res.warnings.push_back(fmt::format("face {}: constant rational gradient, the whole face is fixed", name));
      }
      return res;
    }
    if (sv.minCoeff() <= 1e-12 * sv.maxCoeff()) {
      throw Error(ErrorKind::PreconditionViolated,
                  fmt::format("h is not strictly convex or concave along face {}; use strictification", name));
    }
    res.min_sv = sv.minCoeff();
    const GradientBox box = gradient_box(P, h, F, fr, 0);
    const auto lu = M.partialPivLu();
    for_each_target(box.lo, box.hi, k, opt.mode, [&](const Vec& g) {
      const Vec w = fr.w0 + fr.B * lu.solve(Vec(g - c0));
      if (in_open_face(P, F, w)) ++res.count.tori;
    });
    return res;
  }
  // polynomial h: multistart Newton on B^T grad h(w0 + B t) = g
  const int G = opt.grid > 0 ? opt.grid : default_grid(d);
  double spacing = 0;
  const auto starts = face_samples(P, F, fr, G, spacing);
  std::vector<Vec> start_grad;
  double lip = 0;
  for (const Vec& t : starts) {
    const Vec w = fr.w0 + fr.B * t;
    start_grad.push_back(fr.B.transpose() * h.gradient(w));
    lip = std::max(lip, (fr.B.transpose() * h.hessian(w) * fr.B).norm());
  }
  const double reach = 1.5 * lip * spacing * std::sqrt(static_cast<double>(d)) + 1e-12;
  const GradientBox box = gradient_box(P, h, F, fr, G);
  for_each_target(box.lo, box.hi, k, opt.mode, [&](const Vec& g) {
    std::vector<std::pair<double, std::size_t>> near;
    for (std::size_t i = 0; i < starts.size(); ++i) near.push_back({(start_grad[i] - g).norm(), i});
    std::sort(near.begin(), near.end());
    std::vector<Vec> sols;
    bool failed = false;
    for (std::size_t r = 0; r < near.size(); ++r) {
      if (r >= 2 && near[r].first > reach) break;
      Vec t = starts[near[r].second];
      bool ok = false;
      for (int it = 0; it < kNewtonMaxIter; ++it) {
        const Vec w = fr.w0 + fr.B * t;
        const Vec res_v = fr.B.transpose() * h.gradient(w) - g;
        if (res_v.norm() < kNewtonTol * (1.0 + g.norm())) {
          ok = true;
          break;
        }
        const Mat J = fr.B.transpose() * h.hessian(w) * fr.B;
        const Vec step = J.colPivHouseholderQr().solve(res_v);
        if (!step.allFinite()) break;
        t -= step;
        if (step.norm() < 1e-14 * (1.0 + t.norm())) {
          ok = (fr.B.transpose() * h.gradient(fr.w0 + fr.B * t) - g).norm() < 1e-9;
          break;
        }
      }
      if (!ok) {
        failed |= near[r].first <= reach;
        continue;
      }
      const Vec w = fr.w0 + fr.B * t;
      if (!in_open_face(P, F, w)) continue;
      if (std::none_of(sols.begin(), sols.end(), [&](const Vec& s) { return (s - t).norm() < 1e-8; })) {
        sols.push_back(t);
        const Vec sv = (fr.B.transpose() * h.hessian(w) * fr.B).jacobiSvd().singularValues();
        res.min_sv = std::min(res.min_sv, sv.minCoeff());
      }
    }
    if (failed && sols.empty()) {
      res.warnings.push_back(fmt::format("face {}: Newton did not certify value ({})", name, fmt::join(g, ", ")));
    }
    res.count.tori += sols.size();
  });
  return res;
}

}  // namespace

FixedPointCount count_fixed_points(const DelzantPolytope& P, const Hamiltonian& h0, int k, CountOptions options) {
  require(k >= 1, fmt::format("k must be >= 1, got {}", k));
  require(h0.n() == P.n, "Hamiltonian and polytope dimensions differ");
  const Hamiltonian h = options.strictify > 0 ? h0.strictified(options.strictify) : h0;
  const auto faces = polytope_faces(P);
  std::vector<FaceResult> res(faces.size());
  parallel_for(faces.size(), [&](std::size_t i) {
    if (faces[i].dim == 0) {
      res[i].count = {faces[i].active, 0, 1, false};
    } else {
      res[i] = count_face(P, h, faces[i], k, options);
    }
  });
  FixedPointCount out;
  out.k = k;
  out.mode = options.mode;
  out.min_hessian_sv = std::numeric_limits<double>::infinity();
  for (auto& r : res) {
    out.total += r.count.tori << r.count.dim;
    out.min_hessian_sv = std::min(out.min_hessian_sv, r.min_sv);
    out.faces.push_back(std::move(r.count));
    for (auto& w : r.warnings) out.warnings.push_back(std::move(w));
  }
  return out;
}

KBoundCertificate certify_k_bound(const DelzantPolytope& P, const Hamiltonian& h0, std::vector<int> k_list,
                                  CountOptions options, int fit_from) {
  require(!k_list.empty(), "certify_k_bound needs at least one k");
  std::sort(k_list.begin(), k_list.end());
  require(k_list.front() >= 1, "k values must be >= 1");
  const Hamiltonian h = options.strictify > 0 ? h0.strictified(options.strictify) : h0;
  CountOptions plain = options;
  plain.strictify = 0.0;
  KBoundCertificate cert;
  for (const PolytopeFace& F : polytope_faces(P)) {
    if (F.dim == 0) {
      cert.C_0 += 1.0;
      continue;
    }
    const FaceFrame fr = frame(P, F);
    const GradientBox box = gradient_box(P, h, F, fr, options.grid > 0 ? options.grid : default_grid(F.dim));
    double prod = 1.0;
    for (int j = 0; j < F.dim; ++j) prod *= (box.hi[j] - box.lo[j]) + 1.0;
    const double split = std::ldexp(1.0, F.dim);
    cert.C_n += split * (prod - 1.0);
    cert.C_0 += split;
  }
  cert.ok = true;
  for (int k : k_list) {
    const auto c = count_fixed_points(P, h, k, plain);
    const double bound = cert.C_n * std::pow(double(k), P.n) + cert.C_0;
    cert.checks.push_back({k, c.total, bound});
    cert.ok = cert.ok && static_cast<double>(c.total) <= bound;
  }
  cert.checked_up_to = k_list.back();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int used = 0;
  for (const auto& c : cert.checks) {
    if (c.k < fit_from) continue;
    ++used;
    const double x = std::log(double(c.k)), y = std::log(double(c.total));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double m = used;
  if (used >= 2 && m * sxx - sx * sx > 1e-12) cert.fitted_degree = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  return cert;
}

ShiftResult regularize_shift(const DelzantPolytope& P, const Hamiltonian& h, int k_max, std::uint64_t seed,
                             double threshold, int max_tries, double scale) {
  require(k_max >= 1 && threshold > 0 && scale > 0, "invalid regularization parameters");
  auto worst = [&](const Hamiltonian& hh) {
    double m = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= k_max; ++k) m = std::min(m, count_fixed_points(P, hh, k).min_hessian_sv);
    return m;
  };
  ShiftResult out;
  out.lambda = Vec::Zero(P.n);
  out.min_hessian_sv = worst(h);
  if (out.min_hessian_sv >= threshold) return out;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-scale, scale);
  for (int t = 1; t <= max_tries; ++t) {
    Vec lambda(P.n);
    for (int i = 0; i < P.n; ++i) lambda[i] = U(rng);
    const double sv = worst(h.shifted(lambda));
    out.tries = t;
    if (sv >= threshold) {
      out.lambda = lambda;
      out.min_hessian_sv = sv;
      return out;
    }
  }
  throw Error(ErrorKind::NoRegularPerturbation, fmt::format("no regular shift found in {} tries", max_tries));
}

DelzantPolytope polytope_from_json(const nlohmann::json& j) {
  try {
    DelzantPolytope P;
    P.n = j.at("n").get<int>();
    for (const auto& q : j.at("ineqs")) P.ineqs.push_back({q.at("v").get<LatticeVec>(), q.at("c").get<double>()});
    check_shape(P);
    return P;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, fmt::format("polytope JSON: {}", e.what()));
  }
}

nlohmann::json polytope_to_json(const DelzantPolytope& P) {
  nlohmann::json ineqs = nlohmann::json::array();
  for (const Inequality& q : P.ineqs) ineqs.push_back({{"v", q.v}, {"c", q.c}});
  return {{"n", P.n}, {"ineqs", ineqs}};
}

Hamiltonian hamiltonian_from_json(const nlohmann::json& j, int n) {
  try {
    const std::string type = j.at("type").get<std::string>();
    auto vec = [&](const nlohmann::json& a) {
      const auto v = a.get<std::vector<double>>();
      require(static_cast<int>(v.size()) == n, "vector has the wrong length");
      return Vec(Eigen::Map<const Vec>(v.data(), n));
    };
    if (type == "quadratic") {
      const auto rows = j.at("Q").get<std::vector<std::vector<double>>>();
      require(static_cast<int>(rows.size()) == n, "Q must be n x n");
      Mat Q(n, n);
      for (int r = 0; r < n; ++r) {
        require(static_cast<int>(rows[r].size()) == n, "Q must be n x n");
        for (int c = 0; c < n; ++c) Q(r, c) = rows[r][c];
      }
      return Hamiltonian(n, QuadraticH{Q, j.contains("l") ? vec(j["l"]) : Vec::Zero(n)});
    }
    if (type == "linear") return linear_hamiltonian(vec(j.at("l")));
    if (type == "polynomial") {
      PolynomialH p;
      for (const auto& t : j.at("terms")) p.terms.push_back({t.at("c").get<double>(), t.at("e").get<std::vector<int>>()});
      return Hamiltonian(n, p);
    }
    throw Error(ErrorKind::ParseError, fmt::format("unknown Hamiltonian type '{}'", type));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, fmt::format("Hamiltonian JSON: {}", e.what()));
  }
}

void write_counts_csv(std::ostream& os, const std::vector<FixedPointCount>& counts) {
  os << "k,total,face_breakdown\n";
  for (const auto& c : counts) {
    std::vector<std::string> items;
    for (const auto& f : c.faces) items.push_back(fmt::format("[{}]={}", fmt::join(f.active, " "), f.tori));
    os << c.k << ',' << c.total << ',' << fmt::format("{}", fmt::join(items, ";")) << '\n';
  }
}

}  // namespace toricbar
