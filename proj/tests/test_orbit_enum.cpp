#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <random>

#include "oracles/lattice_oracles.hpp"
#include "toricbar/error.hpp"
#include "toricbar/orbit_enum.hpp"

using namespace toricbar;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

const Face kEdge{{0, 1}};

template <class Fn>
ErrorKind kind_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::ParseError;
}

using Key = std::pair<std::vector<int>, std::vector<long>>;

std::map<Key, const OrbitClass*> by_key(const Spectrum& sp) {
  std::map<Key, const OrbitClass*> out;
  for (const auto& c : sp.classes) out[{c.face.index, c.p}] = &c;
  return out;
}

// Same (face, p) set as the oracle, actions to tol, degeneracy flags equal.
void check_against(const Spectrum& sp, const std::vector<oracle::LatticeClass>& ref, double tol) {
  const auto got = by_key(sp);
  CHECK(got.size() == sp.classes.size());
  CHECK(sp.classes.size() == ref.size());
  for (const auto& r : ref) {
    const auto it = got.find({r.face, r.p});
    REQUIRE_MESSAGE(it != got.end(), "missing class");
    CHECK(std::abs(it->second->action - r.action) <= tol);
    CHECK(it->second->degenerate == r.degenerate);
  }
}

Mat rotation2(double angle) {
  Mat R(2, 2);
  R << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  return R;
}

}  // namespace

TEST_CASE("support_action examples") {
  const ToricDomain ball(2, QuarterBall{1.0});
  const auto s = support_action(ball, kEdge, {1, 1});
  CHECK(s.action == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(s.unique);
  CHECK(s.interior);
  CHECK(s.theta[0] == doctest::Approx(std::sqrt(0.5)).epsilon(1e-6));

  const ToricDomain ell(2, Ellipsoid{{1.0, 2.0}});
  const auto e = support_action(ell, kEdge, {2, 1});
  CHECK(e.action == doctest::Approx(2.0).epsilon(1e-12));
  CHECK_FALSE(e.unique);
  // a vertex wins strictly: unique, not interior
  const auto v = support_action(ell, kEdge, {3, 1});
  CHECK(v.action == doctest::Approx(3.0).epsilon(1e-12));
  CHECK_FALSE(v.interior);

  const ToricDomain rolled(2, RolledDisk{{1.0, 1.0}, 1.0, false});
  CHECK(kind_of([&] { support_action(rolled, kEdge, {1, 1}); }) == ErrorKind::Unsupported);
  CHECK(kind_of([&] { support_action(ball, kEdge, {0, 0}); }) == ErrorKind::InvalidParameter);
  CHECK(kind_of([&] { support_action(ball, kEdge, {1}); }) == ErrorKind::InvalidParameter);
}

TEST_CASE("support_action dominates random boundary samples") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int n : {2, 3}) {
    const ToricDomain D(n, PNormBody{std::vector<double>(n, 1.0), 4.0});
    const Face top{n == 2 ? std::vector<int>{0, 1} : std::vector<int>{0, 1, 2}};
    std::vector<LatticeVec> ps = n == 2 ? std::vector<LatticeVec>{{1, 1}, {2, 1}, {1, 3}, {5, 2}}
                                        : std::vector<LatticeVec>{{1, 1, 1}, {2, 1, 1}, {1, 3, 2}};
    for (const auto& p : ps) {
      const double best = support_action(D, top, p).action;
      int violations = 0;
      for (int k = 0; k < 1000; ++k) {
        Vec t(n);
        for (int i = 0; i < n; ++i) t[i] = U(rng);
        t /= t.norm();
        const Vec x = D.radial(t) * t;
        double dot = 0;
        for (int i = 0; i < n; ++i) dot += p[i] * x[i];
        if (dot > best + 1e-12) ++violations;
      }
      CHECK(violations == 0);
    }
  }
}

TEST_CASE("invert_gauss examples") {
  const ToricDomain ball(2, QuarterBall{1.0});
  const Vec v = v2(0.6, 0.8);
  const auto pre = invert_gauss(ball, kEdge, v);
  REQUIRE(pre.thetas.size() == 1);
  CHECK((pre.thetas[0] - v).norm() < 1e-10);

  const ToricDomain pn(2, PNormBody{{1.0, 1.0}, 4.0});
  const auto sym = invert_gauss(pn, kEdge, v2(1, 1) / std::sqrt(2.0));
  REQUIRE(sym.thetas.size() == 1);
  CHECK((sym.thetas[0] - v2(1, 1) / std::sqrt(2.0)).norm() < 1e-9);

  CHECK(kind_of([&] { invert_gauss(ball, kEdge, v2(1, 1)); }) == ErrorKind::InvalidParameter);
  const ToricDomain rolled(2, RolledDisk{{1.0, 1.0}, 1.0, true});
  CHECK(kind_of([&] { invert_gauss(rolled, kEdge, v); }) == ErrorKind::Unsupported);
}

TEST_CASE("invert_gauss round trip") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(0.05, 1.0);
  const ToricDomain ell3(3, PNormBody{{1.0, 1.7, 2.4}, 2.0});
  const ToricDomain pn2(2, PNormBody{{1.0, 1.5}, 3.0});
  const ToricDomain pn3(3, PNormBody{{1.0, 1.3, 0.8}, 4.0});
  const Face top3{{0, 1, 2}};
  struct Case {
    const ToricDomain* D;
    Face face;
  };
  for (const Case& c : {Case{&pn2, kEdge}, Case{&ell3, top3}, Case{&pn3, top3}, Case{&ell3, Face{{0, 2}}}}) {
    const int n = c.D->n();
    for (int k = 0; k < 20; ++k) {
      Vec t = Vec::Zero(n);
      for (int i : c.face.index) t[i] = U(rng);
      t /= t.norm();
      const Vec v = gauss_map(*c.D, c.face, t);
      const auto pre = invert_gauss(*c.D, c.face, v);
      REQUIRE(pre.thetas.size() == 1);
      CHECK((pre.thetas[0] - t).norm() < 1e-7);
    }
  }
}

TEST_CASE("quarter ball spectrum matches a lattice scan") {
  const ToricDomain ball(2, QuarterBall{1.0});
  const Spectrum sp = enumerate_spectrum(ball, 2.5);
  check_against(sp, oracle::ball_spectrum(2, 1.0, 2.5), 1e-9);
  std::vector<double> interior;
  for (const auto& c : sp.classes)
    if (c.face.dim() == 2) interior.push_back(c.action);
  std::sort(interior.begin(), interior.end());
  REQUIRE(interior.size() == 3);
  CHECK(interior[0] == doctest::Approx(std::sqrt(2.0)));
  CHECK(interior[2] == doctest::Approx(std::sqrt(5.0)));
  CHECK(generator_count(ball, 2.5).total_generators == 21);

  const ToricDomain ball3(3, QuarterBall{1.5});
  check_against(enumerate_spectrum(ball3, 7.0), oracle::ball_spectrum(3, 1.5, 7.0), 1e-9);
}

TEST_CASE("ellipsoid spectra match the vertex support oracle") {
  const ToricDomain irr(2, Ellipsoid{{1.0, std::sqrt(2.0)}});
  const Spectrum sp = enumerate_spectrum(irr, 10.0);
  check_against(sp, oracle::simplex_spectrum({1.0, std::sqrt(2.0)}, 10.0), 1e-9);
  CHECK(sp.classes.size() == 17);
  for (const auto& c : sp.classes) CHECK(c.face.dim() == 1);

  const ToricDomain rat(2, Ellipsoid{{1.0, 2.0}});
  const Spectrum sr = enumerate_spectrum(rat, 4.0);
  check_against(sr, oracle::simplex_spectrum({1.0, 2.0}, 4.0), 1e-9);
  const auto keys = by_key(sr);
  REQUIRE(keys.count({{0, 1}, {2, 1}}));
  REQUIRE(keys.count({{0, 1}, {4, 2}}));
  CHECK(keys.at({{0, 1}, {2, 1}})->degenerate);
  CHECK(keys.at({{0, 1}, {4, 2}})->action == doctest::Approx(4.0));
  CHECK_FALSE(keys.at({{0, 1}, {2, 1}})->theta.has_value());
  CHECK_FALSE(sr.warnings.empty());
  CHECK_FALSE(count_generators(sr, 3.0).caveats.empty());

  const std::vector<double> a3{1.0, 2.0, 3.0};
  check_against(enumerate_spectrum(ToricDomain(3, Ellipsoid{a3}), 12.5), oracle::simplex_spectrum(a3, 12.5), 1e-9);
}

TEST_CASE("gauss and support enumeration agree") {
  for (int n : {2, 3}) {
    const ToricDomain D(n, PNormBody{std::vector<double>(n, 1.0), 4.0});
    const double s = n == 2 ? 60.0 : 9.0;
    EnumOptions sup{EnumMethod::Support};
    EnumOptions gau{EnumMethod::Gauss};
    const Spectrum a = enumerate_spectrum(D, s, sup);
    const Spectrum b = enumerate_spectrum(D, s, gau);
    CHECK(b.warnings.empty());
    REQUIRE(a.classes.size() == b.classes.size());
    const auto kb = by_key(b);
    for (const auto& c : a.classes) {
      const auto it = kb.find({c.face.index, c.p});
      REQUIRE(it != kb.end());
      CHECK(std::abs(it->second->action - c.action) <= 1e-8);
    }
  }
}

TEST_CASE("n = 3 generator count is stable under a halved grid") {
  const ToricDomain D(3, PNormBody{{1.0, 1.2, 0.9}, 4.0});
  EnumOptions fine;
  EnumOptions coarse;
  coarse.m_resolution = 48;
  coarse.invert.grid = 8;
  coarse.method = EnumMethod::Gauss;
  for (double s : {3.3, 5.7}) {
    CHECK(generator_count(D, s, fine).total_generators == generator_count(D, s, coarse).total_generators);
  }
}

TEST_CASE("spectrum invariants") {
  const ToricDomain D(2, PNormBody{{1.0, 1.4}, 3.0});
  const Spectrum sp = enumerate_spectrum(D, 25.0);
  const auto keys = by_key(sp);
  for (const auto& c : sp.classes) {
    CHECK(c.action > 0);
    const long g = std::accumulate(c.p.begin(), c.p.end(), 0L, [](long a, long b) { return std::gcd(a, b); });
    CHECK(c.primitive == (g == 1));
    if (!c.primitive) continue;
    for (long k = 2; k <= 5; ++k) {
      LatticeVec q = c.p;
      for (auto& x : q) x *= k;
      const auto it = keys.find({c.face.index, q});
      if (it == keys.end()) {
        CHECK(k * c.action > 25.0 - 1e-9);
        continue;
      }
      CHECK(std::abs(it->second->action - k * c.action) <= 1e-9 * k * c.action);
    }
  }
  // lattice bound per face
  std::map<Face, long> per_face;
  for (const auto& c : sp.classes) ++per_face[c.face];
  for (const auto& fc : sp.m.faces) {
    long pts = 0;
    oracle::for_each_positive_point(fc.face.dim(), 25.0 / fc.m_delta, [&](const auto&) { ++pts; });
    CHECK(per_face[fc.face] <= pts);
  }
  // sorted, monotone counts jumping only at actions
  CHECK(std::is_sorted(sp.classes.begin(), sp.classes.end(),
                       [](const auto& a, const auto& b) { return a.action < b.action; }));
  std::uint64_t prev = 1;
  for (std::size_t i = 0; i < sp.classes.size(); ++i) {
    const double a = sp.classes[i].action;
    if (i > 0 && a - sp.classes[i - 1].action < 1e-9 * a) continue;
    const auto below = count_generators(sp, a * (1 - 1e-9)).total_generators;
    const auto at = count_generators(sp, a).total_generators;
    CHECK(below >= prev);
    CHECK(at > below);
    prev = at;
  }
}

TEST_CASE("generator_count edge cases") {
  const ToricDomain ball(2, QuarterBall{2.0});
  CHECK(generator_count(ball, 1.9).total_generators == 1);
  const auto e = kind_of([&] { generator_count(ball, 2.0); });
  CHECK(e == ErrorKind::SpectralValue);
  CHECK(kind_of([&] { generator_count(ball, -1.0); }) == ErrorKind::InvalidParameter);
  const ToricDomain rolled(2, RolledDisk{{1.0, 1.0}, 1.0, true});
  CHECK(kind_of([&] { enumerate_spectrum(rolled, 3.0); }) == ErrorKind::Unsupported);
}

TEST_CASE("lattice remainder") {
  // d = 1: V_1 = 2, sup_R [2(R + 1/2) - C R] = 1 for C > 2
  CHECK(lattice_remainder(1, 6.0) == doctest::Approx(1.0));
  // brute-force sup over a fine R grid
  for (int d = 2; d <= 4; ++d) {
    const double V = std::pow(std::numbers::pi, d / 2.0) / std::tgamma(d / 2.0 + 1);
    double best = 0;
    for (int k = 0; k <= 200000; ++k) {
      const double R = k * 1e-4;
      best = std::max(best, V * std::pow(R + std::sqrt(double(d)) / 2, d) - 6.0 * std::pow(R, d));
    }
    CHECK(lattice_remainder(d, 6.0) == doctest::Approx(best).epsilon(1e-6));
  }
  CHECK_THROWS_AS(lattice_remainder(5, 5.0), Error);
}

TEST_CASE("certify_bound examples") {
  const ToricDomain ball(2, QuarterBall{1.0});
  const auto cb = certify_bound(ball, {5, 10, 20, 40});
  CHECK(cb.ok);
  CHECK(cb.m_used == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cb.C_n == doctest::Approx(4 * 3 * 6.0));
  CHECK(cb.checked_up_to == 40.0);
  // brute force count at s = 40 from the lattice oracle
  std::uint64_t total = 1;
  for (const auto& c : oracle::ball_spectrum(2, 1.0, 40.0)) total += std::uint64_t(1) << c.face.size();
  CHECK(cb.checks.back().generators == total);

  std::vector<double> s_list;
  for (double s = 50; s <= 1000; s += 50) s_list.push_back(s);
  const auto ce = certify_bound(ToricDomain(2, Ellipsoid{{1.0, std::sqrt(2.0)}}), s_list);
  CHECK(ce.ok);
  REQUIRE(ce.fitted_degree);
  CHECK(*ce.fitted_degree == doctest::Approx(1.0).epsilon(0.02));

  const auto c3 = certify_bound(ToricDomain(3, PNormBody{{1.0, 1.0, 1.0}, 4.0}), {5, 10, 20, 30});
  CHECK(c3.ok);
  REQUIRE(c3.fitted_degree);
  CHECK(*c3.fitted_degree <= 3.2);

  // reusing a spectrum gives the same certificate
  const Spectrum sp = enumerate_spectrum(ball, 40.0);
  CHECK(certify_bound(sp, 2, {5, 10, 20, 40}).C_0 == doctest::Approx(cb.C_0));
  CHECK_THROWS_AS(certify_bound(ball, {}), Error);
}

TEST_CASE("regularize_analytic") {
  const ToricDomain ell(2, PNormBody{{1.0, 1.3}, 2.0});
  const auto id = regularize_analytic(ell, 30.0, 1);
  CHECK(id.tries == 0);
  CHECK(id.lambda.isIdentity());
  CHECK(id.fiber_bound == 1);

  // p = 4 is flat at the axis points; a 45 degree turn moves a flat spot onto (1, 1)
  const ToricDomain flat = ToricDomain(2, PNormBody{{1.0, 1.0}, 4.0}).rotated(rotation2(std::numbers::pi / 4));
  CHECK(gauss_jacobian_min_sv(flat, kEdge, v2(1, 1) / std::sqrt(2.0)) < 1e-3);
  const auto reg = regularize_analytic(flat, 10.0, 7);
  CHECK(reg.tries >= 1);
  CHECK_FALSE(reg.lambda.isIdentity(1e-12));
  CHECK((reg.lambda * reg.lambda.transpose() - Mat::Identity(2, 2)).norm() < 1e-12);
  CHECK(reg.worst_singular_value >= 1e-4);
  // post-check on the rotated domain
  const ToricDomain fixed = flat.rotated(reg.lambda);
  RegularizeOptions again;
  CHECK(regularize_analytic(fixed, 10.0, 7, again).tries == 0);

  RegularizeOptions doubled;
  doubled.invert.grid = 2 * 512;
  CHECK(regularize_analytic(fixed, 10.0, 7, doubled).fiber_bound == reg.fiber_bound);

  CHECK(kind_of([&] { regularize_analytic(ToricDomain(2, PNormBody{{1.0, 1.0}, 3.0}), 5.0, 1); }) ==
        ErrorKind::InvalidParameter);
  RegularizeOptions none;
  none.max_tries = 0;
  CHECK(kind_of([&] { regularize_analytic(flat, 10.0, 7, none); }) == ErrorKind::NoRegularPerturbation);
}

TEST_CASE("spectrum json") {
  const auto j = spectrum_to_json(enumerate_spectrum(ToricDomain(2, QuarterBall{1.0}), 2.5));
  CHECK(j["classes"].size() == 7);
  CHECK(j["classes"][0]["face"].size() == 1);
  CHECK(j["m"].get<double>() == doctest::Approx(1.0));
}
