#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles/barcode_oracles.hpp"
#include "toricbar/bm_metric.hpp"
#include "toricbar/error.hpp"
#include "toricbar/mollify.hpp"
#include "toricbar/orbit_enum.hpp"

using namespace toricbar;

namespace {

std::vector<LadderRung> ladder_of(std::vector<double> values) {
  std::vector<LadderRung> out;
  double d = 1.0;
  for (double v : values) {
    out.push_back({"", d, v});
    d /= 2;
  }
  return out;
}

}  // namespace

TEST_CASE("log_ratio_bound examples") {
  const ToricDomain Q1(2, QuarterBall{1.0});
  CHECK(log_ratio_bound(Q1, Q1, 64).dsbm_upper == 0.0);

  for (double lambda : {1.1, 2.0, 5.0}) {
    const auto r = log_ratio_bound(Q1, ToricDomain(2, QuarterBall{lambda}), 33);
    CHECK(r.dsbm_upper == doctest::Approx(std::log(lambda)).epsilon(1e-14));
    CHECK(r.margin <= 1e-12);
  }
  // a dilated p-norm body in three dimensions
  const ToricDomain P(3, PNormBody{{1.0, 1.5, 2.0}, 4.0});
  const ToricDomain P2(3, PNormBody{{2.5, 3.75, 5.0}, 4.0});
  CHECK(log_ratio_bound(P, P2, 12).dsbm_upper == doctest::Approx(std::log(2.5)).epsilon(1e-12));

  // rolled disk against its eta = 0.01 smoothing
  const ToricDomain R(2, RolledDisk{{1.0, 1.0}, 1.25, true});
  const auto M = mollify_domain(build_field(R), 0.01);
  const auto rb = log_ratio_bound(R, M.domain(), 512);
  CHECK(rb.dsbm_upper <= 0.05);
  CHECK(rb.dsbm_upper >= rb.grid_max);

  CHECK_THROWS_AS(log_ratio_bound(Q1, Q1, 1), Error);
  CHECK_THROWS_AS(log_ratio_bound(Q1, ToricDomain(3, QuarterBall{1.0}), 8), Error);
}

TEST_CASE("log_ratio_bound: grid values and subadditivity") {
  const ToricDomain f(2, Ellipsoid{{1.0, 2.0}});
  const ToricDomain g(2, PNormBody{{1.2, 1.8}, 3.0});
  const ToricDomain h(2, QuarterBall{1.4});
  const auto fg = log_ratio_bound(f, g, 200);
  // grid maximum recomputed directly
  double direct = 0.0;
  for (int k = 0; k <= 200; ++k) {
    const double a = (M_PI / 2) * k / 200;
    Vec t(2);
    t << std::cos(a), std::sin(a);
    direct = std::max(direct, std::abs(std::log(f.radial(t) / g.radial(t))));
  }
  CHECK(fg.grid_max == doctest::Approx(direct).epsilon(1e-12));
  // a finer grid stays below the certified value
  CHECK(log_ratio_bound(f, g, 4000).grid_max <= fg.log_ratio + 1e-12);

  const auto fh = log_ratio_bound(f, h, 200), gh = log_ratio_bound(g, h, 200);
  CHECK(fh.dsbm_upper <= fg.dsbm_upper + gh.dsbm_upper + 1e-12);
}

TEST_CASE("interleaving_bound") {
  CHECK(interleaving_bound(5.0, 0.0) == 0.0);
  CHECK(interleaving_bound(10.0, std::log(1.1)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(interleaving_bound(-1.0, 0.1), Error);

  // B2 = lambda B1 is within s (lambda - 1) after truncation at s
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Barcode B1 = oracle::random_barcode(rng, 12, 10.0, 3.0, 0.0);
    const double d = 0.02 + 0.01 * (trial % 5);
    const double lambda = std::exp(d);
    std::vector<Bar> scaled;
    for (const Bar& b : B1.bars()) scaled.emplace_back(lambda * b.start, lambda * b.end);
    const Barcode B2(std::move(scaled));
    for (double s : {3.0, 7.0, 12.0}) {
      const double dist = bottleneck_distance(truncate(B1, s), truncate(B2, s));
      CHECK(dist <= interleaving_bound(s, d) + 1e-12);
    }
  }
}

TEST_CASE("beps_liminf") {
  auto r = beps_liminf(ladder_of({4, 4, 4, 4}));
  CHECK(r.value == 4.0);
  CHECK(r.stabilized);
  CHECK(r.distances_nonincreasing);

  r = beps_liminf(ladder_of({3, 4, 3, 4, 3, 4}));
  CHECK(r.value == 3.0);
  CHECK(r.stabilized);

  r = beps_liminf(ladder_of({9, 7, 5, 3}));
  CHECK(r.value == 3.0);
  CHECK_FALSE(r.stabilized);
  r = beps_liminf(ladder_of({9, 7, 5, 3, 3, 3}));
  CHECK(r.stabilized);
  r = beps_liminf(ladder_of({9, 7, 6, 5}), 1.0);
  CHECK(r.value == 5.0);

  auto bad = ladder_of({1, 1, 1});
  bad[2].dsbm_upper = 10.0;
  CHECK_FALSE(beps_liminf(bad).distances_nonincreasing);

  CHECK_THROWS_AS(beps_liminf(ladder_of({1, 2})), Error);
  const auto j = nlohmann::json::parse(R"({"rungs":[{"label":"a","dsbm_upper":0.1,"value":3},
                                                    {"label":"b","dsbm_upper":0.05,"value":2},
                                                    {"label":"c","dsbm_upper":0.01,"value":2}]})");
  const auto lj = liminf_to_json(beps_liminf(ladder_from_json(j)));
  CHECK(lj["value"] == 2.0);
  CHECK(lj["stabilized"] == true);
  CHECK_THROWS_AS(ladder_from_json(nlohmann::json::parse(R"({"rungs":[{"label":"a"}]})")), Error);
}

TEST_CASE("beps_liminf of a constant ladder equals the direct count") {
  std::mt19937_64 rng(2);
  const Barcode B = oracle::random_barcode(rng, 25);
  const double direct = static_cast<double>(count_long_bars(B, 0.5, 6.0));
  std::vector<LadderRung> L(4, LadderRung{"same", 0.0, direct});
  const auto r = beps_liminf(L);
  CHECK(r.value == direct);
  CHECK(r.stabilized);
}

TEST_CASE("stability inequalities") {
  std::mt19937_64 rng(9);
  const Barcode B = oracle::random_barcode(rng, 15);
  for (double s : {2.0, 5.0, 11.0}) {
    const auto c = stability_ineq_check(B, B, 0.0, 0.3, s);
    CHECK(c.forward);
    CHECK(c.backward);
  }

  // every endpoint shifted by delta / 2
  const double delta = 0.2;
  std::vector<Bar> shifted;
  for (const Bar& b : B.bars()) shifted.emplace_back(b.start + delta / 2, b.end + delta / 2);
  const Barcode W(std::move(shifted));
  for (double s : {2.0, 5.0, 11.0}) {
    const auto c = stability_ineq_check(B, W, delta, 0.5, s);
    CHECK(c.forward);
    CHECK(c.backward);
    CHECK(c.bottleneck <= delta / 2 + 1e-12);
  }

  int violations = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Barcode U = oracle::random_barcode(rng, 20);
    const double r = 0.05 + 0.02 * (trial % 10);
    const Barcode V = oracle::perturbed_barcode(rng, U, r);
    const double d = bottleneck_distance(U, V);
    REQUIRE(d <= r);
    for (double eps : {r * 1.5, 1.0}) {
      for (double s : {1.0, 4.0, 8.0, 12.0}) {
        const auto c = stability_ineq_check(U, V, r, eps, s);
        violations += !c.forward + !c.backward;
      }
    }
  }
  CHECK(violations == 0);

  try {
    stability_ineq_check(B, W, 0.01, 0.5, 5.0);
    FAIL("precondition not enforced");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::PreconditionViolated);
  }
  CHECK_THROWS_AS(stability_ineq_check(B, W, 0.2, 0.1, 5.0), Error);
}

TEST_CASE("rolled disk smoothing ladder") {
  const ToricDomain R(2, RolledDisk{{1.0, 1.0}, 1.25, true});
  const auto F = build_field(R);
  std::vector<LadderRung> L;
  for (double eta : {0.05, 0.02, 0.01, 0.005, 0.0025, 0.00125}) {
    const auto M = mollify_domain(F, eta);
    const ToricDomain D = M.domain();
    // the generator count bounds b_eps from above.  The interior class
    // p = (3, -4), normal to the arc where it meets the axis, is a boundary
    // limit: present for coarse eta, gone from eta = 0.005 on.
    const auto sp = enumerate_spectrum(D, 10.0);
    L.push_back({std::to_string(eta), log_ratio_bound(R, D, 512).dsbm_upper,
                 static_cast<double>(count_generators(sp, 10.0).total_generators)});
  }
  const auto r = beps_liminf(L);
  CHECK(r.distances_nonincreasing);
  CHECK(r.stabilized);
  CHECK(r.value == 213.0);
  for (std::size_t k = 1; k < r.tail_infima.size(); ++k) CHECK(r.tail_infima[k] <= r.tail_infima[k - 1]);
}
