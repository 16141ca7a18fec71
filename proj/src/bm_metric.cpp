#include "toricbar/bm_metric.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include <fmt/format.h>

#include "toricbar/error.hpp"

namespace toricbar {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorKind::InvalidParameter, what);
}

}  // namespace

double BMReport::interleaving_upper(double s) const { return interleaving_bound(s, dsbm_upper); }

BMReport log_ratio_bound(const ToricDomain& f, const ToricDomain& g, int resolution) {
  require(resolution >= 2, fmt::format("resolution must be >= 2, got {}", resolution));
  require(f.n() == g.n(), fmt::format("dimension mismatch: {} vs {}", f.n(), g.n()));
  const int n = f.n();
  auto phi = [&](const Vec& t) { return std::log(f.radial(t)) - std::log(g.radial(t)); };

  BMReport out;
  out.resolution = resolution;
  double lip = 0.0, spacing = 0.0;
  if (n == 2) {
    const double h = (std::numbers::pi / 2) / resolution;
    double prev = 0.0;
    for (int k = 0; k <= resolution; ++k) {
      Vec t(2);
      t << std::cos(k * h), std::sin(k * h);
      const double v = phi(t);
      out.grid_max = std::max(out.grid_max, std::abs(v));
      if (k > 0) lip = std::max(lip, std::abs(v - prev) / h);
      prev = v;
    }
    spacing = h / 2;
  } else {
    std::map<std::vector<int>, std::pair<Vec, double>> pts;
    for (const Vec& u : simplex_grid(n, resolution)) {
      std::vector<int> key(n);
      for (int i = 0; i < n; ++i) key[i] = static_cast<int>(std::lround(u[i] * resolution));
      const Vec t = u / u.norm();
      const double v = phi(t);
      out.grid_max = std::max(out.grid_max, std::abs(v));
      pts.emplace(std::move(key), std::make_pair(t, v));
    }
    // neighbors: one unit moved from coordinate i to coordinate j
    for (const auto& [key, tv] : pts) {
      for (int i = 0; i < n; ++i) {
        if (key[i] == 0) continue;
        for (int j = 0; j < n; ++j) {
          if (j == i) continue;
          auto other = key;
          --other[i];
          ++other[j];
          const auto& [t2, v2] = pts.at(other);
          const double d = (tv.first - t2).norm();
          lip = std::max(lip, std::abs(tv.second - v2) / d);
          spacing = std::max(spacing, d);
        }
      }
    }
  }
  out.margin = lip * spacing;
  out.log_ratio = out.grid_max + out.margin;
  out.dsbm_upper = out.log_ratio;
  return out;
}

double interleaving_bound(double s, double dsbm_upper) {
  require(s >= 0.0 && dsbm_upper >= 0.0, "interleaving bound needs s >= 0 and d >= 0");
  return s * std::expm1(dsbm_upper);
}

LiminfResult beps_liminf(const std::vector<LadderRung>& ladder, double tol) {
  if (ladder.size() < 3)
    throw Error(ErrorKind::InsufficientData, fmt::format("ladder needs at least 3 rungs, got {}", ladder.size()));
  require(tol >= 0.0, "stabilization tolerance must be nonnegative");
  LiminfResult out;
  const std::size_t N = ladder.size();
  for (std::size_t m = 1; m < N; ++m) out.tail_infima.push_back(std::min(ladder[m - 1].value, ladder[m].value));
  out.value = out.tail_infima.back();
  const std::size_t w = std::min<std::size_t>(3, out.tail_infima.size());
  const auto first = out.tail_infima.end() - static_cast<std::ptrdiff_t>(w);
  const auto [lo, hi] = std::minmax_element(first, out.tail_infima.end());
  out.stabilized = *hi - *lo <= tol;
  for (std::size_t k = 1; k < N; ++k)
    if (ladder[k].dsbm_upper > ladder[k - 1].dsbm_upper) out.distances_nonincreasing = false;
  return out;
}

StabilityCheck stability_ineq_check(const Barcode& B_U, const Barcode& B_W, double delta, double eps, double s) {
  require(delta >= 0.0 && eps > 0.0, "need delta >= 0 and eps > 0");
  StabilityCheck out;
  out.bottleneck = bottleneck_distance(B_U, B_W);
  if (!(out.bottleneck <= delta && delta < eps))
    throw Error(ErrorKind::PreconditionViolated,
                fmt::format("need bottleneck ({}) <= delta ({}) < eps ({})", out.bottleneck, delta, eps));
  out.forward = count_long_bars(B_W, eps + 2 * delta, s - delta) <= count_long_bars(B_U, eps, s);
  out.backward = count_long_bars(B_U, eps + 2 * delta, s - delta) <= count_long_bars(B_W, eps, s);
  return out;
}

std::vector<LadderRung> ladder_from_json(const nlohmann::json& j) {
  try {
    std::vector<LadderRung> out;
    for (const auto& r : j.at("rungs"))
      out.push_back({r.value("label", std::string{}), r.value("dsbm_upper", 0.0), r.at("value").get<double>()});
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, fmt::format("ladder json: {}", e.what()));
  }
}

nlohmann::json liminf_to_json(const LiminfResult& r) {
  return {{"value", r.value},
          {"stabilized", r.stabilized},
          {"tail_infima", r.tail_infima},
          {"distances_nonincreasing", r.distances_nonincreasing},
          {"assumption", "unknotted radial interpolation between rungs"}};
}

nlohmann::json bm_report_to_json(const BMReport& r) {
  return {{"log_ratio", r.log_ratio},
          {"grid_max", r.grid_max},
          {"margin", r.margin},
          {"dSBM_upper", r.dsbm_upper},
          {"resolution", r.resolution}};
}

}  // namespace toricbar
