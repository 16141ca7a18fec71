#pragma once

// Random filtered complexes with d^2 = 0 by construction: a random 2-dim
// simplicial complex with oriented boundaries, filtered so that every face
// enters strictly before its cofaces.

#include <algorithm>
#include <array>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "toricbar/filtered_complex.hpp"

namespace oracle {

inline toricbar::FilteredComplex random_simplicial_complex(std::mt19937_64& rng, std::size_t max_generators,
                                                           std::uint32_t field = 2, int levels = 24) {
  using toricbar::BoundaryEntry;
  using toricbar::Generator;
  std::uniform_int_distribution<int> nv_dist(4, 12);
  std::bernoulli_distribution keep_edge(0.6);
  std::bernoulli_distribution keep_tri(0.5);
  std::uniform_int_distribution<int> bump(1, 3);
  std::uniform_int_distribution<int> vlevel(0, levels / 3);

  const int nv = nv_dist(rng);
  std::vector<Generator> gens;
  std::vector<std::vector<BoundaryEntry>> cols;
  std::vector<int> level;
  auto add = [&](std::string id, int lv, std::vector<BoundaryEntry> col) {
    gens.push_back({std::move(id), 0.0});
    level.push_back(lv);
    cols.push_back(std::move(col));
    return gens.size() - 1;
  };
  std::vector<std::size_t> vid;
  for (int v = 0; v < nv && gens.size() < max_generators; ++v) vid.push_back(add("v" + std::to_string(v), vlevel(rng), {}));
  std::map<std::pair<int, int>, std::size_t> eid;
  for (int a = 0; a < static_cast<int>(vid.size()); ++a) {
    for (int b = a + 1; b < static_cast<int>(vid.size()); ++b) {
      if (gens.size() >= max_generators || !keep_edge(rng)) continue;
      const int lv = std::max(level[vid[a]], level[vid[b]]) + bump(rng);
      const std::uint32_t minus_one = field - 1;
      eid[{a, b}] = add("e" + std::to_string(a) + "_" + std::to_string(b), lv,
                        {{vid[b], 1}, {vid[a], minus_one}});
    }
  }
  for (int a = 0; a < static_cast<int>(vid.size()); ++a) {
    for (int b = a + 1; b < static_cast<int>(vid.size()); ++b) {
      for (int c = b + 1; c < static_cast<int>(vid.size()); ++c) {
        if (gens.size() >= max_generators) continue;
        auto ab = eid.find({a, b});
        auto bc = eid.find({b, c});
        auto ac = eid.find({a, c});
        if (ab == eid.end() || bc == eid.end() || ac == eid.end() || !keep_tri(rng)) continue;
        const int lv = std::max({level[ab->second], level[bc->second], level[ac->second]}) + bump(rng);
        // d[abc] = [bc] - [ac] + [ab]
        add("t" + std::to_string(a) + "_" + std::to_string(b) + "_" + std::to_string(c), lv,
            {{bc->second, 1}, {ac->second, field - 1}, {ab->second, 1}});
      }
    }
  }
  for (std::size_t i = 0; i < gens.size(); ++i) gens[i].filtration = 0.05 * level[i];
  // Shuffle generator order so the library cannot rely on input order.
  std::vector<std::size_t> perm(gens.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::size_t> inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = i;
  std::vector<Generator> g2(gens.size());
  std::vector<std::vector<BoundaryEntry>> c2(gens.size());
  for (std::size_t i = 0; i < gens.size(); ++i) {
    g2[inv[i]] = gens[i];
    for (auto e : cols[i]) c2[inv[i]].push_back({inv[e.row], e.coeff});
  }
  return toricbar::FilteredComplex(std::move(g2), std::move(c2), field);
}

// Sample points: midpoints between consecutive distinct filtration values,
// plus one point below and one above the whole arrangement.
inline std::vector<double> arrangement_midpoints(const toricbar::FilteredComplex& c) {
  std::vector<double> f;
  for (const auto& g : c.generators()) f.push_back(g.filtration);
  std::sort(f.begin(), f.end());
  f.erase(std::unique(f.begin(), f.end()), f.end());
  std::vector<double> pts;
  if (f.empty()) return {0.0};
  pts.push_back(f.front() - 0.5);
  for (std::size_t i = 0; i + 1 < f.size(); ++i) pts.push_back(0.5 * (f[i] + f[i + 1]));
  pts.push_back(f.back() + 0.5);
  return pts;
}

}  // namespace oracle
