#include "toricbar/filtered_complex.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_map>

#include <fmt/format.h>

#include "toricbar/error.hpp"

namespace toricbar {

namespace {

bool is_prime(std::uint32_t p) {
  if (p < 2) return false;
  for (std::uint32_t d = 2; static_cast<std::uint64_t>(d) * d <= p; ++d) {
    if (p % d == 0) return false;
  }
  return true;
}

std::uint32_t mul_mod(std::uint32_t a, std::uint32_t b, std::uint32_t p) {
  return static_cast<std::uint32_t>(static_cast<std::uint64_t>(a) * b % p);
}

std::uint32_t inv_mod(std::uint32_t a, std::uint32_t p) {
  std::int64_t t = 0, new_t = 1, r = p, new_r = a;
  while (new_r != 0) {
    const std::int64_t q = r / new_r;
    std::tie(t, new_t) = std::make_pair(new_t, t - q * new_t);
    std::tie(r, new_r) = std::make_pair(new_r, r - q * new_r);
  }
  if (t < 0) t += p;
  return static_cast<std::uint32_t>(t);
}

using SparseCol = std::vector<std::pair<std::size_t, std::uint32_t>>;  // sorted by row

// target <- target + c * src (mod p)
void sparse_axpy(SparseCol& target, const SparseCol& src, std::uint32_t c, std::uint32_t p) {
  SparseCol out;
  out.reserve(target.size() + src.size());
  std::size_t i = 0, j = 0;
  while (i < target.size() || j < src.size()) {
    if (j == src.size() || (i < target.size() && target[i].first < src[j].first)) {
      out.push_back(target[i++]);
    } else if (i == target.size() || src[j].first < target[i].first) {
      out.emplace_back(src[j].first, mul_mod(c, src[j].second, p));
      ++j;
    } else {
      const std::uint32_t v = (target[i].second + mul_mod(c, src[j].second, p)) % p;
      if (v != 0) out.emplace_back(target[i].first, v);
      ++i;
      ++j;
    }
  }
  target = std::move(out);
}

}  // namespace

FilteredComplex::FilteredComplex(std::vector<Generator> generators,
                                 std::vector<std::vector<BoundaryEntry>> columns, std::uint32_t field)
    : generators_(std::move(generators)), columns_(std::move(columns)), field_(field) {
  if (!is_prime(field_)) throw Error(ErrorKind::InvalidComplex, fmt::format("field size {} is not prime", field_));
  const std::size_t n = generators_.size();
  if (columns_.size() != n) {
    throw Error(ErrorKind::InvalidComplex, "boundary must have one column per generator");
  }
  std::unordered_map<std::string, std::size_t> seen;
  for (std::size_t j = 0; j < n; ++j) {
    const Generator& g = generators_[j];
    if (!std::isfinite(g.filtration) || g.filtration < 0.0) {
      throw Error(ErrorKind::InvalidComplex, fmt::format("generator '{}' has invalid filtration {}", g.id, g.filtration));
    }
    if (!seen.emplace(g.id, j).second) throw Error(ErrorKind::InvalidComplex, fmt::format("duplicate id '{}'", g.id));
  }
  for (std::size_t j = 0; j < n; ++j) {
    auto& col = columns_[j];
    std::map<std::size_t, std::uint32_t> merged;
    for (const BoundaryEntry& e : col) {
      if (e.row >= n) throw Error(ErrorKind::InvalidComplex, "boundary entry out of range");
      if (!(generators_[e.row].filtration < generators_[j].filtration)) {
        throw Error(ErrorKind::InvalidComplex,
                    fmt::format("filtration must strictly increase along the differential: d({}) contains {}",
                                generators_[j].id, generators_[e.row].id));
      }
      merged[e.row] = (merged[e.row] + e.coeff % field_) % field_;
    }
    col.clear();
    for (auto [row, c] : merged) {
      if (c != 0) col.push_back({row, c});
    }
  }
  // d^2 = 0
  for (std::size_t j = 0; j < n; ++j) {
    SparseCol dd;
    for (const BoundaryEntry& e : columns_[j]) {
      SparseCol inner;
      for (const BoundaryEntry& f : columns_[e.row]) inner.emplace_back(f.row, f.coeff);
      sparse_axpy(dd, inner, e.coeff, field_);
    }
    if (!dd.empty()) {
      throw Error(ErrorKind::InvalidComplex, fmt::format("d^2 != 0 on generator '{}'", generators_[j].id));
    }
  }
}

Barcode reduce(const FilteredComplex& complex) {
  const std::size_t n = complex.size();
  const std::uint32_t p = complex.field();
  const auto& gens = complex.generators();

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return gens[a].filtration < gens[b].filtration; });
  std::vector<std::size_t> pos(n);
  for (std::size_t k = 0; k < n; ++k) pos[order[k]] = k;

  std::vector<SparseCol> cols(n);
  for (std::size_t k = 0; k < n; ++k) {
    for (const BoundaryEntry& e : complex.columns()[order[k]]) cols[k].emplace_back(pos[e.row], e.coeff);
    std::sort(cols[k].begin(), cols[k].end());
  }

  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> pivot_owner(n, kNone);
  std::vector<char> is_pivot_row(n, 0);
  for (std::size_t k = 0; k < n; ++k) {
    SparseCol& col = cols[k];
    while (!col.empty()) {
      const auto [low, c] = col.back();
      const std::size_t owner = pivot_owner[low];
      if (owner == kNone) break;
      const std::uint32_t c_owner = cols[owner].back().second;
      const std::uint32_t factor = (p - mul_mod(c, inv_mod(c_owner, p), p)) % p;
      sparse_axpy(col, cols[owner], factor, p);
    }
    if (!col.empty()) {
      pivot_owner[col.back().first] = k;
      is_pivot_row[col.back().first] = 1;
    }
  }

  std::vector<Bar> bars;
  for (std::size_t k = 0; k < n; ++k) {
    const double fk = gens[order[k]].filtration;
    if (!cols[k].empty()) {
      bars.emplace_back(gens[order[cols[k].back().first]].filtration, fk);
    } else if (!is_pivot_row[k]) {
      bars.emplace_back(fk, kInf);
    }
  }
  return Barcode(std::move(bars));
}

namespace {

// Dense vectors over F_p for the brute-force rank computations.  F_2 vectors
// are packed 64 entries to a word.
struct BinaryField {
  using Vec = std::vector<std::uint64_t>;
  Vec zero(std::size_t n) const { return Vec((n + 63) / 64, 0); }
  std::uint32_t get(const Vec& v, std::size_t i) const { return (v[i / 64] >> (i % 64)) & 1U; }
  void set(Vec& v, std::size_t i, std::uint32_t c) const {
    if (c & 1U) {
      v[i / 64] |= std::uint64_t{1} << (i % 64);
    } else {
      v[i / 64] &= ~(std::uint64_t{1} << (i % 64));
    }
  }
  // v <- v + c * r
  void axpy(Vec& v, const Vec& r, std::uint32_t c) const {
    if (c & 1U) {
      for (std::size_t k = 0; k < v.size(); ++k) v[k] ^= r[k];
    }
  }
  void scale(Vec&, std::uint32_t) const {}
  std::uint32_t neg(std::uint32_t c) const { return c; }
  std::uint32_t inv(std::uint32_t c) const { return c; }
  // First nonzero index in [lo, hi), or hi.
  std::size_t first_nonzero(const Vec& v, std::size_t lo, std::size_t hi) const {
    for (std::size_t i = lo; i < hi;) {
      const std::uint64_t w = v[i / 64] >> (i % 64);
      if (w != 0) return std::min(hi, i + static_cast<std::size_t>(std::countr_zero(w)));
      i = (i / 64 + 1) * 64;
    }
    return hi;
  }
};

struct PrimeField {
  using Vec = std::vector<std::uint32_t>;
  std::uint32_t p;
  Vec zero(std::size_t n) const { return Vec(n, 0); }
  std::uint32_t get(const Vec& v, std::size_t i) const { return v[i]; }
  void set(Vec& v, std::size_t i, std::uint32_t c) const { v[i] = c % p; }
  void axpy(Vec& v, const Vec& r, std::uint32_t c) const {
    if (c == 0) return;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (r[i] != 0) v[i] = (v[i] + mul_mod(c, r[i], p)) % p;
    }
  }
  void scale(Vec& v, std::uint32_t c) const {
    for (auto& x : v) x = mul_mod(x, c, p);
  }
  std::uint32_t neg(std::uint32_t c) const { return (p - c) % p; }
  std::uint32_t inv(std::uint32_t c) const { return inv_mod(c, p); }
  std::size_t first_nonzero(const Vec& v, std::size_t lo, std::size_t hi) const {
    for (std::size_t i = lo; i < hi; ++i) {
      if (v[i] != 0) return i;
    }
    return hi;
  }
};

// Row echelon form with pivots on the first nonzero entry of [0, span).
template <class Field>
class Echelon {
 public:
  using Vec = typename Field::Vec;
  Echelon(Field field, std::size_t span) : field_(field), span_(span) {}

  // Reduces v against the stored rows; stores it and returns true when the
  // remainder is nonzero on [0, span).
  bool insert(Vec& v) {
    for (std::size_t r = 0; r < rows_.size(); ++r) {
      const std::uint32_t c = field_.get(v, pivots_[r]);
      if (c != 0) field_.axpy(v, rows_[r], field_.neg(c));
    }
    const std::size_t piv = field_.first_nonzero(v, 0, span_);
    if (piv == span_) return false;
    field_.scale(v, field_.inv(field_.get(v, piv)));
    rows_.push_back(v);
    pivots_.push_back(piv);
    return true;
  }

  std::size_t rank() const noexcept { return rows_.size(); }

 private:
  Field field_;
  std::size_t span_;
  std::vector<Vec> rows_;
  std::vector<std::size_t> pivots_;
};

template <class Field>
typename Field::Vec dense_boundary(const Field& F, const FilteredComplex& c, std::size_t j, std::size_t len) {
  auto v = F.zero(len);
  for (const BoundaryEntry& e : c.columns()[j]) F.set(v, e.row, e.coeff);
  return v;
}

// Basis of the cycles supported on {g : filtration(g) < s}, by elimination on
// the augmented matrix [d | I].
template <class Field>
std::vector<typename Field::Vec> cycle_basis(const Field& F, const FilteredComplex& c, double s) {
  const std::size_t n = c.size();
  Echelon<Field> images(F, n);
  std::vector<typename Field::Vec> kernel;
  for (std::size_t j = 0; j < n; ++j) {
    if (!(c.generators()[j].filtration < s)) continue;
    auto v = dense_boundary(F, c, j, 2 * n);
    F.set(v, n + j, 1);
    if (!images.insert(v)) {
      auto z = F.zero(n);
      for (std::size_t i = 0; i < n; ++i) F.set(z, i, F.get(v, n + i));
      kernel.push_back(std::move(z));
    }
  }
  return kernel;
}

template <class Field>
std::vector<std::vector<std::uint64_t>> rank_table_impl(const Field& F, const FilteredComplex& c,
                                                        const std::vector<double>& points) {
  const std::size_t n = c.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return c.generators()[a].filtration < c.generators()[b].filtration;
  });
  // rank of B_t at each point
  std::vector<std::uint64_t> b_rank(points.size());
  {
    Echelon<Field> bnd(F, n);
    std::size_t k = 0;
    for (std::size_t ti = 0; ti < points.size(); ++ti) {
      for (; k < n && c.generators()[order[k]].filtration < points[ti]; ++k) {
        auto b = dense_boundary(F, c, order[k], n);
        bnd.insert(b);
      }
      b_rank[ti] = bnd.rank();
    }
  }
  std::vector<std::vector<std::uint64_t>> table(points.size(), std::vector<std::uint64_t>(points.size(), 0));
  for (std::size_t si = 0; si < points.size(); ++si) {
    Echelon<Field> comb(F, n);
    for (auto& z : cycle_basis(F, c, points[si])) comb.insert(z);
    std::size_t k = 0;
    for (std::size_t ti = 0; ti < points.size(); ++ti) {
      for (; k < n && c.generators()[order[k]].filtration < points[ti]; ++k) {
        auto b = dense_boundary(F, c, order[k], n);
        comb.insert(b);
      }
      if (ti >= si) table[si][ti] = comb.rank() - b_rank[ti];
    }
  }
  return table;
}

}  // namespace

std::vector<std::vector<std::uint64_t>> rank_table_oracle(const FilteredComplex& complex,
                                                          std::vector<double> points) {
  if (!std::is_sorted(points.begin(), points.end())) {
    throw Error(ErrorKind::InvalidParameter, "rank table points must be sorted");
  }
  if (complex.field() == 2) return rank_table_impl(BinaryField{}, complex, points);
  return rank_table_impl(PrimeField{complex.field()}, complex, points);
}

std::uint64_t rank_oracle(const FilteredComplex& complex, double s, double t) {
  if (s > t) throw Error(ErrorKind::InvalidParameter, fmt::format("rank_oracle needs s <= t, got {} > {}", s, t));
  return rank_table_oracle(complex, {s, t})[0][1];
}

std::uint64_t rank_from_barcode(const Barcode& barcode, double s, double t) {
  std::uint64_t n = 0;
  for (const Bar& b : barcode.bars()) {
    if (b.start < s && t <= b.end) ++n;
  }
  return n;
}

BarsVsGenerators bars_vs_generators(const FilteredComplex& complex, double eps, double s) {
  BarsVsGenerators r;
  r.bars = count_long_bars(reduce(complex), eps, s);
  r.generators = static_cast<std::uint64_t>(std::count_if(
      complex.generators().begin(), complex.generators().end(),
      [s](const Generator& g) { return g.filtration < s; }));
  r.ok = r.bars <= r.generators;
  return r;
}

FilteredComplex complex_from_json(const nlohmann::json& j) {
  try {
    const auto field = j.value("field", 2U);
    std::vector<Generator> gens;
    std::unordered_map<std::string, std::size_t> index;
    for (const auto& jg : j.at("generators")) {
      gens.push_back({jg.at("id").get<std::string>(), jg.at("filtration").get<double>()});
      index.emplace(gens.back().id, gens.size() - 1);
    }
    auto lookup = [&](const std::string& id) {
      auto it = index.find(id);
      if (it == index.end()) throw Error(ErrorKind::InvalidComplex, fmt::format("unknown generator '{}'", id));
      return it->second;
    };
    std::vector<std::vector<BoundaryEntry>> cols(gens.size());
    if (j.contains("boundary")) {
      for (const auto& [id, entries] : j.at("boundary").items()) {
        auto& col = cols[lookup(id)];
        for (const auto& e : entries) {
          if (e.is_string()) {
            col.push_back({lookup(e.get<std::string>()), 1});
          } else {
            const auto c = e.at(1).get<std::int64_t>();
            const auto p = static_cast<std::int64_t>(field);
            col.push_back({lookup(e.at(0).get<std::string>()), static_cast<std::uint32_t>(((c % p) + p) % p)});
          }
        }
      }
    }
    return FilteredComplex(std::move(gens), std::move(cols), field);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, fmt::format("complex JSON: {}", e.what()));
  }
}

nlohmann::json complex_to_json(const FilteredComplex& complex) {
  nlohmann::json j;
  j["field"] = complex.field();
  j["generators"] = nlohmann::json::array();
  for (const Generator& g : complex.generators()) j["generators"].push_back({{"id", g.id}, {"filtration", g.filtration}});
  nlohmann::json boundary = nlohmann::json::object();
  for (std::size_t c = 0; c < complex.size(); ++c) {
    if (complex.columns()[c].empty()) continue;
    nlohmann::json entries = nlohmann::json::array();
    for (const BoundaryEntry& e : complex.columns()[c]) {
      const std::string& id = complex.generators()[e.row].id;
      if (e.coeff == 1) {
        entries.push_back(id);
      } else {
        entries.push_back(nlohmann::json::array({id, e.coeff}));
      }
    }
    boundary[complex.generators()[c].id] = std::move(entries);
  }
  j["boundary"] = std::move(boundary);
  return j;
}

}  // namespace toricbar
