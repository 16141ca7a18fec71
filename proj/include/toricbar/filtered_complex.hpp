#pragma once

// Filtered chain complexes over a prime field F_p and their persistence
// barcodes.  The action value strictly decreases along the differential, so
// sublevel sets C^{<s} = span{g : filtration(g) < s} are subcomplexes and a
// class born at a and killed at b is alive exactly on (a, b].

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "toricbar/barcode.hpp"

namespace toricbar {

struct Generator {
  std::string id;
  double filtration = 0.0;
};

struct BoundaryEntry {
  std::size_t row = 0;     // generator index
  std::uint32_t coeff = 1; // in [1, p)
};

class FilteredComplex {
 public:
  FilteredComplex() = default;
  // column[j] = boundary of generator j.  Validates: p prime, ids unique,
  // filtrations finite and >= 0, filtration strictly increasing along the
  // differential, and d^2 = 0 over F_p.  Throws InvalidComplex.
  FilteredComplex(std::vector<Generator> generators, std::vector<std::vector<BoundaryEntry>> columns,
                  std::uint32_t field = 2);

  std::size_t size() const noexcept { return generators_.size(); }
  std::uint32_t field() const noexcept { return field_; }
  const std::vector<Generator>& generators() const noexcept { return generators_; }
  const std::vector<std::vector<BoundaryEntry>>& columns() const noexcept { return columns_; }

 private:
  std::vector<Generator> generators_;
  std::vector<std::vector<BoundaryEntry>> columns_;
  std::uint32_t field_ = 2;
};

// Standard left-to-right column reduction in (filtration, input index) order.
Barcode reduce(const FilteredComplex& complex);

// Rank of H(C^{<s}) -> H(C^{<t}) by dense linear algebra over F_p, without
// going through reduce().  Requires s <= t.
std::uint64_t rank_oracle(const FilteredComplex& complex, double s, double t);

// rank_oracle for every pair points[i] <= points[j] at once (entries with
// i > j are zero).  Same brute-force linear algebra, shared across pairs.
std::vector<std::vector<std::uint64_t>> rank_table_oracle(const FilteredComplex& complex,
                                                          std::vector<double> points);

// Rank from a barcode: #{bars (a, b] : a < s and t <= b}.
std::uint64_t rank_from_barcode(const Barcode& barcode, double s, double t);

struct BarsVsGenerators {
  std::uint64_t bars = 0;
  std::uint64_t generators = 0;
  bool ok = true;
};

BarsVsGenerators bars_vs_generators(const FilteredComplex& complex, double eps, double s);

// {"field":2,"generators":[{"id":"g0","filtration":0.1}],"boundary":{"g1":["g0"]}}
// Boundary entries are ids (coefficient 1) or [id, coeff] pairs.
FilteredComplex complex_from_json(const nlohmann::json& j);
nlohmann::json complex_to_json(const FilteredComplex& complex);

}  // namespace toricbar
