#pragma once

// Persistence-module algebra on explicit, finite barcodes.
//
// Bars are half-open intervals (a, b]: a value s' is alive in the bar iff
// a < s' <= b.  An infinite bar has end = +inf.

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace toricbar {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Bar {
  double start = 0.0;
  double end = kInf;

  Bar() = default;
  // Throws InvalidParameter unless 0 <= start < end.
  Bar(double start, double end);

  bool infinite() const noexcept { return end == kInf; }
  double length() const noexcept { return end - start; }
  bool alive_at(double s) const noexcept { return start < s && s <= end; }

  friend bool operator==(const Bar&, const Bar&) = default;
};

class Barcode {
 public:
  Barcode() = default;
  explicit Barcode(std::vector<Bar> bars);
  // Every finite endpoint must appear in `spectrum` (relative tolerance 1e-12).
  Barcode(std::vector<Bar> bars, std::vector<double> spectrum);

  const std::vector<Bar>& bars() const noexcept { return bars_; }
  const std::optional<std::vector<double>>& declared_spectrum() const noexcept {
    return spectrum_;
  }
  std::size_t size() const noexcept { return bars_.size(); }
  bool empty() const noexcept { return bars_.empty(); }
  std::size_t infinite_count() const noexcept;

  // Bars sorted by (start, end); handy for comparing multisets.
  std::vector<Bar> sorted_bars() const;

 private:
  std::vector<Bar> bars_;
  std::optional<std::vector<double>> spectrum_;
};

struct GrowthSample {
  double s = 0.0;
  std::uint64_t count = 0;
};

class GrowthSamples {
 public:
  GrowthSamples() = default;
  // Throws InvalidParameter unless s is strictly increasing.
  explicit GrowthSamples(std::vector<GrowthSample> samples);

  const std::vector<GrowthSample>& samples() const noexcept { return samples_; }
  std::size_t size() const noexcept { return samples_.size(); }

 private:
  std::vector<GrowthSample> samples_;
};

// b_eps(s): number of bars (a, b] with a < s and b - a > eps.  Infinite bars
// count whenever a < s.  eps must be positive.
std::uint64_t count_long_bars(const Barcode& barcode, double eps, double s);

// Drops bars with a >= s and caps the remaining ends at s.
Barcode truncate(const Barcode& barcode, double s);

// max over s' < s of the number of bars alive at s'.
std::uint64_t sup_dim_below(const Barcode& barcode, double s);

// Bottleneck distance between two finite barcodes.  Returns +inf when the
// numbers of infinite bars differ.
double bottleneck_distance(const Barcode& lhs, const Barcode& rhs);

struct EntropyEstimate {
  double exp_rate = 0.0;     // slope of log2(count) against s
  double poly_degree = 0.0;  // slope of log2(count) against log2(s)
  std::size_t samples_used = 0;
};

// Least-squares growth rates over the window [lo, hi].  With no window, the
// upper half of the sampled s-range is used.  Needs at least four samples with
// positive count (and positive s) in the window.
EntropyEstimate entropy_estimates(const GrowthSamples& samples,
                                  std::optional<std::pair<double, double>> window = std::nullopt);

// I/O.  Barcode JSON: {"bars":[{"start":0.0,"end":null}], "spectrum":[...]}.
Barcode barcode_from_json(const nlohmann::json& j);
nlohmann::json barcode_to_json(const Barcode& barcode);

GrowthSamples growth_from_csv(std::istream& in);
void growth_to_csv(const GrowthSamples& samples, std::ostream& out);

}  // namespace toricbar
