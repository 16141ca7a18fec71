#include "toricbar/barcode.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include <boost/graph/adjacency_list.hpp>
#include <boost/graph/max_cardinality_matching.hpp>
#include <fmt/format.h>

#include "toricbar/error.hpp"

namespace toricbar {

Bar::Bar(double start_, double end_) : start(start_), end(end_) {
  if (!std::isfinite(start) || start < 0.0) {
    throw Error(ErrorKind::InvalidParameter, fmt::format("bar start {} must be finite and >= 0", start));
  }
  if (std::isnan(end) || !(start < end)) {
    throw Error(ErrorKind::InvalidParameter, fmt::format("bar ({}, {}] is empty", start, end));
  }
}

Barcode::Barcode(std::vector<Bar> bars) : bars_(std::move(bars)) {
  for (const Bar& b : bars_) Bar(b.start, b.end);  // re-validate
}

Barcode::Barcode(std::vector<Bar> bars, std::vector<double> spectrum) : Barcode(std::move(bars)) {
  std::sort(spectrum.begin(), spectrum.end());
  spectrum.erase(std::unique(spectrum.begin(), spectrum.end()), spectrum.end());
  auto in_spectrum = [&](double x) {
    auto it = std::lower_bound(spectrum.begin(), spectrum.end(), x - 1e-12 * std::max(1.0, std::abs(x)));
    return it != spectrum.end() && std::abs(*it - x) <= 1e-12 * std::max(1.0, std::abs(x));
  };
  for (const Bar& b : bars_) {
    if (!in_spectrum(b.start) || (!b.infinite() && !in_spectrum(b.end))) {
      throw Error(ErrorKind::InvalidParameter,
                  fmt::format("bar ({}, {}] has an endpoint outside the declared spectrum", b.start, b.end));
    }
  }
  spectrum_ = std::move(spectrum);
}

std::size_t Barcode::infinite_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(bars_.begin(), bars_.end(), [](const Bar& b) { return b.infinite(); }));
}

std::vector<Bar> Barcode::sorted_bars() const {
  std::vector<Bar> out = bars_;
  std::sort(out.begin(), out.end(), [](const Bar& x, const Bar& y) {
    return x.start != y.start ? x.start < y.start : x.end < y.end;
  });
  return out;
}

GrowthSamples::GrowthSamples(std::vector<GrowthSample> samples) : samples_(std::move(samples)) {
  for (std::size_t i = 1; i < samples_.size(); ++i) {
    if (!(samples_[i - 1].s < samples_[i].s)) {
      throw Error(ErrorKind::InvalidParameter, "growth samples must have strictly increasing s");
    }
  }
}

std::uint64_t count_long_bars(const Barcode& barcode, double eps, double s) {
  if (!(eps > 0.0)) {
    throw Error(ErrorKind::InvalidParameter, fmt::format("eps must be positive, got {}", eps));
  }
  std::uint64_t n = 0;
  for (const Bar& b : barcode.bars()) {
    if (b.start < s && (b.infinite() || b.length() > eps)) ++n;
  }
  return n;
}

Barcode truncate(const Barcode& barcode, double s) {
  std::vector<Bar> out;
  out.reserve(barcode.size());
  for (const Bar& b : barcode.bars()) {
    if (b.start >= s) continue;
    out.emplace_back(b.start, std::min(b.end, s));
  }
  return Barcode(std::move(out));
}

std::uint64_t sup_dim_below(const Barcode& barcode, double s) {
  // Just above x the alive count is #{a <= x} - #{b <= x}; the maximum over
  // s' < s is attained right after some start a < s.
  std::vector<std::pair<double, int>> events;
  events.reserve(2 * barcode.size());
  for (const Bar& b : barcode.bars()) {
    if (b.start >= s) continue;
    events.emplace_back(b.start, +1);
    if (!b.infinite()) events.emplace_back(b.end, -1);
  }
  std::sort(events.begin(), events.end());
  std::int64_t alive = 0;
  std::int64_t best = 0;
  for (std::size_t i = 0; i < events.size();) {
    const double x = events[i].first;
    bool had_start = false;
    for (; i < events.size() && events[i].first == x; ++i) {
      alive += events[i].second;
      had_start = had_start || events[i].second > 0;
    }
    if (had_start && x < s) best = std::max(best, alive);
  }
  return static_cast<std::uint64_t>(best);
}

namespace {

double linf(const Bar& p, const Bar& q) {
  return std::max(std::abs(p.start - q.start), std::abs(p.end - q.end));
}

double half_length(const Bar& p) { return 0.5 * (p.end - p.start); }

// Perfect matching in the diagonal-augmented bipartite graph at radius r.
bool feasible(const std::vector<Bar>& P, const std::vector<Bar>& Q, double r) {
  using Graph = boost::adjacency_list<boost::vecS, boost::vecS, boost::undirectedS>;
  const std::size_t n1 = P.size();
  const std::size_t n2 = Q.size();
  const std::size_t side = n1 + n2;
  Graph g(2 * side);
  // Left: P_0..P_{n1-1}, then diagonal copies of Q.  Right: Q, then diagonal copies of P.
  auto right = [side](std::size_t k) { return side + k; };
  for (std::size_t i = 0; i < n1; ++i) {
    for (std::size_t j = 0; j < n2; ++j) {
      if (linf(P[i], Q[j]) <= r) boost::add_edge(i, right(j), g);
    }
    if (half_length(P[i]) <= r) boost::add_edge(i, right(n2 + i), g);
  }
  for (std::size_t j = 0; j < n2; ++j) {
    if (half_length(Q[j]) <= r) boost::add_edge(n1 + j, right(j), g);
    for (std::size_t i = 0; i < n1; ++i) boost::add_edge(n1 + j, right(n2 + i), g);
  }
  std::vector<boost::graph_traits<Graph>::vertex_descriptor> mate(2 * side);
  boost::edmonds_maximum_cardinality_matching(g, &mate[0]);
  return boost::matching_size(g, &mate[0]) == side;
}

}  // namespace

double bottleneck_distance(const Barcode& lhs, const Barcode& rhs) {
  std::vector<double> inf_l;
  std::vector<double> inf_r;
  std::vector<Bar> P;
  std::vector<Bar> Q;
  for (const Bar& b : lhs.bars()) (b.infinite() ? inf_l.push_back(b.start) : P.push_back(b));
  for (const Bar& b : rhs.bars()) (b.infinite() ? inf_r.push_back(b.start) : Q.push_back(b));
  if (inf_l.size() != inf_r.size()) return kInf;

  // Sorted order is an optimal bottleneck matching on the line.
  std::sort(inf_l.begin(), inf_l.end());
  std::sort(inf_r.begin(), inf_r.end());
  double d_inf = 0.0;
  for (std::size_t i = 0; i < inf_l.size(); ++i) d_inf = std::max(d_inf, std::abs(inf_l[i] - inf_r[i]));

  if (P.empty() && Q.empty()) return d_inf;

  std::vector<double> candidates;
  candidates.reserve(P.size() * Q.size() + P.size() + Q.size());
  for (const Bar& p : P) {
    candidates.push_back(half_length(p));
    for (const Bar& q : Q) candidates.push_back(linf(p, q));
  }
  for (const Bar& q : Q) candidates.push_back(half_length(q));
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  std::size_t lo = 0;
  std::size_t hi = candidates.size() - 1;  // matching everything to the diagonal is always feasible
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (feasible(P, Q, candidates[mid])) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return std::max(d_inf, candidates[lo]);
}

EntropyEstimate entropy_estimates(const GrowthSamples& samples,
                                  std::optional<std::pair<double, double>> window) {
  const auto& pts = samples.samples();
  if (pts.empty()) throw Error(ErrorKind::InsufficientData, "no growth samples");
  double lo = 0.0;
  double hi = 0.0;
  if (window) {
    std::tie(lo, hi) = *window;
  } else {
    lo = 0.5 * (pts.front().s + pts.back().s);
    hi = pts.back().s;
  }
  std::vector<double> xs;
  std::vector<double> ls;
  std::vector<double> ys;
  for (const GrowthSample& p : pts) {
    if (p.s < lo || p.s > hi || p.count == 0 || !(p.s > 0.0)) continue;
    xs.push_back(p.s);
    ls.push_back(std::log2(p.s));
    ys.push_back(std::log2(static_cast<double>(p.count)));
  }
  if (xs.size() < 4) {
    throw Error(ErrorKind::InsufficientData,
                fmt::format("need >= 4 positive samples in [{}, {}], have {}", lo, hi, xs.size()));
  }
  auto slope = [&](const std::vector<double>& x) {
    const double n = static_cast<double>(x.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      mx += x[i];
      my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      sxy += (x[i] - mx) * (ys[i] - my);
      sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxx > 0.0 ? sxy / sxx : 0.0;
  };
  return EntropyEstimate{slope(xs), slope(ls), xs.size()};
}

Barcode barcode_from_json(const nlohmann::json& j) {
  try {
    std::vector<Bar> bars;
    for (const auto& jb : j.at("bars")) {
      const double start = jb.at("start").get<double>();
      const double end = jb.at("end").is_null() ? kInf : jb.at("end").get<double>();
      bars.emplace_back(start, end);
    }
    if (j.contains("spectrum")) {
      return Barcode(std::move(bars), j.at("spectrum").get<std::vector<double>>());
    }
    return Barcode(std::move(bars));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, fmt::format("barcode JSON: {}", e.what()));
  }
}

nlohmann::json barcode_to_json(const Barcode& barcode) {
  nlohmann::json bars = nlohmann::json::array();
  for (const Bar& b : barcode.bars()) {
    nlohmann::json jb;
    jb["start"] = b.start;
    jb["end"] = b.infinite() ? nlohmann::json(nullptr) : nlohmann::json(b.end);
    bars.push_back(std::move(jb));
  }
  nlohmann::json j;
  j["bars"] = std::move(bars);
  if (barcode.declared_spectrum()) j["spectrum"] = *barcode.declared_spectrum();
  return j;
}

GrowthSamples growth_from_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::ParseError, "growth CSV is empty");
  if (line.rfind("s,count", 0) != 0) {
    throw Error(ErrorKind::ParseError, "growth CSV header must be 's,count'");
  }
  std::vector<GrowthSample> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    GrowthSample g;
    char comma = 0;
    if (!(row >> g.s >> comma >> g.count) || comma != ',') {
      throw Error(ErrorKind::ParseError, fmt::format("bad growth CSV row '{}'", line));
    }
    out.push_back(g);
  }
  return GrowthSamples(std::move(out));
}

void growth_to_csv(const GrowthSamples& samples, std::ostream& out) {
  out << "s,count\n";
  for (const GrowthSample& g : samples.samples()) out << fmt::format("{:.17g},{}\n", g.s, g.count);
}

}  // namespace toricbar
