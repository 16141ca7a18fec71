#pragma once

// Upper bounds for the symplectic Banach-Mazur distance between radial
// domains, the induced interleaving bound for persistence barcodes, and the
// liminf of b_eps along approximation ladders.

#include <string>
#include <vector>

#include <json.hpp>

#include "toricbar/barcode.hpp"
#include "toricbar/toric_geometry.hpp"

namespace toricbar {

struct BMReport {
  double log_ratio = 0.0;   // certified upper bound of max |ln(f / g)| over the quadrant
  double grid_max = 0.0;    // plain grid maximum
  double margin = 0.0;      // covering margin, Lipschitz slope times half the spacing
  double dsbm_upper = 0.0;  // = log_ratio
  int resolution = 0;

  double interleaving_upper(double s) const;
};

// Grid over the closed spherical simplex (uniform in angle for n = 2).
// InvalidParameter for resolution < 2 or different dimensions.
BMReport log_ratio_bound(const ToricDomain& f, const ToricDomain& g, int resolution = 512);

// s (e^d - 1)
double interleaving_bound(double s, double dsbm_upper);

struct LadderRung {
  std::string label;
  double dsbm_upper = 0.0;  // to the target domain
  double value = 0.0;       // b_eps(s) of the rung, or an upper bound for it
};

struct LiminfResult {
  double value = 0.0;
  bool stabilized = false;
  std::vector<double> tail_infima;  // per prefix: infimum of its last two rungs
  bool distances_nonincreasing = true;
};

// liminf estimate of each prefix of the ladder: the infimum over its last
// two rungs, so a single final rung never decides alone.  The value is the
// estimate of the whole ladder; stabilized when the last three prefix
// estimates (two for a three-rung ladder) agree within tol.
LiminfResult beps_liminf(const std::vector<LadderRung>& ladder, double tol = 0.0);

struct StabilityCheck {
  bool forward = false;   // b_{eps+2 delta}(B_W, s - delta) <= b_eps(B_U, s)
  bool backward = false;  // b_{eps+2 delta}(B_U, s - delta) <= b_eps(B_W, s)
  double bottleneck = 0.0;
};

// A delta-matching moves starts by at most delta and lengths by at most
// 2 delta, which gives both inequalities.  PreconditionViolated unless
// bottleneck(B_U, B_W) <= delta < eps.
StabilityCheck stability_ineq_check(const Barcode& B_U, const Barcode& B_W, double delta, double eps, double s);

// {"rungs":[{"label":..,"dsbm_upper":..,"value":..}], "eps":.., "s":..}
std::vector<LadderRung> ladder_from_json(const nlohmann::json& j);
nlohmann::json liminf_to_json(const LiminfResult& r);
nlohmann::json bm_report_to_json(const BMReport& r);

}  // namespace toricbar
