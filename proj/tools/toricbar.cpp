// toricbar: command-line front end.  Exit codes: 0 success, 2 invalid input,
// 3 numerical failure.  Every run writes a manifest next to its output.

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <boost/version.hpp>
#include <Eigen/Core>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <json.hpp>

#include "toricbar/barcode.hpp"
#include "toricbar/bm_metric.hpp"
#include "toricbar/delzant.hpp"
#include "toricbar/error.hpp"
#include "toricbar/filtered_complex.hpp"
#include "toricbar/mollify.hpp"
#include "toricbar/orbit_enum.hpp"
#include "toricbar/parallel.hpp"
#include "toricbar/toric_geometry.hpp"

#ifndef TORICBAR_VERSION
#define TORICBAR_VERSION "dev"
#endif

using namespace toricbar;
using nlohmann::json;

namespace {

struct Run {
  std::string command;
  json config = json::object();
  std::vector<std::string> outputs;
  std::string manifest_path;
};

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ParseError, fmt::format("cannot open '{}'", path));
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, fmt::format("{}: {}", path, e.what()));
  }
}

void write_text(Run& run, const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::InvalidParameter, fmt::format("cannot write '{}'", path));
  out << text;
  run.outputs.push_back(path);
}

// JSON artifacts carry a pointer to their manifest.
void emit_json(Run& run, const std::optional<std::string>& path, json j) {
  if (!path) {
    std::cout << j.dump(2) << "\n";
    return;
  }
  j["manifest"] = run.manifest_path;
  write_text(run, *path, j.dump(2) + "\n");
}

void emit_text(Run& run, const std::optional<std::string>& path, const std::string& text) {
  if (path)
    write_text(run, *path, text);
  else
    std::cout << text;
}

std::string fmt17(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return fmt::format("{:.17g}", x);
}

std::string face_label(const std::vector<int>& idx) { return fmt::format("[{}]", fmt::join(idx, " ")); }

json manifest(const Run& run, int code, const std::string& error) {
  json m{{"tool", "toricbar"},
         {"version", TORICBAR_VERSION},
         {"command", run.command},
         {"config", run.config},
         {"outputs", run.outputs},
         {"libraries",
          {{"fmt", FMT_VERSION},
           {"eigen", fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION)},
           {"boost", BOOST_LIB_VERSION},
           {"cli11", CLI11_VERSION}}},
         {"exit_code", code}};
  if (!error.empty()) m["error"] = error;
  return m;
}

EnumMethod parse_method(const std::string& s) {
  if (s == "auto") return EnumMethod::Auto;
  if (s == "support") return EnumMethod::Support;
  if (s == "gauss") return EnumMethod::Gauss;
  throw Error(ErrorKind::InvalidParameter, fmt::format("unknown method '{}'", s));
}

CountMode parse_mode(const std::string& s) {
  if (s == "divisor") return CountMode::Divisor;
  if (s == "qlek") return CountMode::QLeK;
  throw Error(ErrorKind::InvalidParameter, fmt::format("unknown mode '{}'", s));
}

json certificate_json(const BoundCertificate& c) {
  json checks = json::array();
  for (const auto& k : c.checks) checks.push_back({{"s", k.s}, {"generators", k.generators}, {"bound", k.bound}});
  json j{{"ok", c.ok},       {"m_used", c.m_used},         {"C", c.C},           {"fiber_bound", c.fiber_bound},
         {"C_n", c.C_n},     {"C_0", c.C_0},               {"checked_up_to", c.checked_up_to},
         {"checks", checks}, {"fitted_degree", nullptr}};
  if (c.fitted_degree) j["fitted_degree"] = *c.fitted_degree;
  return j;
}

json k_certificate_json(const KBoundCertificate& c) {
  json checks = json::array();
  for (const auto& k : c.checks) checks.push_back({{"k", k.k}, {"total", k.total}, {"bound", k.bound}});
  json j{{"ok", c.ok}, {"C_n", c.C_n}, {"C_0", c.C_0}, {"checked_up_to", c.checked_up_to}, {"checks", checks},
         {"fitted_degree", nullptr}};
  if (c.fitted_degree) j["fitted_degree"] = *c.fitted_degree;
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rational-torus counting, barcode growth and smoothing of toric domains"};
  app.require_subcommand(1);
  app.set_version_flag("--version", TORICBAR_VERSION);

  Run run;
  int threads = 0;
  std::uint64_t seed = 0;
  std::string manifest_opt;
  std::optional<std::string> out;
  app.add_option("--threads", threads, "worker threads (default: TORICBAR_THREADS or hardware)")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "seed recorded in the manifest and used by randomized steps");
  app.add_option("--manifest", manifest_opt, "manifest path (default: <out>.manifest.json or toricbar.manifest.json)");

  // option values, shared by the subcommands that use them
  std::string domain, domain2, method = "auto", mode = "divisor", polytope, hamiltonian, bars, bars2, complex, ladder;
  double smax = 0.0, smin = 0.0, eta = 0.0, eps = 0.0, s = 0.0, fiber = 1.0, strictify = 0.0, tol = 0.0;
  int m_resolution = 0, samples = 50, k = 0, kmax = 0, fit_from = 1, resolution = 512;
  std::vector<double> s_list{5, 10, 20, 40};
  std::optional<std::string> report;
  std::optional<double> s_interleave;

  auto* spectrum = app.add_subcommand("spectrum", "orbit classes up to an action bound (CSV)");
  spectrum->add_option("--domain", domain)->required()->check(CLI::ExistingFile);
  spectrum->add_option("--smax", smax)->required();
  spectrum->add_option("--method", method)->check(CLI::IsMember({"auto", "support", "gauss"}));
  spectrum->add_option("--m-resolution", m_resolution);
  spectrum->add_option("--out", out);

  auto* growth = app.add_subcommand("growth", "generator counts over a geometric s-grid (CSV) and growth rates");
  growth->add_option("--domain", domain)->required()->check(CLI::ExistingFile);
  growth->add_option("--smax", smax)->required();
  growth->add_option("--smin", smin, "default smax / 10");
  growth->add_option("--samples", samples)->check(CLI::Range(4, 100000));
  growth->add_option("--method", method)->check(CLI::IsMember({"auto", "support", "gauss"}));
  growth->add_option("--out", out);

  auto* bound = app.add_subcommand("bound", "polynomial bound certificate (JSON)");
  bound->add_option("--domain", domain)->required()->check(CLI::ExistingFile);
  bound->add_option("--s", s_list)->delimiter(',');
  bound->add_option("--fiber", fiber);
  bound->add_option("--out", out);

  auto* moll = app.add_subcommand("mollify", "smooth a nonsmooth convex domain (RadialGrid JSON + report)");
  moll->add_option("--domain", domain)->required()->check(CLI::ExistingFile);
  moll->add_option("--eta", eta)->required();
  moll->add_option("--samples", samples)->default_val(257);
  moll->add_option("--out", out, "RadialGrid domain JSON");
  moll->add_option("--report", report);

  auto* delzant = app.add_subcommand("delzant", "closed toric manifolds from Delzant polytopes");
  delzant->require_subcommand(1);
  auto* dcount = delzant->add_subcommand("count", "fixed points of the k-th iterate (CSV)");
  auto* dbound = delzant->add_subcommand("bound", "polynomial bound in k (JSON)");
  for (auto* sub : {dcount, dbound}) {
    sub->add_option("--polytope", polytope)->required()->check(CLI::ExistingFile);
    sub->add_option("--hamiltonian", hamiltonian)->required()->check(CLI::ExistingFile);
    sub->add_option("--mode", mode)->check(CLI::IsMember({"divisor", "qlek"}));
    sub->add_option("--strictify", strictify);
    sub->add_option("--kmax", kmax);
    sub->add_option("--out", out);
  }
  dcount->add_option("--k", k);
  dbound->add_option("--fit-from", fit_from);

  auto* barcode = app.add_subcommand("barcode", "persistence barcodes");
  barcode->require_subcommand(1);
  auto* reduce_cmd = barcode->add_subcommand("reduce", "barcode of a filtered complex (JSON)");
  reduce_cmd->add_option("--complex", complex)->required()->check(CLI::ExistingFile);
  reduce_cmd->add_option("--out", out);
  auto* beps = barcode->add_subcommand("beps", "number of bars longer than eps starting below s");
  beps->add_option("--bars", bars)->required()->check(CLI::ExistingFile);
  beps->add_option("--eps", eps)->required();
  beps->add_option("--s", s)->required();
  auto* bottleneck = barcode->add_subcommand("bottleneck", "bottleneck distance of two barcodes");
  bottleneck->add_option("--a", bars)->required()->check(CLI::ExistingFile);
  bottleneck->add_option("--b", bars2)->required()->check(CLI::ExistingFile);

  auto* bm = app.add_subcommand("bm", "Banach-Mazur upper bounds");
  bm->require_subcommand(1);
  auto* ratio = bm->add_subcommand("ratio", "max |ln(f/g)| bound (JSON)");
  ratio->add_option("--f", domain)->required()->check(CLI::ExistingFile);
  ratio->add_option("--g", domain2)->required()->check(CLI::ExistingFile);
  ratio->add_option("--resolution", resolution);
  ratio->add_option("--s", s_interleave, "also report the interleaving bound at s");
  ratio->add_option("--out", out);
  auto* lad = bm->add_subcommand("ladder", "liminf of b_eps along a ladder (JSON)");
  lad->add_option("--ladder", ladder)->required()->check(CLI::ExistingFile);
  lad->add_option("--tol", tol);
  lad->add_option("--out", out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (threads > 0) setenv("TORICBAR_THREADS", std::to_string(threads).c_str(), 1);
  for (int i = 1; i < argc; ++i) run.command += (i > 1 ? " " : "") + std::string(argv[i]);
  run.manifest_path = !manifest_opt.empty() ? manifest_opt : out ? *out + ".manifest.json" : "toricbar.manifest.json";
  run.config = {{"seed", seed},
                {"threads", default_threads()},
                {"tolerances", {{"action_dedup", 1e-9}, {"angular_dedup", 1e-8}, {"newton_residual", 1e-12}}}};

  int code = 0;
  std::string error;
  try {
    if (*spectrum) {
      const ToricDomain D = domain_from_json(read_json(domain));
      EnumOptions opt;
      opt.method = parse_method(method);
      opt.m_resolution = m_resolution;
      run.config.update({{"domain", domain}, {"smax", smax}, {"method", method}, {"m_resolution", m_resolution}});
      const Spectrum sp = enumerate_spectrum(D, smax, opt);
      std::string csv = "face,p,action,primitive,degenerate\n";
      for (const auto& c : sp.classes)
        csv += fmt::format("{},[{}],{},{},{}\n", face_label(c.face.index), fmt::join(c.p, " "), fmt17(c.action),
                           c.primitive ? 1 : 0, c.degenerate ? 1 : 0);
      emit_text(run, out, csv);
      std::cerr << fmt::format("classes: {}\ngenerators: {}\nm: {}\n", sp.classes.size(),
                               count_generators(sp, smax).total_generators, fmt17(sp.m.m));
      for (const auto& w : sp.warnings) std::cerr << "warning: " << w << "\n";
    } else if (*growth) {
      const ToricDomain D = domain_from_json(read_json(domain));
      if (smin <= 0.0) smin = smax / 10;
      if (!(smax > smin && smin > 0.0)) throw Error(ErrorKind::InvalidParameter, "need 0 < smin < smax");
      EnumOptions opt;
      opt.method = parse_method(method);
      run.config.update({{"domain", domain}, {"smin", smin}, {"smax", smax}, {"samples", samples}, {"method", method}});
      const Spectrum sp = enumerate_spectrum(D, smax, opt);
      std::vector<GrowthSample> g;
      for (int i = 0; i < samples; ++i) {
        const double si = i == samples - 1 ? smax : smin * std::pow(smax / smin, static_cast<double>(i) / (samples - 1));
        g.push_back({si, count_generators(sp, si).total_generators});
      }
      const GrowthSamples gs(std::move(g));
      std::ostringstream csv;
      growth_to_csv(gs, csv);
      emit_text(run, out, csv.str());
      const auto est = entropy_estimates(gs, std::make_pair(smin, smax));
      std::cerr << fmt::format("poly_degree: {}\nexp_rate: {}\nsamples_used: {}\n", fmt17(est.poly_degree),
                               fmt17(est.exp_rate), est.samples_used);
    } else if (*bound) {
      const ToricDomain D = domain_from_json(read_json(domain));
      run.config.update({{"domain", domain}, {"s", s_list}, {"fiber_bound", fiber}});
      const auto cert = certify_bound(D, s_list, fiber);
      emit_json(run, out, certificate_json(cert));
      if (!cert.ok) throw Error(ErrorKind::SpectralValue, "bound certificate failed");
    } else if (*moll) {
      const ToricDomain D = domain_from_json(read_json(domain));
      run.config.update({{"domain", domain}, {"eta", eta}, {"samples", samples}});
      PipelineOptions opt;
      opt.samples = samples;
      const auto M = mollify_domain(build_field(D), eta, opt);
      if (out) emit_json(run, out, domain_to_json(M.domain()));
      emit_json(run, report, mollify_report(M));
    } else if (*dcount || *dbound) {
      const DelzantPolytope P = polytope_from_json(read_json(polytope));
      const Hamiltonian h = hamiltonian_from_json(read_json(hamiltonian), P.n);
      CountOptions opt;
      opt.mode = parse_mode(mode);
      opt.strictify = strictify;
      run.config.update({{"polytope", polytope}, {"hamiltonian", hamiltonian}, {"mode", mode}, {"strictify", strictify}});
      if (*dcount) {
        if (k <= 0 && kmax <= 0) throw Error(ErrorKind::InvalidParameter, "give --k or --kmax");
        const int lo = k > 0 ? k : 1, hi = k > 0 ? k : kmax;
        run.config.update({{"k_range", {lo, hi}}});
        std::vector<FixedPointCount> counts;
        for (int kk = lo; kk <= hi; ++kk) counts.push_back(count_fixed_points(P, h, kk, opt));
        std::ostringstream csv;
        write_counts_csv(csv, counts);
        emit_text(run, out, csv.str());
        for (const auto& c : counts) {
          std::cerr << fmt::format("k={} total={}\n", c.k, c.total);
          for (const auto& w : c.warnings) std::cerr << "warning: " << w << "\n";
        }
      } else {
        if (kmax <= 0) kmax = 50;
        std::vector<int> ks;
        for (int kk = 1; kk <= kmax; ++kk) ks.push_back(kk);
        run.config.update({{"kmax", kmax}, {"fit_from", fit_from}});
        const auto cert = certify_k_bound(P, h, ks, opt, fit_from);
        emit_json(run, out, k_certificate_json(cert));
        if (!cert.ok) throw Error(ErrorKind::SpectralValue, "k bound certificate failed");
      }
    } else if (*reduce_cmd) {
      run.config.update({{"complex", complex}});
      emit_json(run, out, barcode_to_json(reduce(complex_from_json(read_json(complex)))));
    } else if (*beps) {
      run.config.update({{"bars", bars}, {"eps", eps}, {"s", s}});
      std::cout << count_long_bars(barcode_from_json(read_json(bars)), eps, s) << "\n";
    } else if (*bottleneck) {
      run.config.update({{"a", bars}, {"b", bars2}});
      std::cout << fmt17(bottleneck_distance(barcode_from_json(read_json(bars)), barcode_from_json(read_json(bars2))))
                << "\n";
    } else if (*ratio) {
      const ToricDomain f = domain_from_json(read_json(domain));
      const ToricDomain g = domain_from_json(read_json(domain2));
      run.config.update({{"f", domain}, {"g", domain2}, {"resolution", resolution}});
      const auto r = log_ratio_bound(f, g, resolution);
      json j = bm_report_to_json(r);
      if (s_interleave) j["interleaving_upper"] = {{"s", *s_interleave}, {"value", r.interleaving_upper(*s_interleave)}};
      emit_json(run, out, j);
    } else if (*lad) {
      run.config.update({{"ladder", ladder}, {"tol", tol}});
      const auto r = beps_liminf(ladder_from_json(read_json(ladder)), tol);
      emit_json(run, out, liminf_to_json(r));
      if (!r.stabilized) std::cerr << "warning: ladder not stabilized\n";
    }
  } catch (const Error& e) {
    error = e.what();
    code = is_input_error(e.kind()) ? 2 : 3;
  } catch (const json::exception& e) {
    error = e.what();
    code = 2;
  }
  if (!error.empty()) std::cerr << "error: " << error << "\n";

  std::ofstream mf(run.manifest_path);
  if (mf) mf << manifest(run, code, error).dump(2) << "\n";
  return code;
}
