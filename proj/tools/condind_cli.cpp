// condind: analyze, derive, verify, check, rate.
// Exit codes: 0 ok/holds, 1 parse/IO, 2 block, 3 no convergence, 4 invalid witness, 5 violated.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <string>

#include "condind/construction.hpp"
#include "condind/inequalities.hpp"
#include "condind/io.hpp"

using namespace cind;

namespace {

enum Exit { kOk = 0, kIo = 1, kBlock = 2, kNoConvergence = 3, kInvalidWitness = 4, kViolated = 5 };

std::string f6(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string join(const std::vector<int>& v) {
  std::string s = "{";
  for (std::size_t k = 0; k < v.size(); ++k) s += (k ? "," : "") + std::to_string(v[k]);
  return s + "}";
}

json split_json(const BlockSplit& s) { return {{"I1", s.I1}, {"I2", s.I2}, {"J1", s.J1}, {"J2", s.J2}}; }

void print_split(const BlockSplit& s) {
  std::cout << "block split: I1=" << join(s.I1) << " J1=" << join(s.J1) << " I2=" << join(s.I2) << " J2=" << join(s.J2)
            << "\n";
}

// JSON does not carry infinities; they are written as strings.
json num(double v) { return std::isfinite(v) ? json(v) : json(v > 0 ? "inf" : "-inf"); }

json verdict_json(const BoundVerdict& v) {
  return {{"lhs", num(v.lhs)}, {"rhs", num(v.rhs)}, {"slack", num(v.slack)}, {"holds", v.holds}};
}

void print_verdict(const std::string& name, const BoundVerdict& v) {
  std::cout << name << ": lhs " << f6(v.lhs) << "  rhs " << f6(v.rhs) << "  slack " << f6(v.slack) << "  "
            << (v.holds ? "holds" : "VIOLATED") << "\n";
}

JointDistribution load_distribution(const std::string& path) { return validate_distribution(read_matrix_file(path)); }

GammaCoupling load_gamma(const std::string& path, int rows, int cols) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, std::string("gamma file: ") + e.what());
  }
  try {
    const int range = j.at("range").get<int>();
    if (j.contains("values")) return deterministic_gamma(rows, cols, j.at("values").get<std::vector<int>>(), range);
    const Matrix q = matrix_from_json(j.at("q"));
    return GammaCoupling{range, q};
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, std::string("gamma file: ") + e.what());
  }
}

int cmd_analyze(const std::string& path, bool asJson) {
  const JointDistribution j = load_distribution(path);
  const Joint joint = Joint::from_matrix(j.p);
  json out{{"rows", j.rows()},
           {"cols", j.cols()},
           {"H(a)", entropy(marginal(joint, {0}))},
           {"H(b)", entropy(marginal(joint, {1}))},
           {"H(a|b)", conditional_entropy(j.p)},
           {"H(b|a)", conditional_entropy(j.p.transpose())},
           {"I(a:b)", mutual_information(j.p)}};
  const auto split = block_split(j);
  out["block"] = static_cast<bool>(split);
  if (split)
    out["split"] = split_json(*split);
  else
    out["r_complexity_bound"] = r_complexity_bound(j);
  if (asJson) {
    std::cout << out.dump(2) << "\n";
  } else {
    std::cout << "matrix " << j.rows() << "x" << j.cols() << "\n";
    std::cout << "H(a) " << f6(out["H(a)"]) << "  H(b) " << f6(out["H(b)"]) << "  H(a|b) " << f6(out["H(a|b)"])
              << "  H(b|a) " << f6(out["H(b|a)"]) << "  I(a:b) " << f6(out["I(a:b)"]) << "\n";
    if (split) {
      std::cout << "block matrix: not conditionally independent of any order\n";
      print_split(*split);
    } else {
      std::cout << "non-block matrix; r-complexity bound " << out["r_complexity_bound"].get<int>() << "\n";
    }
  }
  return split ? kBlock : kOk;
}

int cmd_derive(const std::string& path, const ConstructionConfig& cfg, const std::string& outPath, bool asJson) {
  const JointDistribution j = load_distribution(path);
  ConstructionResult r = derive_nonblock(j, cfg);
  const json w = witness_to_json(r.witness);
  if (!outPath.empty()) {
    std::ofstream f(outPath);
    if (!f) throw Error(Errc::ParseError, "cannot write " + outPath);
    f << w.dump() << "\n";
    if (!f) throw Error(Errc::ParseError, "write failed for " + outPath);
  }
  if (asJson) {
    json out{{"order", r.witness.order()},
             {"achievedTV", r.achievedTV},
             {"maxStepCMI", r.report.max_cmi()},
             {"finalMI", r.report.finalMI},
             {"verdict", r.report.verdict}};
    if (outPath.empty()) out["witness"] = w;
    std::cout << out.dump(2) << "\n";
  } else {
    std::cout << "order " << r.witness.order() << "  achievedTV " << f6(r.achievedTV) << "  max step CMI "
              << f6(r.report.max_cmi()) << "  final MI " << f6(r.report.finalMI) << "  verdict "
              << (r.report.verdict ? "valid" : "INVALID") << "\n";
    if (outPath.empty()) std::cout << w.dump() << "\n";
  }
  return r.report.verdict ? kOk : kInvalidWitness;
}

int cmd_verify(const std::string& path, double tol, bool all, bool asJson) {
  const DerivationWitness w = read_witness_file(path);
  const ValidationReport r = validate_witness(w, tol > 0 ? tol : w.tol);
  if (asJson) {
    json steps = json::array();
    for (const StepReport& s : r.perStep)
      steps.push_back({{"cmiA", s.cmiA}, {"cmiB", s.cmiB}, {"marginalTV", s.marginalTV}, {"wellFormed", s.wellFormed}});
    std::cout << json{{"order", w.order()},
                      {"tol", r.tol},
                      {"verdict", r.verdict},
                      {"finalMI", r.finalMI},
                      {"firstBadStep", r.firstBadStep},
                      {"steps", steps}}
                     .dump(2)
              << "\n";
  } else {
    std::cout << "order " << w.order() << "  tol " << r.tol << "\n";
    std::cout << "step  I(a:b|a*)  I(a:b|b*)  marginalTV\n";
    const int k = w.order();
    for (int t = 0; t < k; ++t) {
      const bool shown = all || k <= 20 || t < 5 || t >= k - 5 || t == r.firstBadStep;
      if (!shown) {
        if (t == 5) std::cout << "  ...\n";
        continue;
      }
      const StepReport& s = r.perStep[t];
      std::cout << t << "  " << f6(s.cmiA) << "  " << f6(s.cmiB) << "  " << f6(s.marginalTV)
                << (t == r.firstBadStep ? "  <-- fails" : "") << (s.wellFormed ? "" : "  (not a distribution)") << "\n";
    }
    std::cout << "final MI " << f6(r.finalMI) << "\n";
    std::cout << (r.verdict ? "valid" : "INVALID") << "\n";
  }
  return r.verdict ? kOk : kInvalidWitness;
}

int cmd_check(const std::string& path, const std::string& gammaPath, bool sweep, int k, int thm, int range, bool asJson) {
  const JointDistribution j = load_distribution(path);
  if (sweep == !gammaPath.empty()) throw Error(Errc::ParseError, "give exactly one of --gamma and --sweep");
  if (thm != 1 && thm != 3) throw Error(Errc::ParseError, "--thm must be 1 or 3");
  BoundVerdict v;
  json out{{"k", k}, {"thm", thm}};
  if (sweep) {
    const SweepResult s = gamma_sweep(j, k, range, thm == 1 ? SweepBound::Theorem1 : SweepBound::Theorem3);
    v = s.verdict;
    out["worstMap"] = s.worstMap;
    out["maxRatio"] = num(s.maxRatio);
  } else {
    const GammaCoupling g = load_gamma(gammaPath, j.rows(), j.cols());
    if (thm == 1) {
      v = check_theorem1(j, g, k);
    } else {
      const Theorem3Verdict t = check_theorem3(j, g, k);
      v = t.entropyForm;
      out["infoForm"] = verdict_json(t.infoForm);
    }
  }
  out["verdict"] = verdict_json(v);
  if (asJson) {
    std::cout << out.dump(2) << "\n";
  } else {
    print_verdict("theorem " + std::to_string(thm) + ", k=" + std::to_string(k), v);
    if (sweep) {
      std::cout << "worst map " << join(out["worstMap"].get<std::vector<int>>()) << "  max H(g)/(H(g|a)+H(g|b)) "
                << (out["maxRatio"].is_string() ? out["maxRatio"].get<std::string>() : f6(out["maxRatio"].get<double>()))
                << "\n";
    }
  }
  return v.holds ? kOk : kViolated;
}

int cmd_rate(const RatePoint& p, int k, double ha, double hb, bool asJson) {
  const RateVerdict r = rate_bound(p, k, ha, hb);
  if (asJson) {
    std::cout << json{{"bound", verdict_json(r.bound)}, {"generic", verdict_json(r.generic)}}.dump(2) << "\n";
  } else {
    print_verdict("v+w+(2-2^-k)u", r.bound);
    print_verdict("v+w+2u      ", r.generic);
  }
  return r.bound.holds ? kOk : kViolated;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete conditional independence: structure, derivation witnesses, information inequalities"};
  app.require_subcommand(1);
  bool asJson = false;
  app.add_flag("--json", asJson, "machine-readable output with full precision");

  std::string matrixPath, witnessPath, outPath, gammaPath;
  auto* analyze = app.add_subcommand("analyze", "block structure and entropy summary of a joint distribution");
  analyze->add_option("matrix", matrixPath, "JSON {rows,cols,p} or CSV file")->required();

  ConstructionConfig cfg;
  auto* derive = app.add_subcommand("derive", "construct a derivation witness for a non-block matrix");
  derive->add_option("matrix", matrixPath, "JSON {rows,cols,p} or CSV file")->required();
  derive->add_option("--delta", cfg.delta, "allowed total variation to the target")->capture_default_str();
  derive->add_option("--tol", cfg.stepTol, "per-step conditional information tolerance, bits")->capture_default_str();
  derive->add_option("--max-order", cfg.maxOrder, "cap on the witness order")->capture_default_str();
  derive->add_option("--max-grid", cfg.maxGrid, "largest grid handed to the Newton stage")->capture_default_str();
  derive->add_option("--perturb-scale", cfg.perturbScale, "grid coupling size in (0,1)")->capture_default_str();
  derive->add_option("--zero-tol", cfg.zeroTol, "entries at or below this count as zero")->capture_default_str();
  bool exactOnly = false;
  derive->add_flag("--exact-only", exactOnly, "fail instead of deriving a smoothed target");
  derive->add_option("-o,--output", outPath, "witness JSON file (default: print it)");

  double tol = 0;
  bool all = false;
  auto* verify = app.add_subcommand("verify", "validate a witness file");
  verify->add_option("witness", witnessPath, "witness JSON file")->required();
  verify->add_option("--tol", tol, "tolerance in bits (default: the witness's declared tol)");
  verify->add_flag("--all", all, "print every step");

  int k = 0, thm = 1, range = 4;
  bool sweep = false;
  auto* check = app.add_subcommand("check", "check the order-k entropy inequalities");
  check->add_option("matrix", matrixPath, "JSON {rows,cols,p} or CSV file")->required();
  check->add_option("--gamma", gammaPath, "JSON {range, values:[...]} or {range, q:{rows,cols,p}}");
  check->add_flag("--sweep", sweep, "search all deterministic maps");
  check->add_option("--k", k, "order")->capture_default_str();
  check->add_option("--thm", thm, "1 or 3")->capture_default_str();
  check->add_option("--range", range, "largest gamma range in a sweep")->capture_default_str();

  RatePoint rp;
  double ha = 0, hb = 0;
  auto* rate = app.add_subcommand("rate", "evaluate the rate-region bound");
  rate->add_option("--u", rp.u)->required();
  rate->add_option("--v", rp.v)->required();
  rate->add_option("--w", rp.w)->required();
  rate->add_option("--k", k)->required();
  rate->add_option("--h-alpha", ha)->required();
  rate->add_option("--h-beta", hb)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kIo;
  }

  try {
    if (*analyze) return cmd_analyze(matrixPath, asJson);
    if (*derive) {
      cfg.smoothFallback = !exactOnly;
      return cmd_derive(matrixPath, cfg, outPath, asJson);
    }
    if (*verify) return cmd_verify(witnessPath, tol, all, asJson);
    if (*check) return cmd_check(matrixPath, gammaPath, sweep, k, thm, range, asJson);
    if (*rate) return cmd_rate(rp, k, ha, hb, asJson);
  } catch (const BlockError& e) {
    std::cerr << "error: " << e.what() << "\n";
    print_split(e.split());
    return kBlock;
  } catch (const ConvergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    std::cerr << "last residual " << e.residual() << "\n";
    return kNoConvergence;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (e.code() == Errc::OrderCapExceeded || e.code() == Errc::NoConvergence) return kNoConvergence;
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  }
  return kIo;
}
