// idfact: factor the identity through a matrix or a matrix path, verify
// certificates, and run the benchmark sweep.

#include <functional>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "commands.hpp"

namespace {

using idfact::cli::RunConfig;

void error_line(int code, const std::string& msg) {
  std::cout << "status=error code=" << code << " message=\"" << msg << "\"\n";
  std::cerr << "idfact: " << msg << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  using namespace idfact;
  using namespace idfact::cli;

  CLI::App app{"Factor the identity through matrices and matrix paths"};
  app.require_subcommand(1);
  RunConfig cfg;
  Index n_value = 0;
  bool no_timing = false;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--input", cfg.input, "input matrix or path file");
    sub->add_option("--output-prefix", cfg.prefix, "prefix of produced (or verified) artifacts");
    sub->add_option("--n", n_value, "rank n (default: largest guaranteed)");
    sub->add_option("--tol", cfg.tol, "certificate tolerance");
  };
  std::map<std::string, std::function<int(const RunConfig&, std::ostream&)>> handlers;

  auto* factor = app.add_subcommand("factor", "factor I_n through a matrix");
  common(factor);
  factor->add_flag("--rescale", cfg.rescale, "factor A/||A|| and rescale L");
  factor->add_flag("--force-rank", cfg.force_rank, "allow n above the guaranteed bound");
  handlers["factor"] = cmd_factor;

  auto* verify = app.add_subcommand("verify", "recompute a static certificate from A, L, R");
  common(verify);
  handlers["verify"] = cmd_verify;

  auto* fpath = app.add_subcommand("factor-path", "factor I_n through a matrix path");
  common(fpath);
  fpath->add_option("--grid", cfg.grid, "verification grid size");
  fpath->add_flag("--rescale", cfg.rescale, "divide all frames by the path norm bound");
  fpath->add_flag("--force-rank", cfg.force_rank, "allow n above the guaranteed bound");
  handlers["factor-path"] = cmd_factor_path;

  auto* vpath = app.add_subcommand("verify-path", "recompute a path certificate from path and plan");
  common(vpath);
  vpath->add_option("--grid", cfg.grid, "verification grid size");
  vpath->add_flag("--rescale", cfg.rescale, "divide all frames by the path norm bound");
  handlers["verify-path"] = cmd_verify_path;

  auto* witness = app.add_subcommand("witness", "emit diag(1, theta, ..., theta)");
  common(witness);
  witness->add_option("--N", cfg.N, "dimension")->required();
  witness->add_option("--theta", cfg.theta, "small diagonal value")->required();
  handlers["witness"] = cmd_witness;

  auto* bounds = app.add_subcommand("bounds", "guaranteed ranks for N and theta");
  bounds->add_option("--N", cfg.N, "dimension")->required();
  bounds->add_option("--theta", cfg.theta, "minimal column norm")->required();
  handlers["bounds"] = cmd_bounds;

  auto* bench = app.add_subcommand("bench", "seeded sweep over (N, theta), CSV output");
  bench->add_option("--output-prefix", cfg.prefix, "CSV written to <prefix>.csv");
  bench->add_option("--sweep", cfg.sweep, "cells N:theta,N:theta,...");
  bench->add_option("--count", cfg.count, "instances per cell");
  bench->add_option("--seed", cfg.seed, "random seed");
  bench->add_option("--block", cfg.block, "Haar block size");
  bench->add_option("--tol", cfg.tol, "certificate tolerance");
  bench->add_flag("--no-timing", no_timing, "write 0 in the millis column");
  handlers["bench"] = cmd_bench;

  auto* gen = app.add_subcommand("gen-path", "generate a test path");
  gen->add_option("--output-prefix", cfg.prefix, "path written to <prefix>.path.txt");
  gen->add_option("--kind", cfg.kind, "constant, rotation or random");
  gen->add_option("--N", cfg.N, "dimension")->required();
  gen->add_option("--theta", cfg.theta, "lower bound on column norms");
  gen->add_option("--segments", cfg.segments, "number of segments");
  gen->add_option("--seed", cfg.seed, "random seed");
  gen->add_option("--block", cfg.block, "Haar block size (default N)");
  handlers["gen-path"] = cmd_gen_path;

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    error_line(kUsage, e.what());
    return kUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  if (const CLI::Option* opt = sub->get_option_no_throw("--n"); opt && opt->count() > 0) cfg.n = n_value;
  cfg.timing = !no_timing;
  try {
    check_config(cfg);
    return handlers.at(sub->get_name())(cfg, std::cout);
  } catch (const HypothesisError& e) {
    error_line(kHypothesis, e.what());
    return kHypothesis;
  } catch (const InfeasibleError& e) {
    error_line(kHypothesis, e.what());
    return kHypothesis;
  } catch (const StallError& e) {
    error_line(kHypothesis, e.what());
    return kHypothesis;
  } catch (const ParseError& e) {
    error_line(kUsage, e.what());
    return kUsage;
  } catch (const DimensionError& e) {
    error_line(kUsage, e.what());
    return kUsage;
  } catch (const Error& e) {
    // Divergence or non-convergence: no certificate can be issued.
    error_line(kCertificate, e.what());
    return kCertificate;
  } catch (const std::exception& e) {
    error_line(kUsage, e.what());
    return kUsage;
  }
}
