// oulab: command-line front end to the OU variation library.
//
// Exit codes: 0 on a passing probe or a plain computation, 2 when a probe
// fails or does not converge, 1 on usage and configuration errors.

#include "oulab/gauss_geometry.hpp"
#include "oulab/mehler_kernel.hpp"
#include "oulab/ou_model.hpp"
#include "oulab/parallel.hpp"
#include "oulab/quadrature.hpp"
#include "oulab/report.hpp"
#include "oulab/rho_variation.hpp"
#include "oulab/semigroup_ops.hpp"
#include "oulab/torus_lab.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace oulab;

constexpr int kExitPass = 0;
constexpr int kExitUsage = 1;
constexpr int kExitFail = 2;

struct GlobalOptions {
  std::string modelPath;
  int dim = 1;
  std::string outDir;
  std::uint64_t seed = 1;
  int threads = 0;
  double budget = 0;
};

OUModel resolveModel(const GlobalOptions &g) {
  if (!g.modelPath.empty()) {
    return loadModel(g.modelPath);
  }
  if (g.dim < 1) {
    throw Error(ErrorCode::InvalidArgument, "--dim must be positive");
  }
  return standardModel(g.dim);
}

Vector toVector(const std::vector<double> &v, Index n, const char *what) {
  if (v.empty()) {
    return Vector::Zero(n);
  }
  if (static_cast<Index>(v.size()) != n) {
    throw Error(ErrorCode::DimensionMismatch,
                std::string(what) + " needs " + std::to_string(n) +
                    " components");
  }
  return Eigen::Map<const Vector>(v.data(), n);
}

// Runs a probe, applies the wall-clock budget and emits the report.
int emit(const GlobalOptions &g, const std::function<ProbeReport()> &probe) {
  const auto start = std::chrono::steady_clock::now();
  ProbeReport report = probe();
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  report.setRuntime(seconds);
  if (g.budget > 0) {
    report.setInput("budget", g.budget);
    if (seconds > g.budget) {
      report.raise(ProbeFlag::Unconverged);
      std::cerr << "budget of " << g.budget << " s exceeded\n";
    }
  }
  if (g.outDir.empty()) {
    std::cout << report.toJson() << '\n';
  } else {
    for (const std::string &path : writeReport(report, g.outDir)) {
      std::cout << path << '\n';
    }
  }
  std::cerr << report.name() << ": " << (report.passed() ? "PASS" : "FAIL")
            << '\n';
  return report.passed() ? kExitPass : kExitFail;
}

TestFunction makeFunction(const OUModel &model, const std::string &kind,
                          const Vector &center, double width) {
  if (kind == "bump") {
    return TestFunction::gaussianBump(model, center, width);
  }
  if (kind == "indicator") {
    return TestFunction::smoothedIndicator(model, center, width, width / 10);
  }
  if (kind == "constant") {
    return TestFunction::constant(model, 1.0);
  }
  if (kind == "linear") {
    return TestFunction::linear(model, Vector::Unit(model.dim(), 0));
  }
  throw Error(ErrorCode::InvalidArgument, "unknown function " + kind);
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Numerical probes for variation operators of OU semigroups"};
  app.require_subcommand(1);
  // Global options may follow the subcommand, as in `torus qian --seed 7`.
  app.fallthrough();
  GlobalOptions g;
  app.add_option("--model", g.modelPath, "Model JSON file")
      ->check(CLI::ExistingFile);
  app.add_option("--dim", g.dim, "Dimension of the standard model")
      ->capture_default_str();
  app.add_option("--out", g.outDir, "Directory for JSON and CSV reports");
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads")
      ->check(CLI::PositiveNumber);
  app.add_option("--budget", g.budget, "Wall-clock seconds per probe")
      ->check(CLI::PositiveNumber);

  std::function<int()> run;

  // model
  auto *model = app.add_subcommand("model", "Model utilities");
  model->require_subcommand(1);
  auto *modelCheck = model->add_subcommand("check", "Validate a model file");
  std::string checkFile;
  modelCheck->add_option("file", checkFile)->check(CLI::ExistingFile);
  modelCheck->callback([&] {
    run = [&] {
      if (!checkFile.empty()) {
        g.modelPath = checkFile;
      }
      const OUModel m = resolveModel(g);
      std::cout << "dim " << m.dim() << '\n'
                << "Qinf " << formatMatrix(m.Qinf()) << '\n'
                << "spectral_abscissa " << formatDouble(m.spectralAbscissa())
                << '\n'
                << "lyapunov_residual " << formatDouble(m.lyapunovResidual())
                << '\n';
      return kExitPass;
    };
  });

  // kernel
  auto *kernel = app.add_subcommand("kernel", "Mehler kernel");
  kernel->require_subcommand(1);
  std::vector<double> kx, ku, kt;
  double traceFrom = 1e-4, traceTo = 10;
  int tracePoints = 0;
  auto *kernelEval = kernel->add_subcommand("eval", "CSV of (t, K, dK/dt)");
  kernelEval->add_option("--x", kx)->delimiter(',');
  kernelEval->add_option("--u", ku)->delimiter(',');
  kernelEval->add_option("--t", kt, "Times")->delimiter(',');
  kernelEval->add_option("--trace", tracePoints,
                         "Log-spaced times instead of --t");
  kernelEval->add_option("--from", traceFrom)->capture_default_str();
  kernelEval->add_option("--to", traceTo)->capture_default_str();
  kernelEval->callback([&] {
    run = [&] {
      const OUModel m = resolveModel(g);
      std::vector<double> times = kt;
      if (tracePoints > 1) {
        times.clear();
        for (int i = 0; i < tracePoints; ++i) {
          times.push_back(traceFrom *
                          std::pow(traceTo / traceFrom,
                                   double(i) / (tracePoints - 1)));
        }
      }
      if (times.empty()) {
        throw Error(ErrorCode::InvalidArgument, "give --t or --trace");
      }
      const auto rows = kernelTrace(m, toVector(kx, m.dim(), "--x"),
                                    toVector(ku, m.dim(), "--u"), times);
      std::cout << "t,k,kdot\n";
      for (const auto &r : rows) {
        std::cout << formatDouble(r.t) << ',' << formatDouble(r.k) << ','
                  << formatDouble(r.kdot) << '\n';
      }
      return kExitPass;
    };
  });

  auto *kernelZeros = kernel->add_subcommand("zeros", "Zeros of t -> dK/dt");
  kernelZeros->add_option("--x", kx)->delimiter(',');
  kernelZeros->add_option("--u", ku)->delimiter(',');
  kernelZeros->callback([&] {
    run = [&] {
      const OUModel m = resolveModel(g);
      const ZeroCount z = countKdotZeros(m, toVector(kx, m.dim(), "--x"),
                                         toVector(ku, m.dim(), "--u"));
      std::cout << "count " << z.count << '\n'
                << "count_doubled " << z.countDoubled << '\n'
                << "unstable " << (z.unstable ? "true" : "false") << '\n';
      for (double t : z.zeros) {
        std::cout << "zero " << formatDouble(t) << '\n';
      }
      return kExitPass;
    };
  });

  std::string boundName = "litet";
  std::size_t boundSamples = 10000;
  std::optional<double> boundRate;
  auto *kernelBounds = kernel->add_subcommand("bounds", "Calibrate one bound");
  kernelBounds->add_option("--bound", boundName)
      ->check(CLI::IsMember({"litet", "dotKeps", "dotK1", "ineq100"}))
      ->capture_default_str();
  kernelBounds->add_option("--samples", boundSamples)->capture_default_str();
  kernelBounds->add_option("--rate", boundRate, "Fixed exponent constant c");
  kernelBounds->callback([&] {
    run = [&] {
      const OUModel m = resolveModel(g);
      CalibrationSpec spec;
      spec.sample.size = boundSamples;
      spec.sample.seed = g.seed;
      spec.rate = boundRate;
      const BoundCalibration c =
          calibrateBound(m, parseBoundKind(boundName), spec);
      nlohmann::ordered_json j;
      j["bound"] = toString(c.kind);
      j["c"] = c.rate;
      j["C"] = c.prefactor;
      j["sampleSpec"] = {{"size", spec.sample.size},
                         {"seed", spec.sample.seed},
                         {"radius", spec.sample.radius},
                         {"t_min", spec.tMin},
                         {"t_max", spec.tMax},
                         {"grid", c.grid}};
      j["naturalRate"] = c.naturalRate;
      j["maxRatio"] = c.maxRatio;
      j["halfSampleRatio"] = c.halfSampleRatio;
      j["stable"] = c.stable;
      std::cout << j.dump(2) << '\n';
      return c.stable ? kExitPass : kExitFail;
    };
  });

  // variation
  auto *variationCmd = app.add_subcommand("variation", "rho-variation");
  variationCmd->require_subcommand(1);
  double pathRho = 2;
  std::string pathFile;
  auto *variationPath =
      variationCmd->add_subcommand("path", "v(rho) of a (t,value) CSV path");
  variationPath->add_option("--rho", pathRho)->capture_default_str();
  variationPath->add_option("--file", pathFile)
      ->required()
      ->check(CLI::ExistingFile);
  variationPath->callback([&] {
    run = [&] {
      const SampledPath path = readPathCsv(pathFile);
      const double v = variation(path, VariationOrder(pathRho));
      std::printf("%.6f\n", v);
      return kExitPass;
    };
  });

  // semigroup
  auto *semigroup = app.add_subcommand("semigroup", "OU semigroup");
  semigroup->require_subcommand(1);
  std::string fKind = "bump", partName = "full";
  std::vector<double> fCenter, sx, st;
  double fWidth = 0.1;
  auto *semigroupApply = semigroup->add_subcommand("apply", "H_t f(x)");
  semigroupApply->add_option("--f", fKind)
      ->check(CLI::IsMember({"bump", "indicator", "constant", "linear"}))
      ->capture_default_str();
  semigroupApply->add_option("--center", fCenter)->delimiter(',');
  semigroupApply->add_option("--width", fWidth)->capture_default_str();
  semigroupApply->add_option("--x", sx)->delimiter(',');
  semigroupApply->add_option("--t", st)->required()->delimiter(',');
  semigroupApply->add_option("--part", partName)
      ->check(CLI::IsMember({"full", "local", "global"}))
      ->capture_default_str();
  semigroupApply->callback([&] {
    run = [&] {
      const OUModel m = resolveModel(g);
      const PartitionOfUnity pou(m);
      const SemigroupEvaluator ev(
          m, QuadratureRule::forDimension(m.dim()),
          makeFunction(m, fKind, toVector(fCenter, m.dim(), "--center"),
                       fWidth),
          &pou);
      const OperatorPart part = partName == "local"    ? OperatorPart::Local
                                : partName == "global" ? OperatorPart::Global
                                                       : OperatorPart::Full;
      const Vector x = toVector(sx, m.dim(), "--x");
      std::cout << "t,value\n";
      for (double t : st) {
        std::cout << formatDouble(t) << ','
                  << formatDouble(ev.apply(x, t, part)) << '\n';
      }
      return kExitPass;
    };
  });

  // probe
  auto *probe = app.add_subcommand("probe", "Statistical probes");
  probe->require_subcommand(1);

  WeakTypeConfig weak;
  std::string regimeName = "full";
  std::vector<double> weakCenter;
  auto *probeWeak = probe->add_subcommand("weak-type", "Weak type (1,1)");
  probeWeak->add_option("--regime", regimeName)
      ->check(CLI::IsMember(
          {"full", "large-t", "global-small-t", "local-small-t"}))
      ->capture_default_str();
  probeWeak->add_option("--rho", weak.rho)->capture_default_str();
  probeWeak->add_option("--delta", weak.bumpWidth, "Bump width")
      ->capture_default_str();
  probeWeak->add_option("--center", weakCenter)->delimiter(',');
  probeWeak->add_option("--samples", weak.sampleSize)->capture_default_str();
  probeWeak->add_option("--ppd", weak.pointsPerDecade)->capture_default_str();
  probeWeak->add_option("--min-exceedances", weak.minExceedances)
      ->capture_default_str();
  probeWeak->callback([&] {
    run = [&] {
      const OUModel m = resolveModel(g);
      const PartitionOfUnity pou(m);
      weak.regime = parseRegime(regimeName);
      weak.seed = g.seed;
      if (!weakCenter.empty()) {
        weak.bumpCenter = toVector(weakCenter, m.dim(), "--center");
      }
      return emit(g, [&] {
        return weakTypeProbe(m, pou, QuadratureRule::forDimension(m.dim()),
                             weak);
      });
    };
  });

  CzSweepConfig cz;
  auto *probeCz = probe->add_subcommand("cz", "Standard kernel estimates");
  probeCz->add_option("--rho", cz.rho)->capture_default_str();
  probeCz->add_option("--distances", cz.distances)->capture_default_str();
  probeCz->add_option("--min-distance", cz.minDistance)->capture_default_str();
  probeCz->add_option("--max-distance", cz.maxDistance)->capture_default_str();
  probeCz->add_option("--samples", cz.samplesPerDistance,
                      "Samples per distance")
      ->capture_default_str();
  probeCz->add_option("--ppd", cz.pointsPerDecade)->capture_default_str();
  probeCz->callback([&] {
    run = [&] {
      const OUModel m = resolveModel(g);
      const PartitionOfUnity pou(m);
      cz.seed = g.seed;
      return emit(g, [&] { return czProbe(m, pou, cz); });
    };
  });

  std::vector<std::string> boundNames{"litet", "dotKeps", "dotK1", "ineq100"};
  auto *probeBounds =
      probe->add_subcommand("kernel-bounds", "Calibrate the kernel bounds");
  probeBounds->add_option("--bound", boundNames)
      ->delimiter(',')
      ->check(CLI::IsMember({"litet", "dotKeps", "dotK1", "ineq100"}));
  probeBounds->add_option("--samples", boundSamples)->capture_default_str();
  probeBounds->add_option("--rate", boundRate);
  probeBounds->callback([&] {
    run = [&] {
      const OUModel m = resolveModel(g);
      CalibrationSpec spec;
      spec.sample.size = boundSamples;
      spec.sample.seed = g.seed;
      spec.rate = boundRate;
      std::vector<BoundKind> kinds;
      for (const auto &name : boundNames) {
        kinds.push_back(parseBoundKind(name));
      }
      return emit(g, [&] { return kernelBoundsProbe(m, kinds, spec); });
    };
  });

  EnhancedConfig enhanced;
  std::string enhancedKind = "bump";
  double enhancedWidth = 0.1;
  auto *probeEnhanced =
      probe->add_subcommand("enhanced", "Level-set estimate for C_alpha");
  probeEnhanced->add_option("--delta", enhanced.delta)->capture_default_str();
  probeEnhanced->add_option("--alpha", enhanced.alphas)->delimiter(',');
  probeEnhanced->add_option("--samples", enhanced.sampleSize)
      ->capture_default_str();
  probeEnhanced->add_option("--f", enhancedKind)
      ->check(CLI::IsMember({"bump", "indicator", "constant", "linear"}))
      ->capture_default_str();
  probeEnhanced->add_option("--width", enhancedWidth)->capture_default_str();
  probeEnhanced->callback([&] {
    run = [&] {
      const OUModel m = resolveModel(g);
      enhanced.seed = g.seed;
      const TestFunction f =
          makeFunction(m, enhancedKind, Vector::Zero(m.dim()), enhancedWidth);
      return emit(g, [&] { return enhancedLemmaProbe(m, f, enhanced); });
    };
  });

  // torus
  auto *torusCmd = app.add_subcommand("torus", "Rademacher counterexample");
  torusCmd->require_subcommand(1);

  std::vector<int> qianNs{4, 6, 8, 10, 12};
  std::size_t qianSamples = 10000;
  std::string opName = "E";
  auto *torusQian = torusCmd->add_subcommand("qian", "v(2) growth of E_l T_N");
  torusQian->add_option("--N", qianNs)->delimiter(',');
  torusQian->add_option("--samples", qianSamples)->capture_default_str();
  torusQian->add_option("--op", opName)
      ->check(CLI::IsMember({"A", "D", "E"}))
      ->capture_default_str();
  torusQian->callback([&] {
    run = [&] {
      return emit(g, [&] {
        return torus::qianGrowth(qianNs, qianSamples, g.seed,
                                 torus::parseChainOperator(opName));
      });
    };
  });

  int lmax = 40, fourierPpd = 50;
  auto *torusFourier =
      torusCmd->add_subcommand("fourier", "Fourier comparison of J and chi");
  torusFourier->add_option("--lmax", lmax)->capture_default_str();
  torusFourier->add_option("--ppd", fourierPpd)->capture_default_str();
  torusFourier->callback([&] {
    run = [&] {
      return emit(g, [&] { return torus::fourierProbe(lmax, fourierPpd); });
    };
  });

  torus::FailureConfig failure;
  auto *torusFailure =
      torusCmd->add_subcommand("failure", "Weak type failure for rho = 2");
  torusFailure->add_option("--p", failure.ps)->delimiter(',');
  torusFailure->add_option("--Ngrid", failure.Ns)->delimiter(',');
  torusFailure->add_option("--samples", failure.sampleSize)
      ->capture_default_str();
  torusFailure->callback([&] {
    run = [&] {
      failure.seed = g.seed;
      return emit(g, [&] { return torus::weakTypeFailure(failure); });
    };
  });

  torus::DeltaConfig delta;
  auto *torusDelta =
      torusCmd->add_subcommand("delta", "Difference of the two kernels");
  torusDelta->add_option("--N", delta.Ns)->delimiter(',');
  torusDelta->add_option("--samples", delta.pointSamples)
      ->capture_default_str();
  torusDelta->add_option("--operator-samples", delta.operatorSamples)
      ->capture_default_str();
  torusDelta->add_option("--rate", delta.rate);
  torusDelta->callback([&] {
    run = [&] {
      const OUModel m = resolveModel(g);
      delta.seed = g.seed;
      return emit(g, [&] { return torus::deltaOperatorBound(m, delta); });
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return kExitUsage;
  }

  if (g.threads > 0) {
    setThreadCount(g.threads);
  }
  try {
    return run();
  } catch (const Error &e) {
    std::cerr << "error: " << e.what() << '\n';
    switch (e.code()) {
    case ErrorCode::RateTooLarge:
    case ErrorCode::TailNotConverged:
    case ErrorCode::QuadratureBudgetExceeded:
    case ErrorCode::StepUnderflow:
    case ErrorCode::BracketFail:
      return kExitFail;
    default:
      return kExitUsage;
    }
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}
