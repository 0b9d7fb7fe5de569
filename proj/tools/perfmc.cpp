// perfmc: free-breathing perfusion motion correction from the command line.
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "perfmc/array_io.hpp"
#include "perfmc/evaluation.hpp"
#include "perfmc/fourier.hpp"
#include "perfmc/periodicity.hpp"
#include "perfmc/phantom.hpp"
#include "perfmc/pipeline.hpp"
#include "perfmc/registration.hpp"
#include "perfmc/rpca.hpp"

namespace fs = std::filesystem;
using namespace perfmc;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> config;
  std::optional<fs::path> out_dir;
  std::string preset = "desk";
  std::optional<double> rate;
  std::optional<std::string> solver;
  bool quiet = false;
};

// Preset defaults, then the config file, then command-line overrides.
PipelineConfig resolve(const Globals& g) {
  PipelineConfig c = default_pipeline_config(parse_preset(g.preset));
  if (g.config) c = load_pipeline_config(*g.config, c);
  if (g.seed) c.seed = *g.seed;
  if (g.out_dir) c.out_dir = *g.out_dir;
  if (g.rate) c.rate = *g.rate;
  if (g.solver) c.solver.variant = parse_solver_variant(*g.solver);
  return c;
}

void log_line(const Globals& g, const std::string& s) {
  if (!g.quiet) std::cerr << s << '\n';
}

void commit_json(ArtifactStager& st, const std::string& name, const nlohmann::json& j) {
  std::ofstream(st.stage(name)) << j.dump(2) << '\n';
}

bool is_complex(const fs::path& base) { return read_header(base).dtype == DType::complex64; }

ComplexSeries read_any_complex(const fs::path& base) {
  return is_complex(base) ? read_complex_series(base) : to_complex(read_real_series(base));
}

int cmd_phantom(const Globals& g) {
  PipelineConfig c = resolve(g);
  PhantomSpec spec = c.phantom;
  spec.seed = c.seed;
  const Phantom ph = generate_phantom(spec);
  ArtifactStager st(c.out_dir);
  const std::string sfx = ArtifactStager::suffix;
  st.add(write_array(st.dir() / "phantom", ph.noisy, sfx));
  st.add(write_array(st.dir() / "truth_clean", ph.truth.clean, sfx));
  st.add(write_array(st.dir() / "truth_static", ph.truth.static_clean, sfx));
  write_truth_json(st.stage("truth.json"), spec, ph.truth);
  write_sectors_json(st.stage("sectors.json"), ph.truth.sectors);
  st.commit();
  log_line(g, "phantom " + to_string(spec.shape) + " written to " + c.out_dir.string());
  return 0;
}

int cmd_undersample(const Globals& g, const fs::path& input) {
  PipelineConfig c = resolve(g);
  const ComplexSeries x = read_any_complex(input);
  const KSpaceData d = undersample_phantom(x, c.rate, c.seed ^ 0x9e3779b97f4a7c15ULL);
  ArtifactStager st(c.out_dir);
  const std::string sfx = ArtifactStager::suffix;
  st.add(write_array(st.dir() / "kspace", d.samples, sfx));
  st.add(write_array(st.dir() / "mask", d.mask, sfx));
  st.add(write_array(st.dir() / "zero_filled", adjoint_undersample(d), sfx));
  st.commit();
  std::ostringstream msg;
  msg << "rate " << c.rate << ", achieved " << std::setprecision(4) << d.mask.achieved_rate();
  log_line(g, msg.str());
  return 0;
}

int cmd_reconstruct(const Globals& g, const fs::path& kspace, const fs::path& mask) {
  PipelineConfig c = resolve(g);
  KSpaceData d{read_complex_series(kspace), read_mask(mask)};
  require_same_shape(d.samples, d.mask.keep, "kspace vs mask");
  const Decomposition dec = reconstruct(d, c.solver);
  ArtifactStager st(c.out_dir);
  const std::string sfx = ArtifactStager::suffix;
  st.add(write_array(st.dir() / "L", dec.L, sfx));
  st.add(write_array(st.dir() / "S", dec.S, sfx));
  st.add(write_array(st.dir() / "Z", dec.Z, sfx));
  st.add(write_array(st.dir() / "reconstruction", dec.reconstruction(), sfx));
  write_history_csv(st.stage("history.csv"), dec.history);
  st.commit();
  log_line(g, to_string(dec.variant) + ": " + to_string(dec.status) + " after " + std::to_string(dec.iterations()) +
                  " iterations");
  if (!dec.converged()) {
    std::cerr << "error: solver did not converge\n";
    return exit_code(ErrorKind::numerical);
  }
  return 0;
}

int cmd_decompose(const Globals& g, const fs::path& low_rank, const fs::path& sparse) {
  PipelineConfig c = resolve(g);
  const ComplexSeries l = read_any_complex(low_rank);
  const ComplexSeries s = read_any_complex(sparse);
  require_same_shape(l, s, "L vs S");
  const auto phase = pixel_phase(l + s);
  const RealSeries lr = demodulate(l, phase);
  const PeriodicSplit split = split_sparse_component(demodulate(s, phase), c.periodicity.m, c.periodicity.min_energy_frac);
  ArtifactStager st(c.out_dir);
  const std::string sfx = ArtifactStager::suffix;
  st.add(write_array(st.dir() / "L_real", lr, sfx));
  st.add(write_array(st.dir() / "P", split.P, sfx));
  st.add(write_array(st.dir() / "Q", split.Q, sfx));
  write_periods_json(st.stage("periods.json"), split.periods);
  st.commit();
  std::string msg = "periods:";
  for (const auto& p : split.periods) msg += " " + std::to_string(p.period);
  log_line(g, split.periods.empty() ? "periods: none" : msg);
  return 0;
}

int cmd_register(const Globals& g, const fs::path& input, const std::optional<fs::path>& periodic,
                 const std::optional<fs::path>& aperiodic) {
  PipelineConfig c = resolve(g);
  RealSeries l = read_real_series(input);
  std::optional<RealSeries> p;
  if (periodic) {
    p = read_real_series(*periodic);
    require_same_shape(l, *p, "input vs periodic");
    l = l + *p;
  }
  std::optional<RealSeries> q;
  if (aperiodic) {
    q = read_real_series(*aperiodic);
    require_same_shape(l, *q, "input vs aperiodic");
  }
  const SeriesRegistration reg = register_series(l, c.registration, p ? &*p : nullptr);
  ArtifactStager st(c.out_dir);
  const std::string sfx = ArtifactStager::suffix;
  st.add(write_array(st.dir() / "L_reg", reg.registered, sfx));
  st.add(write_float32(st.dir() / "fields", {l.n1(), l.n2(), 2, l.frames()}, pack_fields(reg.fields), sfx));
  write_registration_csv(st.stage("registration.csv"), reg);
  if (q) st.add(write_array(st.dir() / "M_mc", recombine(reg.registered, *q), sfx));
  st.commit();
  log_line(g, "registered to frame " + std::to_string(reg.reference));
  return 0;
}

int cmd_pipeline(const Globals& g) {
  PipelineConfig c = resolve(g);
  const PipelineResult r = run_pipeline(c, [&](const std::string& s) { log_line(g, s); }, c.out_dir);
  const auto& m = r.metrics;
  std::ostringstream os;
  os << std::setprecision(4);
  if (m.rmse) os << "rmse(M_mc) " << *m.rmse << ", rmse(zero-filled) " << *m.rmse_zero_filled << '\n';
  if (m.residual_motion)
    os << "residual motion " << m.residual_motion->mean_px << " px (unregistered "
       << m.residual_motion_unregistered->mean_px << " px)\n";
  if (m.curve_rmse)
    os << "curve rmse " << *m.curve_rmse << " (unregistered " << *m.curve_rmse_unregistered << ", zero-filled "
       << *m.curve_rmse_zero_filled << ")\n";
  std::cout << os.str();
  if (!r.converged()) {
    std::cerr << "error: reconstruct stage did not converge (" << to_string(m.solver_status) << " after "
              << m.solver_iterations << " iterations, constraint violation " << m.constraint_violation << ")\n";
    return exit_code(ErrorKind::numerical);
  }
  return 0;
}

int cmd_eval(const Globals& g, const fs::path& series, const fs::path& reference, const std::optional<fs::path>& sectors,
             const std::optional<fs::path>& unregistered) {
  PipelineConfig c = resolve(g);
  // Headers of every input are checked before any payload is read.
  const bool complex_in = is_complex(series);
  const bool complex_ref = is_complex(reference);
  if (unregistered) read_header(*unregistered);
  if (sectors && !fs::exists(*sectors)) throw FormatError("cannot open " + sectors->string());

  nlohmann::json j;
  double err = 0.0;
  if (complex_in || complex_ref) {
    err = rmse(read_any_complex(series), read_any_complex(reference));
  } else {
    err = rmse(read_real_series(series), read_real_series(reference));
  }
  j["rmse"] = err;
  j["rmse_normalization"] = "sqrt(mean(|x - ref|^2)) / max(|ref|)";
  std::cout << std::setprecision(6) << "rmse " << err << '\n';

  ArtifactStager st(c.out_dir);
  if (sectors) {
    const SectorDefinition def = read_sectors_json(*sectors);
    auto curves_of = [&](const fs::path& p) {
      return is_complex(p) ? extract_curves(read_complex_series(p), def) : extract_curves(read_real_series(p), def);
    };
    const TimeIntensityCurves cx = curves_of(series);
    const TimeIntensityCurves cr = curves_of(reference);
    write_curves_csv(st.stage("curves.csv"), cx);
    j["curve_rmse"] = curve_rmse(cx, cr);
    std::cout << "curve rmse " << curve_rmse(cx, cr) << '\n';
    if (unregistered) {
      const double cu = curve_rmse(curves_of(*unregistered), cr);
      j["curve_rmse_unregistered"] = cu;
      std::cout << "curve rmse unregistered " << cu << '\n';
    }
  }
  commit_json(st, "metrics.json", j);
  st.commit();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Free-breathing myocardial perfusion motion correction"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Random seed (phantom noise and sampling mask)");
  app.add_option("--config", g.config, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--out-dir", g.out_dir, "Output directory");
  app.add_option("--preset", g.preset, "Scene and solver defaults")->check(CLI::IsMember({"desk", "paper"}));
  app.add_flag("-q,--quiet", g.quiet, "Suppress progress output");

  auto* phantom = app.add_subcommand("phantom", "Generate a phantom series with ground truth");

  auto* undersample = app.add_subcommand("undersample", "Undersample a series in k-space");
  fs::path us_input;
  undersample->add_option("--input", us_input, "Series (array base path)")->required();
  undersample->add_option("--rate", g.rate, "Acceleration rate (1, 2, 4, 8, 12)");

  auto* recon = app.add_subcommand("reconstruct", "Low-rank + sparse + noise reconstruction");
  fs::path rc_kspace, rc_mask;
  recon->add_option("--kspace", rc_kspace, "Undersampled k-space")->required();
  recon->add_option("--mask", rc_mask, "Sampling mask")->required();
  recon->add_option("--solver", g.solver, "gauss_seidel | jacobian | prox_jacobian | ls_baseline");

  auto* decompose = app.add_subcommand("decompose", "Split the sparse component into periodic and aperiodic parts");
  fs::path dc_l, dc_s;
  decompose->add_option("--low-rank", dc_l, "Low-rank component L")->required();
  decompose->add_option("--sparse", dc_s, "Sparse component S")->required();

  auto* reg = app.add_subcommand("register", "Demons registration of a real series");
  fs::path rg_input;
  std::optional<fs::path> rg_periodic, rg_aperiodic;
  reg->add_option("--input", rg_input, "Series to register (e.g. real L)")->required();
  reg->add_option("--periodic", rg_periodic, "Periodic part P, added to the input before registration");
  reg->add_option("--aperiodic", rg_aperiodic, "Aperiodic part Q, added after registration to form M_mc");

  auto* pipeline = app.add_subcommand("pipeline", "Run all stages and score against the phantom truth");
  pipeline->add_option("--rate", g.rate, "Acceleration rate (1, 2, 4, 8, 12)");
  pipeline->add_option("--solver", g.solver, "gauss_seidel | jacobian | prox_jacobian | ls_baseline");

  auto* eval = app.add_subcommand("eval", "RMSE and sector time-intensity curves");
  fs::path ev_series, ev_reference;
  std::optional<fs::path> ev_sectors, ev_unregistered;
  eval->add_option("--series", ev_series, "Series to score")->required();
  eval->add_option("--reference", ev_reference, "Reference series")->required();
  eval->add_option("--sectors", ev_sectors, "sectors.json");
  eval->add_option("--unregistered", ev_unregistered, "Unregistered series for a curve comparison");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : exit_code(ErrorKind::config);
  }

  try {
    if (*phantom) return cmd_phantom(g);
    if (*undersample) return cmd_undersample(g, us_input);
    if (*recon) return cmd_reconstruct(g, rc_kspace, rc_mask);
    if (*decompose) return cmd_decompose(g, dc_l, dc_s);
    if (*reg) return cmd_register(g, rg_input, rg_periodic, rg_aperiodic);
    if (*pipeline) return cmd_pipeline(g);
    if (*eval) return cmd_eval(g, ev_series, ev_reference, ev_sectors, ev_unregistered);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(ErrorKind::io);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
