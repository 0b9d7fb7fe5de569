#include "perfmc/pipeline.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "perfmc/array_io.hpp"
#include "perfmc/fourier.hpp"

namespace perfmc {

using nlohmann::json;
namespace fs = std::filesystem;

Preset parse_preset(std::string_view name) {
  if (name == "desk") return Preset::desk;
  if (name == "paper") return Preset::paper;
  throw ConfigError("unknown preset '" + std::string(name) + "' (expected desk or paper)");
}

std::string to_string(Preset p) { return p == Preset::desk ? "desk" : "paper"; }

void PeriodicityConfig::validate() const {
  if (m < 1) throw ConfigError("periodicity.m must be >= 1");
  if (!(min_energy_frac >= 0.0) || min_energy_frac >= 1.0)
    throw ConfigError("periodicity.min_energy_frac must lie in [0, 1)");
}

void PipelineConfig::validate() const {
  if (version != 1) throw ConfigError("unsupported config version " + std::to_string(version));
  if (rate != 1.0 && rate != 2.0 && rate != 4.0 && rate != 8.0 && rate != 12.0)
    throw ConfigError("rate must be one of 1, 2, 4, 8, 12");
  if (!input) phantom.validate();
  solver.validate();
  periodicity.validate();
  registration.validate();
  if (out_dir.empty()) throw ConfigError("out_dir must not be empty");
}

PipelineConfig default_pipeline_config(Preset preset) {
  PipelineConfig c;
  c.preset = preset;
  c.phantom = preset == Preset::desk ? PhantomSpec::desk() : PhantomSpec::paper();
  // Tuned on the desk phantom; beta trades early progress for a better tail at high rates.
  c.solver.lambda_l = 0.2;
  c.solver.lambda_s = 0.001;
  c.solver.mu = 1.0;
  c.solver.beta = 0.1;
  c.solver.max_iters = 2000;
  return c;
}

namespace {

// Object reader that remembers which keys were consumed so that leftovers can
// be reported.
class Section {
 public:
  Section(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(label() + ": expected an object");
  }

  template <typename T>
  bool get(const char* key, T& out) {
    const auto it = j_.find(key);
    if (it == j_.end()) return false;
    seen_.insert(key);
    try {
      out = it->get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(path(key) + ": " + e.what());
    }
    return true;
  }

  const json* raw(const char* key) {
    const auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    seen_.insert(key);
    return &*it;
  }

  std::string path(const char* key) const { return where_.empty() ? key : where_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.contains(key)) throw ConfigError("unknown config key '" + (where_.empty() ? key : where_ + "." + key) + "'");
  }

 private:
  std::string label() const { return where_.empty() ? "config" : where_; }
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

void read_ellipse(Section& parent, const char* key, Ellipse& e) {
  if (const json* j = parent.raw(key)) {
    Section s(*j, parent.path(key));
    s.get("center", e.center);
    s.get("semi_row", e.semi_row);
    s.get("semi_col", e.semi_col);
    s.finish();
  }
}

void read_bolus(Section& parent, const char* key, BolusCurve& b) {
  if (const json* j = parent.raw(key)) {
    Section s(*j, parent.path(key));
    s.get("baseline", b.baseline);
    s.get("amplitude", b.amplitude);
    s.get("arrival", b.arrival);
    s.get("shape_k", b.shape_k);
    s.get("scale_theta", b.scale_theta);
    s.finish();
  }
}

void read_phantom(Section& parent, PhantomSpec& p) {
  const json* j = parent.raw("phantom");
  if (!j) return;
  Section s(*j, "phantom");
  std::array<Index, 3> shape{p.shape.n1, p.shape.n2, p.shape.t};
  if (s.get("shape", shape)) p.shape = {shape[0], shape[1], shape[2]};
  s.get("pixel_mm", p.pixel_mm);
  s.get("slice_mm", p.slice_mm);
  s.get("body_intensity", p.body_intensity);
  s.get("supersample", p.supersample);
  if (const json* snr = s.raw("snr")) {
    if (snr->is_null()) {
      p.snr = std::numeric_limits<double>::infinity();
    } else if (snr->is_number()) {
      p.snr = snr->get<double>();
    } else {
      throw ConfigError("phantom.snr: expected a number or null");
    }
  }
  read_ellipse(s, "body", p.body);
  read_ellipse(s, "rv", p.rv);
  read_ellipse(s, "myocardium", p.myocardium);
  read_ellipse(s, "lv_pool", p.lv_pool);
  read_bolus(s, "rv_bolus", p.rv_bolus);
  read_bolus(s, "lv_bolus", p.lv_bolus);
  read_bolus(s, "myo_bolus", p.myo_bolus);
  if (const json* r = s.raw("respiration")) {
    Section rs(*r, "phantom.respiration");
    rs.get("amplitude_px", p.respiration.amplitude_px);
    rs.get("period_frames", p.respiration.period_frames);
    rs.get("axis", p.respiration.axis);
    rs.finish();
  }
  s.finish();
}

std::optional<fs::path> read_path(Section& s, const char* key, const fs::path& base_dir) {
  const json* j = s.raw(key);
  if (!j || j->is_null()) return std::nullopt;
  if (!j->is_string()) throw ConfigError(s.path(key) + ": expected a path string or null");
  fs::path p = j->get<std::string>();
  if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
  return p;
}

json ellipse_json(const Ellipse& e) { return {{"center", e.center}, {"semi_row", e.semi_row}, {"semi_col", e.semi_col}}; }

json bolus_json(const BolusCurve& b) {
  return {{"baseline", b.baseline},
          {"amplitude", b.amplitude},
          {"arrival", b.arrival},
          {"shape_k", b.shape_k},
          {"scale_theta", b.scale_theta}};
}

json optional_path(const std::optional<fs::path>& p) { return p ? json(p->string()) : json(nullptr); }

}  // namespace

PipelineConfig parse_pipeline_config(std::string_view json_text, PipelineConfig base, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  Section root(j, "");
  if (!root.get("version", base.version)) throw ConfigError("config: missing 'version'");
  if (base.version != 1) throw ConfigError("unsupported config version " + std::to_string(base.version));

  std::string preset;
  if (root.get("preset", preset)) {
    // Switching preset resets the preset-dependent defaults before the rest of the document applies.
    const Preset p = parse_preset(preset);
    if (p != base.preset) {
      const PipelineConfig d = default_pipeline_config(p);
      base.preset = p;
      base.phantom = d.phantom;
      base.solver = d.solver;
    }
  }
  root.get("seed", base.seed);
  root.get("rate", base.rate);
  if (const json* o = root.raw("out_dir")) {
    if (!o->is_string()) throw ConfigError("out_dir: expected a path string");
    base.out_dir = o->get<std::string>();
    if (base.out_dir.is_relative() && !base_dir.empty()) base.out_dir = base_dir / base.out_dir;
  }
  if (const json* in = root.raw("input")) {
    Section s(*in, "input");
    base.input = read_path(s, "series", base_dir);
    base.reference = read_path(s, "reference", base_dir);
    base.sectors = read_path(s, "sectors", base_dir);
    s.finish();
  }
  read_phantom(root, base.phantom);

  if (const json* sj = root.raw("solver")) {
    Section s(*sj, "solver");
    auto& c = base.solver;
    std::string variant;
    if (s.get("variant", variant)) c.variant = parse_solver_variant(variant);
    s.get("lambda_l", c.lambda_l);
    s.get("lambda_s", c.lambda_s);
    s.get("mu", c.mu);
    s.get("beta", c.beta);
    s.get("tau", c.tau);
    s.get("max_iters", c.max_iters);
    s.get("tol", c.tol);
    s.get("parallel_blocks", c.parallel_blocks);
    s.finish();
  }
  if (const json* pj = root.raw("periodicity")) {
    Section s(*pj, "periodicity");
    s.get("m", base.periodicity.m);
    s.get("min_energy_frac", base.periodicity.min_energy_frac);
    s.finish();
  }
  if (const json* rj = root.raw("registration")) {
    Section s(*rj, "registration");
    auto& c = base.registration;
    s.get("alpha", c.alpha);
    s.get("sigma_fluid", c.sigma_fluid);
    s.get("sigma_diffusion", c.sigma_diffusion);
    s.get("iters", c.iters);
    s.get("stop_delta", c.stop_delta);
    std::string strategy;
    if (s.get("reference_strategy", strategy)) c.reference_strategy = parse_reference_strategy(strategy);
    s.finish();
  }
  root.finish();
  return base;
}

PipelineConfig load_pipeline_config(const fs::path& path, PipelineConfig base) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_pipeline_config(ss.str(), std::move(base), path.parent_path());
}

std::string dump_pipeline_config(const PipelineConfig& c) {
  const auto& p = c.phantom;
  json j;
  j["version"] = c.version;
  j["preset"] = to_string(c.preset);
  j["seed"] = c.seed;
  j["rate"] = c.rate;
  j["out_dir"] = c.out_dir.string();
  j["input"] = {{"series", optional_path(c.input)},
                {"reference", optional_path(c.reference)},
                {"sectors", optional_path(c.sectors)}};
  j["phantom"] = {{"shape", {p.shape.n1, p.shape.n2, p.shape.t}},
                  {"pixel_mm", p.pixel_mm},
                  {"slice_mm", p.slice_mm},
                  {"body_intensity", p.body_intensity},
                  {"supersample", p.supersample},
                  {"snr", std::isfinite(p.snr) ? json(p.snr) : json(nullptr)},
                  {"body", ellipse_json(p.body)},
                  {"rv", ellipse_json(p.rv)},
                  {"myocardium", ellipse_json(p.myocardium)},
                  {"lv_pool", ellipse_json(p.lv_pool)},
                  {"rv_bolus", bolus_json(p.rv_bolus)},
                  {"lv_bolus", bolus_json(p.lv_bolus)},
                  {"myo_bolus", bolus_json(p.myo_bolus)},
                  {"respiration",
                   {{"amplitude_px", p.respiration.amplitude_px},
                    {"period_frames", p.respiration.period_frames},
                    {"axis", p.respiration.axis}}}};
  const auto& s = c.solver;
  j["solver"] = {{"variant", to_string(s.variant)}, {"lambda_l", s.lambda_l}, {"lambda_s", s.lambda_s},
                 {"mu", s.mu},  {"beta", s.beta},  {"tau", s.tau},
                 {"max_iters", s.max_iters}, {"tol", s.tol}, {"parallel_blocks", s.parallel_blocks}};
  j["periodicity"] = {{"m", c.periodicity.m}, {"min_energy_frac", c.periodicity.min_energy_frac}};
  const auto& r = c.registration;
  j["registration"] = {{"alpha", r.alpha},
                       {"sigma_fluid", r.sigma_fluid},
                       {"sigma_diffusion", r.sigma_diffusion},
                       {"iters", r.iters},
                       {"stop_delta", r.stop_delta},
                       {"reference_strategy", to_string(r.reference_strategy)}};
  return j.dump(2) + "\n";
}

ArtifactStager::ArtifactStager(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw FormatError("cannot create output directory " + dir_.string() + ": " + ec.message());
}

fs::path ArtifactStager::stage(const std::string& name) {
  fs::path p = dir_ / (name + suffix);
  staged_.push_back(p);
  return p;
}

void ArtifactStager::add(const std::vector<fs::path>& staged) { staged_.insert(staged_.end(), staged.begin(), staged.end()); }

void ArtifactStager::commit() {
  const std::string sfx = suffix;
  for (const auto& p : staged_) {
    std::string s = p.string();
    if (s.size() < sfx.size() || s.compare(s.size() - sfx.size(), sfx.size(), sfx) != 0)
      throw FormatError("staged artifact without suffix: " + s);
    std::error_code ec;
    fs::rename(p, s.substr(0, s.size() - sfx.size()), ec);
    if (ec) throw FormatError("cannot finalize " + s + ": " + ec.message());
  }
  staged_.clear();
}

namespace {

json residual_json(const std::optional<ResidualMotion>& r, bool max) {
  if (!r) return nullptr;
  return max ? r->max_px : r->mean_px;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// Static truth translated to the respiratory state of frame `ref`.
RealSeries truth_at_state(const PhantomTruth& truth, Index ref) {
  const Point d = truth.trajectory[static_cast<std::size_t>(ref)];
  RealSeries out(truth.static_clean.shape());
  DisplacementField u(out.n1(), out.n2());
  u.dy.setConstant(-d[0]);
  u.dx.setConstant(-d[1]);
  for (Index f = 0; f < out.frames(); ++f) set_frame(out, f, warp(frame_image(truth.static_clean, f), u));
  return out;
}

}  // namespace

void write_metrics_json(const fs::path& path, const PipelineMetrics& m) {
  json periods = json::array();
  for (const auto& p : m.periods)
    periods.push_back({{"period", p.period}, {"energy", p.energy}, {"energy_fraction", p.energy_fraction}});
  json j;
  j["rmse"] = optional_json(m.rmse);
  j["residual_motion_mean_px"] = residual_json(m.residual_motion, false);
  j["residual_motion_max_px"] = residual_json(m.residual_motion, true);
  j["rate"] = m.rate;
  j["solver_variant"] = to_string(m.solver_variant);
  j["rmse_normalization"] = "sqrt(mean(|x - ref|^2)) / max(|ref|)";
  j["rmse_reference"] =
      "rmse, rmse_zero_filled: motion-free truth at the respiratory state of the reference frame; "
      "rmse_reconstruction, rmse_reconstruction_zero_filled: truth with motion";
  j["achieved_rate"] = m.achieved_rate;
  j["solver_status"] = to_string(m.solver_status);
  j["solver_iterations"] = m.solver_iterations;
  j["constraint_violation"] = m.constraint_violation;
  j["converged"] = m.solver_status == SolverStatus::converged;
  j["reference_frame"] = m.reference_frame;
  j["periods"] = periods;
  j["rmse_zero_filled"] = optional_json(m.rmse_zero_filled);
  j["rmse_reconstruction"] = optional_json(m.rmse_reconstruction);
  j["rmse_reconstruction_zero_filled"] = optional_json(m.rmse_reconstruction_zero_filled);
  j["residual_motion_unregistered_mean_px"] = residual_json(m.residual_motion_unregistered, false);
  j["residual_motion_unregistered_max_px"] = residual_json(m.residual_motion_unregistered, true);
  j["curve_rmse"] = optional_json(m.curve_rmse);
  j["curve_rmse_unregistered"] = optional_json(m.curve_rmse_unregistered);
  j["curve_rmse_zero_filled"] = optional_json(m.curve_rmse_zero_filled);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

PipelineResult run_pipeline(const PipelineConfig& cfg, const LogFn& log, const std::optional<fs::path>& out_dir) {
  cfg.validate();
  std::optional<ArtifactStager> st;
  if (out_dir) st.emplace(*out_dir);
  const std::string sfx = ArtifactStager::suffix;

  auto stage = [&](const char* name, auto&& body) {
    if (log) log(std::string("stage ") + name);
    try {
      body();
    } catch (const Error& e) {
      throw Error(e.kind(), std::string(name) + " stage failed: " + e.what());
    } catch (const std::bad_alloc&) {
      throw Error(ErrorKind::numerical, std::string(name) + " stage failed: out of memory");
    }
  };
  auto save = [&](const std::string& name, const auto& value) {
    if (st) st->add(write_array(st->dir() / name, value, sfx));
  };

  PipelineResult r;
  ComplexSeries full;
  std::optional<ComplexSeries> reference;
  std::optional<SectorDefinition> sectors;

  if (st) {
    std::ofstream(st->stage("config.json")) << dump_pipeline_config(cfg);
  }

  stage("input", [&] {
    if (cfg.input) {
      full = read_complex_series(*cfg.input);
      validate_series(full, "input series");
      if (cfg.reference) {
        reference = read_complex_series(*cfg.reference);
        require_same_shape(full, *reference, "input vs reference");
      }
    } else {
      PhantomSpec spec = cfg.phantom;
      spec.seed = cfg.seed;
      r.phantom = generate_phantom(spec);
      full = r.phantom->noisy;
      reference = r.phantom->truth.clean;
      sectors = r.phantom->truth.sectors;
      save("phantom", full);
      save("truth_clean", r.phantom->truth.clean);
      save("truth_static", r.phantom->truth.static_clean);
      if (st) write_truth_json(st->stage("truth.json"), spec, r.phantom->truth);
    }
    if (cfg.sectors) sectors = read_sectors_json(*cfg.sectors);
  });

  stage("undersample", [&] {
    // Mask randomness is decorrelated from the phantom noise stream.
    r.data = undersample_phantom(full, cfg.rate, cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    r.zero_filled = adjoint_undersample(r.data);
    save("kspace", r.data.samples);
    save("mask", r.data.mask);
    save("zero_filled", r.zero_filled);
  });

  stage("reconstruct", [&] {
    r.decomposition = reconstruct(r.data, cfg.solver);
    save("L", r.decomposition.L);
    save("S", r.decomposition.S);
    save("Z", r.decomposition.Z);
    if (st) write_history_csv(st->stage("history.csv"), r.decomposition.history);
    if (log)
      log("  " + to_string(r.decomposition.variant) + ": " + to_string(r.decomposition.status) + " after " +
          std::to_string(r.decomposition.iterations()) + " iterations");
  });

  stage("decompose", [&] {
    const auto phase = pixel_phase(r.decomposition.reconstruction());
    r.low_rank = demodulate(r.decomposition.L, phase);
    r.sparse = demodulate(r.decomposition.S, phase);
    r.split = split_sparse_component(r.sparse, cfg.periodicity.m, cfg.periodicity.min_energy_frac);
    save("P", r.split.P);
    save("Q", r.split.Q);
    if (st) write_periods_json(st->stage("periods.json"), r.split.periods);
    if (log) {
      std::string msg = "  periods:";
      for (const auto& p : r.split.periods) msg += " " + std::to_string(p.period);
      log(r.split.periods.empty() ? "  periods: none" : msg);
    }
  });

  stage("register", [&] {
    const RealSeries l_p = r.low_rank + r.split.P;
    // The reference is picked on the dominant period alone; later picks tend to absorb bolus shape.
    std::optional<RealSeries> dominant;
    if (!r.split.periods.empty()) dominant = periodic_component(r.sparse, r.split.periods.front().period);
    r.registration = register_series(l_p, cfg.registration, dominant ? &*dominant : nullptr);
    save("L_reg", r.registration.registered);
    if (st) {
      const auto packed = pack_fields(r.registration.fields);
      const Shape s = l_p.shape();
      st->add(write_float32(st->dir() / "fields", {s.n1, s.n2, 2, s.t}, packed, sfx));
      write_registration_csv(st->stage("registration.csv"), r.registration);
    }
  });

  stage("recombine", [&] {
    r.m_mc = recombine(r.registration.registered, r.split.Q);
    save("M_mc", r.m_mc);
  });

  stage("evaluate", [&] {
    auto& m = r.metrics;
    m.rate = cfg.rate;
    m.achieved_rate = r.data.mask.achieved_rate();
    m.solver_variant = r.decomposition.variant;
    m.solver_status = r.decomposition.status;
    m.solver_iterations = r.decomposition.iterations();
    if (!r.decomposition.history.empty()) m.constraint_violation = r.decomposition.history.back().constraint_violation;
    m.periods = r.split.periods;
    m.reference_frame = r.registration.reference;

    const ComplexSeries recon = r.decomposition.reconstruction();
    const RealSeries unregistered = r.low_rank + r.sparse;
    std::optional<RealSeries> motion_free;
    if (r.phantom) motion_free = truth_at_state(r.phantom->truth, m.reference_frame);
    else if (reference) motion_free = magnitude(*reference);

    if (reference) {
      m.rmse = rmse(r.m_mc, *motion_free);
      m.rmse_zero_filled = rmse(r.zero_filled, to_complex(*motion_free));
      m.rmse_reconstruction = rmse(recon, *reference);
      m.rmse_reconstruction_zero_filled = rmse(r.zero_filled, *reference);
    }
    if (r.phantom) {
      const MotionRoi roi = cfg.phantom.lv_roi();
      m.residual_motion = residual_motion(r.m_mc, roi, m.reference_frame);
      m.residual_motion_unregistered = residual_motion(unregistered, roi, m.reference_frame);
    }
    if (sectors) {
      r.curves = extract_curves(r.m_mc, *sectors);
      if (st) write_curves_csv(st->stage("curves.csv"), *r.curves);
      std::optional<TimeIntensityCurves> ref_curves;
      if (r.phantom) ref_curves = r.phantom->truth.sector_curves;
      else if (reference) ref_curves = extract_curves(*reference, *sectors);
      if (ref_curves) {
        m.curve_rmse = curve_rmse(*r.curves, *ref_curves);
        m.curve_rmse_unregistered = curve_rmse(extract_curves(unregistered, *sectors), *ref_curves);
        m.curve_rmse_zero_filled = curve_rmse(extract_curves(r.zero_filled, *sectors), *ref_curves);
      }
    }
    if (st) write_metrics_json(st->stage("metrics.json"), m);
  });

  if (st) st->commit();
  return r;
}

}  // namespace perfmc
