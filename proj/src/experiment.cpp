#include "ioncrystal/experiment.hpp"

#include "ioncrystal/random.hpp"

#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

namespace ioncrystal {

using nlohmann::json;

namespace {

// Reads one JSON object, rejecting keys outside `allowed`.
class Section {
public:
  Section(const json &j, std::string path,
          std::initializer_list<const char *> allowed)
      : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) {
      throw ConfigError(where() + " must be an object");
    }
    const std::set<std::string> keys(allowed.begin(), allowed.end());
    for (const auto &item : j_.items()) {
      if (!keys.count(item.key())) {
        throw ConfigError("unknown key '" + join(item.key()) + "'");
      }
    }
  }

  bool has(const char *key) const { return j_.contains(key); }
  const json &at(const char *key) const { return j_.at(key); }
  std::string join(const std::string &key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void number(const char *key, double &out) const {
    if (!has(key)) {
      return;
    }
    const json &v = j_.at(key);
    if (!v.is_number()) {
      throw ConfigError(join(key) + " must be a number");
    }
    out = v.get<double>();
  }

  void boolean(const char *key, bool &out) const {
    if (!has(key)) {
      return;
    }
    const json &v = j_.at(key);
    if (!v.is_boolean()) {
      throw ConfigError(join(key) + " must be true or false");
    }
    out = v.get<bool>();
  }

  template <class Int> void integer(const char *key, Int &out) const {
    if (!has(key)) {
      return;
    }
    out = as_integer<Int>(j_.at(key), join(key));
  }

  template <class Int>
  static Int as_integer(const json &v, const std::string &name) {
    if (v.is_number_unsigned()) {
      return static_cast<Int>(v.get<std::uint64_t>());
    }
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
      return static_cast<Int>(v.get<std::int64_t>());
    }
    throw ConfigError(name + " must be a non-negative integer");
  }

  std::string text(const char *key) const {
    const json &v = j_.at(key);
    if (!v.is_string()) {
      throw ConfigError(join(key) + " must be a string");
    }
    return v.get<std::string>();
  }

private:
  std::string where() const { return path_.empty() ? "config" : path_; }

  const json &j_;
  std::string path_;
};

Eigen::Vector3d read_vector(const json &v, const std::string &name) {
  if (!v.is_array() || v.size() != 3) {
    throw ConfigError(name + " must be an array of 3 numbers");
  }
  Eigen::Vector3d out;
  for (int k = 0; k < 3; ++k) {
    if (!v[static_cast<std::size_t>(k)].is_number()) {
      throw ConfigError(name + " must be an array of 3 numbers");
    }
    out[k] = v[static_cast<std::size_t>(k)].get<double>();
  }
  return out;
}

json write_vector(const Eigen::Vector3d &v) { return {v.x(), v.y(), v.z()}; }

const char *preset_name(BeamPreset p) {
  switch (p) {
  case BeamPreset::Nist:
    return "nist";
  case BeamPreset::NistAxial:
    return "nist-axial";
  case BeamPreset::NistPlanar:
    return "nist-planar";
  case BeamPreset::Custom:
    break;
  }
  return "custom";
}

BeamPreset parse_preset(const std::string &name) {
  if (name == "nist") {
    return BeamPreset::Nist;
  }
  if (name == "nist-axial") {
    return BeamPreset::NistAxial;
  }
  if (name == "nist-planar") {
    return BeamPreset::NistPlanar;
  }
  throw ConfigError("cooling.beams: unknown preset '" + name +
                    "' (nist, nist-axial, nist-planar or a list of beams)");
}

json beam_to_json(const LaserBeam &b) {
  json j = {{"direction", write_vector(b.direction)},
            {"detuning_hz", b.detuning / constants::two_pi},
            {"saturation", b.peak_saturation},
            {"profile",
             b.profile == BeamProfile::Gaussian ? "gaussian" : "uniform"}};
  if (b.profile == BeamProfile::Gaussian) {
    j["waist_m"] = b.waist;
    j["offset_axis"] = write_vector(b.offset_axis);
    j["offset_m"] = b.offset;
  }
  return j;
}

LaserBeam beam_from_json(const json &j, const std::string &path) {
  const Section s(j, path,
                  {"direction", "detuning_hz", "saturation", "profile",
                   "waist_m", "offset_axis", "offset_m"});
  LaserBeam b;
  if (!s.has("direction")) {
    throw ConfigError(s.join("direction") + " is required");
  }
  b.direction = read_vector(s.at("direction"), s.join("direction"));
  double detuning_hz = 0.0;
  s.number("detuning_hz", detuning_hz);
  b.detuning = constants::two_pi * detuning_hz;
  s.number("saturation", b.peak_saturation);
  if (s.has("profile")) {
    const std::string p = s.text("profile");
    if (p == "gaussian") {
      b.profile = BeamProfile::Gaussian;
    } else if (p != "uniform") {
      throw ConfigError(s.join("profile") + " must be 'uniform' or 'gaussian'");
    }
  }
  s.number("waist_m", b.waist);
  if (s.has("offset_axis")) {
    b.offset_axis = read_vector(s.at("offset_axis"), s.join("offset_axis"));
  }
  s.number("offset_m", b.offset);
  return b;
}

std::vector<double> linspace(double start, double stop, std::size_t count) {
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = count == 1 ? start
                        : start + (stop - start) * static_cast<double>(i) /
                                      static_cast<double>(count - 1);
  }
  return out;
}

void set_path(json &patch, const std::string &path, json value) {
  json *node = &patch;
  std::size_t begin = 0;
  while (true) {
    const std::size_t dot = path.find('.', begin);
    const std::string key = path.substr(begin, dot - begin);
    if (key.empty()) {
      throw ConfigError("malformed override key '" + path + "'");
    }
    if (dot == std::string::npos) {
      (*node)[key] = std::move(value);
      return;
    }
    json &child = (*node)[key];
    if (!child.is_object()) {
      child = json::object();
    }
    node = &child;
    begin = dot + 1;
  }
}

json parse_override_value(const std::string &text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error &) {
    return text;
  }
}

} // namespace

SpeciesParams ExperimentConfig::species_params() const {
  SpeciesParams s;
  s.mass = species.mass_amu * constants::atomic_mass_unit;
  s.charge = species.charge_e * constants::elementary_charge;
  s.transition_wavelength = species.wavelength_m;
  s.natural_linewidth = constants::two_pi * species.linewidth_hz;
  return s;
}

TrapParams ExperimentConfig::trap_params() const {
  return trap_params(trap.wall_frequency_hz);
}

TrapParams ExperimentConfig::trap_params(double wall_frequency_hz) const {
  TrapParams t;
  t.b_field = trap.b_field_t;
  t.omega_z = constants::two_pi * trap.axial_frequency_hz;
  return with_wall_frequency(t, species_params(),
                             constants::two_pi * wall_frequency_hz,
                             trap.delta_over_beta);
}

CoolingConfig ExperimentConfig::cooling_config(std::uint64_t rng_seed) const {
  const SpeciesParams sp = species_params();
  CoolingConfig cc;
  if (cooling.preset == BeamPreset::Custom) {
    cc.beams = cooling.beams;
    for (auto &b : cc.beams) {
      b.wavevector = sp.wavevector();
    }
    cc.rng_seed = rng_seed;
  } else {
    cc = nist_beam_set(sp, rng_seed);
    if (cooling.preset == BeamPreset::NistAxial) {
      cc.beams.erase(cc.beams.begin());
    } else if (cooling.preset == BeamPreset::NistPlanar) {
      cc.beams.resize(1);
    }
  }
  cc.max_step_probability = cooling.max_step_probability;
  return cc;
}

void ExperimentConfig::validate() const {
  if (n_ions == 0) {
    throw ConfigError("n_ions must be at least 1");
  }
  const SpeciesParams sp = species_params();
  sp.validate();
  if (!(trap.axial_frequency_hz > 0.0) || !(trap.b_field_t > 0.0)) {
    throw ConfigError("trap needs b_field_t > 0 and axial_frequency_hz > 0");
  }
  const auto check_trap = [&](double f) {
    trap_params(f).validate(sp);
  };
  if (scan) {
    if (scan->wall_frequencies_hz.empty()) {
      throw ConfigError("scan needs at least one wall frequency");
    }
    if (!scan->overrides.empty() &&
        scan->overrides.size() != scan->wall_frequencies_hz.size()) {
      throw ConfigError("scan.overrides must be empty or have one entry per "
                        "wall frequency");
    }
    for (const auto &o : scan->overrides) {
      if (!o.is_object() && !o.is_null()) {
        throw ConfigError("scan.overrides entries must be objects");
      }
      if (o.is_object() && o.contains("scan")) {
        throw ConfigError("scan.overrides entries may not contain 'scan'");
      }
    }
    for (double f : scan->wall_frequencies_hz) {
      check_trap(f);
    }
  } else {
    check_trap(trap.wall_frequency_hz);
  }
  if (equilibrium.seeds.empty() || equilibrium.max_iter <= 0 ||
      !(equilibrium.tol > 0.0) || !(equilibrium.planarity_tol > 0.0)) {
    throw ConfigError("equilibrium needs seeds, max_iter > 0, tol > 0 and "
                      "planarity_tol > 0");
  }
  if (!(run.dt_s > 0.0) || !(run.t_final_s >= 0.0) ||
      !(run.sample_interval_s >= run.dt_s)) {
    throw ConfigError("run needs dt_s > 0, t_final_s >= 0 and "
                      "sample_interval_s >= dt_s");
  }
  const auto &it = run.initial;
  if (!(it.drumhead_mk >= 0.0) || !(it.exb_mk >= 0.0) ||
      !(it.cyclotron_mk >= 0.0) || !(it.floor_mk >= 0.0)) {
    throw ConfigError("initial temperatures must be >= 0");
  }
  if (!(run.mode_sanity_bound_k > 0.0) ||
      !(run.reconfiguration_persistence_s >= 0.0) ||
      !(run.summary_window_s > 0.0)) {
    throw ConfigError("run needs mode_sanity_bound_k > 0, "
                      "reconfiguration_persistence_s >= 0 and "
                      "summary_window_s > 0");
  }
  if (cooling.enabled || spectrum.lasers_on) {
    cooling_config(0).validate();
  }
  if (spectrum.enabled) {
    if (!(spectrum.duration_s > 0.0) ||
        !(spectrum.sample_dt_s >= run.dt_s) || spectrum.segments == 0 ||
        !(spectrum.max_resolution_hz > 0.0) ||
        !(spectrum.peak_halfwidth_hz > 0.0) ||
        !(spectrum.peak_threshold > 0.0)) {
      throw ConfigError("spectrum needs duration_s > 0, sample_dt_s >= dt_s, "
                        "segments >= 1 and positive peak settings");
    }
  }
  if (outputs.trajectory && !(outputs.trajectory_interval_s >= run.dt_s)) {
    throw ConfigError("outputs.trajectory_interval_s must be >= run.dt_s");
  }
}

RunSeeds RunSeeds::from(std::uint64_t run_seed) {
  return {run_seed, derive_seed(run_seed, 1), derive_seed(run_seed, 2)};
}

std::uint64_t scan_point_seed(std::uint64_t parent, std::size_t index) {
  return derive_seed(parent, 1000 + index);
}

json to_json(const ExperimentConfig &c) {
  json j;
  j["recipe"] = c.recipe;
  j["n_ions"] = c.n_ions;
  j["species"] = {{"mass_amu", c.species.mass_amu},
                  {"charge_e", c.species.charge_e},
                  {"wavelength_m", c.species.wavelength_m},
                  {"linewidth_hz", c.species.linewidth_hz}};
  j["trap"] = {{"b_field_t", c.trap.b_field_t},
               {"axial_frequency_hz", c.trap.axial_frequency_hz},
               {"wall_frequency_hz", c.trap.wall_frequency_hz},
               {"delta_over_beta", c.trap.delta_over_beta}};
  j["equilibrium"] = {{"seeds", c.equilibrium.seeds},
                      {"max_iter", c.equilibrium.max_iter},
                      {"tol", c.equilibrium.tol},
                      {"planarity_tol", c.equilibrium.planarity_tol}};
  const auto &r = c.run;
  j["run"] = {
      {"coulomb", r.coulomb == CoulombMode::Full ? "full" : "linearized"},
      {"dt_s", r.dt_s},
      {"t_final_s", r.t_final_s},
      {"sample_interval_s", r.sample_interval_s},
      {"seed", r.seed},
      {"initial",
       {{"drumhead_mk", r.initial.drumhead_mk},
        {"exb_mk", r.initial.exb_mk},
        {"cyclotron_mk", r.initial.cyclotron_mk},
        {"floor_mk", r.initial.floor_mk}}},
      {"mode_sanity_bound_k", r.mode_sanity_bound_k},
      {"reconfiguration_persistence_s", r.reconfiguration_persistence_s},
      {"summary_window_s", r.summary_window_s}};
  json beams;
  if (c.cooling.preset == BeamPreset::Custom) {
    beams = json::array();
    for (const auto &b : c.cooling.beams) {
      beams.push_back(beam_to_json(b));
    }
  } else {
    beams = preset_name(c.cooling.preset);
  }
  j["cooling"] = {{"enabled", c.cooling.enabled},
                  {"beams", beams},
                  {"max_step_probability", c.cooling.max_step_probability}};
  if (c.scan) {
    j["scan"] = {{"wall_frequencies_hz", c.scan->wall_frequencies_hz}};
    if (!c.scan->overrides.empty()) {
      j["scan"]["overrides"] = c.scan->overrides;
    }
  } else {
    j["scan"] = nullptr;
  }
  const auto &s = c.spectrum;
  j["spectrum"] = {{"enabled", s.enabled},
                   {"duration_s", s.duration_s},
                   {"sample_dt_s", s.sample_dt_s},
                   {"segments", s.segments},
                   {"lasers_on", s.lasers_on},
                   {"max_resolution_hz", s.max_resolution_hz},
                   {"peak_halfwidth_hz", s.peak_halfwidth_hz},
                   {"peak_threshold", s.peak_threshold},
                   {"predicted_count", s.predicted_count}};
  j["outputs"] = {{"trajectory", c.outputs.trajectory},
                  {"trajectory_interval_s", c.outputs.trajectory_interval_s},
                  {"eigenvectors", c.outputs.eigenvectors},
                  {"diagnostics_per_point", c.outputs.diagnostics_per_point}};
  return j;
}

ExperimentConfig from_json(const json &j) {
  ExperimentConfig c;
  const Section top(j, "",
                    {"recipe", "n_ions", "species", "trap", "equilibrium",
                     "run", "cooling", "scan", "spectrum", "outputs"});
  if (top.has("recipe")) {
    c.recipe = top.text("recipe");
  }
  top.integer("n_ions", c.n_ions);

  if (top.has("species")) {
    const Section s(top.at("species"), "species",
                    {"mass_amu", "charge_e", "wavelength_m", "linewidth_hz"});
    s.number("mass_amu", c.species.mass_amu);
    s.number("charge_e", c.species.charge_e);
    s.number("wavelength_m", c.species.wavelength_m);
    s.number("linewidth_hz", c.species.linewidth_hz);
  }
  if (top.has("trap")) {
    const Section s(top.at("trap"), "trap",
                    {"b_field_t", "axial_frequency_hz", "wall_frequency_hz",
                     "delta_over_beta"});
    s.number("b_field_t", c.trap.b_field_t);
    s.number("axial_frequency_hz", c.trap.axial_frequency_hz);
    s.number("wall_frequency_hz", c.trap.wall_frequency_hz);
    s.number("delta_over_beta", c.trap.delta_over_beta);
  }
  if (top.has("equilibrium")) {
    const Section s(top.at("equilibrium"), "equilibrium",
                    {"seeds", "max_iter", "tol", "planarity_tol"});
    if (s.has("seeds")) {
      const json &seeds = s.at("seeds");
      if (!seeds.is_array()) {
        throw ConfigError("equilibrium.seeds must be an array");
      }
      c.equilibrium.seeds.clear();
      for (const auto &v : seeds) {
        c.equilibrium.seeds.push_back(
            Section::as_integer<std::uint64_t>(v, "equilibrium.seeds"));
      }
    }
    s.integer("max_iter", c.equilibrium.max_iter);
    s.number("tol", c.equilibrium.tol);
    s.number("planarity_tol", c.equilibrium.planarity_tol);
  }
  if (top.has("run")) {
    const Section s(top.at("run"), "run",
                    {"coulomb", "dt_s", "t_final_s", "sample_interval_s",
                     "seed", "initial", "mode_sanity_bound_k",
                     "reconfiguration_persistence_s", "summary_window_s"});
    if (s.has("coulomb")) {
      const std::string mode = s.text("coulomb");
      if (mode == "full") {
        c.run.coulomb = CoulombMode::Full;
      } else if (mode == "linearized") {
        c.run.coulomb = CoulombMode::Linearized;
      } else {
        throw ConfigError("run.coulomb must be 'full' or 'linearized'");
      }
    }
    s.number("dt_s", c.run.dt_s);
    s.number("t_final_s", c.run.t_final_s);
    s.number("sample_interval_s", c.run.sample_interval_s);
    s.integer("seed", c.run.seed);
    if (s.has("initial")) {
      const Section i(s.at("initial"), "run.initial",
                      {"drumhead_mk", "exb_mk", "cyclotron_mk", "floor_mk"});
      i.number("drumhead_mk", c.run.initial.drumhead_mk);
      i.number("exb_mk", c.run.initial.exb_mk);
      i.number("cyclotron_mk", c.run.initial.cyclotron_mk);
      i.number("floor_mk", c.run.initial.floor_mk);
    }
    s.number("mode_sanity_bound_k", c.run.mode_sanity_bound_k);
    s.number("reconfiguration_persistence_s",
             c.run.reconfiguration_persistence_s);
    s.number("summary_window_s", c.run.summary_window_s);
  }
  if (top.has("cooling")) {
    const Section s(top.at("cooling"), "cooling",
                    {"enabled", "beams", "max_step_probability"});
    s.boolean("enabled", c.cooling.enabled);
    s.number("max_step_probability", c.cooling.max_step_probability);
    if (s.has("beams")) {
      const json &b = s.at("beams");
      if (b.is_string()) {
        c.cooling.preset = parse_preset(b.get<std::string>());
      } else if (b.is_array()) {
        c.cooling.preset = BeamPreset::Custom;
        for (std::size_t k = 0; k < b.size(); ++k) {
          c.cooling.beams.push_back(
              beam_from_json(b[k], "cooling.beams[" + std::to_string(k) + "]"));
        }
      } else {
        throw ConfigError("cooling.beams must be a preset name or a list");
      }
    }
  }
  if (top.has("scan") && !top.at("scan").is_null()) {
    const Section s(top.at("scan"), "scan",
                    {"wall_frequencies_hz", "start_hz", "stop_hz", "count",
                     "overrides"});
    ScanSettings scan;
    const bool listed = s.has("wall_frequencies_hz");
    const bool ranged = s.has("start_hz") || s.has("stop_hz") ||
                        s.has("count");
    if (listed == ranged) {
      throw ConfigError("scan needs either wall_frequencies_hz or "
                        "start_hz/stop_hz/count");
    }
    if (listed) {
      const json &list = s.at("wall_frequencies_hz");
      if (!list.is_array()) {
        throw ConfigError("scan.wall_frequencies_hz must be an array");
      }
      for (const auto &v : list) {
        if (!v.is_number()) {
          throw ConfigError("scan.wall_frequencies_hz must hold numbers");
        }
        scan.wall_frequencies_hz.push_back(v.get<double>());
      }
    } else {
      if (!s.has("start_hz") || !s.has("stop_hz") || !s.has("count")) {
        throw ConfigError("scan range needs start_hz, stop_hz and count");
      }
      double start = 0.0;
      double stop = 0.0;
      std::size_t count = 0;
      s.number("start_hz", start);
      s.number("stop_hz", stop);
      s.integer("count", count);
      scan.wall_frequencies_hz = linspace(start, stop, count);
    }
    if (s.has("overrides")) {
      const json &o = s.at("overrides");
      if (!o.is_array()) {
        throw ConfigError("scan.overrides must be an array");
      }
      scan.overrides.assign(o.begin(), o.end());
    }
    c.scan = std::move(scan);
  }
  if (top.has("spectrum")) {
    const Section s(top.at("spectrum"), "spectrum",
                    {"enabled", "duration_s", "sample_dt_s", "segments",
                     "lasers_on", "max_resolution_hz", "peak_halfwidth_hz",
                     "peak_threshold", "predicted_count"});
    s.boolean("enabled", c.spectrum.enabled);
    s.number("duration_s", c.spectrum.duration_s);
    s.number("sample_dt_s", c.spectrum.sample_dt_s);
    s.integer("segments", c.spectrum.segments);
    s.boolean("lasers_on", c.spectrum.lasers_on);
    s.number("max_resolution_hz", c.spectrum.max_resolution_hz);
    s.number("peak_halfwidth_hz", c.spectrum.peak_halfwidth_hz);
    s.number("peak_threshold", c.spectrum.peak_threshold);
    s.integer("predicted_count", c.spectrum.predicted_count);
  }
  if (top.has("outputs")) {
    const Section s(top.at("outputs"), "outputs",
                    {"trajectory", "trajectory_interval_s", "eigenvectors",
                     "diagnostics_per_point"});
    s.boolean("trajectory", c.outputs.trajectory);
    s.number("trajectory_interval_s", c.outputs.trajectory_interval_s);
    s.boolean("eigenvectors", c.outputs.eigenvectors);
    s.boolean("diagnostics_per_point", c.outputs.diagnostics_per_point);
  }
  c.validate();
  return c;
}

namespace {

json cooled_all(double wall_hz) {
  return {{"n_ions", 54},
          {"trap", {{"wall_frequency_hz", wall_hz}}},
          {"run",
           {{"t_final_s", 10e-3},
            {"initial",
             {{"drumhead_mk", 10.0}, {"exb_mk", 10.0}, {"cyclotron_mk", 10.0}}}}},
          {"cooling", {{"enabled", true}, {"beams", "nist"}}},
          {"spectrum", {{"enabled", true}}}};
}

json exb_quench(const char *coulomb, bool cooled) {
  return {{"n_ions", 54},
          {"trap", {{"wall_frequency_hz", 204e3}}},
          {"run",
           {{"coulomb", coulomb},
            {"t_final_s", 10e-3},
            {"initial",
             {{"drumhead_mk", 0.0}, {"exb_mk", 10.0}, {"cyclotron_mk", 1.0}}}}},
          {"cooling", {{"enabled", cooled}, {"beams", "nist"}}}};
}

const std::vector<double> &quick_scan() {
  static const std::vector<double> points{180e3, 185e3, 189e3, 192e3, 193e3};
  return points;
}

json wall_scan(const char *coulomb, bool cooled, double t_exb_only_mk,
               bool quick) {
  json initial = cooled ? json{{"drumhead_mk", 10.0},
                               {"exb_mk", 10.0},
                               {"cyclotron_mk", 10.0}}
                        : json{{"drumhead_mk", 0.0},
                               {"exb_mk", t_exb_only_mk},
                               {"cyclotron_mk", 0.0}};
  json scan = quick ? json{{"wall_frequencies_hz", quick_scan()}}
                    : json{{"start_hz", 180e3}, {"stop_hz", 193e3}, {"count", 15}};
  return {{"n_ions", 100},
          {"run",
           {{"coulomb", coulomb}, {"t_final_s", 10e-3}, {"initial", initial}}},
          {"cooling", {{"enabled", cooled}, {"beams", "nist"}}},
          {"scan", scan}};
}

} // namespace

std::vector<std::string> recipe_names() {
  return {"fig2c",        "fig2d",
          "fig3a",        "fig3b",
          "fig3c",        "fig3d",
          "fig4b",        "fig4b-quick",
          "fig4b-linearized", "fig4b-linearized-quick",
          "fig4c",        "fig4c-quick",
          "sm-long",      "single-ion",
          "doppler"};
}

json recipe_patch(const std::string &name) {
  json p;
  if (name == "fig2c") {
    p = cooled_all(180e3);
  } else if (name == "fig2d") {
    p = cooled_all(204e3);
  } else if (name == "fig3a") {
    p = exb_quench("linearized", false);
  } else if (name == "fig3b") {
    p = exb_quench("full", false);
  } else if (name == "fig3c") {
    p = exb_quench("linearized", true);
  } else if (name == "fig3d") {
    p = exb_quench("full", true);
  } else if (name == "fig4b" || name == "fig4b-quick") {
    p = wall_scan("full", false, 10.0, name.ends_with("quick"));
  } else if (name == "fig4b-linearized" || name == "fig4b-linearized-quick") {
    p = wall_scan("linearized", false, 10.0, name.ends_with("quick"));
  } else if (name == "fig4c" || name == "fig4c-quick") {
    p = wall_scan("full", true, 10.0, name.ends_with("quick"));
  } else if (name == "sm-long") {
    p = cooled_all(180e3);
    p["run"]["t_final_s"] = 200e-3;
    p["run"]["sample_interval_s"] = 1e-5;
    p["spectrum"]["enabled"] = false;
    p["scan"] = {{"wall_frequencies_hz", {180e3, 204e3}}};
    p["outputs"] = {{"diagnostics_per_point", true}};
  } else if (name == "single-ion") {
    p = {{"n_ions", 1},
         {"trap", {{"delta_over_beta", 0.0}}},
         {"run",
          {{"t_final_s", 100e-6},
           {"sample_interval_s", 1e-7},
           {"initial",
            {{"drumhead_mk", 10.0}, {"exb_mk", 10.0}, {"cyclotron_mk", 10.0}}}}},
         {"outputs", {{"trajectory", true}, {"trajectory_interval_s", 2e-8}}}};
  } else if (name == "doppler") {
    p = {{"n_ions", 1},
         {"run", {{"t_final_s", 5e-3}}},
         {"cooling", {{"enabled", true}, {"beams", "nist-axial"}}}};
  } else {
    std::ostringstream msg;
    msg << "unknown recipe '" << name << "'; available:";
    for (const auto &r : recipe_names()) {
      msg << ' ' << r;
    }
    throw ConfigError(msg.str());
  }
  p["recipe"] = name;
  return p;
}

ExperimentConfig resolve_experiment(const std::string &recipe,
                                    const json &patch,
                                    const std::vector<KeyOverride> &overrides) {
  json j = to_json(ExperimentConfig{});
  if (!recipe.empty()) {
    j.merge_patch(recipe_patch(recipe));
  }
  if (!patch.is_null()) {
    if (!patch.is_object()) {
      throw ConfigError("config file must hold a JSON object");
    }
    j.merge_patch(patch);
  }
  json extra = json::object();
  for (const auto &o : overrides) {
    set_path(extra, o.path, parse_override_value(o.value));
  }
  j.merge_patch(extra);
  return from_json(j);
}

ExperimentConfig load_experiment(const std::string &recipe,
                                 const std::string &config_path,
                                 const std::vector<KeyOverride> &overrides) {
  json patch;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) {
      throw ConfigError("cannot open config file '" + config_path + "'");
    }
    try {
      patch = json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error &e) {
      throw ConfigError("config file '" + config_path + "': " + e.what());
    }
  }
  return resolve_experiment(recipe, patch, overrides);
}

ExperimentConfig scan_point_config(const ExperimentConfig &cfg,
                                   std::size_t index) {
  if (!cfg.scan || index >= cfg.scan->wall_frequencies_hz.size()) {
    throw ConfigError("scan point index out of range");
  }
  json j = to_json(cfg);
  j["scan"] = nullptr;
  j["trap"]["wall_frequency_hz"] = cfg.scan->wall_frequencies_hz[index];
  j["run"]["seed"] = scan_point_seed(cfg.run.seed, index);
  if (!cfg.scan->overrides.empty() && !cfg.scan->overrides[index].is_null()) {
    j.merge_patch(cfg.scan->overrides[index]);
  }
  return from_json(j);
}

} // namespace ioncrystal
