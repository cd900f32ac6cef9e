#include "ioncrystal/experiment.hpp"
#include "ioncrystal/io.hpp"
#include "ioncrystal/pipeline.hpp"
#include "support.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace ioncrystal;
using nlohmann::json;

namespace {

std::filesystem::path scratch_dir(const std::string &name) {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("ioncrystal_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::vector<std::string> lines_of(const std::filesystem::path &path) {
  std::ifstream in(path);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) {
    out.push_back(line);
  }
  return out;
}

std::vector<std::string> data_lines(const std::filesystem::path &path) {
  std::vector<std::string> out;
  for (auto &l : lines_of(path)) {
    if (!l.starts_with('#')) {
      out.push_back(std::move(l));
    }
  }
  return out;
}

std::size_t field_count(const std::string &line) {
  return static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
}

// Small, fast experiment: 6 ions for 20 us.
json small_patch() {
  return {{"n_ions", 6},
          {"trap", {{"wall_frequency_hz", 190e3}}},
          {"run",
           {{"t_final_s", 20e-6},
            {"sample_interval_s", 2e-6},
            {"summary_window_s", 10e-6},
            {"initial",
             {{"drumhead_mk", 5.0}, {"exb_mk", 5.0}, {"cyclotron_mk", 5.0}}}}}};
}

} // namespace

TEST_CASE("defaults and every recipe resolve") {
  const ExperimentConfig d = resolve_experiment("", json());
  CHECK(d.n_ions == 54);
  CHECK(d.trap.delta_over_beta == 0.25);
  CHECK(d.run.dt_s == 1e-9);
  CHECK(d.species.mass_amu == 9.012182);
  CHECK_FALSE(d.scan.has_value());

  for (const auto &name : recipe_names()) {
    CAPTURE(name);
    const ExperimentConfig c = resolve_experiment(name, json());
    CHECK(c.recipe == name);
  }
  CHECK(resolve_experiment("fig4b", json()).scan->wall_frequencies_hz.size() == 15);
  CHECK(resolve_experiment("fig4b-quick", json()).scan->wall_frequencies_hz ==
        std::vector<double>{180e3, 185e3, 189e3, 192e3, 193e3});
  CHECK(resolve_experiment("fig3a", json()).run.coulomb == CoulombMode::Linearized);
  CHECK(resolve_experiment("fig2d", json()).trap.wall_frequency_hz == 204e3);
  CHECK_THROWS_AS(resolve_experiment("fig9", json()), ConfigError);
}

TEST_CASE("unknown keys and bad types are rejected") {
  CHECK_THROWS_AS(resolve_experiment("", json{{"n_ion", 5}}), ConfigError);
  CHECK_THROWS_AS(resolve_experiment("", json{{"trap", {{"wall_hz", 1e5}}}}),
                  ConfigError);
  CHECK_THROWS_AS(resolve_experiment("", json{{"n_ions", "many"}}), ConfigError);
  CHECK_THROWS_AS(resolve_experiment("", json{{"n_ions", -3}}), ConfigError);
  CHECK_THROWS_AS(resolve_experiment("", json{{"cooling", {{"beams", "laser"}}}}),
                  ConfigError);
  CHECK_THROWS_AS(resolve_experiment("", json::array()), ConfigError);
  CHECK_THROWS_AS(resolve_experiment("", json(), {{"run.bogus", "1"}}),
                  ConfigError);
  // Deconfining wall.
  CHECK_THROWS_AS(
      resolve_experiment("", json{{"trap", {{"delta_over_beta", 1.5}}}}),
      ConfigError);
  try {
    resolve_experiment("", json{{"run", {{"intial", json::object()}}}});
    FAIL("expected a ConfigError");
  } catch (const ConfigError &e) {
    CHECK(std::string(e.what()).find("run.intial") != std::string::npos);
  }
}

TEST_CASE("merge order: recipe, then file, then overrides") {
  const json file{{"n_ions", 30}, {"run", {{"t_final_s", 2e-3}}}};
  const ExperimentConfig c = resolve_experiment(
      "fig2c", file, {{"run.t_final_s", "3e-3"}, {"cooling.enabled", "false"}});
  CHECK(c.n_ions == 30);              // file over recipe
  CHECK(c.run.t_final_s == 3e-3);     // override over file
  CHECK_FALSE(c.cooling.enabled);     // override over recipe
  CHECK(c.trap.wall_frequency_hz == 180e3);
  CHECK(c.spectrum.enabled);          // recipe survives
  CHECK(c.run.initial.exb_mk == 10.0);

  // Bare strings are accepted as strings.
  CHECK(resolve_experiment("", json(), {{"run.coulomb", "linearized"}})
            .run.coulomb == CoulombMode::Linearized);
  CHECK_THROWS_AS(resolve_experiment("", json(), {{"run..seed", "1"}}),
                  ConfigError);
}

TEST_CASE("zero branches start at the temperature floor") {
  json patch = small_patch();
  patch["run"]["initial"] = {{"drumhead_mk", 0.0}, {"exb_mk", 5.0}, {"cyclotron_mk", 0.0}};
  const ExperimentConfig c = resolve_experiment("", patch);
  CHECK(c.run.initial.floor_mk == 1e-12);
  const RunConfig rc = make_run_config(c, RunSeeds::from(1));
  const auto &init = std::get<ThermalInit>(rc.initial);
  CHECK(init.temperatures.t_drumhead == 1e-15);
  CHECK(init.temperatures.t_exb == 5e-3);
  CHECK(init.temperatures.t_cyclotron == 1e-15);

  // Without the floor a flat crystal never leaves the plane.
  patch["run"]["initial"]["floor_mk"] = 0.0;
  const EvolveReport flat = evolve(resolve_experiment("", patch));
  for (double ke : flat.result.diagnostics.ke_par) {
    CHECK(ke == 0.0);
  }
  CHECK_THROWS_AS(resolve_experiment("", json(), {{"run.initial.floor_mk", "-1"}}),
                  ConfigError);
}

TEST_CASE("config files and round trips") {
  const auto dir = scratch_dir("config");
  const auto path = dir / "cfg.json";
  {
    std::ofstream out(path);
    out << "// a comment\n{\"n_ions\": 12, \"trap\": {\"wall_frequency_hz\": "
           "185000}}\n";
  }
  const ExperimentConfig c = load_experiment("", path.string());
  CHECK(c.n_ions == 12);
  CHECK(c.trap.wall_frequency_hz == 185e3);
  CHECK(to_json(from_json(to_json(c))) == to_json(c));
  CHECK_THROWS_AS(load_experiment("", (dir / "missing.json").string()),
                  ConfigError);
  {
    std::ofstream out(dir / "broken.json");
    out << "{\"n_ions\": ";
  }
  CHECK_THROWS_AS(load_experiment("", (dir / "broken.json").string()),
                  ConfigError);

  const json custom{{"cooling",
                     {{"enabled", true},
                      {"beams",
                       json::array({{{"direction", {0, 0, 1}},
                                     {"detuning_hz", -9e6},
                                     {"saturation", 0.01}}})}}}};
  const ExperimentConfig cc = resolve_experiment("", custom);
  CHECK(cc.cooling.preset == BeamPreset::Custom);
  const CoolingConfig beams = cc.cooling_config(4);
  REQUIRE(beams.beams.size() == 1);
  CHECK(beams.beams[0].wavevector == doctest::Approx(cc.species_params().wavevector()));
  CHECK(beams.beams[0].detuning == doctest::Approx(-constants::two_pi * 9e6));
  CHECK(to_json(from_json(to_json(cc))) == to_json(cc));
}

TEST_CASE("seed derivation") {
  const RunSeeds s = RunSeeds::from(7);
  CHECK(s.run == 7);
  CHECK(s.thermal == derive_seed(7, 1));
  CHECK(s.lasers == derive_seed(7, 2));
  CHECK(s.thermal != s.lasers);
  CHECK(scan_point_seed(7, 0) != scan_point_seed(7, 1));
  CHECK(scan_point_seed(7, 3) == scan_point_seed(7, 3));

  json patch = small_patch();
  patch["scan"] = {{"start_hz", 180e3}, {"stop_hz", 190e3}, {"count", 3}};
  const ExperimentConfig c = resolve_experiment("", patch);
  const ExperimentConfig p = scan_point_config(c, 2);
  CHECK(p.trap.wall_frequency_hz == 190e3);
  CHECK(p.run.seed == scan_point_seed(c.run.seed, 2));
  CHECK_FALSE(p.scan.has_value());
  CHECK_THROWS_AS(scan_point_config(c, 3), ConfigError);
}

TEST_CASE("scan rows reproduce standalone runs and record failures") {
  json patch = small_patch();
  patch["scan"] = {{"wall_frequencies_hz", {185e3, 190e3, 188e3}},
                   {"overrides",
                    json::array({json(nullptr),
                                 json{{"run", {{"dt_s", 1e-8}}}},
                                 json{{"cooling", {{"enabled", true}}}}})}};
  const ExperimentConfig c = resolve_experiment("", patch);
  std::vector<std::size_t> seen;
  const auto rows = run_scan(c, 2, [&](const ScanRow &row, const EvolveReport *rep) {
    seen.push_back(row.index);
    CHECK((rep != nullptr) == row.ok);
  });
  REQUIRE(rows.size() == 3);
  CHECK(seen.size() == 3);
  CHECK(rows[0].ok);
  CHECK_FALSE(rows[1].ok);
  CHECK(rows[1].error.find("dt") != std::string::npos);
  CHECK(rows[2].ok);
  CHECK(rows[2].scattering_events > 0);
  CHECK(rows[0].scattering_events == 0);

  // Each successful row is bit-identical to evolving its point alone.
  for (std::size_t i : {0ul, 2ul}) {
    const EvolveReport alone = evolve(scan_point_config(c, i));
    CHECK(alone.summary.ke_perp_mk == rows[i].summary.ke_perp_mk);
    CHECK(alone.summary.pe_mk == rows[i].summary.pe_mk);
    CHECK(alone.result.scattering_events == rows[i].scattering_events);
    CHECK(rows[i].seed == scan_point_seed(c.run.seed, i));
  }
  // Worker count does not change results.
  const auto serial = run_scan(c, 1);
  CHECK(serial[0].summary.ke_par_mk == rows[0].summary.ke_par_mk);
  CHECK(serial[2].summary.ke_par_mk == rows[2].summary.ke_par_mk);

  const auto dir = scratch_dir("scan");
  write_scan_csv(dir / "scan.csv", {"scan", to_json(c), std::nullopt}, rows);
  const auto lines = data_lines(dir / "scan.csv");
  REQUIRE(lines.size() == 4);
  CHECK(lines[0] ==
        "index,wall_frequency_hz,seed,status,KE_perp_mK,KE_par_mK,PE_mK,"
        "reconfigured,scattering_events,error");
  CHECK(lines[1].starts_with("0,185000,"));
  CHECK(lines[2].find(",failed,") != std::string::npos);
  CHECK(lines[3].find(",ok,") != std::string::npos);
  CHECK(field_count(lines[1]) == 10);
}

TEST_CASE("CSV outputs carry the header block and schema") {
  const ExperimentConfig c = resolve_experiment("", small_patch());
  const OutputHeader header{"evolve", to_json(c), RunSeeds::from(c.run.seed)};
  const std::string block = header.comment_block();
  CHECK(block.starts_with("# ioncrystal evolve\n# config: {"));
  CHECK(block.find("# seeds: run=1 thermal=") != std::string::npos);
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(std::nan("")) == "nan");
  CHECK(format_number(185000.0) == "185000");

  const auto dir = scratch_dir("csv");
  const EvolveReport rep = evolve(c);
  write_diagnostics_csv(dir / "diagnostics.csv", header, rep.result.diagnostics);
  const auto all = lines_of(dir / "diagnostics.csv");
  REQUIRE(all.size() > 3);
  CHECK(all[0] == "# ioncrystal evolve");
  // The embedded config parses back to the same experiment.
  REQUIRE(all[1].starts_with("# config: "));
  CHECK(to_json(from_json(json::parse(all[1].substr(10)))) == to_json(c));
  const auto diag = data_lines(dir / "diagnostics.csv");
  CHECK(diag[0] == "t_s,KE_perp_mK,KE_par_mK,PE_mK,T_drum_mK,T_exb_mK,T_cyc_mK");
  CHECK(diag.size() == rep.result.diagnostics.size() + 1);
  for (std::size_t k = 1; k < diag.size(); ++k) {
    CHECK(field_count(diag[k]) == 7);
  }
  std::istringstream first(diag[1]);
  std::string t0;
  std::getline(first, t0, ',');
  CHECK(t0 == "0");

  const EquilibriumReport eq = compute_equilibrium(c);
  write_equilibrium_csv(dir / "equilibrium.csv", header, eq.equilibrium);
  const auto eql = data_lines(dir / "equilibrium.csv");
  CHECK(eql[0] == "ion,x_um,y_um,z_um");
  CHECK(eql.size() == 7);

  const ModeReport modes = compute_modes(c);
  write_modes_csv(dir / "modes.csv", header, *modes.modes);
  const auto all_modes = lines_of(dir / "modes.csv");
  CHECK(std::count_if(all_modes.begin(), all_modes.end(), [](const auto &l) {
          return l.starts_with("# branches_overlap:");
        }) == 1);
  const auto ml = data_lines(dir / "modes.csv");
  CHECK(ml[0] == "index,branch,frequency_hz");
  CHECK(ml.size() == 19);
  CHECK(ml[1].starts_with("0,drumhead,"));
}

TEST_CASE("binary trajectory and mode files round trip") {
  const ExperimentConfig c = resolve_experiment("", small_patch());
  const OutputHeader header{"evolve", to_json(c), RunSeeds::from(c.run.seed)};
  const auto dir = scratch_dir("binary");

  std::vector<Coords> frames;
  {
    TrajectoryWriter w(dir / "trajectory.bin", header, c.n_ions, 1e-6);
    evolve(c, [&](double, const Coords &x) {
      frames.push_back(x);
      w.append(x);
    });
    w.close();
    CHECK(w.frames() == frames.size());
  }
  const TrajectoryFile t = read_trajectory(dir / "trajectory.bin");
  CHECK(t.n_ions == 6);
  CHECK(t.dt_sample == 1e-6);
  CHECK(t.config == header.config);
  REQUIRE(t.frames.size() == frames.size());
  CHECK(frames.size() == 21);
  for (std::size_t k = 0; k < frames.size(); ++k) {
    CHECK(t.frames[k] == frames[k]);
  }

  const ModeReport modes = compute_modes(c);
  write_modes_binary(dir / "modes.bin", header, *modes.modes);
  const ModesFile m = read_modes_binary(dir / "modes.bin");
  CHECK(m.n_ions == 6);
  REQUIRE(m.frequencies_hz.size() == 18);
  CHECK(m.branches[0] == 0);
  CHECK(m.branches[6] == 1);
  CHECK(m.branches[17] == 2);
  for (std::size_t k = 0; k < 18; ++k) {
    CHECK(m.frequencies_hz[k] ==
          modes.modes->frequencies()(static_cast<Eigen::Index>(k)) /
              constants::two_pi);
    CHECK(m.vectors[k] == modes.modes->phase_space_vector(k));
  }

  // Corrupted magic is rejected.
  {
    std::fstream f(dir / "modes.bin", std::ios::in | std::ios::out | std::ios::binary);
    f.write("XXXX", 4);
  }
  CHECK_THROWS(read_modes_binary(dir / "modes.bin"));
}
