#include "nvcavity/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "nvcavity/csv.hpp"

namespace nvcavity::config {

namespace {

std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) {
    return {};
  }
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct ValueError {
  std::string message;
};

double number(const std::string &v) {
  try {
    return parse_si(v);
  } catch (const Error &e) {
    throw ValueError{e.what()};
  }
}

int integer(const std::string &v) {
  const double d = number(v);
  if (d != std::floor(d) || std::abs(d) > 1e9) {
    throw ValueError{"expected an integer, got '" + v + "'"};
  }
  return static_cast<int>(d);
}

bool boolean(const std::string &v) {
  if (v == "true" || v == "yes" || v == "1") {
    return true;
  }
  if (v == "false" || v == "no" || v == "0") {
    return false;
  }
  throw ValueError{"expected true or false, got '" + v + "'"};
}

std::vector<double> number_list(const std::string &v) {
  std::vector<double> out;
  std::istringstream is(v);
  std::string item;
  while (std::getline(is, item, ',')) {
    out.push_back(number(trim(item)));
  }
  return out;
}

std::pair<double, double> band(const std::string &v) {
  const auto colon = v.find(':');
  if (colon == std::string::npos) {
    throw ValueError{"expected low:high, got '" + v + "'"};
  }
  return {number(trim(v.substr(0, colon))), number(trim(v.substr(colon + 1)))};
}

using Setter = std::function<void(ScenarioConfig &, const std::string &)>;

const std::map<std::string, Setter> &setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto real = [&t](const std::string &key, auto member) {
      t[key] = [member](ScenarioConfig &c, const std::string &v) { member(c) = number(v); };
    };
    real("cavity.r1", [](ScenarioConfig &c) -> double & { return c.cavity.r1; });
    real("cavity.r2", [](ScenarioConfig &c) -> double & { return c.cavity.r2; });
    real("cavity.loss_roundtrip", [](ScenarioConfig &c) -> double & { return c.cavity.loss_roundtrip; });
    real("cavity.l_optical", [](ScenarioConfig &c) -> double & { return c.cavity.l_optical; });
    real("cavity.l_diamond", [](ScenarioConfig &c) -> double & { return c.cavity.l_diamond; });
    real("cavity.mirror_curvature", [](ScenarioConfig &c) -> double & { return c.cavity.mirror_curvature; });
    real("singlet.loss_pumped", [](ScenarioConfig &c) -> double & { return c.singlet.loss_pumped; });
    real("singlet.cross_section_cm2", [](ScenarioConfig &c) -> double & { return c.singlet.cross_section_cm2; });
    real("singlet.path_factor", [](ScenarioConfig &c) -> double & { return c.singlet.path_factor; });
    real("saturation.p_sat", [](ScenarioConfig &c) -> double & { return c.saturation.p_sat; });
    real("saturation.depth", [](ScenarioConfig &c) -> double & { return c.saturation.depth; });
    real("odmr.d_zfs", [](ScenarioConfig &c) -> double & { return c.odmr.d_zfs; });
    real("odmr.gamma", [](ScenarioConfig &c) -> double & { return c.odmr.gamma; });
    real("odmr.bias_field", [](ScenarioConfig &c) -> double & { return c.odmr.bias_field; });
    real("odmr.baseline", [](ScenarioConfig &c) -> double & { return c.odmr.baseline; });
    t["odmr.contrast"] = [](ScenarioConfig &c, const std::string &v) {
      for (auto &p : c.odmr.peaks) {
        p.contrast = number(v);
      }
    };
    t["odmr.fwhm"] = [](ScenarioConfig &c, const std::string &v) {
      for (auto &p : c.odmr.peaks) {
        p.fwhm = number(v);
      }
    };
    t["odmr.inner_contrast"] = [](ScenarioConfig &c, const std::string &v) {
      c.odmr.peaks[spin::kInnerLow].contrast = c.odmr.peaks[spin::kInnerHigh].contrast = number(v);
    };
    t["odmr.inner_fwhm"] = [](ScenarioConfig &c, const std::string &v) {
      c.odmr.peaks[spin::kInnerLow].fwhm = c.odmr.peaks[spin::kInnerHigh].fwhm = number(v);
    };
    real("lockin.f_mod", [](ScenarioConfig &c) -> double & { return c.lockin.f_mod; });
    real("lockin.f_dev", [](ScenarioConfig &c) -> double & { return c.lockin.f_dev; });
    real("lockin.time_constant", [](ScenarioConfig &c) -> double & { return c.lockin.time_constant; });
    t["lockin.poles"] = [](ScenarioConfig &c, const std::string &v) { c.lockin.poles = integer(v); };
    t["lockin.harmonic"] = [](ScenarioConfig &c, const std::string &v) { c.lockin.harmonic = integer(v); };
    t["lockin.ref_phase"] = [](ScenarioConfig &c, const std::string &v) {
      c.lockin.auto_phase = v == "auto";
      if (!c.lockin.auto_phase) {
        c.lockin.ref_phase = number(v);
      }
    };
    real("noise.a", [](ScenarioConfig &c) -> double & { return c.noise.a; });
    real("noise.b", [](ScenarioConfig &c) -> double & { return c.noise.b; });
    real("noise.c", [](ScenarioConfig &c) -> double & { return c.noise.c; });
    real("noise.line_freq", [](ScenarioConfig &c) -> double & { return c.noise.line_freq; });
    t["noise.line_rms"] = [](ScenarioConfig &c, const std::string &v) {
      c.noise.line_harmonic_rms = number_list(v);
    };
    real("noise.sensitive_floor", [](ScenarioConfig &c) -> double & { return c.floors.sensitive; });
    real("noise.insensitive_floor", [](ScenarioConfig &c) -> double & { return c.floors.insensitive; });
    real("noise.electronic_floor", [](ScenarioConfig &c) -> double & { return c.floors.electronic; });
    real("noise.magnetic_bandwidth", [](ScenarioConfig &c) -> double & { return c.floors.magnetic_bandwidth; });
    real("ensemble.density_ppm", [](ScenarioConfig &c) -> double & { return c.ensemble.density_ppm; });
    real("ensemble.volume_cm3", [](ScenarioConfig &c) -> double & { return c.ensemble.volume_cm3; });
    real("ensemble.fwhm", [](ScenarioConfig &c) -> double & { return c.ensemble.fwhm; });
    real("ensemble.gamma", [](ScenarioConfig &c) -> double & { return c.ensemble.gamma; });
    real("ensemble.carbon_density_cm3", [](ScenarioConfig &c) -> double & { return c.ensemble.carbon_density_cm3; });
    t["coil.n_turns"] = [](ScenarioConfig &c, const std::string &v) { c.coil.n_turns = integer(v); };
    real("coil.radius", [](ScenarioConfig &c) -> double & { return c.coil.radius; });
    real("coil.distance", [](ScenarioConfig &c) -> double & { return c.coil.distance; });
    real("coil.current", [](ScenarioConfig &c) -> double & { return c.coil.current; });
    real("coil.series_resistance", [](ScenarioConfig &c) -> double & { return c.coil.series_resistance; });
    t["coil.current_is_peak"] = [](ScenarioConfig &c, const std::string &v) { c.coil.current_is_peak = boolean(v); };
    real("run.duration", [](ScenarioConfig &c) -> double & { return c.run.duration; });
    real("run.rate", [](ScenarioConfig &c) -> double & { return c.run.rate; });
    real("run.output_rate", [](ScenarioConfig &c) -> double & { return c.run.output_rate; });
    real("run.settle", [](ScenarioConfig &c) -> double & { return c.run.settle; });
    t["run.seed"] = [](ScenarioConfig &c, const std::string &v) {
      char *end = nullptr;
      const auto s = std::strtoull(v.c_str(), &end, 10);
      if (v.empty() || v[0] == '-' || end != v.c_str() + v.size()) {
        throw ValueError{"seed must be a non-negative integer, got '" + v + "'"};
      }
      c.run.seed = s;
    };
    t["run.test_tone_rms"] = [](ScenarioConfig &c, const std::string &v) {
      c.run.test_tone_from_coil = v == "coil";
      if (!c.run.test_tone_from_coil) {
        c.run.test_tone_rms = number(v);
      }
    };
    real("run.test_tone_freq", [](ScenarioConfig &c) -> double & { return c.run.test_tone_freq; });
    t["run.floor_band"] = [](ScenarioConfig &c, const std::string &v) { c.run.floor_band = band(v); };
    real("run.welch_segment", [](ScenarioConfig &c) -> double & { return c.run.welch_segment; });
    t["run.lock_peak"] = [](ScenarioConfig &c, const std::string &v) { c.run.lock_peak = integer(v); };
    real("run.ir_power", [](ScenarioConfig &c) -> double & { return c.run.ir_power; });
    real("run.wavelength", [](ScenarioConfig &c) -> double & { return c.run.wavelength; });
    real("run.airy_noise", [](ScenarioConfig &c) -> double & { return c.run.airy_noise; });
    real("run.saturation_noise", [](ScenarioConfig &c) -> double & { return c.run.saturation_noise; });
    real("run.odmr_noise", [](ScenarioConfig &c) -> double & { return c.run.odmr_noise; });
    real("run.shot_sweep_noise", [](ScenarioConfig &c) -> double & { return c.run.shot_sweep_noise; });
    return t;
  }();
  return table;
}

std::string show(double v) { return csv::format_number(v); }

bool is_integer_ratio(double a, double b) {
  const double r = a / b;
  return r >= 1.0 && std::abs(r - std::round(r)) < 1e-9 * r;
}

} // namespace

double parse_si(const std::string &raw) {
  const std::string text = trim(raw);
  if (text.empty()) {
    throw InvalidArgument("config", "empty number");
  }
  char *end = nullptr;
  const double base = std::strtod(text.c_str(), &end);
  if (end == text.c_str()) {
    throw InvalidArgument("config", "not a number: '" + text + "'");
  }
  const std::string suffix(end);
  if (suffix.empty()) {
    return base;
  }
  static const std::map<std::string, double> scale{{"k", 1e3}, {"M", 1e6}, {"G", 1e9}, {"m", 1e-3},
                                                   {"u", 1e-6}, {"n", 1e-9}, {"p", 1e-12}};
  const auto it = scale.find(suffix);
  if (it == scale.end()) {
    throw InvalidArgument("config", "unknown suffix in '" + text + "'");
  }
  return base * it->second;
}

double ScenarioConfig::test_tone() const {
  return run.test_tone_from_coil ? calibration::coil_field(coil).rms : run.test_tone_rms;
}

void ScenarioConfig::validate() const {
  auto fail = [](const std::string &msg) { throw ConfigError("inconsistent settings: " + msg); };
  try {
    cavity.validate();
    saturation.validate();
    odmr.validate();
    lockin.validate();
    coil.validate();
  } catch (const Error &e) {
    throw ConfigError(e.what());
  }
  if (!run.seed) {
    throw ConfigError("missing required key run.seed (synthesis needs an explicit seed)");
  }
  const double ref = lockin.f_mod * lockin.harmonic;
  if (!(run.rate > 10.0 * ref)) {
    fail("run.rate (" + show(run.rate) + ") must exceed 10 x lockin.f_mod (" + show(ref) + ")");
  }
  if (!(run.floor_band.first < run.floor_band.second && run.floor_band.first >= 0.0)) {
    fail("run.floor_band must satisfy 0 <= low < high");
  }
  if (!(run.floor_band.second < lockin.stage_bandwidth())) {
    fail("run.floor_band upper edge (" + show(run.floor_band.second) +
         ") must lie below the lockin.time_constant bandwidth (" + show(lockin.stage_bandwidth()) + ")");
  }
  if (!is_integer_ratio(run.rate, run.output_rate)) {
    fail("run.rate (" + show(run.rate) + ") must be an integer multiple of run.output_rate (" +
         show(run.output_rate) + ")");
  }
  if (!is_integer_ratio(lockin.f_mod, run.output_rate)) {
    fail("run.output_rate (" + show(run.output_rate) +
         ") must make each output sample span whole periods of lockin.f_mod (" + show(lockin.f_mod) + ")");
  }
  if (!(run.floor_band.second < 0.5 * run.output_rate)) {
    fail("run.floor_band upper edge must lie below half of run.output_rate");
  }
  if (!(run.settle >= 0.0 && run.duration > run.settle)) {
    fail("run.duration (" + show(run.duration) + ") must exceed run.settle (" + show(run.settle) + ")");
  }
  if (!(run.welch_segment > 0.0 && run.welch_segment <= run.duration - run.settle)) {
    fail("run.welch_segment must be positive and no longer than run.duration - run.settle");
  }
  if (!(floors.magnetic_bandwidth > 0.0 && floors.magnetic_bandwidth < 0.5 * run.output_rate)) {
    fail("noise.magnetic_bandwidth must lie below half of run.output_rate");
  }
  if (floors.sensitive < floors.insensitive) {
    fail("noise.sensitive_floor must not be below noise.insensitive_floor");
  }
  if (floors.insensitive < 0.0 || floors.electronic < 0.0) {
    fail("noise floors must be non-negative");
  }
  if (test_tone() > 0.0 && !(run.test_tone_freq > 0.0 && run.test_tone_freq < 0.5 * run.output_rate)) {
    fail("run.test_tone_freq must lie in (0, run.output_rate / 2)");
  }
  if (run.lock_peak < 0 || run.lock_peak > 3) {
    fail("run.lock_peak must be 0..3");
  }
  if (!(run.ir_power > 0.0 && run.wavelength > 0.0)) {
    fail("run.ir_power and run.wavelength must be positive");
  }
}

ScenarioConfig parse_config(const std::string &text) {
  ScenarioConfig cfg;
  std::istringstream is(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("malformed section header", lineno);
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("expected key = value", lineno);
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string full = section.empty() || key.find('.') != std::string::npos ? key : section + "." + key;
    const auto it = setters().find(full);
    if (it == setters().end()) {
      throw ConfigError("unknown key '" + full + "'", lineno);
    }
    try {
      it->second(cfg, value);
    } catch (const ValueError &e) {
      throw ConfigError(full + ": " + e.message, lineno);
    }
  }
  cfg.validate();
  return cfg;
}

std::filesystem::path resolve_profile(const std::filesystem::path &path) {
  namespace fs = std::filesystem;
  if (fs::exists(path) || path.has_parent_path()) {
    return path;
  }
  std::vector<fs::path> dirs;
  if (const char *env = std::getenv("NVCAVITY_PROFILE_DIR"); env != nullptr && *env != '\0') {
    dirs.emplace_back(env);
  }
#ifdef NVCAVITY_DEFAULT_PROFILE_DIR
  dirs.emplace_back(NVCAVITY_DEFAULT_PROFILE_DIR);
#endif
  for (const auto &dir : dirs) {
    for (const fs::path &candidate : {dir / path, dir / (path.string() + ".cfg")}) {
      if (fs::exists(candidate)) {
        return candidate;
      }
    }
  }
  return path;
}

ScenarioConfig load_config(const std::filesystem::path &path) {
  const auto resolved = resolve_profile(path);
  std::ifstream is(resolved, std::ios::binary);
  if (!is) {
    throw ConfigError("cannot open config '" + path.string() + "'");
  }
  std::ostringstream os;
  os << is.rdbuf();
  return parse_config(os.str());
}

} // namespace nvcavity::config
