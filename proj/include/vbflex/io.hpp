#pragma once

// Configuration files, CSV ingestion and emission, run manifests and model
// serialisation.
//
// Configuration values are written in table units (C in kJ/K, resistances in
// K/kW, c_p in kJ/(kg.K), kappa_f in kW/(kg/s)^2, dt in minutes) unless a
// "units" block says otherwise; everything is converted to SI here.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vbflex/core.hpp"
#include "vbflex/dr.hpp"
#include "vbflex/policy.hpp"
#include "vbflex/scenario.hpp"
#include "vbflex/surrogate.hpp"
#include "vbflex/thermal.hpp"
#include "vbflex/vb.hpp"

namespace vbflex {

using json = nlohmann::json;
namespace fs = std::filesystem;

#ifndef VBFLEX_VERSION
#define VBFLEX_VERSION "0.0.0"
#endif

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(p.string() + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// CSV

class CsvTable {
 public:
  CsvTable(std::string config_hash, std::vector<std::string> header)
      : hash_(std::move(config_hash)), header_(std::move(header)) {}

  void add(const std::vector<std::string>& cells) {
    if (cells.size() != header_.size()) throw Error("csv: row width does not match header");
    rows_.push_back(cells);
  }
  void add_numbers(const std::vector<double>& values) {
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (double v : values) cells.push_back(format_double(v));
    add(cells);
  }

  std::string str() const {
    std::string out = "# config_hash=" + hash_ + "\n";
    auto line = [&out](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += cells[i];
      }
      out += '\n';
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    return out;
  }

 private:
  std::string hash_;
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

struct CsvData {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name, const std::string& where) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw Error(where + ": missing column '" + name + "'");
  }
};

/// Numeric CSV with one header row; lines starting with '#' are skipped.
inline CsvData parse_csv(const std::string& text, const std::string& where) {
  CsvData d;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (d.header.empty()) {
      d.header = cells;
      continue;
    }
    if (cells.size() != d.header.size())
      throw Error(where + ":" + std::to_string(lineno) + ": expected " + std::to_string(d.header.size()) + " fields");
    std::vector<double> row;
    for (const auto& c : cells) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(c, &used));
        if (used != c.size()) throw std::invalid_argument(c);
      } catch (const std::exception&) {
        throw Error(where + ":" + std::to_string(lineno) + ": '" + c + "' is not a number");
      }
    }
    d.rows.push_back(std::move(row));
  }
  if (d.header.empty()) throw Error(where + ": no header row");
  return d;
}

/// Exogenous CSV with header k,T_out,Q_dist_1..Q_dist_n; power_scale converts to W.
inline ExogenousSeries read_exo_csv(const fs::path& p, std::size_t n_zones, double power_scale = 1.0) {
  const CsvData d = parse_csv(read_file(p), p.string());
  ExogenousSeries e;
  const std::size_t ct = d.column("T_out", p.string());
  std::vector<std::size_t> cq;
  for (std::size_t i = 0; i < n_zones; ++i) cq.push_back(d.column("Q_dist_" + std::to_string(i + 1), p.string()));
  e.Q_dist.assign(n_zones, {});
  for (const auto& r : d.rows) {
    e.T_out.push_back(r[ct]);
    for (std::size_t i = 0; i < n_zones; ++i) e.Q_dist[i].push_back(r[cq[i]] * power_scale);
  }
  e.validate(n_zones);
  return e;
}

inline std::vector<double> read_tariff_csv(const fs::path& p) {
  const CsvData d = parse_csv(read_file(p), p.string());
  const std::size_t c = d.column("price", p.string());
  std::vector<double> out;
  for (const auto& r : d.rows) out.push_back(r[c]);
  return out;
}

// ---------------------------------------------------------------------------
// Configuration

struct ExoSource {
  bool synthetic = true;
  SynthExoSpec spec;  // seed is replaced by a child of the root seed
  fs::path csv;
  double power_scale = 1.0;
};

struct TariffSource {
  bool present = false;
  std::vector<TouPeriod> periods;
  fs::path csv;
};

struct SurrogateSettings {
  FeatureSpec features;
  std::size_t days_per_policy = 100;
  std::size_t run_days = 5;
  std::size_t segment = 48;
  double damping = 1e-8;
};

struct ScenarioConfig {
  MultiZoneParams building;
  ExoSource exo;
  TariffSource tariff;
  std::size_t horizon = 48;
  SozConvention convention = SozConvention::centered;
  BetaAlgorithm algorithm = BetaAlgorithm::conservative;
  std::uint64_t seed = 1;
  PidGains pid;
  GreedySettings greedy;
  std::size_t median_window = 48;
  SurrogateSettings surrogate;
  OracleOptions oracle;
  std::size_t scenarios = 30;
  std::vector<std::size_t> batch_days = {1, 3, 5};
  json resolved;     // fully defaulted configuration in table units
  std::string hash;  // FNV-1a of resolved.dump()

  std::size_t steps_per_day() const { return static_cast<std::size_t>(std::llround(86400.0 / building.dt)); }
};

namespace detail {

// Tracks which keys of a JSON object were consumed so that leftovers can be
// reported with their full path.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw Error(where() + ": expected an object");
  }

  std::string where(const std::string& key = "") const {
    if (key.empty()) return path_.empty() ? "config" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  const json& at(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number()) throw Error(where(key) + ": expected a number");
    return v.get<double>();
  }

  std::size_t count(const std::string& key, std::size_t fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) throw Error(where(key) + ": expected a nonnegative integer");
    return v.get<std::size_t>();
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_boolean()) throw Error(where(key) + ": expected true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_string()) throw Error(where(key) + ": expected a string");
    return v.get<std::string>();
  }

  /// Scalar (broadcast) or one value per zone.
  std::vector<double> per_zone(const std::string& key, double fallback, std::size_t n) {
    if (!has(key)) return std::vector<double>(n, fallback);
    const json& v = j_.at(key);
    if (v.is_number()) return std::vector<double>(n, v.get<double>());
    if (!v.is_array() || v.size() != n)
      throw Error(where(key) + ": expected a number or an array of " + std::to_string(n) + " numbers");
    std::vector<double> out;
    for (const auto& x : v) {
      if (!x.is_number()) throw Error(where(key) + ": expected numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw Error(where(it.key()) + ": unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline double unit_factor(const std::string& quantity, const std::string& unit, const std::string& where) {
  static const std::map<std::string, std::map<std::string, double>> table = {
      {"C_th", {{"J/K", 1.0}, {"kJ/K", 1e3}, {"MJ/K", 1e6}}},
      {"R", {{"K/W", 1.0}, {"K/kW", 1e-3}}},
      {"c_p", {{"J/(kg.K)", 1.0}, {"kJ/(kg.K)", 1e3}}},
      {"kappa_f", {{"W/(kg/s)^2", 1.0}, {"kW/(kg/s)^2", 1e3}}},
      {"dt", {{"s", 1.0}, {"min", 60.0}, {"h", 3600.0}}},
      {"power", {{"W", 1.0}, {"kW", 1e3}}},
  };
  const auto& options = table.at(quantity);
  const auto it = options.find(unit);
  if (it == options.end()) {
    std::string allowed;
    for (const auto& [u, f] : options) allowed += (allowed.empty() ? "" : "|") + u;
    throw Error(where + ": unknown unit '" + unit + "' (expected " + allowed + ")");
  }
  return it->second;
}

}  // namespace detail

/// Built-in configuration; same content as configs/reference_building.json.
inline json default_config_json() {
  return json::parse(R"cfg({
  "units": {"C_th": "kJ/K", "R": "K/kW", "c_p": "kJ/(kg.K)", "kappa_f": "kW/(kg/s)^2", "dt": "min", "power": "W"},
  "building": {
    "n_zones": 5, "C_th": 1.5e4, "R_oi": 30, "topology": "star", "R_adj": 14,
    "T_set": 25, "delta": 1, "m_min": 0, "m_max": 0.5,
    "c_p": 1.012, "T_sup": 15, "d_r": 0.8, "kappa_f": 0.08, "COP": 1.0
  },
  "dt": 30,
  "horizon": 48,
  "seed": 1,
  "convention": "centered",
  "algorithm": "conservative",
  "exo": {"synthetic": {}},
  "tariff": {"tou": [[0, 8, 0.10], [8, 12, 0.20], [12, 18, 0.35], [18, 22, 0.20], [22, 24, 0.10]]}
})cfg");
}

inline ScenarioConfig parse_config_json(const json& root, const fs::path& base_dir = ".") {
  using detail::ObjectReader;
  ScenarioConfig cfg;
  ObjectReader top(root, "");
  json resolved;

  // units
  std::map<std::string, std::string> units = {{"C_th", "kJ/K"}, {"R", "K/kW"}, {"c_p", "kJ/(kg.K)"},
                                              {"kappa_f", "kW/(kg/s)^2"}, {"dt", "min"}, {"power", "W"}};
  if (top.has("units")) {
    ObjectReader u(top.at("units"), "units");
    for (auto& [q, unit] : units) {
      unit = u.string(q, unit);
      detail::unit_factor(q, unit, u.where(q));
    }
    u.finish();
  }
  for (const auto& [q, unit] : units) resolved["units"][q] = unit;
  auto factor = [&](const std::string& q) { return detail::unit_factor(q, units[q], "units." + q); };

  const double dt_raw = top.number("dt", 30.0);
  if (!(dt_raw > 0.0)) throw Error("dt: must be positive");
  resolved["dt"] = dt_raw;

  // building
  MultiZoneParams& p = cfg.building;
  {
    const json empty = json::object();
    ObjectReader b(top.has("building") ? top.at("building") : empty, "building");
    const std::size_t n = b.count("n_zones", 5);
    if (n == 0) throw Error("building.n_zones: must be at least 1");
    p.n_zones = n;
    json& rb = resolved["building"];
    rb["n_zones"] = n;
    auto zone_field = [&](const char* key, double fallback, double scale, std::vector<double>& dst) {
      const auto raw = b.per_zone(key, fallback, n);
      rb[key] = raw;
      dst.clear();
      for (double v : raw) dst.push_back(v * scale);
    };
    zone_field("C_th", 1.5e4, factor("C_th"), p.C_th);
    zone_field("R_oi", 30.0, factor("R"), p.R_oi);
    zone_field("T_set", 25.0, 1.0, p.T_set);
    zone_field("delta", 1.0, 1.0, p.delta);
    zone_field("m_min", 0.0, 1.0, p.m_min);
    zone_field("m_max", 0.5, 1.0, p.m_max);
    p.c_p = b.number("c_p", 1.012) * factor("c_p");
    rb["c_p"] = p.c_p / factor("c_p");
    p.T_sup = b.number("T_sup", 15.0);
    rb["T_sup"] = p.T_sup;
    p.d_r = b.number("d_r", 0.8);
    rb["d_r"] = p.d_r;
    p.kappa_f = b.number("kappa_f", 0.08) * factor("kappa_f");
    rb["kappa_f"] = p.kappa_f / factor("kappa_f");
    p.COP = b.number("COP", 1.0);
    rb["COP"] = p.COP;
    p.dt = dt_raw * factor("dt");

    if (b.has("adjacency")) {
      const json& adj = b.at("adjacency");
      if (!adj.is_array()) throw Error("building.adjacency: expected an array of [i, j, R] triples");
      for (std::size_t e = 0; e < adj.size(); ++e) {
        const json& t = adj[e];
        const std::string w = "building.adjacency[" + std::to_string(e) + "]";
        if (!t.is_array() || t.size() != 3 || !t[0].is_number_integer() || !t[1].is_number_integer() || !t[2].is_number())
          throw Error(w + ": expected [i, j, R]");
        const auto i = t[0].get<long long>(), j = t[1].get<long long>();
        if (i < 0 || j < 0 || static_cast<std::size_t>(i) >= n || static_cast<std::size_t>(j) >= n || i == j)
          throw Error(w + ": zone index out of range");
        p.set_adjacency(static_cast<std::size_t>(i), static_cast<std::size_t>(j), t[2].get<double>() * factor("R"));
      }
      rb["adjacency"] = adj;
      if (b.has("topology") || b.has("R_adj"))
        throw Error("building: give either adjacency or topology/R_adj, not both");
    } else {
      const std::string topo = b.string("topology", "star");
      const double R = b.number("R_adj", 14.0);
      rb["topology"] = topo;
      rb["R_adj"] = R;
      if (topo == "star") {
        for (std::size_t j = 1; j < n; ++j) p.set_adjacency(0, j, R * factor("R"));
      } else if (topo == "chain") {
        for (std::size_t j = 1; j < n; ++j) p.set_adjacency(j - 1, j, R * factor("R"));
      } else if (topo != "none") {
        throw Error("building.topology: unknown topology '" + topo + "' (expected star|chain|none)");
      }
    }
    b.finish();
    p.validate();
    coefficients_multi(p);  // stability gate, names the zone
  }

  cfg.horizon = top.count("horizon", 48);
  if (cfg.horizon == 0) throw Error("horizon: must be positive");
  resolved["horizon"] = cfg.horizon;
  cfg.seed = static_cast<std::uint64_t>(top.count("seed", 1));
  resolved["seed"] = cfg.seed;
  const std::string conv = top.string("convention", "centered");
  try {
    cfg.convention = parse_convention(conv);
    cfg.algorithm = parse_beta_algorithm(top.string("algorithm", "conservative"));
  } catch (const Error& e) {
    throw Error(std::string("config: ") + e.what());
  }
  resolved["convention"] = to_string(cfg.convention);
  resolved["algorithm"] = to_string(cfg.algorithm);

  // exogenous source
  {
    const json def = json{{"synthetic", json::object()}};
    ObjectReader e(top.has("exo") ? top.at("exo") : def, "exo");
    const bool has_csv = e.has("csv"), has_syn = e.has("synthetic");
    if (has_csv == has_syn) throw Error("exo: give exactly one of 'synthetic' or 'csv'");
    cfg.exo.power_scale = factor("power");
    if (has_csv) {
      cfg.exo.synthetic = false;
      cfg.exo.csv = base_dir / e.string("csv", "");
      if (!fs::exists(cfg.exo.csv)) throw Error("exo.csv: file not found: " + cfg.exo.csv.string());
      resolved["exo"]["csv"] = e.string("csv", "");
      resolved["exo"]["csv_fnv1a64"] = hex64(fnv1a64(read_file(cfg.exo.csv)));
    } else {
      ObjectReader s(e.at("synthetic"), "exo.synthetic");
      SynthExoSpec& sp = cfg.exo.spec;
      sp.T_mean = s.number("T_mean", sp.T_mean);
      sp.T_amplitude = s.number("T_amplitude", sp.T_amplitude);
      sp.T_peak_hour = s.number("T_peak_hour", sp.T_peak_hour);
      sp.T_noise = s.number("T_noise", sp.T_noise);
      sp.occupied_start = s.number("occupied_start", sp.occupied_start);
      sp.occupied_end = s.number("occupied_end", sp.occupied_end);
      sp.Q_occupied = s.number("Q_occupied", sp.Q_occupied) * factor("power");
      sp.Q_unoccupied = s.number("Q_unoccupied", sp.Q_unoccupied) * factor("power");
      sp.Q_jitter = s.number("Q_jitter", sp.Q_jitter);
      if (s.has("zone_factor")) sp.zone_factor = s.per_zone("zone_factor", 1.0, p.n_zones);
      s.finish();
      if (sp.T_noise < 0 || sp.Q_jitter < 0) throw Error("exo.synthetic: noise and jitter must be nonnegative");
      json& rs = resolved["exo"]["synthetic"];
      rs = {{"T_mean", sp.T_mean},
            {"T_amplitude", sp.T_amplitude},
            {"T_peak_hour", sp.T_peak_hour},
            {"T_noise", sp.T_noise},
            {"occupied_start", sp.occupied_start},
            {"occupied_end", sp.occupied_end},
            {"Q_occupied", sp.Q_occupied / factor("power")},
            {"Q_unoccupied", sp.Q_unoccupied / factor("power")},
            {"Q_jitter", sp.Q_jitter}};
      if (!sp.zone_factor.empty()) rs["zone_factor"] = sp.zone_factor;
    }
    e.finish();
  }

  // tariff (optional; DR commands require it)
  if (top.has("tariff")) {
    ObjectReader t(top.at("tariff"), "tariff");
    cfg.tariff.present = true;
    const bool has_csv = t.has("csv"), has_tou = t.has("tou");
    if (has_csv == has_tou) throw Error("tariff: give exactly one of 'tou' or 'csv'");
    if (has_csv) {
      cfg.tariff.csv = base_dir / t.string("csv", "");
      if (!fs::exists(cfg.tariff.csv)) throw Error("tariff.csv: file not found: " + cfg.tariff.csv.string());
      resolved["tariff"]["csv"] = t.string("csv", "");
      resolved["tariff"]["csv_fnv1a64"] = hex64(fnv1a64(read_file(cfg.tariff.csv)));
    } else {
      const json& tou = t.at("tou");
      if (!tou.is_array() || tou.empty()) throw Error("tariff.tou: expected a nonempty array of [start_h, end_h, price]");
      for (std::size_t i = 0; i < tou.size(); ++i) {
        const json& r = tou[i];
        const std::string w = "tariff.tou[" + std::to_string(i) + "]";
        if (!r.is_array() || r.size() != 3 || !r[0].is_number() || !r[1].is_number() || !r[2].is_number())
          throw Error(w + ": expected [start_h, end_h, price]");
        TouPeriod per{r[0].get<double>(), r[1].get<double>(), r[2].get<double>()};
        if (per.price < 0) throw Error(w + ": negative price");
        if (!(per.start_hour < per.end_hour)) throw Error(w + ": start must precede end");
        cfg.tariff.periods.push_back(per);
      }
      resolved["tariff"]["tou"] = tou;
    }
    t.finish();
  }

  // policies
  if (top.has("policies")) {
    ObjectReader pol(top.at("policies"), "policies");
    if (pol.has("pid")) {
      ObjectReader g(pol.at("pid"), "policies.pid");
      cfg.pid.kp = g.number("kp", cfg.pid.kp);
      cfg.pid.ki = g.number("ki", cfg.pid.ki);
      cfg.pid.kd = g.number("kd", cfg.pid.kd);
      cfg.pid.windup = g.number("windup", cfg.pid.windup);
      g.finish();
      if (!(cfg.pid.windup > 0)) throw Error("policies.pid.windup: must be positive");
    }
    if (pol.has("greedy")) {
      ObjectReader g(pol.at("greedy"), "policies.greedy");
      cfg.greedy.margin = g.number("margin", cfg.greedy.margin);
      cfg.median_window = g.count("median_window", cfg.median_window);
      g.finish();
    }
    pol.finish();
  }
  if (cfg.median_window == 0) cfg.median_window = cfg.steps_per_day();
  resolved["policies"] = {{"pid", {{"kp", cfg.pid.kp}, {"ki", cfg.pid.ki}, {"kd", cfg.pid.kd}, {"windup", cfg.pid.windup}}},
                          {"greedy", {{"margin", cfg.greedy.margin}, {"median_window", cfg.median_window}}}};

  // surrogate
  if (top.has("surrogate")) {
    ObjectReader s(top.at("surrogate"), "surrogate");
    SurrogateSettings& ss = cfg.surrogate;
    ss.features.lags = s.count("lags", ss.features.lags);
    ss.features.interactions = s.boolean("interactions", ss.features.interactions);
    ss.features.squares = s.boolean("squares", ss.features.squares);
    ss.features.soc_q = s.boolean("soc_q", ss.features.soc_q);
    ss.days_per_policy = s.count("days_per_policy", ss.days_per_policy);
    ss.run_days = s.count("run_days", ss.run_days);
    ss.segment = s.count("segment", ss.segment);
    ss.damping = s.number("damping", ss.damping);
    s.finish();
    if (ss.run_days == 0 || ss.days_per_policy < ss.run_days || ss.segment == 0)
      throw Error("surrogate: need run_days >= 1, days_per_policy >= run_days and segment >= 1");
  }
  {
    const auto& ss = cfg.surrogate;
    resolved["surrogate"] = {{"lags", ss.features.lags},           {"interactions", ss.features.interactions},
                             {"squares", ss.features.squares},     {"soc_q", ss.features.soc_q},
                             {"days_per_policy", ss.days_per_policy}, {"run_days", ss.run_days},
                             {"segment", ss.segment},              {"damping", ss.damping}};
  }

  // demand response
  if (top.has("dr")) {
    ObjectReader d(top.at("dr"), "dr");
    cfg.scenarios = d.count("scenarios", cfg.scenarios);
    if (d.has("days")) {
      const json& days = d.at("days");
      if (!days.is_array() || days.empty()) throw Error("dr.days: expected a nonempty array of positive integers");
      cfg.batch_days.clear();
      for (const auto& x : days) {
        if (!x.is_number_integer() || x.get<long long>() <= 0) throw Error("dr.days: expected positive integers");
        cfg.batch_days.push_back(x.get<std::size_t>());
      }
    }
    if (d.has("oracle")) {
      ObjectReader o(d.at("oracle"), "dr.oracle");
      cfg.oracle.random_starts = o.count("random_starts", cfg.oracle.random_starts);
      cfg.oracle.iterations_per_phase = o.count("iterations_per_phase", cfg.oracle.iterations_per_phase);
      o.finish();
    }
    d.finish();
  }
  resolved["dr"] = {{"scenarios", cfg.scenarios},
                    {"days", cfg.batch_days},
                    {"oracle",
                     {{"random_starts", cfg.oracle.random_starts},
                      {"iterations_per_phase", cfg.oracle.iterations_per_phase}}}};

  top.finish();
  cfg.resolved = resolved;
  cfg.hash = hex64(fnv1a64(resolved.dump()));
  return cfg;
}

inline ScenarioConfig parse_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw Error(path.string() + ": invalid JSON: " + e.what());
  }
  try {
    return parse_config_json(j, path.parent_path().empty() ? fs::path(".") : path.parent_path());
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

inline ScenarioConfig default_config() { return parse_config_json(default_config_json()); }

/// Exogenous series of length K; synthetic sources are generated with exo_seed.
inline ExogenousSeries scenario_exo(const ScenarioConfig& cfg, std::uint64_t exo_seed, std::size_t K) {
  if (!cfg.exo.synthetic) {
    ExogenousSeries e = read_exo_csv(cfg.exo.csv, cfg.building.n_zones, cfg.exo.power_scale);
    if (e.horizon() < K)
      throw Error("exo.csv: " + std::to_string(e.horizon()) + " rows, horizon needs " + std::to_string(K));
    return e.head(K);
  }
  SynthExoSpec spec = cfg.exo.spec;
  spec.seed = exo_seed;
  return synth_exo(spec, cfg.building.n_zones, K, cfg.building.dt);
}

inline std::vector<double> scenario_tariff(const ScenarioConfig& cfg, std::size_t K, const std::string& command) {
  if (!cfg.tariff.present) throw Error("config: missing section 'tariff' required by " + command);
  if (!cfg.tariff.csv.empty()) {
    auto c = read_tariff_csv(cfg.tariff.csv);
    if (c.size() < K) throw Error("tariff.csv: " + std::to_string(c.size()) + " rows, horizon needs " + std::to_string(K));
    c.resize(K);
    validate_tariff(c, K);
    return c;
  }
  return tou_tariff(cfg.tariff.periods, K, cfg.building.dt);
}

// ---------------------------------------------------------------------------
// Model files

inline json to_json(const SurrogateModel& m) {
  json j;
  j["kind"] = "vbflex.surrogate";
  j["features"] = {{"lags", m.features.lags},
                   {"interactions", m.features.interactions},
                   {"squares", m.features.squares},
                   {"soc_q", m.features.soc_q}};
  j["intercept"] = m.intercept;
  const auto names = feature_names(m.features);
  json coef = json::array();
  for (std::size_t i = 0; i < names.size(); ++i) coef.push_back({{"feature", names[i]}, {"value", m.coef[static_cast<Eigen::Index>(i)]}});
  j["coefficients"] = coef;
  j["training"] = {{"dataset", m.dataset}, {"samples", m.samples}, {"relative_damping", m.relative_damping}, {"rank", m.rank}};
  return j;
}

inline SurrogateModel surrogate_from_json(const json& j, const std::string& where) {
  try {
    if (j.at("kind") != "vbflex.surrogate") throw Error(where + ": not a surrogate model file");
    SurrogateModel m;
    const json& f = j.at("features");
    m.features.lags = f.at("lags").get<std::size_t>();
    m.features.interactions = f.at("interactions").get<bool>();
    m.features.squares = f.at("squares").get<bool>();
    m.features.soc_q = f.at("soc_q").get<bool>();
    m.intercept = j.at("intercept").get<double>();
    const auto names = feature_names(m.features);
    const json& coef = j.at("coefficients");
    if (coef.size() != names.size()) throw Error(where + ": coefficient count does not match the feature spec");
    m.coef.resize(static_cast<Eigen::Index>(names.size()));
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (coef[i].at("feature") != names[i]) throw Error(where + ": coefficient " + std::to_string(i) + " is not " + names[i]);
      m.coef[static_cast<Eigen::Index>(i)] = coef[i].at("value").get<double>();
    }
    const json& t = j.at("training");
    m.dataset = t.at("dataset").get<std::string>();
    m.samples = t.at("samples").get<std::size_t>();
    m.relative_damping = t.at("relative_damping").get<double>();
    m.rank = t.at("rank").get<Eigen::Index>();
    return m;
  } catch (const json::exception& e) {
    throw Error(where + ": malformed surrogate model: " + e.what());
  }
}

inline json to_json(const VBAggregate& vb) {
  json j;
  j["kind"] = "vbflex.vb_aggregate";
  j["convention"] = to_string(vb.convention);
  j["alpha"] = vb.alpha;
  const auto n = vb.zones();
  std::vector<double> A;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < n; ++k) A.push_back(vb.A_tilde(i, k));
  j["A_tilde_row_major"] = A;
  j["B_tilde"] = std::vector<double>(vb.B_tilde.data(), vb.B_tilde.data() + n);
  j["w"] = std::vector<double>(vb.w.data(), vb.w.data() + n);
  std::vector<std::vector<double>> qb;
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<double> row;
    for (Eigen::Index k = 0; k < vb.q_base.cols(); ++k) row.push_back(vb.q_base(i, k));
    qb.push_back(row);
  }
  j["q_base"] = qb;
  j["beta_min"] = vb.beta_min;
  j["beta_max"] = vb.beta_max;
  j["Q_min"] = vb.Q_min;
  j["Q_max"] = vb.Q_max;
  j["baseline_violations"] = vb.baseline_violations.size();
  return j;
}

inline VBAggregate vb_from_json(const json& j, const std::string& where) {
  try {
    if (j.at("kind") != "vbflex.vb_aggregate") throw Error(where + ": not a battery model file");
    VBAggregate vb;
    vb.convention = parse_convention(j.at("convention").get<std::string>());
    vb.alpha = j.at("alpha").get<double>();
    const auto w = j.at("w").get<std::vector<double>>();
    const auto n = static_cast<Eigen::Index>(w.size());
    vb.w = Eigen::Map<const Vec>(w.data(), n);
    const auto B = j.at("B_tilde").get<std::vector<double>>();
    const auto A = j.at("A_tilde_row_major").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(B.size()) != n || static_cast<Eigen::Index>(A.size()) != n * n)
      throw Error(where + ": inconsistent matrix sizes");
    vb.B_tilde = Eigen::Map<const Vec>(B.data(), n);
    vb.A_tilde.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index k = 0; k < n; ++k) vb.A_tilde(i, k) = A[static_cast<std::size_t>(i * n + k)];
    vb.wB = vb.w.cwiseProduct(vb.B_tilde);
    const auto qb = j.at("q_base").get<std::vector<std::vector<double>>>();
    if (static_cast<Eigen::Index>(qb.size()) != n) throw Error(where + ": q_base has the wrong number of zones");
    const std::size_t K = qb.empty() ? 0 : qb[0].size();
    vb.q_base.resize(n, static_cast<Eigen::Index>(K));
    for (Eigen::Index i = 0; i < n; ++i) {
      if (qb[static_cast<std::size_t>(i)].size() != K) throw Error(where + ": ragged q_base");
      for (std::size_t k = 0; k < K; ++k) vb.q_base(i, static_cast<Eigen::Index>(k)) = qb[static_cast<std::size_t>(i)][k];
    }
    vb.beta_min = j.at("beta_min").get<std::vector<double>>();
    vb.beta_max = j.at("beta_max").get<std::vector<double>>();
    vb.Q_min = j.at("Q_min").get<std::vector<double>>();
    vb.Q_max = j.at("Q_max").get<std::vector<double>>();
    if (vb.beta_min.size() != K || vb.beta_max.size() != K || vb.Q_min.size() != K || vb.Q_max.size() != K)
      throw Error(where + ": per-step arrays do not match the horizon");
    vb.wBq_base.resize(K);
    for (std::size_t k = 0; k < K; ++k) vb.wBq_base[k] = vb.wB.dot(vb.q_base.col(static_cast<Eigen::Index>(k)));
    return vb;
  } catch (const json::exception& e) {
    throw Error(where + ": malformed battery model: " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Output directory with manifest

/// Collects the files of one command run. On failure the files written so far
/// are removed; on success a manifest with per-file checksums is written.
class OutputDir {
 public:
  explicit OutputDir(fs::path dir) : dir_(std::move(dir)) {}

  const fs::path& path() const { return dir_; }

  void write(const std::string& name, const std::string& content) {
    fs::create_directories(dir_);
    const fs::path p = dir_ / name;
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(p.string() + ": cannot write");
    out << content;
    out.close();
    if (!out) throw Error(p.string() + ": write failed");
    files_.push_back({name, hex64(fnv1a64(content)), content.size()});
  }

  void write_manifest(const ScenarioConfig& cfg, const std::string& command, const std::vector<std::string>& args,
                      std::uint64_t seed, const json& extra = json::object()) {
    json m = extra;
    m["tool"] = "vbflex";
    m["version"] = VBFLEX_VERSION;
    m["command"] = command;
    m["args"] = args;
    m["seed"] = seed;
    m["config_hash"] = cfg.hash;
    m["config"] = cfg.resolved;
    json outs = json::array();
    for (const auto& f : files_) outs.push_back({{"file", f.name}, {"fnv1a64", f.checksum}, {"bytes", f.bytes}});
    m["outputs"] = outs;
    write("manifest.json", m.dump(2) + "\n");
  }

  void remove_partial() noexcept {
    for (const auto& f : files_) {
      std::error_code ec;
      fs::remove(dir_ / f.name, ec);
    }
    files_.clear();
  }

  std::vector<std::string> files() const {
    std::vector<std::string> out;
    for (const auto& f : files_) out.push_back(f.name);
    return out;
  }

 private:
  struct Entry {
    std::string name;
    std::string checksum;
    std::size_t bytes;
  };
  fs::path dir_;
  std::vector<Entry> files_;
};

}  // namespace vbflex
