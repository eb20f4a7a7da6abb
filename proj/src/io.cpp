#include "peakflow/io.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace peakflow {

void ensure_dir(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) fail(ErrorCode::io_error, "cannot create directory " + path);
}

void write_pkfld(const Field& field, double t, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) fail(ErrorCode::io_error, "cannot open " + path);
  const Grid& g = field.grid;
  if (g.n == 2)
    std::fprintf(f, "PKFLD n=2 cells=%d,%d lengths=%.17g,%.17g epsilon=%.17g t=%.17g\n",
                 g.cells[0], g.cells[1], g.lengths[0], g.lengths[1], field.epsilon, t);
  else
    std::fprintf(f, "PKFLD n=1 cells=%d lengths=%.17g epsilon=%.17g t=%.17g\n", g.cells[0],
                 g.lengths[0], field.epsilon, t);
  // doubles are written as-is; this code targets little-endian hosts
  std::fwrite(field.values.data(), sizeof(double), field.values.size(), f);
  std::fclose(f);
}

PkfldData read_pkfld(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) fail(ErrorCode::io_error, "cannot open " + path);
  char header[512];
  if (!std::fgets(header, sizeof(header), f)) {
    std::fclose(f);
    fail(ErrorCode::io_error, "missing PKFLD header in " + path);
  }
  int n = 0, c1 = 0, c2 = 0;
  double l1 = 0, l2 = 0, eps = 0, t = 0;
  bool ok = false;
  if (std::sscanf(header, "PKFLD n=2 cells=%d,%d lengths=%lg,%lg epsilon=%lg t=%lg", &c1, &c2,
                  &l1, &l2, &eps, &t) == 6) {
    n = 2;
    ok = true;
  } else if (std::sscanf(header, "PKFLD n=1 cells=%d lengths=%lg epsilon=%lg t=%lg", &c1, &l1,
                         &eps, &t) == 4) {
    n = 1;
    ok = true;
  }
  if (!ok) {
    std::fclose(f);
    fail(ErrorCode::io_error, "malformed PKFLD header in " + path);
  }
  PkfldData out;
  out.field.grid = n == 2 ? Grid::make_2d(l1, l2, c1, c2) : Grid::make_1d(l1, c1);
  out.field.epsilon = eps;
  out.t = t;
  out.field.values.resize(out.field.grid.cell_count());
  std::size_t got = std::fread(out.field.values.data(), sizeof(double),
                               out.field.values.size(), f);
  std::fclose(f);
  if (got != out.field.values.size())
    fail(ErrorCode::io_error, "truncated PKFLD payload in " + path);
  return out;
}

void write_field_csv(const Field& field, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) fail(ErrorCode::io_error, "cannot open " + path);
  const Grid& g = field.grid;
  if (g.n == 2) {
    std::fprintf(f, "x,y,value\n");
    for (int j = 0; j < g.cells[1]; ++j)
      for (int i = 0; i < g.cells[0]; ++i)
        std::fprintf(f, "%.17g,%.17g,%.17g\n", g.centre(0, i), g.centre(1, j), field.at(i, j));
  } else {
    std::fprintf(f, "x,value\n");
    for (int i = 0; i < g.cells[0]; ++i)
      std::fprintf(f, "%.17g,%.17g\n", g.centre(0, i), field.at(i));
  }
  std::fclose(f);
}

void write_history_csv(const std::vector<HistoryRow>& history, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) fail(ErrorCode::io_error, "cannot open " + path);
  std::fprintf(f, "t,A,B,I_s,I_s_eta,lambda\n");
  for (const HistoryRow& r : history)
    std::fprintf(f, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.t, r.report.A, r.report.B,
                 r.report.I_s, r.report.I_s_eta, r.report.lambda);
  std::fclose(f);
}

void write_config_track_csv(const std::vector<TrackRow>& track, const Grid& grid,
                            const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) fail(ErrorCode::io_error, "cannot open " + path);
  std::fprintf(f, "t,frozen,above_threshold,is_peak,I_s_eta,linf_gap,band,config\n");
  for (const TrackRow& r : track) {
    std::string cfg = serialize_peak_config(r.normalized.config);
    for (char& c : cfg)
      if (c == '\n') c = ';';
    std::fprintf(f, "%.17g,%d,%d,%d,%.17g,%.17g,%s,%s\n", r.t, r.frozen ? 1 : 0,
                 r.above_threshold ? 1 : 0, r.is_peak ? 1 : 0, r.I_s_eta, r.linf_gap,
                 r.band ? traverse_condition_name(*r.band) : "-", cfg.c_str());
  }
  std::fclose(f);
  (void)grid;
}

KeyValueConfig KeyValueConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::config_error, "config not found: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str());
}

namespace {
std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  std::size_t b = s.find_last_not_of(" \t\r");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}
} // namespace

KeyValueConfig KeyValueConfig::parse_string(const std::string& text) {
  KeyValueConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        fail(ErrorCode::config_error, "bad section header at line " + std::to_string(lineno));
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorCode::config_error, "expected key = value at line " + std::to_string(lineno));
    cfg.data_[section][trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return cfg;
}

bool KeyValueConfig::has(const std::string& section, const std::string& key) const {
  auto s = data_.find(section);
  return s != data_.end() && s->second.count(key) > 0;
}

std::string KeyValueConfig::get(const std::string& section, const std::string& key,
                                const std::string& fallback) const {
  auto s = data_.find(section);
  if (s == data_.end()) return fallback;
  auto k = s->second.find(key);
  return k == s->second.end() ? fallback : k->second;
}

double KeyValueConfig::get(const std::string& section, const std::string& key,
                           double fallback) const {
  if (!has(section, key)) return fallback;
  return std::stod(get(section, key, ""));
}

int KeyValueConfig::get(const std::string& section, const std::string& key, int fallback) const {
  if (!has(section, key)) return fallback;
  return std::stoi(get(section, key, ""));
}

void KeyValueConfig::set(const std::string& section, const std::string& key,
                         const std::string& value) {
  data_[section][key] = value;
}

void KeyValueConfig::set(const std::string& section, const std::string& key, double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  data_[section][key] = buf;
}

void KeyValueConfig::set(const std::string& section, const std::string& key, int value) {
  data_[section][key] = std::to_string(value);
}

std::string KeyValueConfig::dump() const {
  std::string out;
  for (const auto& [section, entries] : data_) {
    out += "[" + section + "]\n";
    for (const auto& [k, v] : entries) out += k + " = " + v + "\n";
    out += "\n";
  }
  return out;
}

void KeyValueConfig::write_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io_error, "cannot open " + path);
  out << dump();
}

std::string serialize_peak_config(const PeakConfig& config) {
  char buf[128];
  std::string out;
  std::snprintf(buf, sizeof(buf), "epsilon = %.17g\n", config.epsilon);
  out += buf;
  for (int i = 0; i < config.k(); ++i) {
    std::snprintf(buf, sizeof(buf), "p%d = %.17g,%.17g\n", i + 1, config.interior[i][0],
                  config.interior[i][1]);
    out += buf;
    std::snprintf(buf, sizeof(buf), "a%d = %.17g\n", i + 1, config.a[i]);
    out += buf;
  }
  for (int j = 0; j < config.l(); ++j) {
    std::snprintf(buf, sizeof(buf), "q%d = edge%d,%.17g\n", j + 1, config.boundary[j].edge,
                  config.boundary[j].arc);
    out += buf;
    std::snprintf(buf, sizeof(buf), "b%d = %.17g\n", j + 1, config.b[j]);
    out += buf;
  }
  return out;
}

PeakConfig parse_peak_config(const std::string& text) {
  PeakConfig cfg;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key == "epsilon") {
      cfg.epsilon = std::stod(val);
    } else if (key[0] == 'p') {
      double x = 0, y = 0;
      std::sscanf(val.c_str(), "%lg,%lg", &x, &y);
      cfg.interior.push_back({x, y});
    } else if (key[0] == 'a') {
      cfg.a.push_back(std::stod(val));
    } else if (key[0] == 'q') {
      int edge = 0;
      double arc = 0;
      std::sscanf(val.c_str(), "edge%d,%lg", &edge, &arc);
      cfg.boundary.push_back({edge, arc});
    } else if (key[0] == 'b') {
      cfg.b.push_back(std::stod(val));
    }
  }
  return cfg;
}

} // namespace peakflow
