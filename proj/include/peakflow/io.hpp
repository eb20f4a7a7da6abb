#ifndef PEAKFLOW_IO_HPP
#define PEAKFLOW_IO_HPP

#include <map>
#include <string>

#include "peakflow/flow.hpp"
#include "peakflow/grid.hpp"

namespace peakflow {

void ensure_dir(const std::string& path);

/// PKFLD snapshot: ASCII header
///   PKFLD n=<n> cells=<c1[,c2]> lengths=<l1[,l2]> epsilon=<e> t=<t>
/// followed by one little-endian 64-bit float per cell, row-major.
void write_pkfld(const Field& field, double t, const std::string& path);

struct PkfldData {
  Field field;
  double t = 0.0;
};
PkfldData read_pkfld(const std::string& path);

/// CSV mirror of the same data: header x[,y],value.
void write_field_csv(const Field& field, const std::string& path);

/// run.csv rows: t,A,B,I_s,I_s_eta,lambda.
void write_history_csv(const std::vector<HistoryRow>& history, const std::string& path);

void write_config_track_csv(const std::vector<TrackRow>& track, const Grid& grid,
                            const std::string& path);

/// Flat sectioned key-value configuration text: [section] lines, key = value,
/// '#' comments. No nesting.
class KeyValueConfig {
public:
  static KeyValueConfig parse_file(const std::string& path);
  static KeyValueConfig parse_string(const std::string& text);

  bool has(const std::string& section, const std::string& key) const;
  std::string get(const std::string& section, const std::string& key,
                  const std::string& fallback) const;
  double get(const std::string& section, const std::string& key, double fallback) const;
  int get(const std::string& section, const std::string& key, int fallback) const;

  void set(const std::string& section, const std::string& key, const std::string& value);
  void set(const std::string& section, const std::string& key, double value);
  void set(const std::string& section, const std::string& key, int value);

  /// Serialized with sections sorted, keys sorted inside each section.
  std::string dump() const;
  void write_file(const std::string& path) const;

private:
  std::map<std::string, std::map<std::string, std::string>> data_;
};

/// Key-value serialization of a peak configuration (positions, coefficients,
/// epsilon) used inside run directories.
std::string serialize_peak_config(const PeakConfig& config);
PeakConfig parse_peak_config(const std::string& text);

} // namespace peakflow

#endif
