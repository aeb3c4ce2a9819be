#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nrdr/geometry.hpp"
#include "nrdr/rfs.hpp"

namespace nrdr {

// One detection row as stored on disk. Angles are radians, range meters.
struct RadarScanRecord {
  std::int64_t timestamp_us = 0;
  double range_m = 0.0;
  double azimuth_rad = 0.0;
  double elevation_rad = 0.0;
  double range_rate_mps = 0.0;
  double amplitude = 0.0;
  bool validity = true;
  int mode = 2;     // 0, 1, 2; caps the legal range
  int quality = 2;  // 0..2

  void validate() const;  // throws DataError on invariant violations
  static double range_cap(int mode);
};

struct RadarScan {
  SensorPose pose;    // identity orientation; time from the scan timestamp
  PointCloud cloud;   // sensor frame, Cartesian
};

struct ScanSet {
  std::vector<RadarScan> scans;       // ascending timestamp
  std::size_t dropped_invalid = 0;    // validity = 0 rows skipped on read
};

enum class ScanFormat { Csv, Jsonl };

// Infer a format from the file extension (.csv / .jsonl / .ndjson).
ScanFormat scan_format_from_path(const std::string& path);

// Read detection rows, drop validity=0 rows (counted), reject any remaining
// row that breaks the schema invariants, group rows into scans by exact
// timestamp, and convert spherical fields to Cartesian points. Attribute
// columns (amplitude, range_rate, mode, quality) ride along per point, as do
// the exact spherical fields (range_m, azimuth_rad, elevation_rad) so a
// read/write cycle reproduces the file byte for byte.
ScanSet read_scan_file(const std::string& path, ScanFormat format);

// Inverse of read_scan_file: points back to spherical rows, canonical column
// order, one header row for CSV. Spherical attribute columns are written
// verbatim when they still match the point; otherwise the point is converted.
// Missing attribute columns default to amplitude 0, range_rate 0, mode 2,
// quality 2; validity is written as 1.
void write_scan_file(const std::vector<RadarScan>& scans, const std::string& path,
                     ScanFormat format);

// Point cloud files: CSV with an x,y,z[,attribute...] header, or JSON-lines
// with one {"x":..,"y":..,"z":..} object per line. Doubles are written with
// round-trip-exact formatting in both.
PointCloud read_point_cloud(const std::string& path, ScanFormat format);
void write_point_cloud(const PointCloud& cloud, const std::string& path,
                       ScanFormat format);

// Shortest decimal form that parses back to exactly the same double.
std::string format_double(double v);
double parse_double(const std::string& text, const std::string& context);

}  // namespace nrdr
