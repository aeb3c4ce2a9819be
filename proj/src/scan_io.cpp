#include "nrdr/scan_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "nrdr/errors.hpp"
#include "json_util.hpp"

namespace nrdr {

namespace {

constexpr double kAzimuthCap = 50.0 * RadarConfig::kDegree;

const char* kScanHeader =
    "timestamp_us,range_m,azimuth_rad,elevation_rad,range_rate_mps,amplitude,"
    "validity,mode,quality";

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

std::int64_t parse_i64(const std::string& text, const std::string& context) {
  std::int64_t v = 0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end)
    throw DataError(context + ": expected an integer, got '" + text + "'");
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw NumericError("cannot format double");
  return std::string(buf, ptr);
}

double parse_double(const std::string& text, const std::string& context) {
  double v = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end)
    throw DataError(context + ": expected a number, got '" + text + "'");
  return v;
}

double RadarScanRecord::range_cap(int mode) {
  switch (mode) {
    case 0: return 102.0;
    case 1: return 178.5;
    case 2: return 250.0;
  }
  throw DataError("scan record: mode must be 0, 1, or 2");
}

void RadarScanRecord::validate() const {
  if (!std::isfinite(range_m) || !std::isfinite(azimuth_rad) ||
      !std::isfinite(elevation_rad) || !std::isfinite(range_rate_mps) ||
      !std::isfinite(amplitude))
    throw DataError("scan record: non-finite field");
  if (range_m < 0.0) throw DataError("scan record: negative range");
  const double cap = range_cap(mode);
  if (range_m > cap)
    throw DataError("scan record: range " + format_double(range_m) +
                    " exceeds mode " + std::to_string(mode) + " cap " +
                    format_double(cap));
  if (std::abs(azimuth_rad) > kAzimuthCap)
    throw DataError("scan record: azimuth outside +-50 degrees");
  if (quality < 0 || quality > 2)
    throw DataError("scan record: quality must be 0..2");
}

ScanFormat scan_format_from_path(const std::string& path) {
  const auto dot = path.rfind('.');
  const std::string ext = dot == std::string::npos ? "" : path.substr(dot);
  if (ext == ".csv") return ScanFormat::Csv;
  if (ext == ".jsonl" || ext == ".ndjson") return ScanFormat::Jsonl;
  throw ConfigError("cannot infer file format from '" + path +
                    "' (expected .csv or .jsonl)");
}

namespace {

RadarScanRecord record_from_fields(const std::vector<std::string>& fields,
                                   const std::string& context) {
  if (fields.size() != 9)
    throw DataError(context + ": expected 9 columns, got " +
                    std::to_string(fields.size()));
  RadarScanRecord rec;
  rec.timestamp_us = parse_i64(fields[0], context + " timestamp_us");
  rec.range_m = parse_double(fields[1], context + " range_m");
  rec.azimuth_rad = parse_double(fields[2], context + " azimuth_rad");
  rec.elevation_rad = parse_double(fields[3], context + " elevation_rad");
  rec.range_rate_mps = parse_double(fields[4], context + " range_rate_mps");
  rec.amplitude = parse_double(fields[5], context + " amplitude");
  const std::int64_t valid = parse_i64(fields[6], context + " validity");
  if (valid != 0 && valid != 1)
    throw DataError(context + ": validity must be 0 or 1");
  rec.validity = valid == 1;
  rec.mode = static_cast<int>(parse_i64(fields[7], context + " mode"));
  rec.quality = static_cast<int>(parse_i64(fields[8], context + " quality"));
  return rec;
}

RadarScanRecord record_from_json(const Json& j, const std::string& context) {
  check_keys(j, context,
             {"timestamp_us", "range_m", "azimuth_rad", "elevation_rad",
              "range_rate_mps", "amplitude", "validity", "mode", "quality"});
  RadarScanRecord rec;
  rec.timestamp_us = get_int(j, context, "timestamp_us");
  rec.range_m = get_number(j, context, "range_m");
  rec.azimuth_rad = get_number(j, context, "azimuth_rad");
  rec.elevation_rad = get_number(j, context, "elevation_rad");
  rec.range_rate_mps = get_number(j, context, "range_rate_mps");
  rec.amplitude = get_number(j, context, "amplitude");
  const std::int64_t valid = get_int(j, context, "validity");
  if (valid != 0 && valid != 1)
    throw DataError(context + ": validity must be 0 or 1");
  rec.validity = valid == 1;
  rec.mode = static_cast<int>(get_int(j, context, "mode"));
  rec.quality = static_cast<int>(get_int(j, context, "quality"));
  return rec;
}

std::vector<RadarScanRecord> read_records(const std::string& path,
                                          ScanFormat format,
                                          std::size_t* dropped) {
  std::ifstream in(path);
  if (!in) throw DataError("scan file: cannot open '" + path + "'");

  std::vector<RadarScanRecord> records;
  std::string line;
  std::size_t line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::string context = path + ":" + std::to_string(line_no);
    RadarScanRecord rec;
    if (format == ScanFormat::Csv) {
      if (!saw_header) {
        std::string stripped = line;
        if (!stripped.empty() && stripped.back() == '\r') stripped.pop_back();
        if (stripped != kScanHeader)
          throw DataError(context + ": bad header (expected '" +
                          std::string(kScanHeader) + "')");
        saw_header = true;
        continue;
      }
      rec = record_from_fields(split_csv_line(line), context);
    } else {
      Json j;
      try {
        j = Json::parse(line);
      } catch (const Json::parse_error& e) {
        throw DataError(context + ": invalid JSON: " + e.what());
      }
      rec = record_from_json(j, context);
    }
    if (!rec.validity) {
      ++*dropped;
      continue;
    }
    try {
      rec.validate();
    } catch (const DataError& e) {
      throw DataError(context + ": " + e.what());
    }
    records.push_back(rec);
  }
  if (format == ScanFormat::Csv && !saw_header)
    throw DataError("scan file: '" + path + "' is empty");
  if (records.empty() && *dropped == 0)
    throw DataError("scan file: '" + path + "' contains no records");
  return records;
}

}  // namespace

ScanSet read_scan_file(const std::string& path, ScanFormat format) {
  ScanSet out;
  std::vector<RadarScanRecord> records =
      read_records(path, format, &out.dropped_invalid);

  std::map<std::int64_t, PointCloud> by_time;
  for (const auto& rec : records) {
    PointCloud& cloud = by_time[rec.timestamp_us];
    cloud.points.push_back(
        spherical_to_cartesian(rec.range_m, rec.azimuth_rad, rec.elevation_rad));
    cloud.attributes["amplitude"].push_back(rec.amplitude);
    cloud.attributes["range_rate"].push_back(rec.range_rate_mps);
    cloud.attributes["mode"].push_back(rec.mode);
    cloud.attributes["quality"].push_back(rec.quality);
    // Keep the file's exact spherical fields so a later write can reproduce
    // them verbatim; converting back through cartesian coordinates can move
    // the last bit.
    cloud.attributes["range_m"].push_back(rec.range_m);
    cloud.attributes["azimuth_rad"].push_back(rec.azimuth_rad);
    cloud.attributes["elevation_rad"].push_back(rec.elevation_rad);
  }
  for (auto& [ts, cloud] : by_time) {
    RadarScan scan;
    scan.pose.time = static_cast<double>(ts) * 1e-6;
    scan.cloud = std::move(cloud);
    out.scans.push_back(std::move(scan));
  }
  return out;
}

namespace {

double attribute_or(const PointCloud& cloud, const char* name, std::size_t i,
                    double fallback) {
  auto it = cloud.attributes.find(name);
  if (it == cloud.attributes.end()) return fallback;
  return it->second[i];
}

// Prefer spherical values carried over from a previous read, as long as they
// still describe the point; otherwise convert the point.
Spherical spherical_for_point(const PointCloud& cloud, std::size_t i) {
  const auto r = cloud.attributes.find("range_m");
  const auto az = cloud.attributes.find("azimuth_rad");
  const auto el = cloud.attributes.find("elevation_rad");
  if (r != cloud.attributes.end() && az != cloud.attributes.end() &&
      el != cloud.attributes.end()) {
    Spherical stored;
    stored.range = r->second[i];
    stored.azimuth = az->second[i];
    stored.elevation = el->second[i];
    const Vec3 back =
        spherical_to_cartesian(stored.range, stored.azimuth, stored.elevation);
    if (back.x() == cloud.points[i].x() && back.y() == cloud.points[i].y() &&
        back.z() == cloud.points[i].z())
      return stored;
  }
  return cartesian_to_spherical(cloud.points[i]);
}

std::vector<RadarScanRecord> scans_to_records(const std::vector<RadarScan>& scans) {
  std::vector<RadarScanRecord> records;
  for (const auto& scan : scans) {
    scan.cloud.validate();
    for (std::size_t i = 0; i < scan.cloud.size(); ++i) {
      const Spherical sph = spherical_for_point(scan.cloud, i);
      RadarScanRecord rec;
      rec.timestamp_us = static_cast<std::int64_t>(std::llround(scan.pose.time * 1e6));
      rec.range_m = sph.range;
      rec.azimuth_rad = sph.azimuth;
      rec.elevation_rad = sph.elevation;
      rec.range_rate_mps = attribute_or(scan.cloud, "range_rate", i, 0.0);
      rec.amplitude = attribute_or(scan.cloud, "amplitude", i, 0.0);
      rec.validity = true;
      rec.mode = static_cast<int>(attribute_or(scan.cloud, "mode", i, 2.0));
      rec.quality = static_cast<int>(attribute_or(scan.cloud, "quality", i, 2.0));
      rec.validate();
      records.push_back(rec);
    }
  }
  return records;
}

Json record_to_json(const RadarScanRecord& rec) {
  Json j;
  j["timestamp_us"] = rec.timestamp_us;
  j["range_m"] = rec.range_m;
  j["azimuth_rad"] = rec.azimuth_rad;
  j["elevation_rad"] = rec.elevation_rad;
  j["range_rate_mps"] = rec.range_rate_mps;
  j["amplitude"] = rec.amplitude;
  j["validity"] = rec.validity ? 1 : 0;
  j["mode"] = rec.mode;
  j["quality"] = rec.quality;
  return j;
}

}  // namespace

void write_scan_file(const std::vector<RadarScan>& scans, const std::string& path,
                     ScanFormat format) {
  const std::vector<RadarScanRecord> records = scans_to_records(scans);
  std::ofstream out(path);
  if (!out) throw DataError("scan file: cannot write '" + path + "'");
  if (format == ScanFormat::Csv) {
    out << kScanHeader << "\n";
    for (const auto& rec : records) {
      out << rec.timestamp_us << ',' << format_double(rec.range_m) << ','
          << format_double(rec.azimuth_rad) << ','
          << format_double(rec.elevation_rad) << ','
          << format_double(rec.range_rate_mps) << ','
          << format_double(rec.amplitude) << ',' << (rec.validity ? 1 : 0) << ','
          << rec.mode << ',' << rec.quality << "\n";
    }
  } else {
    for (const auto& rec : records) out << record_to_json(rec).dump() << "\n";
  }
  if (!out) throw DataError("scan file: write failed for '" + path + "'");
}

PointCloud read_point_cloud(const std::string& path, ScanFormat format) {
  std::ifstream in(path);
  if (!in) throw DataError("point cloud: cannot open '" + path + "'");

  PointCloud cloud;
  std::string line;
  std::size_t line_no = 0;

  if (format == ScanFormat::Csv) {
    std::vector<std::string> columns;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty() || line == "\r") continue;
      const std::string context = path + ":" + std::to_string(line_no);
      const std::vector<std::string> fields = split_csv_line(line);
      if (columns.empty()) {
        columns = fields;
        if (columns.size() < 3 || columns[0] != "x" || columns[1] != "y" ||
            columns[2] != "z")
          throw DataError(context + ": header must start with x,y,z");
        for (std::size_t c = 3; c < columns.size(); ++c)
          cloud.attributes[columns[c]] = {};
        continue;
      }
      if (fields.size() != columns.size())
        throw DataError(context + ": expected " + std::to_string(columns.size()) +
                        " columns, got " + std::to_string(fields.size()));
      cloud.points.emplace_back(parse_double(fields[0], context + " x"),
                                parse_double(fields[1], context + " y"),
                                parse_double(fields[2], context + " z"));
      for (std::size_t c = 3; c < columns.size(); ++c)
        cloud.attributes[columns[c]].push_back(
            parse_double(fields[c], context + " " + columns[c]));
    }
    if (columns.empty())
      throw DataError("point cloud: '" + path + "' is empty");
  } else {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty() || line == "\r") continue;
      const std::string context = path + ":" + std::to_string(line_no);
      Json j;
      try {
        j = Json::parse(line);
      } catch (const Json::parse_error& e) {
        throw DataError(context + ": invalid JSON: " + e.what());
      }
      require_object(j, context);
      cloud.points.emplace_back(get_number(j, context, "x"),
                                get_number(j, context, "y"),
                                get_number(j, context, "z"));
      for (const auto& item : j.items()) {
        if (item.key() == "x" || item.key() == "y" || item.key() == "z") continue;
        if (!item.value().is_number())
          throw DataError(context + ": attribute '" + item.key() +
                          "' must be a number");
        auto& column = cloud.attributes[item.key()];
        // Attributes must appear on every line to stay columnar.
        if (column.size() != cloud.points.size() - 1)
          throw DataError(context + ": attribute '" + item.key() +
                          "' missing on an earlier line");
        column.push_back(item.value().get<double>());
      }
      for (auto& [name, column] : cloud.attributes)
        if (column.size() != cloud.points.size())
          throw DataError(context + ": attribute '" + name + "' missing");
    }
  }
  cloud.validate();
  return cloud;
}

void write_point_cloud(const PointCloud& cloud, const std::string& path,
                       ScanFormat format) {
  cloud.validate();
  std::ofstream out(path);
  if (!out) throw DataError("point cloud: cannot write '" + path + "'");
  if (format == ScanFormat::Csv) {
    out << "x,y,z";
    for (const auto& [name, column] : cloud.attributes) {
      (void)column;
      out << ',' << name;
    }
    out << "\n";
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      out << format_double(cloud.points[i].x()) << ','
          << format_double(cloud.points[i].y()) << ','
          << format_double(cloud.points[i].z());
      for (const auto& [name, column] : cloud.attributes) {
        (void)name;
        out << ',' << format_double(column[i]);
      }
      out << "\n";
    }
  } else {
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      Json j;
      j["x"] = cloud.points[i].x();
      j["y"] = cloud.points[i].y();
      j["z"] = cloud.points[i].z();
      for (const auto& [name, column] : cloud.attributes) j[name] = column[i];
      out << j.dump() << "\n";
    }
  }
  if (!out) throw DataError("point cloud: write failed for '" + path + "'");
}

}  // namespace nrdr
