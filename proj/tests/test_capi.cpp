#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nrdr.h"
#include "nrdr/rfs.hpp"
#include "nrdr/scan_io.hpp"

namespace fs = std::filesystem;

namespace {

fs::path unique_dir(const std::string& stem) {
  const fs::path dir =
      fs::temp_directory_path() / (stem + "." + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  REQUIRE(out.good());
  out << text;
}

std::vector<double> split_row(const std::string& line) {
  std::vector<double> out;
  std::istringstream in(line);
  std::string field;
  while (std::getline(in, field, ',')) out.push_back(std::stod(field));
  return out;
}

std::string last_error() { return nrdr_last_error(); }

}  // namespace

TEST_SUITE("capi") {

TEST_CASE("version and null-argument handling") {
  CHECK(std::string(nrdr_version()) == "0.1.0");

  nrdr_scene* scene = nullptr;
  CHECK(nrdr_scene_load(nullptr, &scene) == NRDR_ERR_CONFIG);
  CHECK(last_error().find("null argument") != std::string::npos);
  CHECK(scene == nullptr);

  CHECK(nrdr_cloud_point(nullptr, 0, nullptr) == NRDR_ERR_CONFIG);
  CHECK(nrdr_run_experiment(nullptr, nullptr, nullptr) == NRDR_ERR_CONFIG);
  CHECK(nrdr_cloud_size(nullptr) == 0);
  CHECK(nrdr_scan_set_size(nullptr) == 0);
}

TEST_CASE("scenes build, persist, and answer distance queries") {
  const fs::path dir = unique_dir("nrdr_capi_scene");

  nrdr_scene* scene = nullptr;
  REQUIRE(nrdr_scene_example(7, &scene) == NRDR_OK);

  double d = 0.0;
  const double below[3] = {0.0, 0.0, -5.0};
  REQUIRE(nrdr_scene_signed_distance(scene, below, 0.0, &d) == NRDR_OK);
  CHECK(d == doctest::Approx(-4.0));

  const fs::path path = dir / "scene.json";
  REQUIRE(nrdr_scene_save(scene, path.string().c_str()) == NRDR_OK);
  nrdr_scene* loaded = nullptr;
  REQUIRE(nrdr_scene_load(path.string().c_str(), &loaded) == NRDR_OK);
  const double probe[3] = {5.0, 1.0, 0.0};
  double d1 = 0.0, d2 = 0.0;
  REQUIRE(nrdr_scene_signed_distance(scene, probe, 1.5, &d1) == NRDR_OK);
  REQUIRE(nrdr_scene_signed_distance(loaded, probe, 1.5, &d2) == NRDR_OK);
  CHECK(d1 == d2);

  // The example scene has one moving actor; removing it opens up the space
  // the actor occupies at t = 0.
  const double inside_actor[3] = {15.0, 4.0, -0.25};
  nrdr_scene* stripped = nullptr;
  REQUIRE(nrdr_scene_without_actor(scene, 0, &stripped) == NRDR_OK);
  double with_actor = 0.0, without = 0.0;
  REQUIRE(nrdr_scene_signed_distance(scene, inside_actor, 0.0, &with_actor) ==
          NRDR_OK);
  REQUIRE(nrdr_scene_signed_distance(stripped, inside_actor, 0.0, &without) ==
          NRDR_OK);
  CHECK(with_actor < 0.0);
  CHECK(without > 0.0);

  nrdr_scene* bad = nullptr;
  CHECK(nrdr_scene_without_actor(scene, 1, &bad) == NRDR_ERR_DATA);
  CHECK(last_error().find("actor") != std::string::npos);
  CHECK(nrdr_scene_load((dir / "absent.json").string().c_str(), &bad) ==
        NRDR_ERR_DATA);

  nrdr_scene_free(stripped);
  nrdr_scene_free(loaded);
  nrdr_scene_free(scene);
  fs::remove_all(dir);
}

TEST_CASE("point clouds round trip through the C interface") {
  const fs::path dir = unique_dir("nrdr_capi_cloud");
  nrdr::PointCloud fixture;
  fixture.points = {nrdr::Vec3(0.25, -1.5, 3.0), nrdr::Vec3(4.0, 0.125, -2.0)};
  fixture.attributes["amplitude"] = {7.5, 1.25};
  const fs::path csv = dir / "cloud.csv";
  nrdr::write_point_cloud(fixture, csv.string(), nrdr::ScanFormat::Csv);

  nrdr_cloud* cloud = nullptr;
  REQUIRE(nrdr_cloud_read(csv.string().c_str(), &cloud) == NRDR_OK);
  CHECK(nrdr_cloud_size(cloud) == 2);
  double xyz[3] = {0, 0, 0};
  REQUIRE(nrdr_cloud_point(cloud, 0, xyz) == NRDR_OK);
  CHECK(xyz[0] == 0.25);
  CHECK(xyz[1] == -1.5);
  CHECK(xyz[2] == 3.0);
  CHECK(nrdr_cloud_point(cloud, 5, xyz) == NRDR_ERR_DATA);

  const fs::path jsonl = dir / "cloud.jsonl";
  REQUIRE(nrdr_cloud_write(cloud, jsonl.string().c_str()) == NRDR_OK);
  nrdr_cloud* again = nullptr;
  REQUIRE(nrdr_cloud_read(jsonl.string().c_str(), &again) == NRDR_OK);
  REQUIRE(nrdr_cloud_size(again) == 2);
  double other[3] = {0, 0, 0};
  REQUIRE(nrdr_cloud_point(again, 1, other) == NRDR_OK);
  CHECK(other[0] == 4.0);
  CHECK(other[1] == 0.125);
  CHECK(other[2] == -2.0);

  CHECK(nrdr_cloud_write(cloud, (dir / "cloud.txt").string().c_str()) ==
        NRDR_ERR_CONFIG);
  nrdr_cloud* missing = nullptr;
  CHECK(nrdr_cloud_read((dir / "absent.csv").string().c_str(), &missing) ==
        NRDR_ERR_DATA);

  nrdr_cloud_free(again);
  nrdr_cloud_free(cloud);
  fs::remove_all(dir);
}

TEST_CASE("scan sets expose drop counts and per-scan clouds") {
  const fs::path dir = unique_dir("nrdr_capi_scans");
  const fs::path path = dir / "scans.csv";
  write_text(path,
             "timestamp_us,range_m,azimuth_rad,elevation_rad,range_rate_mps,"
             "amplitude,validity,mode,quality\n"
             "1000000,10,0.1,0,0,1,1,2,2\n"
             "2000000,20,0,0.05,0,1,1,2,2\n"
             "2000000,30,0,0,0,1,0,2,2\n");

  nrdr_scan_set* scans = nullptr;
  REQUIRE(nrdr_scan_set_read(path.string().c_str(), &scans) == NRDR_OK);
  CHECK(nrdr_scan_set_size(scans) == 2);
  CHECK(nrdr_scan_set_dropped(scans) == 1);

  nrdr_cloud* cloud = nullptr;
  REQUIRE(nrdr_scan_set_cloud(scans, 0, &cloud) == NRDR_OK);
  REQUIRE(nrdr_cloud_size(cloud) == 1);
  double xyz[3] = {0, 0, 0};
  REQUIRE(nrdr_cloud_point(cloud, 0, xyz) == NRDR_OK);
  CHECK(xyz[0] == doctest::Approx(10.0 * std::cos(0.1)));
  CHECK(xyz[1] == doctest::Approx(10.0 * std::sin(0.1)));
  CHECK(xyz[2] == doctest::Approx(0.0));

  nrdr_cloud* out_of_range = nullptr;
  CHECK(nrdr_scan_set_cloud(scans, 7, &out_of_range) == NRDR_ERR_DATA);
  nrdr_scan_set* missing = nullptr;
  CHECK(nrdr_scan_set_read((dir / "absent.csv").string().c_str(), &missing) ==
        NRDR_ERR_DATA);

  nrdr_cloud_free(cloud);
  nrdr_scan_set_free(scans);
  fs::remove_all(dir);
}

TEST_CASE("depth rendering writes an elevation-fastest table") {
  const fs::path dir = unique_dir("nrdr_capi_render");
  nrdr_scene* scene = nullptr;
  REQUIRE(nrdr_scene_example(5, &scene) == NRDR_OK);

  const char* radar_json = R"({
    "azimuth_min": -0.2, "azimuth_max": 0.2, "ray_divergence_az": 0.1,
    "elevation_min": -0.05, "elevation_max": 0.05, "ray_divergence_el": 0.05,
    "max_range": 40.0, "num_samples_per_ray": 16
  })";
  const double origin[3] = {0.0, 0.0, 0.0};
  const fs::path csv = dir / "depth.csv";
  REQUIRE(nrdr_render_depth_csv(scene, radar_json, origin, 0.0, 0.0, 3,
                                csv.string().c_str()) == NRDR_OK);

  std::istringstream in(read_text(csv));
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "azimuth_rad,elevation_rad,expected_depth,opacity_sum");
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) rows.push_back(split_row(line));
  REQUIRE(rows.size() == 8);  // 4 azimuth beams x 2 elevation beams
  CHECK(rows[0][0] == doctest::Approx(-0.15).epsilon(1e-9));
  CHECK(rows[0][1] == doctest::Approx(-0.025).epsilon(1e-9));
  CHECK(rows[1][0] == doctest::Approx(-0.15).epsilon(1e-9));
  CHECK(rows[1][1] == doctest::Approx(0.025).epsilon(1e-9));
  CHECK(rows[2][0] == doctest::Approx(-0.05).epsilon(1e-9));
  for (const auto& row : rows) {
    CHECK(row[2] <= 40.0);
    CHECK(row[3] >= 0.0);
    CHECK(row[3] <= 1.0);
  }

  CHECK(nrdr_render_depth_csv(scene, "{oops", origin, 0.0, 0.0, 3,
                              csv.string().c_str()) == NRDR_ERR_CONFIG);
  CHECK(nrdr_render_depth_csv(scene, radar_json, nullptr, 0.0, 0.0, 3,
                              csv.string().c_str()) == NRDR_ERR_CONFIG);
  CHECK(nrdr_render_depth_csv(scene, radar_json, origin, 0.0, 0.0, 3,
                              "/nonexistent_dir/depth.csv") == NRDR_ERR_DATA);

  nrdr_scene_free(scene);
  fs::remove_all(dir);
}

TEST_CASE("metric evaluation reports chamfer, emd and gospa") {
  const fs::path dir = unique_dir("nrdr_capi_metrics");
  write_text(dir / "x.csv", "x,y,z\n0,0,0\n");
  write_text(dir / "y.csv", "x,y,z\n1,0,0\n");
  write_text(dir / "empty.csv", "x,y,z\n");

  nrdr_cloud* x = nullptr;
  nrdr_cloud* y = nullptr;
  nrdr_cloud* empty = nullptr;
  REQUIRE(nrdr_cloud_read((dir / "x.csv").string().c_str(), &x) == NRDR_OK);
  REQUIRE(nrdr_cloud_read((dir / "y.csv").string().c_str(), &y) == NRDR_OK);
  REQUIRE(nrdr_cloud_read((dir / "empty.csv").string().c_str(), &empty) ==
          NRDR_OK);

  char* json = nullptr;
  REQUIRE(nrdr_eval_metrics(x, y, 2.0, &json) == NRDR_OK);
  nlohmann::json m = nlohmann::json::parse(json);
  CHECK(m.at("chamfer").get<double>() == doctest::Approx(1.0));
  CHECK(m.at("emd").get<double>() == doctest::Approx(1.0));
  CHECK(m.at("gospa").at("total").get<double>() == doctest::Approx(1.0));
  CHECK(m.at("gospa").at("localization").get<double>() == doctest::Approx(1.0));
  CHECK(m.at("gospa").at("missed_count") == 0);
  CHECK(m.at("predictions") == 1);
  CHECK(m.at("truth") == 1);
  nrdr_string_free(json);
  json = nullptr;

  // With no predictions the pair metrics are undefined and the one truth
  // point is a miss worth c^p / alpha = 1.
  REQUIRE(nrdr_eval_metrics(empty, y, 2.0, &json) == NRDR_OK);
  m = nlohmann::json::parse(json);
  CHECK(m.at("chamfer").is_null());
  CHECK(m.at("emd").is_null());
  CHECK(m.at("gospa").at("total").get<double>() == doctest::Approx(1.0));
  CHECK(m.at("gospa").at("missed_count") == 1);
  CHECK(m.at("gospa").at("false_count") == 0);
  nrdr_string_free(json);
  json = nullptr;

  CHECK(nrdr_eval_metrics(x, y, -1.0, &json) == NRDR_ERR_CONFIG);
  CHECK(nrdr_eval_metrics(x, y, 2.0, nullptr) == NRDR_ERR_CONFIG);

  nrdr_cloud_free(empty);
  nrdr_cloud_free(y);
  nrdr_cloud_free(x);
  fs::remove_all(dir);
}

TEST_CASE("fit, decoder emission, and experiment runs work end to end") {
  const fs::path dir = unique_dir("nrdr_capi_run");

  nrdr_scene* scene = nullptr;
  REQUIRE(nrdr_scene_example(3, &scene) == NRDR_OK);
  REQUIRE(nrdr_scene_save(scene, (dir / "scene.json").string().c_str()) ==
          NRDR_OK);

  nlohmann::json radar;
  radar["azimuth_min"] = -0.3;
  radar["azimuth_max"] = 0.3;
  radar["ray_divergence_az"] = 0.1;
  radar["elevation_min"] = -0.06;
  radar["elevation_max"] = 0.18;
  radar["ray_divergence_el"] = 0.06;
  radar["max_range"] = 40.0;
  radar["num_samples_per_ray"] = 16;
  radar["confidence_threshold"] = 0.05;
  const std::string radar_json = radar.dump();

  nlohmann::json cfg;
  cfg["scene"] = "scene.json";
  cfg["radar"] = radar;
  cfg["decoder"]["variant"] = "tabular";
  cfg["decoder"]["probabilistic"] = false;
  cfg["train"]["iterations"] = 25;
  cfg["train"]["warmup_steps"] = 5;
  cfg["train"]["lr_max"] = 5e-3;
  cfg["trajectory"]["velocity"] = {0.5, 0.1, 0.0};
  cfg["trajectory"]["num_scans"] = 4;
  cfg["trajectory"]["scan_period"] = 0.5;
  cfg["metric_gates"] = nlohmann::json::array({30.0, nullptr});
  cfg["output_dir"] = "capi_out";
  cfg["master_seed"] = 21;
  const fs::path cfg_path = dir / "exp.json";
  write_text(cfg_path, cfg.dump(2));

  // Train and inspect the summary.
  const fs::path weights = dir / "weights.nrdr";
  char* summary = nullptr;
  REQUIRE(nrdr_fit(cfg_path.string().c_str(), weights.string().c_str(),
                   &summary) == NRDR_OK);
  nlohmann::json s = nlohmann::json::parse(summary);
  CHECK(s.at("iterations") == 25);
  CHECK(s.at("first_loss").is_number());
  CHECK(s.at("final_loss").is_number());
  nrdr_string_free(summary);
  CHECK(fs::exists(weights));
  CHECK(fs::exists(dir / "weights.nrdr.json"));

  // Reload the weights and emit a detection cloud from the training pose.
  nrdr_decoder* decoder = nullptr;
  REQUIRE(nrdr_decoder_load(weights.string().c_str(), &decoder) == NRDR_OK);
  const double origin[3] = {0.0, 0.0, 0.0};
  nrdr_cloud* detections = nullptr;
  REQUIRE(nrdr_decoder_emit(decoder, scene, radar_json.c_str(), origin, 0.0,
                            0.0, 9, 10, &detections) == NRDR_OK);
  CHECK(nrdr_cloud_size(detections) > 0);
  CHECK(nrdr_cloud_size(detections) <= 24);

  // The table was trained for a 24-ray grid; a wider grid cannot index it.
  nrdr_cloud* mismatched = nullptr;
  CHECK(nrdr_decoder_emit(decoder, scene, nullptr, origin, 0.0, 0.0, 9, 10,
                          &mismatched) == NRDR_ERR_DATA);

  const fs::path saved_again = dir / "weights2.nrdr";
  REQUIRE(nrdr_decoder_save(decoder, saved_again.string().c_str()) == NRDR_OK);
  CHECK(read_text(saved_again) == read_text(weights));

  // Full runs: report returned, artifacts written, reruns byte-identical.
  char* report1 = nullptr;
  char* report2 = nullptr;
  const fs::path override_dir = dir / "ovr";
  REQUIRE(nrdr_run_experiment(cfg_path.string().c_str(),
                              override_dir.string().c_str(),
                              &report1) == NRDR_OK);
  REQUIRE(nrdr_run_experiment(cfg_path.string().c_str(),
                              override_dir.string().c_str(),
                              &report2) == NRDR_OK);
  CHECK(std::string(report1) == std::string(report2));
  CHECK(read_text(override_dir / "report.json") == std::string(report1));
  const nlohmann::json report = nlohmann::json::parse(report1);
  CHECK(report.at("loss").at("iterations") == 25);
  CHECK(report.at("test_scan_indices") == std::vector<int>{1, 3});
  nrdr_string_free(report1);
  nrdr_string_free(report2);

  // Without an override the output directory resolves next to the config.
  REQUIRE(nrdr_run_experiment(cfg_path.string().c_str(), nullptr, nullptr) ==
          NRDR_OK);
  CHECK(fs::exists(dir / "capi_out" / "report.json"));

  CHECK(nrdr_fit(cfg_path.string().c_str(), nullptr, nullptr) ==
        NRDR_ERR_CONFIG);
  CHECK(nrdr_fit((dir / "absent.json").string().c_str(),
                 weights.string().c_str(), nullptr) == NRDR_ERR_DATA);

  nrdr_cloud_free(detections);
  nrdr_decoder_free(decoder);
  nrdr_scene_free(scene);
  fs::remove_all(dir);
}

}  // TEST_SUITE("capi")
