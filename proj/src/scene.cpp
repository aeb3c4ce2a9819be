#include "nrdr/scene.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "nrdr/errors.hpp"
#include "nrdr/rng.hpp"
#include "json_util.hpp"

namespace nrdr {

namespace {

Mat3 rot_z(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Mat3 r;
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return r;
}

void check_rotation(const Mat3& r, const std::string& what) {
  if (!r.allFinite()) throw ConfigError(what + ": rotation not finite");
  const double err =
      (r * r.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (err > 1e-9 || r.determinant() < 1.0 - 1e-9)
    throw ConfigError(what + ": rotation is not a proper rotation matrix");
}

}  // namespace

double Primitive::sdf(const Vec3& x) const {
  switch (kind) {
    case ShapeKind::Sphere:
      return (x - center).norm() - radius;
    case ShapeKind::Box: {
      const Vec3 q = rotation.transpose() * (x - center);
      const Vec3 d = q.cwiseAbs() - half_extents;
      const double outside = d.cwiseMax(0.0).norm();
      const double inside = std::min(d.maxCoeff(), 0.0);
      return outside + inside;
    }
    case ShapeKind::HalfSpace:
      return normal.dot(x) - offset;
  }
  throw DataError("primitive has invalid shape kind");
}

void Primitive::validate() const {
  switch (kind) {
    case ShapeKind::Sphere:
      if (!center.allFinite() || !(radius > 0.0))
        throw ConfigError("sphere: radius must be positive and center finite");
      break;
    case ShapeKind::Box:
      if (!center.allFinite() || !(half_extents.minCoeff() > 0.0))
        throw ConfigError("box: half_extents must be positive and center finite");
      check_rotation(rotation, "box");
      break;
    case ShapeKind::HalfSpace:
      if (!normal.allFinite() || !std::isfinite(offset))
        throw ConfigError("half_space: values must be finite");
      if (std::abs(normal.norm() - 1.0) > 1e-9)
        throw ConfigError("half_space: normal must be unit length");
      break;
  }
}

Primitive Primitive::sphere(const Vec3& center, double radius, int material_id) {
  Primitive p;
  p.kind = ShapeKind::Sphere;
  p.center = center;
  p.radius = radius;
  p.material_id = material_id;
  p.validate();
  return p;
}

Primitive Primitive::box(const Vec3& center, const Vec3& half_extents,
                         const Mat3& rotation, int material_id) {
  Primitive p;
  p.kind = ShapeKind::Box;
  p.center = center;
  p.half_extents = half_extents;
  p.rotation = rotation;
  p.material_id = material_id;
  p.validate();
  return p;
}

Primitive Primitive::half_space(const Vec3& normal, double offset,
                                int material_id) {
  Primitive p;
  p.kind = ShapeKind::HalfSpace;
  p.normal = normal;
  p.offset = offset;
  p.material_id = material_id;
  p.validate();
  return p;
}

Vec3 Actor::world_to_body(const Vec3& x, double t) const {
  return rot_z(-yaw_rate * t) * (x - position0 - velocity * t);
}

void Actor::validate() const {
  primitive.validate();
  if (!position0.allFinite() || !velocity.allFinite() ||
      !std::isfinite(yaw_rate))
    throw ConfigError("actor: trajectory must be finite");
}

Scene::Scene(std::vector<Primitive> statics, std::vector<Actor> actors,
             int feature_dim, std::uint64_t feature_seed)
    : statics_(std::move(statics)),
      actors_(std::move(actors)),
      feature_dim_(feature_dim),
      feature_seed_(feature_seed) {
  validate();
  build_feature_table();
}

void Scene::validate() const {
  if (feature_dim_ < 1) throw ConfigError("scene: feature_dim must be >= 1");
  if (statics_.empty() && actors_.empty())
    throw ConfigError("scene: needs at least one primitive");
  for (const auto& p : statics_) p.validate();
  for (const auto& a : actors_) a.validate();
}

void Scene::build_feature_table() {
  features_.clear();
  auto add = [&](int material_id) {
    if (features_.count(material_id)) return;
    Rng rng(mix_seed(feature_seed_, static_cast<std::uint64_t>(
                                        static_cast<std::int64_t>(material_id))));
    VecX f(feature_dim_);
    for (int i = 0; i < feature_dim_; ++i) f[i] = rng.normal();
    const double n = f.norm();
    if (n > 0.0)
      f /= n;
    else
      f[0] = 1.0;
    features_.emplace(material_id, std::move(f));
  };
  for (const auto& p : statics_) add(p.material_id);
  for (const auto& a : actors_) add(a.primitive.material_id);
}

const VecX& Scene::material_feature(int material_id) const {
  auto it = features_.find(material_id);
  if (it == features_.end())
    throw DataError("scene: unknown material id " + std::to_string(material_id));
  return it->second;
}

double Scene::sdf(const Vec3& x, double t) const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : statics_) best = std::min(best, p.sdf(x));
  for (const auto& a : actors_) {
    if (!a.active) continue;
    best = std::min(best, a.primitive.sdf(a.world_to_body(x, t)));
  }
  return best;
}

SceneQuery Scene::query(const Vec3& x, double t, const Vec3& /*d*/) const {
  double best = std::numeric_limits<double>::infinity();
  int best_material = 0;
  bool found = false;
  auto consider = [&](double s, int material_id) {
    if (!found || s < best || (s == best && material_id < best_material)) {
      best = s;
      best_material = material_id;
      found = true;
    }
  };
  for (const auto& p : statics_) consider(p.sdf(x), p.material_id);
  for (const auto& a : actors_) {
    if (!a.active) continue;
    consider(a.primitive.sdf(a.world_to_body(x, t)), a.primitive.material_id);
  }
  if (!found) throw DataError("scene: no active primitives to query");

  SceneQuery out;
  out.signed_distance = best;
  out.feature = material_feature(best_material) * std::exp(-std::max(best, 0.0));
  return out;
}

Scene Scene::without_actor(std::size_t index) const {
  if (index >= actors_.size())
    throw DataError("scene: actor index " + std::to_string(index) +
                    " out of range (have " + std::to_string(actors_.size()) + ")");
  Scene copy = *this;
  copy.actors_[index].active = false;
  return copy;
}

namespace {

Mat3 rotation_from_json(const Json& j, const std::string& what) {
  const bool has_rotation = j.contains("rotation");
  const bool has_yaw = j.contains("yaw");
  if (has_rotation && has_yaw)
    throw ConfigError(what + ": give either 'rotation' or 'yaw', not both");
  if (has_yaw) return rot_z(get_number(j, what, "yaw"));
  if (!has_rotation) return Mat3::Identity();
  const Json& r = j.at("rotation");
  if (!r.is_array() || r.size() != 9)
    throw ConfigError(what + ": 'rotation' must be an array of 9 numbers (row-major)");
  Mat3 m;
  for (int i = 0; i < 9; ++i) {
    if (!r[i].is_number())
      throw ConfigError(what + ": 'rotation' must be an array of 9 numbers");
    m(i / 3, i % 3) = r[i].get<double>();
  }
  return m;
}

Primitive primitive_from_json(const Json& j, const std::string& what) {
  const std::string kind = get_string(j, what, "kind");
  const int material = static_cast<int>(get_int_or(j, what, "material_id", 0));
  if (kind == "sphere") {
    check_keys(j, what, {"kind", "center", "radius", "material_id"});
    return Primitive::sphere(get_vec3(j, what, "center"),
                             get_number(j, what, "radius"), material);
  }
  if (kind == "box") {
    check_keys(j, what,
               {"kind", "center", "half_extents", "rotation", "yaw", "material_id"});
    return Primitive::box(get_vec3(j, what, "center"),
                          get_vec3(j, what, "half_extents"),
                          rotation_from_json(j, what), material);
  }
  if (kind == "half_space") {
    check_keys(j, what, {"kind", "normal", "offset", "material_id"});
    return Primitive::half_space(get_vec3(j, what, "normal"),
                                 get_number(j, what, "offset"), material);
  }
  throw ConfigError(what + ": unknown kind '" + kind +
                    "' (expected sphere, box, or half_space)");
}

Json primitive_to_json(const Primitive& p) {
  Json j;
  j["material_id"] = p.material_id;
  switch (p.kind) {
    case ShapeKind::Sphere:
      j["kind"] = "sphere";
      j["center"] = vec3_to_json(p.center);
      j["radius"] = p.radius;
      break;
    case ShapeKind::Box: {
      j["kind"] = "box";
      j["center"] = vec3_to_json(p.center);
      j["half_extents"] = vec3_to_json(p.half_extents);
      Json r = Json::array();
      for (int i = 0; i < 9; ++i) r.push_back(p.rotation(i / 3, i % 3));
      j["rotation"] = r;
      break;
    }
    case ShapeKind::HalfSpace:
      j["kind"] = "half_space";
      j["normal"] = vec3_to_json(p.normal);
      j["offset"] = p.offset;
      break;
  }
  return j;
}

}  // namespace

Scene Scene::from_json_string(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw DataError(std::string("scene: invalid JSON: ") + e.what());
  }
  check_keys(j, "scene", {"feature_dim", "feature_seed", "statics", "actors"});

  std::vector<Primitive> statics;
  if (j.contains("statics")) {
    if (!j["statics"].is_array()) throw ConfigError("scene: 'statics' must be an array");
    int idx = 0;
    for (const auto& pj : j["statics"])
      statics.push_back(
          primitive_from_json(pj, "scene.statics[" + std::to_string(idx++) + "]"));
  }

  std::vector<Actor> actors;
  if (j.contains("actors")) {
    if (!j["actors"].is_array()) throw ConfigError("scene: 'actors' must be an array");
    int idx = 0;
    for (const auto& aj : j["actors"]) {
      const std::string what = "scene.actors[" + std::to_string(idx++) + "]";
      check_keys(aj, what,
                 {"primitive", "position0", "velocity", "yaw_rate", "active"});
      Actor a;
      a.primitive = primitive_from_json(require_key(aj, what, "primitive"),
                                        what + ".primitive");
      a.position0 = get_vec3_or(aj, what, "position0", Vec3::Zero());
      a.velocity = get_vec3_or(aj, what, "velocity", Vec3::Zero());
      a.yaw_rate = get_number_or(aj, what, "yaw_rate", 0.0);
      a.active = get_bool_or(aj, what, "active", true);
      actors.push_back(a);
    }
  }

  return Scene(std::move(statics), std::move(actors),
               static_cast<int>(get_int_or(j, "scene", "feature_dim", 32)),
               get_u64_or(j, "scene", "feature_seed", 0));
}

std::string Scene::to_json_string() const {
  Json j;
  j["feature_dim"] = feature_dim_;
  j["feature_seed"] = feature_seed_;
  j["statics"] = Json::array();
  for (const auto& p : statics_) j["statics"].push_back(primitive_to_json(p));
  j["actors"] = Json::array();
  for (const auto& a : actors_) {
    Json aj;
    aj["primitive"] = primitive_to_json(a.primitive);
    aj["position0"] = vec3_to_json(a.position0);
    aj["velocity"] = vec3_to_json(a.velocity);
    aj["yaw_rate"] = a.yaw_rate;
    aj["active"] = a.active;
    j["actors"].push_back(aj);
  }
  return j.dump(2) + "\n";
}

Scene Scene::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("scene: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json_string(buf.str());
}

void Scene::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("scene: cannot write '" + path + "'");
  out << to_json_string();
  if (!out) throw DataError("scene: write failed for '" + path + "'");
}

Scene Scene::benchmark(std::uint64_t feature_seed) {
  std::vector<Primitive> statics;
  statics.push_back(Primitive::half_space(Vec3(0, 0, 1), -1.0, 0));
  statics.push_back(
      Primitive::box(Vec3(12.0, -3.0, -0.3), Vec3(1.5, 1.0, 0.7), rot_z(0.4), 1));
  statics.push_back(
      Primitive::box(Vec3(9.0, 2.5, -0.2), Vec3(1.0, 1.2, 0.8), rot_z(-0.2), 2));

  Actor mover;
  mover.primitive =
      Primitive::box(Vec3::Zero(), Vec3(2.0, 0.9, 0.75), Mat3::Identity(), 3);
  mover.position0 = Vec3(15.0, 4.0, -0.25);
  mover.velocity = Vec3(-0.8, -0.5, 0.0);
  mover.yaw_rate = 0.05;

  return Scene(std::move(statics), {mover}, 32, feature_seed);
}

}  // namespace nrdr
