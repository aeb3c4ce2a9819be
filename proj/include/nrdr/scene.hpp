#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "nrdr/types.hpp"

namespace nrdr {

enum class ShapeKind { Sphere, Box, HalfSpace };

// One analytic solid. Only the fields relevant to `kind` are meaningful.
struct Primitive {
  ShapeKind kind = ShapeKind::Sphere;
  Vec3 center = Vec3::Zero();            // sphere, box
  double radius = 1.0;                   // sphere
  Vec3 half_extents = Vec3::Ones();      // box
  Mat3 rotation = Mat3::Identity();      // box (world <- body)
  Vec3 normal = Vec3::UnitZ();           // half-space: solid where dot(normal, x) < offset
  double offset = 0.0;                   // half-space plane position along normal
  int material_id = 0;

  double sdf(const Vec3& x) const;
  void validate() const;

  static Primitive sphere(const Vec3& center, double radius, int material_id);
  static Primitive box(const Vec3& center, const Vec3& half_extents,
                       const Mat3& rotation, int material_id);
  static Primitive half_space(const Vec3& normal, double offset, int material_id);
};

// A rigidly moving primitive: pose at time t is a yaw of yaw_rate*t about the
// body z axis followed by translation position0 + velocity*t. The primitive
// is expressed in the body frame.
struct Actor {
  Primitive primitive;
  Vec3 position0 = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  double yaw_rate = 0.0;
  bool active = true;

  Vec3 world_to_body(const Vec3& x, double t) const;
  void validate() const;
};

struct SceneQuery {
  double signed_distance = 0.0;
  VecX feature;
};

// Analytic world: static primitives plus rigid actors. Queries return the
// scene signed distance and a per-material pseudo-random feature vector that
// fades out away from surfaces. Immutable after construction.
class Scene {
 public:
  Scene() = default;
  Scene(std::vector<Primitive> statics, std::vector<Actor> actors,
        int feature_dim, std::uint64_t feature_seed);

  const std::vector<Primitive>& statics() const { return statics_; }
  const std::vector<Actor>& actors() const { return actors_; }
  int feature_dim() const { return feature_dim_; }
  std::uint64_t feature_seed() const { return feature_seed_; }

  // Signed distance only; minimum over all active primitives.
  double sdf(const Vec3& x, double t) const;

  // Signed distance plus the feature of the nearest primitive's material,
  // attenuated by exp(-max(s, 0)). Ties go to the lowest material id. The
  // view direction d is accepted for interface compatibility and ignored.
  SceneQuery query(const Vec3& x, double t, const Vec3& d) const;

  // Copy with one actor deactivated; this scene is untouched.
  Scene without_actor(std::size_t index) const;

  // Unit-norm feature vector for a material, fixed by feature_seed.
  const VecX& material_feature(int material_id) const;

  std::string to_json_string() const;
  static Scene from_json_string(const std::string& text);
  static Scene load(const std::string& path);
  void save(const std::string& path) const;

  // Fixed demo scene: ground plane, two boxes, one moving box actor.
  static Scene benchmark(std::uint64_t feature_seed);

 private:
  std::vector<Primitive> statics_;
  std::vector<Actor> actors_;
  int feature_dim_ = 32;
  std::uint64_t feature_seed_ = 0;
  std::map<int, VecX> features_;

  void validate() const;
  void build_feature_table();
};

}  // namespace nrdr
