#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mcd/ndarray.hpp"

namespace mcd {

enum class CloudKind { swiss_roll, moons, s_curve };

CloudKind parse_cloud_kind(std::string_view name);  // throws ConfigError
std::string to_string(CloudKind kind);

// A 2D manifold sampled at random and extruded along z with a uniform third
// coordinate. Placement: the in-plane coordinates are rotated by
// `rotation_deg`, scaled to span 90% of the unit square, then scaled by
// `scale` about the centre.
struct PointCloudSpec {
  CloudKind kind = CloudKind::swiss_roll;
  std::size_t n_points = 6000;
  int point_radius_vox = 2;
  int priority = 1;
  int material_id = 1;
  std::uint64_t seed = 0;
  double rotation_deg = 0.0;
  double scale = 1.0;
};

struct Point3 {
  double x, y, z;
};

// Points in [0,1)^3. x,y carry the manifold, z is Uniform[0,1).
std::vector<Point3> generate_point_cloud(const PointCloudSpec& spec);

struct LabelVolume {
  NdArray<std::uint16_t> labels;  // (z, y, x), 0 = background
  double voxel_size_mm = 1.0;
};

// Each point stamps an axis-aligned cube of side 2*r-1 voxels. Overlaps resolve
// to the highest-priority cloud, independent of list order.
LabelVolume rasterize(std::span<const PointCloudSpec> clouds, std::array<std::size_t, 3> shape_zyx,
                      double voxel_size_mm);

// Two Swiss rolls, two moon pairs and an S-curve, materials 1..5.
std::vector<PointCloudSpec> default_phantom_clouds(std::uint64_t seed);

// ---- moving-object series for the temporal case ----

// Ellipse in object coordinates (pixels, relative to the object origin).
struct EllipsePart {
  double dx = 0, dy = 0;        // offset from object origin
  double semi_a = 8, semi_b = 5;  // semi-axes along the part's own x/y
  double angle_deg = 0;
  double value = 1.0;           // added signal inside the part
};

struct MotionSeriesSpec {
  std::size_t n_frames = 16;
  double origin_x = 0, origin_y = 0;     // object position in frame 0 (pixels)
  std::vector<EllipsePart> parts{EllipsePart{}};
  std::array<double, 2> velocity_px_per_frame{0.0, 0.0};  // (x, y)
  double rotation_deg_per_frame = 0.0;
  std::size_t hold_frames = 0;  // motion starts after this many still frames
  std::uint64_t seed = 0;
};

// Frames (t, y, x) with values in [0,1]. Edges are antialiased by 4x4
// supersampling; rendering is exactly shift-equivariant for integer shifts.
Array generate_motion_series(const MotionSeriesSpec& spec, std::array<std::size_t, 2> shape_yx);

}  // namespace mcd
