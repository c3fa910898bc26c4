#include "mcd/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <set>

namespace mcd {

CloudKind parse_cloud_kind(std::string_view name) {
  if (name == "swiss_roll") return CloudKind::swiss_roll;
  if (name == "moons") return CloudKind::moons;
  if (name == "s_curve") return CloudKind::s_curve;
  throw ConfigError("unknown point cloud kind '" + std::string(name) + "' (expected swiss_roll | moons | s_curve)");
}

std::string to_string(CloudKind kind) {
  switch (kind) {
    case CloudKind::swiss_roll: return "swiss_roll";
    case CloudKind::moons: return "moons";
    case CloudKind::s_curve: return "s_curve";
  }
  return "?";
}

namespace {

struct P2 {
  double a, b;
};

// In-plane manifolds, following the scikit-learn generators with the extruded
// axis dropped.
std::vector<P2> manifold_2d(CloudKind kind, std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<P2> pts;
  pts.reserve(n);
  const double pi = std::numbers::pi;
  for (std::size_t i = 0; i < n; ++i) {
    switch (kind) {
      case CloudKind::swiss_roll: {
        const double t = 1.5 * pi * (1.0 + 2.0 * u01(rng));
        pts.push_back({t * std::cos(t), t * std::sin(t)});
        break;
      }
      case CloudKind::moons: {
        const double th = pi * u01(rng);
        if (u01(rng) < 0.5)
          pts.push_back({std::cos(th), std::sin(th)});
        else
          pts.push_back({1.0 - std::cos(th), 1.0 - std::sin(th) - 0.5});
        break;
      }
      case CloudKind::s_curve: {
        const double t = 3.0 * pi * (u01(rng) - 0.5);
        pts.push_back({std::sin(t), (t >= 0 ? 1.0 : -1.0) * (std::cos(t) - 1.0)});
        break;
      }
    }
  }
  return pts;
}

}  // namespace

std::vector<Point3> generate_point_cloud(const PointCloudSpec& spec) {
  if (spec.n_points == 0) throw ConfigError("point cloud: n_points must be > 0");
  if (spec.point_radius_vox < 1) throw ConfigError("point cloud: point_radius_vox must be >= 1");
  if (spec.material_id < 1) throw ConfigError("point cloud: material_id must be >= 1 (0 is background)");
  if (!(spec.scale > 0.0 && spec.scale <= 1.0)) throw ConfigError("point cloud: scale must be in (0, 1]");

  std::mt19937_64 rng(spec.seed);
  auto flat = manifold_2d(spec.kind, spec.n_points, rng);

  const double th = spec.rotation_deg * std::numbers::pi / 180.0;
  const double c = std::cos(th), s = std::sin(th);
  double lo_a = std::numeric_limits<double>::max(), hi_a = -lo_a, lo_b = lo_a, hi_b = -lo_a;
  for (auto& p : flat) {
    p = {c * p.a - s * p.b, s * p.a + c * p.b};
    lo_a = std::min(lo_a, p.a), hi_a = std::max(hi_a, p.a);
    lo_b = std::min(lo_b, p.b), hi_b = std::max(hi_b, p.b);
  }
  const double extent = std::max({hi_a - lo_a, hi_b - lo_b, 1e-12});
  const double k = 0.9 * spec.scale / extent;
  const double ca = 0.5 * (lo_a + hi_a), cb = 0.5 * (lo_b + hi_b);

  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<Point3> out;
  out.reserve(flat.size());
  for (const auto& p : flat) {
    const double x = 0.5 + k * (p.a - ca);
    const double y = 0.5 + k * (p.b - cb);
    out.push_back({std::clamp(x, 0.0, std::nextafter(1.0, 0.0)), std::clamp(y, 0.0, std::nextafter(1.0, 0.0)),
                   u01(rng)});
  }
  return out;
}

LabelVolume rasterize(std::span<const PointCloudSpec> clouds, std::array<std::size_t, 3> shape_zyx,
                      double voxel_size_mm) {
  for (auto d : shape_zyx)
    if (d < 8) throw ConfigError("rasterize: every dimension must be >= 8");
  if (!(voxel_size_mm > 0)) throw ConfigError("rasterize: voxel_size_mm must be > 0");
  std::set<int> priorities;
  for (const auto& c : clouds)
    if (!priorities.insert(c.priority).second)
      throw ConfigError("rasterize: duplicate priority " + std::to_string(c.priority));

  const auto [nz, ny, nx] = shape_zyx;
  LabelVolume vol{NdArray<std::uint16_t>({nz, ny, nx}, 0), voxel_size_mm};
  // Winning priority per voxel; the label written is that cloud's material.
  NdArray<int> best({nz, ny, nx}, std::numeric_limits<int>::min());

  for (const auto& cloud : clouds) {
    const auto pts = generate_point_cloud(cloud);
    const long r = cloud.point_radius_vox - 1;
    for (const auto& p : pts) {
      const long cz = static_cast<long>(p.z * static_cast<double>(nz));
      const long cy = static_cast<long>(p.y * static_cast<double>(ny));
      const long cx = static_cast<long>(p.x * static_cast<double>(nx));
      for (long z = std::max(0L, cz - r); z <= std::min<long>(nz - 1, cz + r); ++z)
        for (long y = std::max(0L, cy - r); y <= std::min<long>(ny - 1, cy + r); ++y)
          for (long x = std::max(0L, cx - r); x <= std::min<long>(nx - 1, cx + r); ++x) {
            int& b = best(z, y, x);
            if (cloud.priority > b) {
              b = cloud.priority;
              vol.labels(z, y, x) = static_cast<std::uint16_t>(cloud.material_id);
            }
          }
    }
  }
  return vol;
}

std::vector<PointCloudSpec> default_phantom_clouds(std::uint64_t seed) {
  // Two interleaved Swiss rolls (second one rotated by 180 degrees), two
  // smaller moon pairs and an S-curve. Priorities favour the thin objects.
  std::vector<PointCloudSpec> c = {
      {CloudKind::swiss_roll, 7000, 2, 1, 1, seed + 1, 0.0, 1.0},
      {CloudKind::swiss_roll, 7000, 2, 2, 2, seed + 2, 180.0, 1.0},
      {CloudKind::moons, 5000, 2, 3, 3, seed + 3, 0.0, 0.55},
      {CloudKind::moons, 5000, 2, 4, 4, seed + 4, 90.0, 0.45},
      {CloudKind::s_curve, 5000, 2, 5, 5, seed + 5, 45.0, 0.6},
  };
  return c;
}

Array generate_motion_series(const MotionSeriesSpec& spec, std::array<std::size_t, 2> shape_yx) {
  if (spec.n_frames < 2) throw ConfigError("motion series: n_frames must be >= 2");
  if (spec.parts.empty()) throw ConfigError("motion series: object has no parts");
  const auto [ny, nx] = shape_yx;
  const double pi = std::numbers::pi;

  // Bounding radius of the object about its origin.
  double radius = 0.0;
  for (const auto& p : spec.parts)
    radius = std::max(radius, std::hypot(p.dx, p.dy) + std::max(p.semi_a, p.semi_b) + 1.0);

  Array frames({spec.n_frames, ny, nx}, 0.0);
  constexpr int ss = 4;
  for (std::size_t t = 0; t < spec.n_frames; ++t) {
    const double steps = t < spec.hold_frames ? 0.0 : static_cast<double>(t - spec.hold_frames);
    const double ox = spec.origin_x + steps * spec.velocity_px_per_frame[0];
    const double oy = spec.origin_y + steps * spec.velocity_px_per_frame[1];
    if (ox - radius < 0 || oy - radius < 0 || ox + radius > static_cast<double>(nx) - 1 ||
        oy + radius > static_cast<double>(ny) - 1)
      throw ConfigError("motion series: object leaves the frame at t=" + std::to_string(t));
    const double rot = steps * spec.rotation_deg_per_frame * pi / 180.0;
    const double cr = std::cos(rot), sr = std::sin(rot);

    const long x0 = static_cast<long>(std::floor(ox - radius)), x1 = static_cast<long>(std::ceil(ox + radius));
    const long y0 = static_cast<long>(std::floor(oy - radius)), y1 = static_cast<long>(std::ceil(oy + radius));
    for (long y = y0; y <= y1; ++y)
      for (long x = x0; x <= x1; ++x) {
        // Pixel position relative to the object origin; integer shifts leave
        // these offsets unchanged.
        const double rx = static_cast<double>(x - static_cast<long>(std::floor(ox))) - (ox - std::floor(ox));
        const double ry = static_cast<double>(y - static_cast<long>(std::floor(oy))) - (oy - std::floor(oy));
        double acc = 0.0;
        for (int sy = 0; sy < ss; ++sy)
          for (int sx = 0; sx < ss; ++sx) {
            const double px = rx + (sx + 0.5) / ss - 0.5;
            const double py = ry + (sy + 0.5) / ss - 0.5;
            // Undo the object rotation.
            const double qx = cr * px + sr * py;
            const double qy = -sr * px + cr * py;
            double v = 0.0;
            for (const auto& part : spec.parts) {
              const double pa = part.angle_deg * pi / 180.0;
              const double lx = qx - part.dx, ly = qy - part.dy;
              const double ex = std::cos(pa) * lx + std::sin(pa) * ly;
              const double ey = -std::sin(pa) * lx + std::cos(pa) * ly;
              if ((ex * ex) / (part.semi_a * part.semi_a) + (ey * ey) / (part.semi_b * part.semi_b) <= 1.0)
                v += part.value;
            }
            acc += v;
          }
        frames(t, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) =
            std::clamp(acc / (ss * ss), 0.0, 1.0);
      }
  }
  return frames;
}

}  // namespace mcd
