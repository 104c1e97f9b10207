// SPDX-License-Identifier: Apache-2.0
#include "homer/scenegen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "homer/error.hpp"
#include "homer/io.hpp"
#include "homer/parallel.hpp"
#include "homer/random.hpp"

namespace homer::scenegen {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;

// Three signed lattice values in [-1, 1] from one hash, one per channel.
struct Lattice3 {
  double v[3];
};

Lattice3 lattice(std::uint64_t seed, std::int64_t ix, std::int64_t iy) {
  const std::uint64_t h = mix_seed(mix_seed(seed, static_cast<std::uint64_t>(ix)), static_cast<std::uint64_t>(iy));
  Lattice3 out{};
  for (int c = 0; c < 3; ++c) {
    const auto bits = (h >> (21 * c)) & ((1u << 21) - 1);
    out.v[c] = static_cast<double>(bits) / static_cast<double>((1u << 21) - 1) * 2.0 - 1.0;
  }
  return out;
}

double fade(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

struct OctaveState {
  std::uint64_t seed;
  double inv_period;
  double amplitude;
  double ox, oy;
};

std::vector<OctaveState> octave_states(const SceneSpec& spec) {
  std::vector<OctaveState> out;
  for (std::size_t o = 0; o < spec.texture.octaves.size(); ++o) {
    const auto& oct = spec.texture.octaves[o];
    const std::uint64_t s = mix_seed(spec.seed, 0x7e47 + o);
    Rng rng(s);
    out.push_back({s, 1.0 / oct.period, oct.amplitude, rng.uniform01() * 1000.0, rng.uniform01() * 1000.0});
  }
  return out;
}

Rgb texture_at(const SceneSpec& spec, const std::vector<OctaveState>& octaves, Point2 q) {
  const auto& tex = spec.texture;
  if (tex.kind == TextureSpec::Kind::checker) {
    const auto cx = static_cast<std::int64_t>(std::floor(q.x / tex.checker_cell));
    const auto cy = static_cast<std::int64_t>(std::floor(q.y / tex.checker_cell));
    return ((cx + cy) & 1) ? tex.checker_b : tex.checker_a;
  }
  double acc[3] = {static_cast<double>(tex.base[0]), static_cast<double>(tex.base[1]),
                   static_cast<double>(tex.base[2])};
  for (const auto& o : octaves) {
    const double u = q.x * o.inv_period + o.ox;
    const double v = q.y * o.inv_period + o.oy;
    const double fu = std::floor(u), fv = std::floor(v);
    const auto ix = static_cast<std::int64_t>(fu), iy = static_cast<std::int64_t>(fv);
    const double tx = fade(u - fu), ty = fade(v - fv);
    const auto a = lattice(o.seed, ix, iy);
    const auto b = lattice(o.seed, ix + 1, iy);
    const auto c = lattice(o.seed, ix, iy + 1);
    const auto d = lattice(o.seed, ix + 1, iy + 1);
    for (int ch = 0; ch < 3; ++ch) {
      const double top = a.v[ch] + (b.v[ch] - a.v[ch]) * tx;
      const double bottom = c.v[ch] + (d.v[ch] - c.v[ch]) * tx;
      acc[ch] += o.amplitude * (top + (bottom - top) * ty);
    }
  }
  Rgb out;
  for (int ch = 0; ch < 3; ++ch) out[ch] = static_cast<std::uint8_t>(std::clamp(std::lround(acc[ch]), 0L, 255L));
  return out;
}

bool contains(const ObjectSpec& obj, Point2 q) {
  const double dx = q.x - obj.center.x, dy = q.y - obj.center.y;
  switch (obj.shape) {
    case ObjectSpec::Shape::disk:
      return dx * dx + dy * dy <= obj.radius * obj.radius;
    case ObjectSpec::Shape::rectangle: {
      const double a = obj.angle_deg * kPi / 180.0;
      const double u = std::cos(a) * dx + std::sin(a) * dy;
      const double v = -std::sin(a) * dx + std::cos(a) * dy;
      return std::abs(u) <= obj.half_size.x && std::abs(v) <= obj.half_size.y;
    }
    case ObjectSpec::Shape::polygon: {
      const auto& vs = obj.vertices;
      int sign = 0;
      for (std::size_t i = 0; i < vs.size(); ++i) {
        const Point2 p0 = vs[i], p1 = vs[(i + 1) % vs.size()];
        const double cross = (p1.x - p0.x) * (dy - p0.y) - (p1.y - p0.y) * (dx - p0.x);
        const int s = cross > 0 ? 1 : (cross < 0 ? -1 : 0);
        if (s == 0) continue;
        if (sign == 0) sign = s;
        else if (s != sign) return false;
      }
      return true;
    }
  }
  return false;
}

CameraPose random_pose(Rng& rng, const CameraBounds& b, Size size) {
  CameraPose p;
  const double t = b.max_translation_frac * size.width;
  p.tx = rng.uniform(-t, t);
  p.ty = rng.uniform(-t, t);
  p.rotation_deg = rng.uniform(-b.max_rotation_deg, b.max_rotation_deg);
  p.scale = rng.uniform(b.min_scale, b.max_scale);
  p.px = rng.uniform(-b.max_perspective, b.max_perspective);
  p.py = rng.uniform(-b.max_perspective, b.max_perspective);
  return p;
}

CameraPose lerp(const CameraPose& a, const CameraPose& b, double t) {
  auto mix = [t](double x, double y) { return x + (y - x) * t; };
  return {mix(a.tx, b.tx), mix(a.ty, b.ty), mix(a.rotation_deg, b.rotation_deg),
          mix(a.scale, b.scale), mix(a.px, b.px), mix(a.py, b.py)};
}

std::pair<CameraPose, CameraPose> camera_path(const SceneSpec& spec) {
  if (spec.path) return *spec.path;
  Rng rng(mix_seed(spec.seed, 0xca3e));
  const CameraPose a = random_pose(rng, spec.bounds, {spec.width, spec.height});
  const CameraPose b = random_pose(rng, spec.bounds, {spec.width, spec.height});
  return {a, b};
}

json rgb_json(const Rgb& c) { return json::array({c[0], c[1], c[2]}); }
Rgb rgb_from(const json& j) {
  return {j.at(0).get<std::uint8_t>(), j.at(1).get<std::uint8_t>(), j.at(2).get<std::uint8_t>()};
}
json point_json(Point2 p) { return json::array({p.x, p.y}); }
Point2 point_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

json pose_json(const CameraPose& p) {
  return {{"tx", p.tx}, {"ty", p.ty}, {"rotation_deg", p.rotation_deg},
          {"scale", p.scale}, {"px", p.px}, {"py", p.py}};
}
CameraPose pose_from(const json& j) {
  CameraPose p;
  p.tx = j.value("tx", 0.0);
  p.ty = j.value("ty", 0.0);
  p.rotation_deg = j.value("rotation_deg", 0.0);
  p.scale = j.value("scale", 1.0);
  p.px = j.value("px", 0.0);
  p.py = j.value("py", 0.0);
  return p;
}

std::string shape_name(ObjectSpec::Shape s) {
  switch (s) {
    case ObjectSpec::Shape::disk: return "disk";
    case ObjectSpec::Shape::rectangle: return "rectangle";
    case ObjectSpec::Shape::polygon: return "polygon";
  }
  return "disk";
}

json homography_json(const Homography& h) { return h.row_major(); }

}  // namespace

void validate(const SceneSpec& spec) {
  if (spec.width < 16 || spec.height < 16) fail(ErrorCode::invalid_argument, "scene: frame must be at least 16x16");
  if (spec.n_views < 2) fail(ErrorCode::invalid_argument, "scene: n_views must be >= 2");
  if (spec.source_index >= static_cast<std::size_t>(spec.n_views)) {
    fail(ErrorCode::invalid_argument, "scene: source_index out of range");
  }
  for (const auto& o : spec.texture.octaves) {
    if (!(o.period > 0.0)) fail(ErrorCode::invalid_argument, "scene: octave period must be > 0");
  }
  if (spec.texture.kind == TextureSpec::Kind::value_noise && spec.texture.octaves.size() < 3) {
    fail(ErrorCode::invalid_argument, "scene: value noise needs at least 3 octaves");
  }
  if (spec.texture.kind == TextureSpec::Kind::checker && !(spec.texture.checker_cell > 0.0)) {
    fail(ErrorCode::invalid_argument, "scene: checker cell must be > 0");
  }
  for (const auto& obj : spec.objects) {
    if (obj.shape == ObjectSpec::Shape::disk && !(obj.radius > 0.0)) {
      fail(ErrorCode::invalid_argument, "scene: disk radius must be > 0");
    }
    if (obj.shape == ObjectSpec::Shape::rectangle && !(obj.half_size.x > 0.0 && obj.half_size.y > 0.0)) {
      fail(ErrorCode::invalid_argument, "scene: rectangle half sizes must be > 0");
    }
    if (obj.shape == ObjectSpec::Shape::polygon && obj.vertices.size() < 3) {
      fail(ErrorCode::invalid_argument, "scene: polygon needs >= 3 vertices");
    }
  }
  const auto& b = spec.bounds;
  if (!(b.min_scale > 0.0 && b.min_scale <= b.max_scale)) fail(ErrorCode::invalid_argument, "scene: scale bounds");
}

json to_json(const SceneSpec& spec) {
  json tex;
  if (spec.texture.kind == TextureSpec::Kind::checker) {
    tex = {{"kind", "checker"}, {"cell", spec.texture.checker_cell},
           {"colors", {rgb_json(spec.texture.checker_a), rgb_json(spec.texture.checker_b)}}};
  } else {
    json octs = json::array();
    for (const auto& o : spec.texture.octaves) octs.push_back({{"period", o.period}, {"amplitude", o.amplitude}});
    tex = {{"kind", "value_noise"}, {"base", rgb_json(spec.texture.base)}, {"octaves", octs}};
  }
  json objs = json::array();
  for (const auto& o : spec.objects) {
    json j = {{"shape", shape_name(o.shape)}, {"color", rgb_json(o.color)}, {"center", point_json(o.center)}};
    if (o.shape == ObjectSpec::Shape::disk) j["radius"] = o.radius;
    if (o.shape == ObjectSpec::Shape::rectangle) {
      j["half_size"] = point_json(o.half_size);
      j["angle_deg"] = o.angle_deg;
    }
    if (o.shape == ObjectSpec::Shape::polygon) {
      json vs = json::array();
      for (const auto& v : o.vertices) vs.push_back(point_json(v));
      j["vertices"] = vs;
    }
    objs.push_back(j);
  }
  json out = {{"width", spec.width}, {"height", spec.height}, {"n_views", spec.n_views}, {"seed", spec.seed},
              {"source_index", spec.source_index}, {"texture", tex}, {"objects", objs},
              {"camera_bounds", {{"max_translation_frac", spec.bounds.max_translation_frac},
                                 {"max_rotation_deg", spec.bounds.max_rotation_deg},
                                 {"max_perspective", spec.bounds.max_perspective},
                                 {"min_scale", spec.bounds.min_scale},
                                 {"max_scale", spec.bounds.max_scale}}}};
  if (spec.path) out["camera_path"] = {{"start", pose_json(spec.path->first)}, {"end", pose_json(spec.path->second)}};
  return out;
}

SceneSpec scene_spec_from_json(const json& j) {
  try {
    SceneSpec s;
    s.width = j.value("width", s.width);
    s.height = j.value("height", s.height);
    s.n_views = j.value("n_views", s.n_views);
    s.seed = j.value("seed", s.seed);
    s.source_index = j.value("source_index", s.source_index);
    if (j.contains("texture")) {
      const auto& t = j["texture"];
      const std::string kind = t.value("kind", std::string("value_noise"));
      if (kind == "checker") {
        s.texture.kind = TextureSpec::Kind::checker;
        s.texture.checker_cell = t.value("cell", s.texture.checker_cell);
        if (t.contains("colors")) {
          s.texture.checker_a = rgb_from(t["colors"].at(0));
          s.texture.checker_b = rgb_from(t["colors"].at(1));
        }
      } else if (kind == "value_noise") {
        if (t.contains("base")) s.texture.base = rgb_from(t["base"]);
        if (t.contains("octaves")) {
          s.texture.octaves.clear();
          for (const auto& o : t["octaves"]) {
            s.texture.octaves.push_back({o.at("period").get<double>(), o.at("amplitude").get<double>()});
          }
        }
      } else {
        fail(ErrorCode::parse_error, "scene: unknown texture kind '" + kind + "'");
      }
    }
    if (j.contains("objects")) {
      for (const auto& o : j["objects"]) {
        ObjectSpec obj;
        const std::string shape = o.at("shape").get<std::string>();
        if (shape == "disk") obj.shape = ObjectSpec::Shape::disk;
        else if (shape == "rectangle") obj.shape = ObjectSpec::Shape::rectangle;
        else if (shape == "polygon") obj.shape = ObjectSpec::Shape::polygon;
        else fail(ErrorCode::parse_error, "scene: unknown shape '" + shape + "'");
        if (o.contains("color")) obj.color = rgb_from(o["color"]);
        obj.center = point_from(o.at("center"));
        obj.radius = o.value("radius", obj.radius);
        if (o.contains("half_size")) obj.half_size = point_from(o["half_size"]);
        obj.angle_deg = o.value("angle_deg", obj.angle_deg);
        if (o.contains("vertices")) {
          for (const auto& v : o["vertices"]) obj.vertices.push_back(point_from(v));
        }
        s.objects.push_back(std::move(obj));
      }
    }
    if (j.contains("camera_bounds")) {
      const auto& b = j["camera_bounds"];
      s.bounds.max_translation_frac = b.value("max_translation_frac", s.bounds.max_translation_frac);
      s.bounds.max_rotation_deg = b.value("max_rotation_deg", s.bounds.max_rotation_deg);
      s.bounds.max_perspective = b.value("max_perspective", s.bounds.max_perspective);
      s.bounds.min_scale = b.value("min_scale", s.bounds.min_scale);
      s.bounds.max_scale = b.value("max_scale", s.bounds.max_scale);
    }
    if (j.contains("camera_path")) {
      s.path = std::pair(pose_from(j["camera_path"].at("start")), pose_from(j["camera_path"].at("end")));
    }
    validate(s);
    return s;
  } catch (const json::exception& e) {
    fail(ErrorCode::parse_error, std::string("scene spec: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::parse_error) throw;
    fail(ErrorCode::parse_error, e.what());
  }
}

SceneSpec standard_scene_spec(std::uint64_t seed, int n_views, Size size) {
  SceneSpec s;
  s.width = size.width;
  s.height = size.height;
  s.n_views = n_views;
  s.seed = seed;
  Rng rng(mix_seed(seed, 0x0b1e));
  const double m = std::min(size.width, size.height);
  const double w = size.width, h = size.height;

  ObjectSpec disk;
  disk.shape = ObjectSpec::Shape::disk;
  disk.color = {220, 30, 30};
  disk.center = {w * rng.uniform(0.30, 0.36), h * rng.uniform(0.32, 0.38)};
  disk.radius = 0.078 * m;

  ObjectSpec rect;
  rect.shape = ObjectSpec::Shape::rectangle;
  rect.color = {30, 60, 220};
  rect.center = {w * rng.uniform(0.64, 0.70), h * rng.uniform(0.34, 0.42)};
  rect.half_size = {0.0975 * m, 0.0585 * m};
  rect.angle_deg = rng.uniform(-35.0, 35.0);

  ObjectSpec poly;
  poly.shape = ObjectSpec::Shape::polygon;
  poly.color = {40, 200, 60};
  poly.center = {w * rng.uniform(0.45, 0.55), h * rng.uniform(0.64, 0.70)};
  const int sides = 5 + static_cast<int>(rng.below(3));
  const double r = 0.091 * m;
  const double phase = rng.uniform(0.0, 2.0 * kPi);
  for (int i = 0; i < sides; ++i) {
    // jittered angles and radii keep the polygon convex
    const double a = phase + 2.0 * kPi * (i + rng.uniform(-0.15, 0.15)) / sides;
    const double rr = r * rng.uniform(0.85, 1.0);
    poly.vertices.push_back({rr * std::cos(a), rr * std::sin(a)});
  }
  s.objects = {disk, rect, poly};
  return s;
}

Homography pose_homography(const CameraPose& pose, Size size) {
  const double cx = (size.width - 1) / 2.0, cy = (size.height - 1) / 2.0;
  const double a = pose.rotation_deg * kPi / 180.0;
  const double c = pose.scale * std::cos(a), s = pose.scale * std::sin(a);
  const Homography inner =
      Homography::from_row_major({c, -s, pose.tx, s, c, pose.ty, pose.px, pose.py, 1.0});
  return chain(chain(Homography::translation(-cx, -cy), inner), Homography::translation(cx, cy));
}

Homography SceneGeometry::between(std::size_t i, std::size_t j) const {
  return chain(view_from_plane.at(i).inverse(), view_from_plane.at(j));
}

SceneGeometry scene_geometry(const SceneSpec& spec) {
  validate(spec);
  const auto [start, end] = camera_path(spec);
  SceneGeometry g;
  g.size = {spec.width, spec.height};
  for (int j = 0; j < spec.n_views; ++j) {
    const double t = spec.n_views == 1 ? 0.0 : static_cast<double>(j) / (spec.n_views - 1);
    g.view_from_plane.push_back(pose_homography(lerp(start, end, t), g.size));
  }
  return g;
}

RenderedView render_view(const SceneSpec& spec, const Homography& view_from_plane) {
  const Size size{spec.width, spec.height};
  const auto octaves = octave_states(spec);
  const Homography plane_from_view = view_from_plane.inverse();
  RenderedView v;
  v.image = RgbImage(size);
  v.clean = RgbImage(size);
  v.masks.assign(spec.objects.size(), BinaryMask(size));
  for (int y = 0; y < size.height; ++y) {
    for (int x = 0; x < size.width; ++x) {
      const auto q = plane_from_view.try_apply({static_cast<double>(x), static_cast<double>(y)});
      if (!q) continue;
      const Rgb bg = texture_at(spec, octaves, *q);
      v.clean.set(x, y, bg);
      Rgb px = bg;
      for (std::size_t k = 0; k < spec.objects.size(); ++k) {
        if (contains(spec.objects[k], *q)) {
          v.masks[k].set(x, y);
          px = spec.objects[k].color;
        }
      }
      v.image.set(x, y, px);
    }
  }
  return v;
}

SyntheticScene generate(const SceneSpec& spec, unsigned threads) {
  SyntheticScene scene;
  scene.spec = spec;
  scene.geometry = scene_geometry(spec);
  const std::size_t n = scene.geometry.view_count();
  scene.views.resize(n);
  parallel_for(n, threads, [&](std::size_t j) { scene.views[j] = render_view(spec, scene.geometry.view_from_plane[j]); });
  for (std::size_t j = 0; j + 1 < n; ++j) scene.gt_adjacent.push_back(scene.geometry.between(j, j + 1));
  return scene;
}

prompts::PromptSet default_prompts(const SyntheticScene& scene, std::size_t view) {
  prompts::PromptSet p;
  p.view_index = view;
  const auto& g = scene.geometry.view_from_plane.at(view);
  int next_id = 1;
  for (std::size_t k = 0; k < scene.spec.objects.size(); ++k) {
    const auto c = g.try_apply(scene.spec.objects[k].center);
    if (!c) continue;
    const int x = static_cast<int>(std::lround(c->x)), y = static_cast<int>(std::lround(c->y));
    if (!scene.geometry.size.contains(x, y)) continue;
    if (!scene.views.empty() && !scene.views[view].masks[k].get(x, y)) continue;
    p.foreground.push_back({x, y, next_id++});
  }
  return p;
}

fs::path write_scene(const SyntheticScene& scene, const fs::path& dir) {
  json views = json::array();
  json pairs = json::array();
  json planes = json::array();
  for (std::size_t j = 0; j < scene.views.size(); ++j) {
    const std::string name = "view_" + std::to_string(j) + ".png";
    io::write_png(dir / "views" / name, scene.views[j].image);
    io::write_png(dir / "gt" / "clean" / name, scene.views[j].clean);
    for (std::size_t k = 0; k < scene.views[j].masks.size(); ++k) {
      io::write_mask_png(dir / "gt" / "masks" / ("view_" + std::to_string(j) + "_obj_" + std::to_string(k + 1) + ".png"),
                         scene.views[j].masks[k]);
    }
    views.push_back({{"image_path", "views/" + name}});
    planes.push_back(homography_json(scene.geometry.view_from_plane[j]));
  }
  for (std::size_t j = 0; j < scene.gt_adjacent.size(); ++j) {
    pairs.push_back({{"from", j}, {"to", j + 1}, {"h", homography_json(scene.gt_adjacent[j])}});
  }
  io::write_json(dir / "gt" / "homographies.json", {{"pairs", pairs}, {"view_from_plane", planes}});
  io::write_json(dir / "scene.json", to_json(scene.spec));
  io::write_json(dir / "prompts.json", prompts::to_json(default_prompts(scene, scene.spec.source_index)));
  const fs::path manifest = dir / "manifest.json";
  io::write_json(manifest, {{"views", views},
                            {"source_index", scene.spec.source_index},
                            {"width", scene.spec.width},
                            {"height", scene.spec.height},
                            {"objects", scene.spec.objects.size()}});
  return manifest;
}

oracles::MatchResult synthetic_exact_matcher(const SceneGeometry& scene, std::size_t i, std::size_t j,
                                             const PerturbConfig& cfg) {
  if (i >= scene.view_count() || j >= scene.view_count()) {
    fail(ErrorCode::invalid_argument, "synthetic matcher: view index out of range");
  }
  if (!(cfg.outlier_ratio >= 0.0 && cfg.outlier_ratio < 1.0)) {
    fail(ErrorCode::invalid_argument, "synthetic matcher: outlier_ratio must be in [0, 1)");
  }
  const Homography h = scene.between(i, j);
  Rng rng(mix_seed(cfg.seed, i * 0x10001u + j));
  const double w = scene.size.width, hh = scene.size.height;
  oracles::MatchResult out;
  const std::size_t max_attempts = cfg.n_points * 1000;
  for (std::size_t attempt = 0; out.correspondences.size() < cfg.n_points && attempt < max_attempts; ++attempt) {
    const Point2 p{rng.uniform(0.0, w - 1.0), rng.uniform(0.0, hh - 1.0)};
    const auto q = h.try_apply(p);
    if (!q || q->x < 0.0 || q->y < 0.0 || q->x > w - 1.0 || q->y > hh - 1.0) continue;
    Point2 noisy = *q;
    if (cfg.noise_px > 0.0) {
      noisy.x = std::clamp(noisy.x + cfg.noise_px * rng.normal(), 0.0, w - 1.0);
      noisy.y = std::clamp(noisy.y + cfg.noise_px * rng.normal(), 0.0, hh - 1.0);
    }
    out.correspondences.push_back({p, noisy, 1.0});
  }
  const std::size_t n = out.correspondences.size();
  if (n == 0) return out;
  const bool fault = cfg.fault_pairs.count({i, j}) > 0;
  const std::size_t outliers =
      fault ? n : std::min(n, static_cast<std::size_t>(std::llround(cfg.outlier_ratio * static_cast<double>(n))));
  for (auto idx : rng.sample_indices(n, outliers)) {
    out.correspondences[idx].p_prime = {rng.uniform(0.0, w - 1.0), rng.uniform(0.0, hh - 1.0)};
  }
  out.similarity = std::max(1.0 - static_cast<double>(outliers) / static_cast<double>(n), 1.0 / static_cast<double>(n));
  return out;
}

std::vector<oracles::MatchResult> perturb(const SceneGeometry& scene, const PerturbConfig& cfg) {
  std::vector<oracles::MatchResult> out;
  for (std::size_t j = 0; j + 1 < scene.view_count(); ++j) out.push_back(synthetic_exact_matcher(scene, j, j + 1, cfg));
  return out;
}

oracles::MatchResult GroundTruthMatcher::match(const RgbImage&, const RgbImage&, oracles::ViewPair pair) {
  return synthetic_exact_matcher(scene_, pair.from, pair.to, cfg_);
}

}  // namespace homer::scenegen
