#include "condforge/conditioning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "condforge/error.hpp"
#include "condforge/raster.hpp"

namespace condforge {
namespace {

void check_canvas(Canvas canvas) {
  if (canvas.width < kMinCanvasSize || canvas.height < kMinCanvasSize) {
    throw Error("canvas must be at least " + std::to_string(kMinCanvasSize) + " px on each side");
  }
}

void check_style(const RenderStyle& style) {
  if (style.line_width < 1) throw Error("line_width must be >= 1");
  if (style.foreground == style.background) throw Error("foreground and background must differ");
}

void draw_box(GrayImage& image, const BoundingBox& box, const RenderStyle& style) {
  const int w = image.width, h = image.height;
  // Edges in half units; a pixel at lattice value q is on the outline when
  // it is inside the outer rectangle (edges pushed out by line_width / 2)
  // but not strictly inside the inner one.
  const long long ex0 = snap_half((box.x0 - 0.5) * (w - 1));
  const long long ex1 = snap_half((box.x1 - 0.5) * (w - 1));
  const long long ey0 = snap_half((box.y0 - 0.5) * (h - 1));
  const long long ey1 = snap_half((box.y1 - 0.5) * (h - 1));
  const long long lw = style.line_width;
  auto in_outer = [&](long long q, long long lo, long long hi) { return q >= lo - lw && q <= hi + lw; };
  auto in_inner = [&](long long q, long long lo, long long hi) { return q > lo + lw && q < hi - lw; };
  for (int y = 0; y < h; ++y) {
    const long long qy = 2LL * y - (h - 1);
    if (!in_outer(qy, ey0, ey1)) continue;
    const bool row_inner = in_inner(qy, ey0, ey1);
    for (int x = 0; x < w; ++x) {
      const long long qx = 2LL * x - (w - 1);
      if (!in_outer(qx, ex0, ex1)) continue;
      if (row_inner && in_inner(qx, ex0, ex1)) continue;
      image.at(x, y) = style.foreground;
    }
  }
}

}  // namespace

RenderStyle RenderStyle::for_canvas(int width, int height) {
  RenderStyle style;
  style.line_width = std::max(1, static_cast<int>(std::lround(3.0 * std::max(width, height) / 1024.0)));
  return style;
}

GrayImage render_boxes(std::span<const BoundingBox> boxes, Canvas canvas, const RenderStyle& style) {
  check_canvas(canvas);
  check_style(style);
  GrayImage image(canvas.width, canvas.height, style.background);
  for (const auto& box : boxes) {
    if (!box.valid()) throw Error("invalid bounding box");
    draw_box(image, box, style);
  }
  return image;
}

RenderResult render_vanishing_lines(std::span<const VanishingLineBundle> bundles, Canvas canvas,
                                    const RenderStyle& style) {
  check_canvas(canvas);
  check_style(style);
  RenderResult out{GrayImage(canvas.width, canvas.height, style.background), {}};
  const ImageFrame frame(canvas.width, canvas.height);
  const double s = frame.scale();
  const double half_w = (canvas.width - 1) / 2.0;
  const double half_h = (canvas.height - 1) / 2.0;
  constexpr double inf = std::numeric_limits<double>::infinity();

  for (std::size_t b = 0; b < bundles.size(); ++b) {
    const auto& bundle = bundles[b];
    if (bundle.anchors.empty()) throw Error("bundle " + std::to_string(b) + " has no anchors");
    const auto vp = bundle.vp.euclidean();
    const std::size_t count =
        std::min(bundle.anchors.size(), static_cast<std::size_t>(std::max(style.max_lines_per_bundle, 0)));
    for (std::size_t a = 0; a < count; ++a) {
      const auto& anchor = bundle.anchors[a];
      // Center-relative pixel units throughout, so mirroring is exact.
      const std::array<double, 2> origin{anchor.x * s, anchor.y * s};
      std::array<double, 2> dir;
      if (vp) {
        dir = {(vp->x - anchor.x) * s, (vp->y - anchor.y) * s};
      } else {
        dir = {bundle.vp.x() * s, bundle.vp.y() * s};
      }
      if (std::hypot(dir[0], dir[1]) < 1e-9) {
        out.warnings.push_back("bundle " + std::to_string(b) + " anchor " + std::to_string(a) +
                               " coincides with its vanishing point; line skipped");
        continue;
      }
      // Parameter t = 1 is the VP itself for finite VPs.
      double t_hi = inf;
      if (vp && bundle.extend_to_vp && std::abs(vp->x * s) <= half_w && std::abs(vp->y * s) <= half_h) {
        t_hi = 1.0;
      }
      const auto t = clip_parametric(origin, dir, -inf, t_hi, half_w, half_h);
      if (!t) continue;
      const HalfPoint p0{snap_half(origin[0] + (*t)[0] * dir[0]), snap_half(origin[1] + (*t)[0] * dir[1])};
      const HalfPoint p1{snap_half(origin[0] + (*t)[1] * dir[0]), snap_half(origin[1] + (*t)[1] * dir[1])};
      draw_stroke(out.image, p0, p1, style.line_width, style.foreground);
    }
  }
  return out;
}

RenderResult render_scene(const SceneSpec& scene) {
  auto result = render_vanishing_lines(scene.bundles, scene.canvas(), scene.style);
  for (const auto& box : scene.boxes) {
    if (!box.valid()) throw Error("invalid bounding box");
    draw_box(result.image, box, scene.style);
  }
  return result;
}

GrayImage mirror_horizontal(const GrayImage& image) {
  GrayImage out(image.width, image.height);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) out.at(image.width - 1 - x, y) = image.at(x, y);
  return out;
}

SceneSpec mirror_horizontal(const SceneSpec& scene) {
  SceneSpec out = scene;
  for (auto& box : out.boxes) {
    const double x0 = box.x0;
    box.x0 = 1.0 - box.x1;
    box.x1 = 1.0 - x0;
  }
  for (auto& bundle : out.bundles) {
    bundle.vp = HomogeneousPoint::from(-bundle.vp.x(), bundle.vp.y(), bundle.vp.w());
    for (auto& a : bundle.anchors) a.x = -a.x;
  }
  return out;
}

SceneSpec annotation_to_scene(const ImageRecord& record, const ScenePolicy& policy) {
  const bool has_frame = record.frame.has_value();
  const bool has_boxes = record.boxes.has_value() && !record.boxes->empty();
  if (!has_frame && !has_boxes) {
    throw Error("record " + record.id.hex() + " carries neither boxes nor a Manhattan frame");
  }
  SceneSpec scene;
  scene.canvas_width = record.width > 0 ? record.width : 1024;
  scene.canvas_height = record.height > 0 ? record.height : 1024;
  scene.style = RenderStyle::for_canvas(scene.canvas_width, scene.canvas_height);
  scene.style.max_lines_per_bundle = std::max(scene.style.max_lines_per_bundle, policy.lines_per_axis);

  if (has_frame) {
    for (const auto& axis : record.frame->axes) {
      std::vector<int> members;
      for (int id : axis.member_ids) {
        if (id >= 0 && static_cast<std::size_t>(id) < record.segments.size()) members.push_back(id);
      }
      if (members.empty()) continue;
      std::stable_sort(members.begin(), members.end(), [&](int a, int b) {
        return record.segments[a].length > record.segments[b].length;
      });
      if (static_cast<int>(members.size()) > policy.lines_per_axis) members.resize(policy.lines_per_axis);
      VanishingLineBundle bundle;
      bundle.vp = axis.vp;
      bundle.extend_to_vp = true;
      for (int id : members) bundle.anchors.push_back(record.segments[id].midpoint());
      scene.bundles.push_back(std::move(bundle));
    }
  }
  if (has_boxes) {
    for (const auto& g : *record.boxes) scene.boxes.push_back(g.box);
  }
  return scene;
}

std::string_view to_string(RecordStatus s) {
  switch (s) {
    case RecordStatus::Pending:
      return "Pending";
    case RecordStatus::FilteredAesthetic:
      return "FilteredAesthetic";
    case RecordStatus::FilteredGeometry:
      return "FilteredGeometry";
    case RecordStatus::Annotated:
      return "Annotated";
    case RecordStatus::Emitted:
      return "Emitted";
    case RecordStatus::Failed:
      return "Failed";
  }
  return "Pending";
}

bool is_terminal(RecordStatus s) {
  return s == RecordStatus::FilteredAesthetic || s == RecordStatus::FilteredGeometry ||
         s == RecordStatus::Emitted || s == RecordStatus::Failed;
}

bool is_forward_transition(RecordStatus from, RecordStatus to) {
  if (is_terminal(from)) return false;
  return static_cast<int>(to) > static_cast<int>(from);
}

}  // namespace condforge
