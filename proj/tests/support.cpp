#include "support.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>

#include "condforge/synthetic.hpp"

#include <algorithm>

namespace testsupport {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
  path_ = fs::temp_directory_path() /
          (tag + "_" + std::to_string(stamp) + "_" + std::to_string(counter.fetch_add(1)));
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

fs::path source_dir() { return CONDFORGE_TEST_SOURCE_DIR; }
fs::path golden_dir() { return source_dir() / "golden"; }

std::vector<std::string> write_noise_corpus(const fs::path& dir, int count, int size, std::uint64_t seed) {
  fs::create_directories(dir);
  std::vector<std::string> ids;
  for (int i = 0; i < count; ++i) {
    std::mt19937_64 rng(seed * 1000003ULL + static_cast<std::uint64_t>(i));
    condforge::GrayImage img(size, size);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng() & 0xff);
    const auto bytes = condforge::encode_png(img);
    char name[32];
    std::snprintf(name, sizeof name, "img_%03d.png", i);
    condforge::write_file(dir / name, bytes);
    ids.push_back(condforge::content_id(bytes).hex());
  }
  return ids;
}

std::map<std::string, double> uniform_scores(const std::vector<std::string>& ids, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  std::map<std::string, double> out;
  for (const auto& id : ids) out[id] = u(rng);
  return out;
}

condforge::MockFixtures standard_fixtures(const std::map<std::string, double>& scores) {
  condforge::MockFixtures f;
  for (const auto& [id, s] : scores) f.aesthetic.by_image[id] = {200, {{"score", s}}, std::nullopt, 0};
  f.aesthetic.fallback = condforge::MockResponse{200, {{"score", 0.0}}, std::nullopt, 0};
  f.caption.fallback =
      condforge::MockResponse{200, {{"short", "image {id}"}, {"detailed", "a detailed view of image {id}"}},
                              std::nullopt, 0};
  f.ground.fallback = condforge::MockResponse{
      200,
      {{"boxes",
        {{{"x0", 0.1}, {"y0", 0.2}, {"x1", 0.6}, {"y1", 0.8}, {"phrase", "thing"}, {"confidence", 0.9}}}}},
      std::nullopt,
      0};
  return f;
}

std::map<std::string, condforge::PerspectiveClass> write_perspective_corpus(const fs::path& dir,
                                                                          std::uint64_t seed,
                                                                          std::array<int, 3> per_class,
                                                                          int textures, int size) {
  using condforge::PerspectiveClass;
  namespace syn = condforge::synthetic;
  fs::create_directories(dir);
  std::mt19937_64 rng(seed);
  std::map<std::string, PerspectiveClass> planted;
  int index = 0;
  auto save = [&](const condforge::GrayImage& img, PerspectiveClass c) {
    const auto bytes = condforge::encode_png(img);
    char name[32];
    std::snprintf(name, sizeof name, "scene_%03d.png", index++);
    condforge::write_file(dir / name, bytes);
    planted[condforge::content_id(bytes).hex()] = c;
  };
  for (int k = 0; k < 3; ++k) {
    const auto target = static_cast<PerspectiveClass>(k + 1);
    for (int i = 0; i < per_class[k]; ++i) {
      const auto rotation = syn::rotation_for_class(target, rng);
      syn::SceneOptions options;
      options.jitter_deg = 0.0;
      options.outlier_fraction = 0.0;
      options.segments_per_axis = syn::strong_perspective_counts(rotation, options.camera);
      const auto scene = syn::manhattan_scene(rotation, options, rng);
      save(syn::render_segments(scene.segments, size, size, 3), target);
    }
  }
  for (int i = 0; i < textures; ++i) save(syn::blob_texture(size, size, rng), PerspectiveClass::None);
  return planted;
}

condforge::SceneSpec random_scene_spec(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0), n(-1.2, 1.2);
  condforge::SceneSpec s;
  s.canvas_width = 64 + static_cast<int>(rng() % 200);
  s.canvas_height = 64 + static_cast<int>(rng() % 200);
  s.style.line_width = 1 + static_cast<int>(rng() % 4);
  const int boxes = static_cast<int>(rng() % 4);
  for (int i = 0; i < boxes; ++i) {
    double a = u(rng), b = u(rng), c = u(rng), d = u(rng);
    if (a == b || c == d) continue;
    s.boxes.push_back({std::min(a, b), std::min(c, d), std::max(a, b), std::max(c, d), ""});
  }
  const int bundles = static_cast<int>(rng() % 3);
  for (int i = 0; i < bundles; ++i) {
    condforge::VanishingLineBundle b;
    b.vp = (rng() % 3 == 0) ? condforge::HomogeneousPoint::at_infinity(n(rng), n(rng))
                            : condforge::HomogeneousPoint::from(n(rng), n(rng), 1.0);
    b.extend_to_vp = rng() % 2 == 0;
    for (int k = 0; k < 1 + static_cast<int>(rng() % 5); ++k) b.anchors.push_back({n(rng), n(rng)});
    s.bundles.push_back(b);
  }
  return s;
}

}  // namespace testsupport
