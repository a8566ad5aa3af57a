#pragma once

#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "condforge/content_hash.hpp"
#include "condforge/geometry.hpp"
#include "condforge/conditioning.hpp"
#include "condforge/image_io.hpp"
#include "condforge/mock_server.hpp"

namespace testsupport {

/// Fresh directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "cf");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

std::filesystem::path source_dir();
std::filesystem::path golden_dir();

/// Small distinct PNGs (noise with a per-index seed), named img_000.png, ...
/// Returns the content-id hex of each file, in index order.
std::vector<std::string> write_noise_corpus(const std::filesystem::path& dir, int count, int size = 64,
                                            std::uint64_t seed = 1);

/// Deterministic per-image scores uniform in [0, 10), keyed by content id.
std::map<std::string, double> uniform_scores(const std::vector<std::string>& ids, std::uint64_t seed);

/// Fixtures with per-image aesthetic scores, "{id}"-templated captions and a
/// default single grounded box.
condforge::MockFixtures standard_fixtures(const std::map<std::string, double>& scores);

/// Planted Manhattan wireframes (20 one-point, 8 two-point, 2 three-point
/// by default, in that order) followed by blob textures, as 512x512 PNGs
/// named scene_NNN.png. Maps content-id hex to the planted class (None for
/// textures).
std::map<std::string, condforge::PerspectiveClass> write_perspective_corpus(
    const std::filesystem::path& dir, std::uint64_t seed, std::array<int, 3> per_class = {20, 8, 2},
    int textures = 20, int size = 512);

/// Random canvas (64..263 px per side), line width, boxes and bundles
/// (finite and infinite VPs, anchors on and off canvas).
condforge::SceneSpec random_scene_spec(std::mt19937_64& rng);

}  // namespace testsupport
