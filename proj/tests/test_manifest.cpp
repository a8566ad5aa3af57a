#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "condforge/error.hpp"
#include "condforge/manifest.hpp"
#include "support.hpp"

using namespace condforge;
namespace fs = std::filesystem;

namespace {

ContentId id_of(int k) {
  const std::string s = "img" + std::to_string(k);
  return content_id(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

ManifestEntry sample(int k) {
  ManifestEntry e;
  e.id = id_of(k);
  e.image_path = "images/" + e.id.hex() + ".png";
  e.conditioning_path = "conditioning/" + e.id.hex() + ".png";
  e.prompt = "a \"quoted\" prompt\nwith a newline " + std::to_string(k);
  if (k % 3 == 0) e.perspective = PerspectiveClass::TwoPoint;
  if (k % 2 == 0) e.boxes = k;
  return e;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_SUITE("manifest") {
  TEST_CASE("line round trip") {
    for (int k = 0; k < 12; ++k) {
      const auto e = sample(k);
      const auto line = to_json_line(e);
      CHECK(line.find('\n') == std::string::npos);
      CHECK(parse_manifest_line(line) == e);
    }
  }

  TEST_CASE("keys are sorted") {
    const auto line = to_json_line(sample(6));
    const auto pos = [&](const char* key) { return line.find(std::string("\"") + key + "\":"); };
    CHECK(pos("boxes") < pos("conditioning_path"));
    CHECK(pos("conditioning_path") < pos("id"));
    CHECK(pos("id") < pos("image_path"));
    CHECK(pos("image_path") < pos("perspective"));
    CHECK(pos("perspective") < pos("prompt"));
  }

  TEST_CASE("malformed lines are reported with their numbers") {
    testsupport::TempDir dir;
    const auto path = dir / "m.jsonl";
    {
      std::ofstream out(path);
      out << to_json_line(sample(1)) << "\n";
      out << "{not json\n";
      out << R"({"id":"zz","image_path":"a","conditioning_path":"b","prompt":"c"})" << "\n";
      out << to_json_line(sample(2)) << "\n";
      out << R"({"id":")" << id_of(3).hex() << R"(","image_path":"a","prompt":"c"})" << "\n";
    }
    const auto contents = read_manifest(path);
    CHECK(contents.entries.size() == 2);
    REQUIRE(contents.errors.size() == 3);
    CHECK(contents.errors[0].line == 2);
    CHECK(contents.errors[1].line == 3);
    CHECK(contents.errors[1].message.find("id") != std::string::npos);
    CHECK(contents.errors[2].line == 5);
    CHECK(contents.errors[2].message.find("conditioning_path") != std::string::npos);
  }

  TEST_CASE("reconcile drops torn line, unknown ids and duplicates") {
    testsupport::TempDir dir;
    const auto path = dir / "m.jsonl";
    {
      ManifestWriter w(path);
      for (int k = 0; k < 5; ++k) w.append(sample(k));
      w.append(sample(1));
    }
    {
      std::ofstream out(path, std::ios::app);
      const auto partial = to_json_line(sample(9));
      out << partial.substr(0, partial.size() / 2);
    }
    const std::set<ContentId> keep{id_of(0), id_of(1), id_of(3), id_of(9)};
    const auto present = reconcile_manifest(path, keep);
    CHECK(present == std::set<ContentId>{id_of(0), id_of(1), id_of(3)});
    const auto contents = read_manifest(path);
    CHECK(contents.errors.empty());
    REQUIRE(contents.entries.size() == 3);
    CHECK(contents.entries[1] == sample(1));
    CHECK(slurp(path).back() == '\n');
    CHECK(reconcile_manifest(dir / "absent.jsonl", keep).empty());
  }

  TEST_CASE("canonical order is independent of append order") {
    testsupport::TempDir dir;
    std::vector<int> order{0, 1, 2, 3, 4, 5, 6, 7};
    std::string first;
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 4; ++trial) {
      std::shuffle(order.begin(), order.end(), rng);
      const auto path = dir / ("m" + std::to_string(trial) + ".jsonl");
      {
        ManifestWriter w(path);
        for (int k : order) w.append(sample(k));
      }
      canonicalize_manifest(path);
      const auto text = slurp(path);
      if (trial == 0) first = text;
      CHECK(text == first);
    }
    const auto entries = read_manifest(dir / "m0.jsonl").entries;
    for (std::size_t k = 1; k < entries.size(); ++k) CHECK(entries[k - 1].id < entries[k].id);
  }

  TEST_CASE("canonicalize refuses malformed manifests") {
    testsupport::TempDir dir;
    const auto path = dir / "m.jsonl";
    std::ofstream(path) << "[]\n";
    CHECK_THROWS_AS(canonicalize_manifest(path), PipelineError);
  }
}
