#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cli_app.hpp"
#include "condforge/image_io.hpp"
#include "condforge/manifest.hpp"
#include "condforge/mock_server.hpp"
#include "condforge/synthetic.hpp"
#include "support.hpp"

using namespace condforge;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result invoke(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = condforge::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Sets an environment variable for the current scope.
class ScopedEnv {
 public:
  ScopedEnv(const char* name, const std::string& value) : name_(name) { ::setenv(name, value.c_str(), 1); }
  ~ScopedEnv() { ::unsetenv(name_); }

 private:
  const char* name_;
};

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("help snapshot") {
    const auto r = invoke({"--help"});
    CHECK(r.code == 0);
    const auto golden = testsupport::golden_dir() / "help.txt";
    if (std::getenv("CONDFORGE_REGEN_GOLDEN")) std::ofstream(golden, std::ios::binary) << r.out;
    CHECK(r.out == slurp(golden));
  }

  TEST_CASE("help enumerates every subcommand and flag") {
    const auto text = invoke({"--help"}).out;
    const std::vector<std::string> expected{
        "build", "detect-vp", "render", "stats", "fm-demo", "mock-serve", "--kind", "--corpus", "--out",
        "--resume", "--workers", "--aesthetic-threshold", "--box-threshold", "--aesthetic-url", "--caption-url",
        "--ground-url", "--image", "--focal", "--dump-segments", "--spec", "--manifest", "--report", "--steps",
        "--lr", "--samples", "--fixtures", "--port", "--seed", "--config", "CONDFORGE_AESTHETIC_URL",
        "CONDFORGE_CAPTION_URL", "CONDFORGE_GROUND_URL"};
    for (const auto& token : expected) {
      CAPTURE(token);
      CHECK(text.find(token) != std::string::npos);
    }
  }

  TEST_CASE("usage errors exit 1 and name the problem") {
    auto r = invoke({"build", "--kind", "proportion", "--out", "x"});
    CHECK(r.code == 1);
    CHECK(r.err.find("--corpus") != std::string::npos);
    r = invoke({"render", "--spec", "nope.yaml", "--bogus", "1"});
    CHECK(r.code == 1);
    r = invoke({});
    CHECK(r.code == 1);
    r = invoke({"build", "--kind", "depth", "--corpus", ".", "--out", "x"});
    CHECK(r.code == 1);
    CHECK(r.err.find("--kind") != std::string::npos);
  }

  TEST_CASE("render matches the golden rasters") {
    testsupport::TempDir dir;
    for (const std::string name : {"one_box", "convergence", "parallel"}) {
      CAPTURE(name);
      const auto out = dir / (name + ".png");
      const auto r = invoke({"render", "--spec", (testsupport::golden_dir() / (name + ".yaml")).string(), "--out",
                          out.string()});
      CHECK(r.code == 0);
      CHECK(r.err.find("effective config") != std::string::npos);
      CHECK(read_file(out) == read_file(testsupport::golden_dir() / (name + ".png")));
      CHECK(nlohmann::json::parse(r.out)["width"] == 512);
    }
  }

  TEST_CASE("render of an invalid spec is a runtime failure naming the field") {
    testsupport::TempDir dir;
    std::ofstream(dir / "bad.yaml") << "canvas: {width: 512, height: 512}\nboxes:\n  - {x0: 0.8, y0: 0.1, x1: 0.2, y1: 0.5}\n";
    const auto r = invoke({"render", "--spec", (dir / "bad.yaml").string(), "--out", (dir / "o.png").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("boxes[0].x0") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "o.png"));
  }

  TEST_CASE("detect-vp on a planted corridor") {
    testsupport::TempDir dir;
    std::mt19937_64 rng(21);
    synthetic::SceneOptions options;
    options.segments_per_axis = {5, 5, 20};
    options.jitter_deg = 0.0;
    options.outlier_fraction = 0.0;
    const auto scene = synthetic::manhattan_scene(Eigen::Matrix3d::Identity(), options, rng);
    write_file(dir / "corridor.png", encode_png(synthetic::render_segments(scene.segments, 512, 512, 3)));
    const auto r = invoke({"detect-vp", "--image", (dir / "corridor.png").string(), "--dump-segments"});
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["class"] == "OnePoint");
    CHECK(j["filter"]["pass"] == true);
    CHECK(j["frame"]["axes"].size() == 3);
    CHECK(j["segments"].size() == j["segments_count"]);
  }

  TEST_CASE("detect-vp on an undecodable file") {
    testsupport::TempDir dir;
    std::ofstream(dir / "x.png") << "nope";
    CHECK(invoke({"detect-vp", "--image", (dir / "x.png").string()}).code == 2);
  }

  TEST_CASE("fm-demo writes a reproducible loss curve") {
    testsupport::TempDir dir;
    const auto a = invoke({"--seed", "4", "fm-demo", "--steps", "2000", "--out", (dir / "a.csv").string()});
    const auto b = invoke({"--seed", "4", "fm-demo", "--steps", "2000", "--out", (dir / "b.csv").string()});
    REQUIRE(a.code == 0);
    REQUIRE(b.code == 0);
    const auto csv = slurp(dir / "a.csv");
    CHECK(csv == slurp(dir / "b.csv"));
    CHECK(csv.rfind("step,loss\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 2002);
    const auto j = nlohmann::json::parse(a.out);
    CHECK(j["final_loss"].get<double>() <= 1e-6);
    CHECK(j["initial_loss"].get<double>() > j["final_loss"].get<double>());
    const auto other = invoke({"--seed", "5", "fm-demo", "--steps", "10", "--out", (dir / "c.csv").string()});
    CHECK(other.code == 0);
    const auto second_line = [](const std::string& text) {
      const auto start = text.find('\n') + 1;
      return text.substr(start, text.find('\n', start) - start);
    };
    CHECK(second_line(slurp(dir / "c.csv")) != second_line(csv));
  }

  TEST_CASE("build with mock services via environment, then resume") {
    testsupport::TempDir dir;
    const auto ids = testsupport::write_noise_corpus(dir / "corpus", 12, 64);
    MockServer server(testsupport::standard_fixtures(testsupport::uniform_scores(ids, 2)));
    server.start(0);
    ScopedEnv a("CONDFORGE_AESTHETIC_URL", server.base_url());
    ScopedEnv c("CONDFORGE_CAPTION_URL", server.base_url());
    ScopedEnv g("CONDFORGE_GROUND_URL", server.base_url());

    const std::vector<std::string> base{"build", "--kind", "proportion", "--corpus", (dir / "corpus").string(),
                                        "--out", (dir / "out").string()};
    const auto first = invoke(base);
    REQUIRE(first.code == 0);
    CHECK(first.err.find("effective config") != std::string::npos);
    const auto report = nlohmann::json::parse(first.out);
    CHECK(report["finished"] == true);
    CHECK(report["funnel"]["ingested"] == 12);

    const auto collision = invoke(base);
    CHECK(collision.code == 2);
    CHECK(collision.err.find("resume") != std::string::npos);

    auto resume_args = base;
    resume_args.push_back("--resume");
    const auto resumed = invoke(resume_args);
    CHECK(resumed.code == 0);
    CHECK(nlohmann::json::parse(resumed.out)["processed"] == 0);

    auto changed = resume_args;
    changed.insert(changed.end(), {"--aesthetic-threshold", "3.5"});
    CHECK(invoke(changed).code == 2);

    const auto again = invoke({"build", "--kind", "proportion", "--corpus", (dir / "corpus").string(), "--out",
                            (dir / "out2").string(), "--workers", "3"});
    CHECK(again.code == 0);
    CHECK(slurp(dir / "out" / "manifest.jsonl") == slurp(dir / "out2" / "manifest.jsonl"));

    const auto stats = invoke({"stats", "--manifest", (dir / "out" / "manifest.jsonl").string()});
    CHECK(stats.code == 0);
    const auto sj = nlohmann::json::parse(stats.out);
    CHECK(sj["total"] == report["funnel"]["emitted"]);
    CHECK(sj.contains("box_histogram"));
    CHECK_FALSE(sj.contains("perspective_histogram"));
    CHECK(stats.err.find("retention") != std::string::npos);
  }

  TEST_CASE("build without endpoints fails at runtime") {
    testsupport::TempDir dir;
    testsupport::write_noise_corpus(dir / "corpus", 2, 64);
    const auto r = invoke({"build", "--kind", "proportion", "--corpus", (dir / "corpus").string(), "--out",
                        (dir / "out").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("endpoint") != std::string::npos);
  }

  TEST_CASE("config file supplies defaults and flags override it") {
    testsupport::TempDir dir;
    std::ofstream(dir / "fm.ini") << "[fm-demo]\nsteps=7\nlr=0.05\n";
    auto r = invoke({"--config", (dir / "fm.ini").string(), "fm-demo", "--out", (dir / "a.csv").string()});
    REQUIRE(r.code == 0);
    CHECK(nlohmann::json::parse(r.out)["steps"] == 7);
    CHECK(r.err.find("\"lr\":0.05") != std::string::npos);
    r = invoke({"--config", (dir / "fm.ini").string(), "fm-demo", "--steps", "3", "--out", (dir / "b.csv").string()});
    REQUIRE(r.code == 0);
    CHECK(nlohmann::json::parse(r.out)["steps"] == 3);
  }

  TEST_CASE("stats full-scale replay prints the retention") {
    testsupport::TempDir dir;
    std::ofstream(dir / "manifest.jsonl").close();
    std::ofstream(dir / "replay.json") << R"({"funnel": {"ingested": 1000000, "emitted": 373632}})";
    const auto r = invoke({"stats", "--manifest", (dir / "manifest.jsonl").string(), "--report",
                        (dir / "replay.json").string()});
    CHECK(r.code == 0);
    CHECK(r.err.find("retention 37.36%") != std::string::npos);
    CHECK(nlohmann::json::parse(r.out)["retention_percent"] == "37.36%");
  }
}
