#include "cli_app.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <json.hpp>
#include <random>

#include "condforge/conditioning.hpp"
#include "condforge/error.hpp"
#include "condforge/flow_matching.hpp"
#include "condforge/geometry.hpp"
#include "condforge/image_io.hpp"
#include "condforge/mock_server.hpp"
#include "condforge/pipeline.hpp"
#include "condforge/scene_spec.hpp"
#include "condforge/segment_detection.hpp"
#include "condforge/stats.hpp"

namespace condforge::cli {
namespace {

using nlohmann::json;

struct BuildOptions {
  std::string kind;
  std::string corpus;
  std::string out;
  bool resume = false;
  int workers = 1;
  std::optional<double> aesthetic_threshold;
  double box_threshold = kDefaultBoxThreshold;
  std::string aesthetic_url;
  std::string caption_url;
  std::string ground_url;
  std::string bearer_token;
  int timeout_ms = 30000;
  int max_retries = 3;
  int backoff_ms = 200;
  int max_concurrency = 8;
  int failure_budget = 10;
  int lines_per_axis = 6;
  double focal = 1.0;
};

struct DetectOptions {
  std::string image;
  double focal = 1.0;
  bool dump_segments = false;
};

struct RenderOptions {
  std::string spec;
  std::string out;
};

struct StatsOptions {
  std::string manifest;
  std::string report;
};

struct FmOptions {
  int steps = 2000;
  double lr = 0.1;
  int samples = 256;
  std::string out;
};

struct MockOptions {
  std::string fixtures;
  int port = 8080;
};

json vp_json(const HomogeneousPoint& p) { return {{"x", p.x()}, {"y", p.y()}, {"w", p.w()}}; }

PipelineConfig pipeline_config(const BuildOptions& o) {
  PipelineConfig c;
  c.kind = pipeline_kind_from_string(o.kind);
  c.corpus_root = o.corpus;
  c.output_dir = o.out;
  c.aesthetic_threshold = o.aesthetic_threshold;
  c.box_threshold = o.box_threshold;
  c.worker_count = o.workers;
  c.failure_budget = o.failure_budget;
  c.scene.lines_per_axis = o.lines_per_axis;
  c.vp.camera.focal = o.focal;
  auto endpoint = [&](const std::string& url) {
    ServiceEndpoint ep;
    ep.base_url = url;
    ep.timeout = std::chrono::milliseconds(o.timeout_ms);
    ep.max_retries = o.max_retries;
    ep.backoff_base = std::chrono::milliseconds(o.backoff_ms);
    ep.bearer_token = o.bearer_token;
    ep.max_concurrency = o.max_concurrency;
    return ep;
  };
  c.aesthetic_endpoint = endpoint(o.aesthetic_url);
  c.caption_endpoint = endpoint(o.caption_url);
  c.ground_endpoint = endpoint(o.ground_url);
  return c;
}

int do_build(const BuildOptions& o, std::uint64_t seed, std::ostream& out, std::ostream& err) {
  const auto config = pipeline_config(o);
  auto effective = config.to_json();
  effective["resume"] = o.resume;
  effective["seed"] = seed;
  err << "effective config: " << effective.dump() << "\n";
  const auto report = o.resume ? resume(config) : run(config);
  for (const auto& w : report.warnings) err << "warning: " << w << "\n";
  out << report.to_json().dump(2) << "\n";
  return kOk;
}

int do_detect(const DetectOptions& o, std::ostream& out, std::ostream& err) {
  err << "effective config: "
      << json{{"image", o.image}, {"focal", o.focal}, {"dump_segments", o.dump_segments}}.dump() << "\n";
  const auto decoded = decode_image(read_file(o.image));
  const auto gray = to_gray(decoded);
  const auto segments = detect_segments(gray);
  VpParams params;
  params.camera.focal = o.focal;
  const auto extent = ImageFrame(gray.width, gray.height).extent();
  const auto analysis = analyze_segments(segments, params, {}, extent);

  json j{{"image", {{"width", gray.width}, {"height", gray.height}}},
         {"segments_count", segments.size()},
         {"class", to_string(analysis.raw_class)},
         {"filter",
          {{"pass", analysis.filter.pass},
           {"perspective", to_string(analysis.filter.perspective)},
           {"dominant_axis", analysis.filter.dominant_axis}}}};
  if (analysis.frame) {
    json axes = json::array();
    for (const auto& a : analysis.frame->axes) {
      axes.push_back({{"vp", vp_json(a.vp)},
                      {"direction", {a.direction.x(), a.direction.y(), a.direction.z()}},
                      {"finite", is_finite_vp(a.vp, FilterThresholds{}.k_extent, extent)},
                      {"support_count", a.support_count},
                      {"support_length", a.support_length},
                      {"mean_residual_deg", rad_to_deg(a.mean_residual)}});
    }
    j["frame"] = {{"axes", axes}, {"score", analysis.frame->score}};
  } else {
    j["frame"] = nullptr;
  }
  if (o.dump_segments) {
    json segs = json::array();
    for (const auto& s : segments) segs.push_back({s.p1.x, s.p1.y, s.p2.x, s.p2.y});
    j["segments"] = segs;
  }
  out << j.dump(2) << "\n";
  return kOk;
}

int do_render(const RenderOptions& o, std::ostream& out, std::ostream& err) {
  err << "effective config: " << json{{"spec", o.spec}, {"out", o.out}}.dump() << "\n";
  std::ifstream in(o.spec);
  if (!in) throw Error("cannot open scene spec " + o.spec);
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto scene = parse_scene_spec(text);
  const auto result = render_scene(scene);
  for (const auto& w : result.warnings) err << "warning: " << w << "\n";
  write_file(o.out, encode_png(result.image));
  out << json{{"out", o.out},
              {"width", result.image.width},
              {"height", result.image.height},
              {"boxes", scene.boxes.size()},
              {"bundles", scene.bundles.size()},
              {"warnings", result.warnings}}
             .dump(2)
      << "\n";
  return kOk;
}

int do_stats(const StatsOptions& o, std::ostream& out, std::ostream& err) {
  err << "effective config: " << json{{"manifest", o.manifest}, {"report", o.report}}.dump() << "\n";
  std::optional<std::filesystem::path> report;
  if (!o.report.empty()) report = o.report;
  const auto stats = compute_stats(o.manifest, report);
  for (const auto& e : stats.errors) err << "manifest line " << e.line << ": " << e.message << "\n";
  for (const auto& w : stats.warnings) err << "warning: " << w << "\n";
  if (const auto r = stats.retention()) err << "retention " << format_percent(*r) << "\n";
  out << stats.to_json().dump(2) << "\n";
  return kOk;
}

int do_fm_demo(const FmOptions& o, std::uint64_t seed, std::ostream& out, std::ostream& err) {
  err << "effective config: "
      << json{{"steps", o.steps}, {"lr", o.lr}, {"samples", o.samples}, {"out", o.out}, {"seed", seed}}.dump()
      << "\n";
  if (o.samples < 1) throw Error("--samples must be >= 1");
  std::mt19937_64 rng(seed);
  const FlowDims dims;
  const auto truth = random_model(dims, rng);
  const auto data = planted_dataset(truth, dims, o.samples, rng);
  const auto result = fit(LinearVelocityModel::zeros(dims), data, o.steps, o.lr);
  std::string csv = "step,loss\n";
  char buf[64];
  for (std::size_t i = 0; i < result.loss_curve.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, result.loss_curve[i]);
    csv += buf;
  }
  write_file(o.out, csv);
  out << json{{"out", o.out},
              {"steps", o.steps},
              {"initial_loss", result.loss_curve.front()},
              {"final_loss", result.loss_curve.back()},
              {"planted_loss", fm_loss(truth, data)}}
             .dump(2)
      << "\n";
  return kOk;
}

int do_mock_serve(const MockOptions& o, std::ostream& out, std::ostream& err) {
  err << "effective config: " << json{{"fixtures", o.fixtures}, {"port", o.port}}.dump() << "\n";
  MockServer server(MockFixtures::load(o.fixtures));
  const int port = server.start(o.port);
  out << json{{"port", port}, {"base_url", server.base_url()}}.dump() << std::endl;
  server.serve_forever(port);
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Conditioning-dataset factory: triplet pipelines, vanishing-point analysis, "
               "conditioning rasters and a flow-matching demo.",
               "condforge"};
  app.require_subcommand(1);
  app.set_config("--config", "", "INI/TOML file with option defaults; command-line flags override it");
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "Seed for every randomized default")->capture_default_str();

  BuildOptions b;
  auto* build = app.add_subcommand("build", "Run (or resume) a triplet pipeline over an image corpus");
  build->add_option("--kind", b.kind, "Pipeline kind")->required()->check(CLI::IsMember({"proportion", "perspective"}));
  build->add_option("--corpus", b.corpus, "Corpus root directory")->required();
  build->add_option("--out", b.out, "Output directory")->required();
  build->add_flag("--resume", b.resume, "Continue the checkpointed run in --out");
  build->add_option("--workers", b.workers, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  build->add_option("--aesthetic-threshold", b.aesthetic_threshold,
                    "Keep images scoring strictly above this (default 5.0 proportion, 3.5 perspective)");
  build->add_option("--box-threshold", b.box_threshold, "Grounding confidence threshold")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  build->add_option("--aesthetic-url", b.aesthetic_url, "Aesthetic scorer base URL")->envname("CONDFORGE_AESTHETIC_URL");
  build->add_option("--caption-url", b.caption_url, "Captioner base URL")->envname("CONDFORGE_CAPTION_URL");
  build->add_option("--ground-url", b.ground_url, "Grounded detector base URL")->envname("CONDFORGE_GROUND_URL");
  build->add_option("--bearer-token", b.bearer_token, "Static bearer token for the services");
  build->add_option("--timeout-ms", b.timeout_ms, "Per-request timeout")->capture_default_str();
  build->add_option("--max-retries", b.max_retries, "Retries on transport errors and 5xx")->capture_default_str();
  build->add_option("--backoff-ms", b.backoff_ms, "Base retry backoff (doubles per retry)")->capture_default_str();
  build->add_option("--max-concurrency", b.max_concurrency, "In-flight request cap per endpoint")->capture_default_str();
  build->add_option("--failure-budget", b.failure_budget, "Abort after this many unavailable-service failures")
      ->capture_default_str();
  build->add_option("--lines-per-axis", b.lines_per_axis, "Vanishing lines rendered per axis")->capture_default_str();
  build->add_option("--focal", b.focal, "Focal length in normalized units")->capture_default_str();

  DetectOptions d;
  auto* detect = app.add_subcommand("detect-vp", "Detect segments and the Manhattan frame of one image; prints JSON");
  detect->add_option("--image", d.image, "PNG or JPEG file")->required()->check(CLI::ExistingFile);
  detect->add_option("--focal", d.focal, "Focal length in normalized units")->capture_default_str();
  detect->add_flag("--dump-segments", d.dump_segments, "Include detected segments in the output");

  RenderOptions r;
  auto* render = app.add_subcommand("render", "Render a scene spec to a conditioning PNG");
  render->add_option("--spec", r.spec, "Scene spec (YAML)")->required()->check(CLI::ExistingFile);
  render->add_option("--out", r.out, "Output PNG")->required();

  StatsOptions s;
  auto* stats = app.add_subcommand("stats", "Corpus statistics for a manifest");
  stats->add_option("--manifest", s.manifest, "manifest.jsonl")->required()->check(CLI::ExistingFile);
  stats->add_option("--report", s.report, "Run report with funnel counts (default: report.json beside the manifest)")
      ->check(CLI::ExistingFile);

  FmOptions f;
  auto* fm = app.add_subcommand("fm-demo", "Fit a linear velocity field to a planted dataset; writes the loss curve");
  fm->add_option("--steps", f.steps, "Gradient steps")->capture_default_str()->check(CLI::NonNegativeNumber);
  fm->add_option("--lr", f.lr, "Learning rate")->capture_default_str()->check(CLI::NonNegativeNumber);
  fm->add_option("--samples", f.samples, "Planted samples")->capture_default_str();
  fm->add_option("--out", f.out, "Loss-curve CSV (step,loss)")->required();

  MockOptions m;
  auto* mock = app.add_subcommand("mock-serve", "Serve scripted model-service responses on localhost");
  mock->add_option("--fixtures", m.fixtures, "Fixture JSON")->required()->check(CLI::ExistingFile);
  mock->add_option("--port", m.port, "Port (0 picks a free one)")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help("", CLI::AppFormatMode::All) : app.help());
    return kOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kOk;
    }
    err << "error: " << e.what() << "\n";
    err << "run 'condforge --help' for usage\n";
    return kUsage;
  }

  try {
    if (build->parsed()) return do_build(b, seed, out, err);
    if (detect->parsed()) return do_detect(d, out, err);
    if (render->parsed()) return do_render(r, out, err);
    if (stats->parsed()) return do_stats(s, out, err);
    if (fm->parsed()) return do_fm_demo(f, seed, out, err);
    if (mock->parsed()) return do_mock_serve(m, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}

}  // namespace condforge::cli
