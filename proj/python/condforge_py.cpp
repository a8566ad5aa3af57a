// Python bindings. Structured results cross the boundary as JSON and come
// back as plain dicts.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>
#include <random>

#include "condforge/conditioning.hpp"
#include "condforge/content_hash.hpp"
#include "condforge/error.hpp"
#include "condforge/flow_matching.hpp"
#include "condforge/geometry.hpp"
#include "condforge/image_io.hpp"
#include "condforge/mock_server.hpp"
#include "condforge/pipeline.hpp"
#include "condforge/scene_spec.hpp"
#include "condforge/segment_detection.hpp"
#include "condforge/stats.hpp"

namespace py = pybind11;
using namespace condforge;
using nlohmann::json;

namespace {

py::object to_py(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

json from_py(const py::object& o) {
  return json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

std::vector<std::uint8_t> bytes_of(const py::bytes& b) {
  const std::string s = b;
  return {s.begin(), s.end()};
}

py::bytes to_bytes(const std::vector<std::uint8_t>& v) {
  return py::bytes(reinterpret_cast<const char*>(v.data()), v.size());
}

py::dict detect_vp(const py::bytes& image, double focal) {
  const auto gray = to_gray(decode_image(bytes_of(image)));
  const auto segments = detect_segments(gray);
  VpParams params;
  params.camera.focal = focal;
  const auto extent = ImageFrame(gray.width, gray.height).extent();
  const auto a = analyze_segments(segments, params, {}, extent);
  py::dict out;
  out["segments_count"] = segments.size();
  out["class"] = std::string(to_string(a.raw_class));
  out["passes_filter"] = a.filter.pass;
  out["perspective"] = std::string(to_string(a.filter.perspective));
  py::list directions;
  if (a.frame) {
    for (const auto& axis : a.frame->axes) {
      directions.append(py::make_tuple(axis.direction.x(), axis.direction.y(), axis.direction.z()));
    }
  }
  out["axes"] = directions;
  return out;
}

ServiceEndpoint endpoint(const std::string& url, int retries, int backoff_ms) {
  ServiceEndpoint e;
  e.base_url = url;
  e.max_retries = retries;
  e.backoff_base = std::chrono::milliseconds(backoff_ms);
  return e;
}

py::object build(const std::string& kind, const std::filesystem::path& corpus, const std::filesystem::path& out,
                 const std::string& aesthetic_url, const std::string& caption_url, const std::string& ground_url,
                 std::optional<double> aesthetic_threshold, int workers, bool resume_run, int max_retries,
                 int backoff_ms) {
  PipelineConfig c;
  c.kind = pipeline_kind_from_string(kind);
  c.corpus_root = corpus;
  c.output_dir = out;
  c.aesthetic_threshold = aesthetic_threshold;
  c.aesthetic_endpoint = endpoint(aesthetic_url, max_retries, backoff_ms);
  c.caption_endpoint = endpoint(caption_url, max_retries, backoff_ms);
  c.ground_endpoint = endpoint(ground_url, max_retries, backoff_ms);
  c.worker_count = workers;
  RunReport r;
  {
    py::gil_scoped_release release;
    r = resume_run ? resume(c) : run(c);
  }
  return to_py(r.to_json());
}

py::dict fm_demo(std::uint64_t seed, int steps, double lr, int samples) {
  std::mt19937_64 rng(seed);
  const FlowDims dims;
  const auto truth = random_model(dims, rng);
  const auto data = planted_dataset(truth, dims, samples, rng);
  const auto result = fit(LinearVelocityModel::zeros(dims), data, steps, lr);
  py::dict out;
  out["loss_curve"] = result.loss_curve;
  out["planted_loss"] = fm_loss(truth, data);
  return out;
}

}  // namespace

PYBIND11_MODULE(condforge, m) {
  m.doc() = "Conditioning-dataset construction: vanishing points, layout rendering, pipeline and a flow-matching toy";

  // Translators are tried newest first, so the base class goes first.
  const auto& base = py::register_exception<Error>(m, "Error");
  py::register_exception<PipelineError>(m, "PipelineError", base);

  m.def(
      "content_id", [](const py::bytes& data) { return content_id(bytes_of(data)).hex(); }, py::arg("data"),
      "Hex content id of a byte string.");

  m.def("detect_vp", &detect_vp, py::arg("image"), py::arg("focal") = 1.0,
        "Segments, Manhattan frame and perspective class of an encoded image.");

  m.def(
      "render_scene",
      [](const std::string& spec_yaml) { return to_bytes(encode_png(render_scene(parse_scene_spec(spec_yaml)).image)); },
      py::arg("spec_yaml"), "Renders a YAML scene spec to PNG bytes.");

  m.def(
      "compute_stats",
      [](const std::filesystem::path& manifest, std::optional<std::filesystem::path> report) {
        return to_py(compute_stats(manifest, report).to_json());
      },
      py::arg("manifest"), py::arg("report") = py::none());

  m.def("format_percent", &format_percent, py::arg("fraction"));

  m.def("build", &build, py::arg("kind"), py::arg("corpus"), py::arg("out"), py::arg("aesthetic_url"),
        py::arg("caption_url"), py::arg("ground_url"), py::arg("aesthetic_threshold") = py::none(),
        py::arg("workers") = 1, py::arg("resume") = false, py::arg("max_retries") = 3, py::arg("backoff_ms") = 200,
        "Runs (or resumes) a dataset build and returns the run report.");

  m.def("fm_demo", &fm_demo, py::arg("seed") = 0, py::arg("steps") = 2000, py::arg("lr") = 0.1,
        py::arg("samples") = 256);

  py::class_<MockServer>(m, "MockServer")
      .def(py::init([](const py::object& fixtures) { return std::make_unique<MockServer>(MockFixtures::from_json(from_py(fixtures))); }),
           py::arg("fixtures"))
      .def("start", &MockServer::start, py::arg("port") = 0)
      .def("stop", &MockServer::stop)
      .def_property_readonly("base_url", &MockServer::base_url)
      .def("request_count", &MockServer::request_count, py::arg("route"));
}
