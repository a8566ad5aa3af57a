#include "condforge/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include "condforge/error.hpp"
#include "condforge/image_io.hpp"
#include "condforge/manifest.hpp"

namespace condforge {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

const std::vector<Stage>& stage_order(PipelineKind kind) {
  static const std::vector<Stage> proportion{Stage::Ingest, Stage::Aesthetic, Stage::Caption, Stage::Grounding,
                                             Stage::Emit};
  static const std::vector<Stage> perspective{Stage::Ingest, Stage::Aesthetic, Stage::VanishingPoint,
                                              Stage::Caption, Stage::Emit};
  return kind == PipelineKind::Proportion ? proportion : perspective;
}

int stage_position(PipelineKind kind, Stage s) {
  const auto& order = stage_order(kind);
  const auto it = std::find(order.begin(), order.end(), s);
  return it == order.end() ? -1 : static_cast<int>(it - order.begin());
}

Stage geometry_stage(PipelineKind kind) {
  return kind == PipelineKind::Proportion ? Stage::Grounding : Stage::VanishingPoint;
}

struct Clients {
  std::optional<ModelClient> aesthetic;
  std::optional<ModelClient> caption;
  std::optional<ModelClient> ground;
};

Clients make_clients(const PipelineConfig& config) {
  auto make = [](const ServiceEndpoint& ep, const char* name) {
    if (ep.base_url.empty()) throw PipelineError(std::string("no endpoint configured for ") + name);
    return ModelClient(ep);
  };
  Clients c;
  c.aesthetic.emplace(make(config.aesthetic_endpoint, "aesthetic"));
  c.caption.emplace(make(config.caption_endpoint, "caption"));
  if (config.kind == PipelineKind::Proportion) c.ground.emplace(make(config.ground_endpoint, "ground"));
  return c;
}

struct Outcome {
  ImageRecord record;
  Stage last_passed = Stage::Ingest;
  std::vector<Stage> passed;
  std::optional<GrayImage> conditioning;
  std::vector<std::uint8_t> bytes;
  std::string extension;
  bool remote_unavailable = false;
  std::vector<std::string> warnings;
};

Outcome process(const IngestEntry& entry, const PipelineConfig& config, const Clients& clients) {
  Outcome o;
  auto& rec = o.record;
  rec.id = entry.id;
  rec.source_path = entry.path.string();
  o.extension = lower(entry.path.extension().string());
  auto pass = [&](Stage s) {
    o.passed.push_back(s);
    o.last_passed = s;
  };
  auto finish = [&](RecordStatus status, std::string reason = {}) {
    rec.status = status;
    rec.failure_reason = std::move(reason);
    return o;
  };
  try {
    o.bytes = read_file(entry.path);
    const auto decoded = decode_image(o.bytes);
    rec.width = decoded.width;
    rec.height = decoded.height;

    const double score = clients.aesthetic->score_aesthetic(o.bytes);
    rec.aesthetic = score;
    if (!(score > config.effective_aesthetic_threshold())) return finish(RecordStatus::FilteredAesthetic);
    pass(Stage::Aesthetic);

    if (config.kind == PipelineKind::Perspective) {
      const auto gray = to_gray(decoded);
      rec.segments = detect_segments(gray, config.detection);
      rec.segments_count = static_cast<int>(rec.segments.size());
      const auto extent = ImageFrame(rec.width, rec.height).extent();
      const auto analysis = analyze_segments(rec.segments, config.vp, config.filter, extent);
      rec.frame = analysis.frame;
      if (!analysis.filter.pass) return finish(RecordStatus::FilteredGeometry);
      rec.perspective = analysis.filter.perspective;
      pass(Stage::VanishingPoint);
      rec.captions = clients.caption->caption(o.bytes);
      pass(Stage::Caption);
    } else {
      rec.captions = clients.caption->caption(o.bytes);
      pass(Stage::Caption);
      rec.boxes = clients.ground->ground(o.bytes, rec.captions->detailed_caption, config.box_threshold, &o.warnings);
      if (rec.boxes->empty()) return finish(RecordStatus::FilteredGeometry);
      pass(Stage::Grounding);
    }

    auto rendered = render_scene(annotation_to_scene(rec, config.scene));
    for (auto& w : rendered.warnings) o.warnings.push_back(rec.id.hex() + ": " + w);
    o.conditioning = std::move(rendered.image);
    return finish(RecordStatus::Annotated);
  } catch (const RemoteUnavailable& e) {
    o.remote_unavailable = true;
    return finish(RecordStatus::Failed, e.what());
  } catch (const std::exception& e) {
    return finish(RecordStatus::Failed, e.what());
  }
}

class Committer {
 public:
  Committer(const PipelineConfig& config, JournalWriter& journal, ManifestWriter& manifest)
      : config_(config), journal_(journal), manifest_(manifest) {}

  void commit(Outcome& o) {
    const auto& rec = o.record;
    for (const auto s : o.passed) journal_.write({rec.id, s, RecordStatus::Pending, now_ms(), {}});
    if (rec.status != RecordStatus::Annotated) {
      journal_.write({rec.id, o.last_passed, rec.status, now_ms(), rec.failure_reason});
      return;
    }
    const std::string hex = rec.id.hex();
    ManifestEntry m;
    m.id = rec.id;
    m.image_path = "images/" + hex + o.extension;
    m.conditioning_path = "conditioning/" + hex + ".png";
    m.prompt = rec.captions->short_caption;
    if (config_.kind == PipelineKind::Perspective) {
      m.perspective = rec.perspective;
    } else {
      m.boxes = static_cast<int>(rec.boxes->size());
    }
    write_file(config_.output_dir / m.image_path, o.bytes);
    write_file(config_.output_dir / m.conditioning_path, encode_png(replicate_to_rgb(*o.conditioning)));
    manifest_.append(m);
    journal_.write({rec.id, Stage::Emit, RecordStatus::Emitted, now_ms(), {}});
  }

 private:
  const PipelineConfig& config_;
  JournalWriter& journal_;
  ManifestWriter& manifest_;
};

struct ExecutionResult {
  std::size_t committed = 0;
  bool interrupted = false;
  std::vector<std::string> warnings;
};

ExecutionResult execute(const PipelineConfig& config, const std::vector<IngestEntry>& pending,
                        JournalWriter& journal) {
  ExecutionResult result;
  if (pending.empty()) return result;
  const auto clients = make_clients(config);
  ManifestWriter manifest(layout::manifest(config.output_dir));
  Committer committer(config, journal, manifest);

  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::mutex mu;
  std::condition_variable cv;
  std::deque<Outcome> queue;
  int running = std::max(1, config.worker_count);

  auto worker = [&] {
    while (!stop.load()) {
      const auto i = next.fetch_add(1);
      if (i >= pending.size()) break;
      auto outcome = process(pending[i], config, clients);
      {
        std::lock_guard lock(mu);
        queue.push_back(std::move(outcome));
      }
      cv.notify_one();
    }
    {
      std::lock_guard lock(mu);
      --running;
    }
    cv.notify_one();
  };

  std::vector<std::thread> threads;
  for (int i = 0; i < std::max(1, config.worker_count); ++i) threads.emplace_back(worker);

  std::size_t remote_failures = 0;
  std::string abort_reason;
  try {
    while (true) {
      std::unique_lock lock(mu);
      cv.wait(lock, [&] { return !queue.empty() || running == 0; });
      if (queue.empty()) break;
      auto outcome = std::move(queue.front());
      queue.pop_front();
      lock.unlock();
      if (stop.load()) continue;  // drain without committing

      committer.commit(outcome);
      ++result.committed;
      for (auto& w : outcome.warnings) result.warnings.push_back(std::move(w));
      if (outcome.remote_unavailable && ++remote_failures > static_cast<std::size_t>(config.failure_budget)) {
        abort_reason = "aborting: " + std::to_string(remote_failures) +
                       " records failed on unavailable services (failure budget " +
                       std::to_string(config.failure_budget) + "); last: " + outcome.record.failure_reason;
        stop = true;
      }
      if (config.interrupt_after && result.committed >= *config.interrupt_after) {
        result.interrupted = true;
        stop = true;
      }
    }
  } catch (...) {
    stop = true;
    for (auto& t : threads) t.join();
    throw;
  }
  for (auto& t : threads) t.join();
  if (!abort_reason.empty()) throw PipelineError(abort_reason);
  return result;
}

RunReport build_report(const PipelineConfig& config, const IngestResult& ingested) {
  RunReport report;
  report.kind = config.kind;
  report.funnel.ingested = ingested.entries.size();
  report.duplicates = ingested.duplicates.size();
  report.unreadable = ingested.unreadable.size();

  const auto latest = latest_entries(read_journal(layout::journal(config.output_dir)).entries);
  const int aesthetic_pos = stage_position(config.kind, Stage::Aesthetic);
  const int geometry_pos = stage_position(config.kind, geometry_stage(config.kind));
  for (const auto& e : ingested.entries) {
    const auto it = latest.find(e.id);
    if (it == latest.end()) {
      ++report.status_counts[std::string(to_string(RecordStatus::Pending))];
      continue;
    }
    ++report.status_counts[std::string(to_string(it->second.status))];
    const int pos = stage_position(config.kind, it->second.stage);
    report.funnel.post_aesthetic += pos >= aesthetic_pos;
    report.funnel.post_geometry += pos >= geometry_pos;
    report.funnel.emitted += it->second.status == RecordStatus::Emitted;
  }
  const auto manifest = read_manifest(layout::manifest(config.output_dir));
  if (config.kind == PipelineKind::Perspective) {
    for (auto c : {PerspectiveClass::OnePoint, PerspectiveClass::TwoPoint, PerspectiveClass::ThreePoint}) {
      report.perspective_histogram[std::string(to_string(c))] = 0;
    }
  }
  for (const auto& m : manifest.entries) {
    if (m.perspective) ++report.perspective_histogram[std::string(to_string(*m.perspective))];
    if (m.boxes) ++report.box_histogram[*m.boxes];
  }
  return report;
}

void check_config(const PipelineConfig& config) {
  if (config.worker_count < 1) throw PipelineError("worker_count must be >= 1");
  if (config.failure_budget < 0) throw PipelineError("failure_budget must be >= 0");
  if (!(config.box_threshold >= 0.0 && config.box_threshold <= 1.0)) {
    throw PipelineError("box_threshold must be within [0, 1]");
  }
  if (config.output_dir.empty()) throw PipelineError("output directory not set");
  if (!fs::is_directory(config.corpus_root)) {
    throw PipelineError("corpus directory not found: " + config.corpus_root.string());
  }
}

RunReport execute_and_finalize(const PipelineConfig& config, const IngestResult& ingested,
                               const std::vector<IngestEntry>& pending, JournalWriter& journal,
                               std::chrono::steady_clock::time_point started) {
  auto exec = execute(config, pending, journal);
  journal.close();
  RunReport report;
  if (exec.interrupted) {
    report.kind = config.kind;
    report.funnel.ingested = ingested.entries.size();
  } else {
    compact_journal(layout::journal(config.output_dir));
    canonicalize_manifest(layout::manifest(config.output_dir));
    report = build_report(config, ingested);
    report.finished = true;
  }
  report.processed = exec.committed;
  report.warnings = std::move(exec.warnings);
  for (const auto& d : ingested.duplicates) report.warnings.push_back("duplicate content skipped: " + d);
  for (const auto& u : ingested.unreadable) report.warnings.push_back("unreadable file skipped: " + u);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  if (report.finished) write_file(layout::report(config.output_dir), report.to_json().dump(2) + "\n");
  return report;
}

}  // namespace

std::string_view to_string(PipelineKind k) { return k == PipelineKind::Proportion ? "proportion" : "perspective"; }

PipelineKind pipeline_kind_from_string(std::string_view name) {
  if (name == "proportion") return PipelineKind::Proportion;
  if (name == "perspective") return PipelineKind::Perspective;
  throw Error("unknown pipeline kind '" + std::string(name) + "' (expected proportion or perspective)");
}

double PipelineConfig::effective_aesthetic_threshold() const {
  if (aesthetic_threshold) return *aesthetic_threshold;
  return kind == PipelineKind::Proportion ? 5.0 : 3.5;
}

json PipelineConfig::fingerprint_json() const {
  json j{{"kind", to_string(kind)}, {"aesthetic_threshold", effective_aesthetic_threshold()}};
  if (kind == PipelineKind::Proportion) {
    j["box_threshold"] = box_threshold;
  } else {
    j["detection"] = {{"gradient_threshold", detection.gradient_threshold},
                      {"angle_tolerance_deg", detection.angle_tolerance_deg},
                      {"min_length_fraction", detection.min_length_fraction},
                      {"smoothing_sigma", detection.smoothing_sigma},
                      {"merge_angle_deg", detection.merge_angle_deg},
                      {"max_aspect_ratio", detection.max_aspect_ratio},
                      {"merge_distance_fraction", detection.merge_distance_fraction},
                      {"merge_gap_fraction", detection.merge_gap_fraction}};
    j["vp"] = {{"tau_support_deg", vp.tau_support_deg},
               {"dedup_angle_deg", vp.dedup_angle_deg},
               {"tol_ortho_deg", vp.tol_ortho_deg},
               {"max_segments", vp.max_segments},
               {"top_k", vp.top_k},
               {"refine", vp.refine},
               {"focal", vp.camera.focal},
               {"principal_point", {vp.camera.principal_point.x, vp.camera.principal_point.y}}};
    j["filter"] = {{"min_support_count", filter.min_support_count},
                   {"min_support_fraction", filter.min_support_fraction},
                   {"k_extent", filter.k_extent}};
    j["lines_per_axis"] = scene.lines_per_axis;
  }
  return j;
}

std::string PipelineConfig::fingerprint() const { return fingerprint_json().dump(); }

json PipelineConfig::to_json() const {
  auto j = fingerprint_json();
  j["corpus"] = corpus_root.string();
  j["output_dir"] = output_dir.string();
  j["worker_count"] = worker_count;
  j["failure_budget"] = failure_budget;
  auto ep = [](const ServiceEndpoint& e) {
    return json{{"base_url", e.base_url},
                {"timeout_ms", e.timeout.count()},
                {"max_retries", e.max_retries},
                {"backoff_base_ms", e.backoff_base.count()},
                {"max_concurrency", e.max_concurrency},
                {"bearer_token", e.bearer_token.empty() ? "" : "<set>"}};
  };
  j["endpoints"] = {{"aesthetic", ep(aesthetic_endpoint)}, {"caption", ep(caption_endpoint)}};
  if (kind == PipelineKind::Proportion) j["endpoints"]["ground"] = ep(ground_endpoint);
  return j;
}

json RunReport::to_json() const {
  json j{{"kind", to_string(kind)},
         {"funnel",
          {{"ingested", funnel.ingested},
           {"post_aesthetic", funnel.post_aesthetic},
           {"post_geometry", funnel.post_geometry},
           {"emitted", funnel.emitted}}},
         {"duplicates", duplicates},
         {"unreadable", unreadable},
         {"processed", processed},
         {"status_counts", status_counts},
         {"wall_seconds", wall_seconds},
         {"finished", finished}};
  if (kind == PipelineKind::Perspective) j["perspective_histogram"] = perspective_histogram;
  json boxes = json::object();
  for (const auto& [n, c] : box_histogram) boxes[std::to_string(n)] = c;
  if (kind == PipelineKind::Proportion) j["box_histogram"] = boxes;
  return j;
}

IngestResult ingest(const fs::path& corpus_root) {
  if (!fs::is_directory(corpus_root)) throw PipelineError("corpus directory not found: " + corpus_root.string());
  std::vector<fs::path> files;
  for (auto it = fs::recursive_directory_iterator(corpus_root, fs::directory_options::skip_permission_denied);
       it != fs::recursive_directory_iterator(); ++it) {
    std::error_code ec;
    if (!it->is_regular_file(ec)) continue;
    const auto ext = lower(it->path().extension().string());
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") files.push_back(it->path());
  }
  std::sort(files.begin(), files.end(), [&](const fs::path& a, const fs::path& b) {
    return a.lexically_relative(corpus_root).generic_string() < b.lexically_relative(corpus_root).generic_string();
  });
  IngestResult out;
  std::set<ContentId> seen;
  for (const auto& path : files) {
    std::vector<std::uint8_t> bytes;
    try {
      bytes = read_file(path);
    } catch (const Error&) {
      out.unreadable.push_back(path.string());
      continue;
    }
    const auto id = content_id(bytes);
    if (!seen.insert(id).second) {
      out.duplicates.push_back(path.string());
      continue;
    }
    out.entries.push_back({id, path});
  }
  return out;
}

RunReport run(const PipelineConfig& config) {
  const auto started = std::chrono::steady_clock::now();
  check_config(config);
  const auto& out = config.output_dir;
  if (fs::exists(out) && !(fs::is_directory(out) && fs::is_empty(out))) {
    throw PipelineError("output directory " + out.string() + " already exists; use resume to continue it");
  }
  fs::create_directories(layout::images(out));
  fs::create_directories(layout::conditioning(out));
  write_file(layout::manifest(out), std::string());
  JournalWriter journal(layout::journal(out), config.fingerprint(), false);
  const auto ingested = ingest(config.corpus_root);
  return execute_and_finalize(config, ingested, ingested.entries, journal, started);
}

RunReport resume(const PipelineConfig& config) {
  const auto started = std::chrono::steady_clock::now();
  check_config(config);
  const auto& out = config.output_dir;
  const auto journal_path = layout::journal(out);
  if (!fs::exists(journal_path)) throw PipelineError("no checkpoint to resume in " + out.string());
  const auto contents = read_journal(journal_path);
  if (contents.fingerprint != config.fingerprint()) {
    std::string detail;
    try {
      const auto old = json::parse(contents.fingerprint);
      const auto now = config.fingerprint_json();
      for (const auto& [key, value] : now.items()) {
        if (!old.contains(key) || old[key] != value) {
          detail += " " + key + ": " + (old.contains(key) ? old[key].dump() : "unset") + " -> " + value.dump() + ";";
        }
      }
    } catch (const json::exception&) {
      detail = " unreadable checkpoint fingerprint";
    }
    throw PipelineError("configuration differs from the checkpoint:" + detail);
  }
  fs::create_directories(layout::images(out));
  fs::create_directories(layout::conditioning(out));

  const auto latest = latest_entries(contents.entries);
  std::set<ContentId> emitted;
  for (const auto& [id, e] : latest) {
    if (e.status == RecordStatus::Emitted) emitted.insert(id);
  }
  const auto present = reconcile_manifest(layout::manifest(out), emitted);
  std::vector<std::string> warnings;
  for (const auto& id : emitted) {
    if (!present.count(id)) warnings.push_back("emitted record " + id.hex() + " missing from manifest");
  }

  const auto ingested = ingest(config.corpus_root);
  std::vector<IngestEntry> pending;
  for (const auto& e : ingested.entries) {
    const auto it = latest.find(e.id);
    if (it == latest.end() || !is_terminal(it->second.status)) pending.push_back(e);
  }
  JournalWriter journal(journal_path, contents.fingerprint, true);
  auto report = execute_and_finalize(config, ingested, pending, journal, started);
  report.warnings.insert(report.warnings.end(), warnings.begin(), warnings.end());
  return report;
}

}  // namespace condforge
