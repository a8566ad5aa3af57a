#include "condforge/manifest.hpp"

#include <algorithm>
#include <json.hpp>

#include "condforge/error.hpp"

namespace condforge {
namespace {

using nlohmann::json;

void rewrite(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    for (const auto& e : entries) out << to_json_line(e) << '\n';
    if (!out) throw PipelineError("cannot rewrite manifest " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

std::string to_json_line(const ManifestEntry& e) {
  json j{{"id", e.id.hex()},
         {"image_path", e.image_path},
         {"conditioning_path", e.conditioning_path},
         {"prompt", e.prompt}};
  if (e.perspective) j["perspective"] = std::string(to_string(*e.perspective));
  if (e.boxes) j["boxes"] = *e.boxes;
  return j.dump();
}

ManifestEntry parse_manifest_line(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception&) {
    throw Error("not valid JSON");
  }
  if (!j.is_object()) throw Error("expected a JSON object");
  auto str = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_string()) throw Error(std::string("missing or non-string '") + key + "'");
    return j[key].get<std::string>();
  };
  ManifestEntry e;
  try {
    e.id = ContentId::from_hex(str("id"));
  } catch (const Error&) {
    throw Error("'id' is not a 32-digit hex content id");
  }
  e.image_path = str("image_path");
  e.conditioning_path = str("conditioning_path");
  e.prompt = str("prompt");
  if (j.contains("perspective") && !j["perspective"].is_null()) {
    if (!j["perspective"].is_string()) throw Error("'perspective' is not a string");
    e.perspective = perspective_class_from_string(j["perspective"].get<std::string>());
  }
  if (j.contains("boxes") && !j["boxes"].is_null()) {
    if (!j["boxes"].is_number_integer()) throw Error("'boxes' is not an integer");
    e.boxes = j["boxes"].get<int>();
  }
  return e;
}

ManifestContents read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open manifest " + path.string());
  ManifestContents out;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      out.entries.push_back(parse_manifest_line(line));
    } catch (const Error& e) {
      out.errors.push_back({number, e.what()});
    }
  }
  return out;
}

ManifestWriter::ManifestWriter(const std::filesystem::path& path)
    : out_(path, std::ios::binary | std::ios::app) {
  if (!out_) throw PipelineError("cannot open manifest " + path.string());
}

void ManifestWriter::append(const ManifestEntry& entry) {
  out_ << to_json_line(entry) << '\n';
  out_.flush();
  if (!out_) throw PipelineError("manifest write failed");
}

std::set<ContentId> reconcile_manifest(const std::filesystem::path& path, const std::set<ContentId>& keep) {
  std::set<ContentId> present;
  if (!std::filesystem::exists(path)) return present;
  std::ifstream in(path, std::ios::binary);
  const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  std::vector<ManifestEntry> entries;
  std::size_t start = 0;
  while (start < data.size()) {
    const auto end = data.find('\n', start);
    if (end == std::string::npos) break;  // torn final line
    const auto line = data.substr(start, end - start);
    start = end + 1;
    if (line.empty()) continue;
    ManifestEntry e;
    try {
      e = parse_manifest_line(line);
    } catch (const Error&) {
      continue;
    }
    if (keep.count(e.id) && !present.count(e.id)) {
      present.insert(e.id);
      entries.push_back(std::move(e));
    }
  }
  rewrite(path, entries);
  return present;
}

void canonicalize_manifest(const std::filesystem::path& path) {
  auto contents = read_manifest(path);
  if (!contents.errors.empty()) {
    throw PipelineError("manifest line " + std::to_string(contents.errors.front().line) + ": " +
                        contents.errors.front().message);
  }
  std::sort(contents.entries.begin(), contents.entries.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return a.id < b.id; });
  rewrite(path, contents.entries);
}

}  // namespace condforge
