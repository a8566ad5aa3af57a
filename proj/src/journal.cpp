#include "condforge/journal.hpp"

#include <algorithm>
#include <cstring>

#include "condforge/error.hpp"

namespace condforge {
namespace {

constexpr char kMagic[4] = {'C', 'F', 'J', '1'};

template <typename T>
void put(std::string& buf, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff));
  }
}

template <typename T>
T get(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return static_cast<T>(v);
}

std::string header_bytes(const std::string& fingerprint) {
  std::string buf(kMagic, 4);
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(fingerprint.size()));
  return buf + fingerprint;
}

std::string entry_bytes(const JournalEntry& e) {
  std::string payload;
  payload.append(reinterpret_cast<const char*>(e.id.bytes.data()), e.id.bytes.size());
  put<std::uint8_t>(payload, static_cast<std::uint8_t>(e.stage));
  put<std::uint8_t>(payload, static_cast<std::uint8_t>(e.status));
  put<std::int64_t>(payload, e.timestamp_ms);
  const auto n = static_cast<std::uint16_t>(std::min<std::size_t>(e.reason.size(), 0xffff));
  put<std::uint16_t>(payload, n);
  payload.append(e.reason, 0, n);
  std::string buf;
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(payload.size()));
  return buf + payload;
}

struct Parsed {
  JournalContents contents;
  std::uintmax_t valid_size = 0;
};

Parsed parse(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PipelineError("cannot open checkpoint journal " + path.string());
  const std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.size() < 8 || std::memcmp(data.data(), kMagic, 4) != 0) {
    throw PipelineError("not a checkpoint journal: " + path.string());
  }
  const auto fp_len = get<std::uint32_t>(data.data() + 4);
  if (data.size() < 8 + static_cast<std::size_t>(fp_len)) throw PipelineError("truncated journal header: " + path.string());
  Parsed out;
  out.contents.fingerprint.assign(reinterpret_cast<const char*>(data.data() + 8), fp_len);
  std::size_t pos = 8 + fp_len;
  constexpr std::size_t kFixed = 16 + 1 + 1 + 8 + 2;
  while (pos + 4 <= data.size()) {
    const auto len = get<std::uint32_t>(data.data() + pos);
    if (len < kFixed || pos + 4 + len > data.size()) break;
    const auto* p = data.data() + pos + 4;
    const auto reason_len = get<std::uint16_t>(p + 26);
    if (kFixed + reason_len != len) break;
    const auto stage = p[16];
    const auto status = p[17];
    if (stage > static_cast<std::uint8_t>(Stage::Emit) || status > static_cast<std::uint8_t>(RecordStatus::Failed)) {
      break;
    }
    JournalEntry e;
    std::memcpy(e.id.bytes.data(), p, 16);
    e.stage = static_cast<Stage>(stage);
    e.status = static_cast<RecordStatus>(status);
    e.timestamp_ms = get<std::int64_t>(p + 18);
    e.reason.assign(reinterpret_cast<const char*>(p + kFixed), reason_len);
    out.contents.entries.push_back(std::move(e));
    pos += 4 + len;
  }
  out.valid_size = pos;
  out.contents.torn_bytes = data.size() - pos;
  return out;
}

}  // namespace

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::Ingest:
      return "ingest";
    case Stage::Aesthetic:
      return "aesthetic";
    case Stage::Caption:
      return "caption";
    case Stage::Grounding:
      return "grounding";
    case Stage::VanishingPoint:
      return "vanishing_point";
    case Stage::Emit:
      return "emit";
  }
  return "ingest";
}

JournalWriter::JournalWriter(const std::filesystem::path& path, const std::string& fingerprint, bool append) {
  if (append && std::filesystem::exists(path)) {
    const auto parsed = parse(path);
    if (parsed.contents.fingerprint != fingerprint) throw PipelineError("journal fingerprint mismatch");
    if (parsed.contents.torn_bytes > 0) std::filesystem::resize_file(path, parsed.valid_size);
    out_.open(path, std::ios::binary | std::ios::app);
  } else {
    out_.open(path, std::ios::binary | std::ios::trunc);
    const auto header = header_bytes(fingerprint);
    out_.write(header.data(), static_cast<std::streamsize>(header.size()));
    out_.flush();
  }
  if (!out_) throw PipelineError("cannot write checkpoint journal " + path.string());
}

void JournalWriter::write(const JournalEntry& entry) {
  const auto bytes = entry_bytes(entry);
  out_.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out_.flush();
  if (!out_) throw PipelineError("checkpoint journal write failed");
}

void JournalWriter::close() {
  if (out_.is_open()) out_.close();
}

JournalContents read_journal(const std::filesystem::path& path) { return parse(path).contents; }

std::map<ContentId, JournalEntry> latest_entries(const std::vector<JournalEntry>& entries) {
  std::map<ContentId, JournalEntry> out;
  for (const auto& e : entries) out[e.id] = e;
  return out;
}

void compact_journal(const std::filesystem::path& path) {
  const auto contents = read_journal(path);
  const auto latest = latest_entries(contents.entries);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    auto buf = header_bytes(contents.fingerprint);
    for (const auto& [id, e] : latest) buf += entry_bytes(e);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw PipelineError("journal compaction failed");
  }
  std::filesystem::rename(tmp, path);
}

std::vector<ContentId> audit_monotone(const std::vector<JournalEntry>& entries) {
  std::map<ContentId, RecordStatus> last;
  std::vector<ContentId> bad;
  for (const auto& e : entries) {
    auto it = last.find(e.id);
    if (it != last.end()) {
      const bool ok = it->second == e.status ? !is_terminal(e.status) : is_forward_transition(it->second, e.status);
      if (!ok && std::find(bad.begin(), bad.end(), e.id) == bad.end()) bad.push_back(e.id);
    }
    last[e.id] = e.status;
  }
  return bad;
}

}  // namespace condforge
