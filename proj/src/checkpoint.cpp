#include "mars/ad/checkpoint.hpp"

#include "mars/io.hpp"

namespace mars::ad {

namespace {
constexpr std::string_view kMagic = "MARSCKPT";
}

std::vector<std::uint8_t> Checkpoint::encode() const {
  io::ByteWriter w;
  w.put_bytes(kMagic);
  w.put<std::uint32_t>(kVersion);
  w.put<std::uint64_t>(config_hash);
  for (const auto& r : records) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(r.name.size()));
    w.put_bytes(r.name);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(r.dims.size()));
    for (auto d : r.dims) w.put<std::uint32_t>(d);
    w.put_array<float>(r.values);
  }
  return w.take();
}

Checkpoint Checkpoint::decode(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes, "checkpoint");
  r.expect_magic(kMagic);
  const auto version = r.get<std::uint32_t>();
  require(version == kVersion, "checkpoint: unsupported version " + std::to_string(version));
  Checkpoint c;
  c.config_hash = r.get<std::uint64_t>();
  while (!r.done()) {
    Record rec;
    rec.name = r.get_string(r.get<std::uint32_t>());
    const auto rank = r.get<std::uint32_t>();
    require(rank <= 8, "checkpoint: implausible rank for " + rec.name);
    std::size_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      rec.dims.push_back(r.get<std::uint32_t>());
      count *= rec.dims.back();
    }
    require(count * sizeof(float) <= r.remaining(), "checkpoint: truncated record " + rec.name);
    rec.values.resize(count);
    r.get_array<float>(rec.values);
    c.records.push_back(std::move(rec));
  }
  return c;
}

void Checkpoint::save(const std::filesystem::path& path) const { io::write_file(path, encode()); }

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    fail(ErrorCategory::kMissingPrerequisite, "checkpoint not found: " + path.string());
  return decode(io::read_file(path));
}

const Checkpoint::Record* Checkpoint::find(const std::string& name) const {
  for (const auto& r : records)
    if (r.name == name) return &r;
  return nullptr;
}

const Checkpoint::Record& Checkpoint::at(const std::string& name) const {
  const Record* r = find(name);
  if (!r) fail(ErrorCategory::kConfigMismatch, "checkpoint: missing record '" + name + "'");
  return *r;
}

}  // namespace mars::ad
