#include "mars/tokenizer/token_map.hpp"

#include <string>

#include "mars/io.hpp"

namespace mars::tokenizer {

void validate_schedule(const Schedule& s, int full_side) {
  require(!s.empty(), "schedule: empty");
  for (std::size_t i = 0; i < s.size(); ++i) {
    require(s[i] > 0, "schedule: sides must be positive");
    if (i > 0) require(s[i] > s[i - 1], "schedule: sides must be strictly ascending");
  }
  require(s.back() == full_side, "schedule: final side " + std::to_string(s.back()) +
                                     " must equal the latent grid side " + std::to_string(full_side));
}

int sequence_length(const Schedule& s) {
  int n = 0;
  for (int k : s) n += k * k;
  return n;
}

void validate(const MultiScaleTokenMap& t, int vocab) {
  require(t.grids.size() == t.schedule.size(), "token map: grid count does not match schedule");
  for (std::size_t s = 0; s < t.grids.size(); ++s) {
    require(t.grids[s].size() == static_cast<std::size_t>(t.schedule[s] * t.schedule[s]),
            "token map: grid " + std::to_string(s) + " does not match its side");
    for (int v : t.grids[s]) require(v >= 0 && v < vocab, "token map: index " + std::to_string(v) + " out of range");
  }
}

std::vector<std::uint8_t> MultiScaleTokenMap::encode() const {
  io::ByteWriter w;
  w.put_bytes("MARSTOKS");
  w.put<std::uint32_t>(static_cast<std::uint32_t>(schedule.size()));
  for (int k : schedule) w.put<std::uint32_t>(static_cast<std::uint32_t>(k));
  for (const auto& g : grids)
    for (int v : g) w.put<std::uint32_t>(static_cast<std::uint32_t>(v));
  return w.take();
}

MultiScaleTokenMap MultiScaleTokenMap::decode(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes, "token map");
  r.expect_magic("MARSTOKS");
  MultiScaleTokenMap t;
  const auto n = r.get<std::uint32_t>();
  require(n > 0 && n < 64, "token map: implausible scale count");
  for (std::uint32_t i = 0; i < n; ++i) t.schedule.push_back(static_cast<int>(r.get<std::uint32_t>()));
  for (int k : t.schedule) {
    require(k > 0 && k <= 4096, "token map: implausible grid side");
    std::vector<int> g(static_cast<std::size_t>(k) * k);
    for (auto& v : g) v = static_cast<int>(r.get<std::uint32_t>());
    t.grids.push_back(std::move(g));
  }
  require(r.done(), "token map: trailing bytes");
  return t;
}

void MultiScaleTokenMap::save(const std::filesystem::path& path) const { io::write_file(path, encode()); }

MultiScaleTokenMap MultiScaleTokenMap::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorCategory::kMissingPrerequisite, "token map not found: " + path.string());
  return decode(io::read_file(path));
}

}  // namespace mars::tokenizer
