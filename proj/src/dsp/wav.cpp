#include <algorithm>
#include <cmath>
#include <string>

#include "mars/dsp/waveform.hpp"
#include "mars/error.hpp"
#include "mars/io.hpp"

namespace mars::dsp {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

struct FormatChunk {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits = 0;
  std::uint16_t block_align = 0;
};

FormatChunk parse_fmt(io::ByteReader& r, std::uint32_t size) {
  if (size < 16) fail(ErrorCategory::kInvalidInput, "wav: fmt chunk too small");
  FormatChunk f;
  f.format = r.get<std::uint16_t>();
  f.channels = r.get<std::uint16_t>();
  f.sample_rate = r.get<std::uint32_t>();
  r.get<std::uint32_t>();  // byte rate
  f.block_align = r.get<std::uint16_t>();
  f.bits = r.get<std::uint16_t>();
  std::uint32_t consumed = 16;
  if (f.format == kFormatExtensible) {
    if (size < 40) fail(ErrorCategory::kInvalidInput, "wav: extensible fmt chunk too small");
    r.get<std::uint16_t>();  // cbSize
    r.get<std::uint16_t>();  // valid bits
    r.get<std::uint32_t>();  // channel mask
    f.format = r.get<std::uint16_t>();  // leading two bytes of the sub-format GUID
    r.get_string(14);
    consumed = 40;
  }
  r.get_string(size - consumed);
  return f;
}

}  // namespace

void validate(const Waveform& w) {
  require(w.sample_rate > 0, "waveform: sample_rate must be positive");
  require(w.samples.size() > 0, "waveform: empty");
  require(w.samples.allFinite(), "waveform: non-finite samples");
}

Waveform decode_wav(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes, "wav");
  if (r.remaining() < 12) fail(ErrorCategory::kInvalidInput, "wav: malformed header");
  if (r.get_string(4) != "RIFF") fail(ErrorCategory::kInvalidInput, "wav: malformed header (no RIFF)");
  r.get<std::uint32_t>();
  if (r.get_string(4) != "WAVE") fail(ErrorCategory::kInvalidInput, "wav: malformed header (no WAVE)");

  FormatChunk fmt;
  bool have_fmt = false;
  while (r.remaining() >= 8) {
    const std::string id = r.get_string(4);
    const auto size = r.get<std::uint32_t>();
    if (id == "fmt ") {
      if (r.remaining() < size) fail(ErrorCategory::kInvalidInput, "wav: malformed header (fmt)");
      fmt = parse_fmt(r, size);
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) fail(ErrorCategory::kInvalidInput, "wav: data chunk before fmt chunk");
      if (fmt.channels == 0 || fmt.sample_rate == 0)
        fail(ErrorCategory::kInvalidInput, "wav: malformed header (zero channels or rate)");
      const bool pcm16 = fmt.format == kFormatPcm && fmt.bits == 16;
      const bool f32 = fmt.format == kFormatFloat && fmt.bits == 32;
      if (!pcm16 && !f32)
        fail(ErrorCategory::kInvalidInput,
             "wav: unsupported encoding (format " + std::to_string(fmt.format) + ", " +
                 std::to_string(fmt.bits) + " bits); only PCM16 and float32 are supported");
      if (r.remaining() < size) fail(ErrorCategory::kInvalidInput, "wav: truncated data");
      const std::size_t width = fmt.bits / 8;
      const std::size_t frame_bytes = width * fmt.channels;
      const std::size_t frames = size / frame_bytes;
      if (frames == 0) fail(ErrorCategory::kInvalidInput, "wav: empty data chunk");
      Waveform w;
      w.sample_rate = static_cast<int>(fmt.sample_rate);
      w.samples.resize(static_cast<Eigen::Index>(frames));
      for (std::size_t i = 0; i < frames; ++i) {
        double acc = 0.0;
        for (std::uint16_t c = 0; c < fmt.channels; ++c)
          acc += pcm16 ? r.get<std::int16_t>() / 32768.0 : static_cast<double>(r.get<float>());
        w.samples[static_cast<Eigen::Index>(i)] = acc / fmt.channels;
      }
      if (!w.samples.allFinite()) fail(ErrorCategory::kInvalidInput, "wav: non-finite samples");
      return w;
    } else {
      if (r.remaining() < size) fail(ErrorCategory::kInvalidInput, "wav: truncated chunk " + id);
      r.get_string(size + (size & 1u));
      continue;
    }
    if (size & 1u && r.remaining() > 0) r.get<std::uint8_t>();
  }
  fail(ErrorCategory::kInvalidInput, have_fmt ? "wav: missing data chunk" : "wav: malformed header (no fmt)");
}

std::vector<std::uint8_t> encode_wav(const Waveform& w, WavEncoding encoding) {
  require(w.samples.size() > 0, "encode_wav: empty waveform");
  require(w.sample_rate > 0, "encode_wav: sample_rate must be positive");
  const bool pcm16 = encoding == WavEncoding::kPcm16;
  const std::uint16_t bits = pcm16 ? 16 : 32;
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(w.samples.size()) * (bits / 8);

  io::ByteWriter out;
  out.put_bytes("RIFF");
  out.put<std::uint32_t>(36 + data_bytes);
  out.put_bytes("WAVE");
  out.put_bytes("fmt ");
  out.put<std::uint32_t>(16);
  out.put<std::uint16_t>(pcm16 ? kFormatPcm : kFormatFloat);
  out.put<std::uint16_t>(1);
  out.put<std::uint32_t>(static_cast<std::uint32_t>(w.sample_rate));
  out.put<std::uint32_t>(static_cast<std::uint32_t>(w.sample_rate) * (bits / 8));
  out.put<std::uint16_t>(bits / 8);
  out.put<std::uint16_t>(bits);
  out.put_bytes("data");
  out.put<std::uint32_t>(data_bytes);
  for (Eigen::Index i = 0; i < w.samples.size(); ++i) {
    double x = w.samples[i];
    x = std::isnan(x) ? 0.0 : std::clamp(x, -1.0, 1.0);
    if (pcm16) {
      const double q = std::clamp(std::nearbyint(x * 32768.0), -32768.0, 32767.0);
      out.put<std::int16_t>(static_cast<std::int16_t>(q));
    } else {
      out.put<float>(static_cast<float>(x));
    }
  }
  return out.take();
}

}  // namespace mars::dsp
