#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "iconnet/common.hpp"
#include "iconnet/dataset.hpp"

namespace iconnet {

namespace {

std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

[[noreturn]] void fail(const std::string& chunk, const std::string& what) {
  throw FormatError("WAV chunk \"" + chunk + "\": " + what);
}

}  // namespace

WavData parse_wav(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0) fail("RIFF", "missing RIFF header");
  if (std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) fail("RIFF", "form type is not WAVE");

  bool have_fmt = false;
  std::uint16_t channels = 0;
  std::uint16_t bits = 0;
  std::uint32_t rate = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::string id(reinterpret_cast<const char*>(bytes.data() + pos), 4);
    const std::uint32_t size = read_u32(bytes.data() + pos + 4);
    const std::size_t body = pos + 8;
    if (id == "fmt ") {
      if (size < 16 || body + size > bytes.size()) fail(id, "truncated format chunk");
      const std::uint16_t format = read_u16(bytes.data() + body);
      channels = read_u16(bytes.data() + body + 2);
      rate = read_u32(bytes.data() + body + 4);
      bits = read_u16(bytes.data() + body + 14);
      if (format != 1) fail(id, "unsupported codec " + std::to_string(format) + " (only PCM is supported)");
      if (bits != 16) fail(id, "unsupported bit depth " + std::to_string(bits));
      if (channels != 1 && channels != 2) fail(id, "unsupported channel count " + std::to_string(channels));
      if (rate == 0) fail(id, "sample rate is zero");
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) fail(id, "data chunk before fmt chunk");
      if (body + size > bytes.size()) fail(id, "truncated: declares " + std::to_string(size) + " bytes, " +
                                                   std::to_string(bytes.size() - body) + " present");
      const std::size_t frame_bytes = 2u * channels;
      if (size % frame_bytes != 0) fail(id, "size is not a whole number of frames");
      WavData wav;
      wav.sample_rate = static_cast<int>(rate);
      const std::size_t frames = size / frame_bytes;
      wav.samples.resize(frames);
      for (std::size_t f = 0; f < frames; ++f) {
        double sum = 0.0;
        for (std::uint16_t c = 0; c < channels; ++c) {
          const auto raw = static_cast<std::int16_t>(read_u16(bytes.data() + body + f * frame_bytes + 2u * c));
          sum += static_cast<double>(raw) / 32768.0;
        }
        wav.samples[f] = sum / channels;
      }
      return wav;
    }
    pos = body + size + (size & 1u);
  }
  if (!have_fmt) fail("fmt ", "missing format chunk");
  fail("data", "missing data chunk");
}

WavData read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open WAV file " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return parse_wav(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_wav(const std::vector<double>& samples, int sample_rate) {
  require(sample_rate > 0, "sample rate must be positive");
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(sample_rate));
  put_u32(out, static_cast<std::uint32_t>(sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  put_tag(out, "data");
  put_u32(out, data_bytes);
  for (double s : samples) {
    const double scaled = std::round(std::clamp(s, -1.0, 1.0) * 32768.0);
    const auto v = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
    put_u16(out, static_cast<std::uint16_t>(v));
  }
  return out;
}

}  // namespace iconnet
