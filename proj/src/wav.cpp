#include "pmmtalk/wav.hpp"

#include "pmmtalk/error.hpp"
#include "pmmtalk/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace pmmtalk::wav {
namespace {

static_assert(std::endian::native == std::endian::little, "WAV codec assumes a little-endian host");

template <typename T>
T read_le(std::string_view bytes, std::size_t offset) {
  if (offset + sizeof(T) > bytes.size()) throw Error(ErrorKind::UnsupportedEncoding, "truncated WAV header");
  T v;
  std::memcpy(&v, bytes.data() + offset, sizeof(T));
  return v;
}

template <typename T>
void append_le(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

}  // namespace

WavData decode(std::string_view bytes) {
  if (bytes.size() < 12 || bytes.substr(0, 4) != "RIFF" || bytes.substr(8, 4) != "WAVE") {
    throw Error(ErrorKind::UnsupportedEncoding, "not a RIFF/WAVE file");
  }
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::string_view data;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::string_view id = bytes.substr(pos, 4);
    const auto size = read_le<std::uint32_t>(bytes, pos + 4);
    const std::size_t body = pos + 8;
    if (id == "fmt ") {
      format = read_le<std::uint16_t>(bytes, body);
      channels = read_le<std::uint16_t>(bytes, body + 2);
      rate = read_le<std::uint32_t>(bytes, body + 4);
      bits = read_le<std::uint16_t>(bytes, body + 14);
      if (format == kFormatExtensible && size >= 26) format = read_le<std::uint16_t>(bytes, body + 24);
      have_fmt = true;
    } else if (id == "data") {
      data = bytes.substr(body, std::min<std::size_t>(size, bytes.size() - body));
    }
    pos = body + size + (size & 1u);
  }
  if (!have_fmt) throw Error(ErrorKind::UnsupportedEncoding, "missing fmt chunk");
  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool float32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !float32) {
    throw Error(ErrorKind::UnsupportedEncoding,
                "only 16-bit PCM and 32-bit float are supported (format " + std::to_string(format) + ", " +
                    std::to_string(bits) + " bits)");
  }
  if (channels < 1 || channels > 2) throw Error(ErrorKind::UnsupportedEncoding, "only mono or stereo input");
  if (rate == 0) throw Error(ErrorKind::UnsupportedEncoding, "zero sample rate");

  const std::size_t frame_bytes = static_cast<std::size_t>(channels) * bits / 8;
  const std::size_t frames = data.size() / frame_bytes;
  if (frames == 0) throw Error(ErrorKind::EmptyAudio, "WAV data chunk holds no samples");

  WavData out;
  out.sample_rate = static_cast<int>(rate);
  out.channels = channels;
  out.samples.resize(static_cast<Eigen::Index>(frames), channels);
  for (std::size_t f = 0; f < frames; ++f) {
    for (int c = 0; c < channels; ++c) {
      const std::size_t at = f * frame_bytes + static_cast<std::size_t>(c) * bits / 8;
      double v = 0.0;
      if (pcm16) {
        std::int16_t s;
        std::memcpy(&s, data.data() + at, 2);
        v = static_cast<double>(s) / 32768.0;
      } else {
        float s;
        std::memcpy(&s, data.data() + at, 4);
        if (std::isnan(s)) throw Error(ErrorKind::UnsupportedEncoding, "NaN sample in float WAV");
        v = std::clamp(static_cast<double>(s), -1.0, 1.0);
      }
      out.samples(static_cast<Eigen::Index>(f), c) = v;
    }
  }
  return out;
}

WavData read(const std::filesystem::path& path) { return decode(io::read_file(path)); }

std::string encode(const Eigen::VectorXd& mono, int sample_rate, Encoding encoding) {
  const std::uint16_t bits = encoding == Encoding::Pcm16 ? 16 : 32;
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(mono.size()) * bits / 8;
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  append_le<std::uint32_t>(out, 36 + data_bytes);
  out += "WAVEfmt ";
  append_le<std::uint32_t>(out, 16);
  append_le<std::uint16_t>(out, encoding == Encoding::Pcm16 ? kFormatPcm : kFormatFloat);
  append_le<std::uint16_t>(out, 1);
  append_le<std::uint32_t>(out, static_cast<std::uint32_t>(sample_rate));
  append_le<std::uint32_t>(out, static_cast<std::uint32_t>(sample_rate) * bits / 8);
  append_le<std::uint16_t>(out, bits / 8);
  append_le<std::uint16_t>(out, bits);
  out += "data";
  append_le<std::uint32_t>(out, data_bytes);
  for (Eigen::Index i = 0; i < mono.size(); ++i) {
    if (encoding == Encoding::Pcm16) {
      const double v = std::clamp(mono(i), -1.0, 1.0);
      append_le<std::int16_t>(out, static_cast<std::int16_t>(std::lround(std::clamp(v * 32768.0, -32768.0, 32767.0))));
    } else {
      append_le<float>(out, static_cast<float>(mono(i)));
    }
  }
  return out;
}

void write(const std::filesystem::path& path, const Eigen::VectorXd& mono, int sample_rate, Encoding encoding) {
  io::atomic_write(path, encode(mono, sample_rate, encoding));
}

}  // namespace pmmtalk::wav
