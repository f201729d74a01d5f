#include "pmmtalk/features.hpp"

#include "pmmtalk/error.hpp"
#include "pmmtalk/io.hpp"
#include "pmmtalk/rng.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>

namespace pmmtalk {

std::string to_string(Modality m) {
  switch (m) {
    case Modality::LatentAudio: return "latent_audio";
    case Modality::Audio: return "audio";
    case Modality::Text: return "text";
    case Modality::Image: return "image";
  }
  return "unknown";
}

std::string to_string(ProviderKind k) { return k == ProviderKind::Synthetic ? "synthetic" : "file"; }

ProviderKind parse_provider_kind(const std::string& text) {
  if (text == "synthetic") return ProviderKind::Synthetic;
  if (text == "file") return ProviderKind::File;
  throw Error(ErrorKind::BadConfigValue, "unknown provider '" + text + "' (expected synthetic or file)");
}

Eigen::Index frame_count(const AudioClip& audio, double fps) {
  if (!(fps > 0.0)) throw Error(ErrorKind::PreconditionFailed, "fps must be positive");
  const auto t = static_cast<Eigen::Index>(
      std::floor(static_cast<double>(audio.samples.size()) * fps / audio.sample_rate + 1e-9));
  if (t < 1) {
    throw Error(ErrorKind::ClipTooShort, "clip of " + std::to_string(audio.samples.size()) +
                                             " samples is shorter than one frame");
  }
  return t;
}

Eigen::Index samples_per_frame(int sample_rate, double fps) {
  return std::max<Eigen::Index>(1, std::lround(sample_rate / fps));
}

Matrix triangular_filterbank(int bands, Eigen::Index window, int sample_rate) {
  const Eigen::Index bins = window / 2 + 1;
  const double f_max = std::min(8000.0, sample_rate / 2.0);
  const double spacing = f_max / (bands + 1);
  Matrix weights = Matrix::Zero(bands, bins);
  for (int b = 0; b < bands; ++b) {
    const double center = spacing * (b + 1);
    for (Eigen::Index k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / static_cast<double>(window);
      weights(b, k) = std::max(0.0, 1.0 - std::abs(f - center) / spacing);
    }
  }
  return weights;
}

namespace {

Eigen::VectorXd hann(Eigen::Index n) {
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    w(i) = n == 1 ? 1.0 : 0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(i) / static_cast<double>(n - 1));
  }
  return w;
}

// Samples [t*D, min((t+1)*D, n)) of frame t.
Eigen::VectorXd frame_window(const AudioClip& audio, Eigen::Index t, Eigen::Index window) {
  Eigen::VectorXd seg = Eigen::VectorXd::Zero(window);
  const Eigen::Index start = t * window;
  const Eigen::Index avail = std::clamp<Eigen::Index>(audio.samples.size() - start, 0, window);
  if (avail > 0) seg.head(avail) = audio.samples.segment(start, avail);
  return seg;
}

}  // namespace

FeatureStream audio_latent_synthetic(const AudioClip& audio, const FeatureConfig& cfg) {
  if (audio.samples.size() == 0) throw Error(ErrorKind::EmptyAudio, "no samples");
  if (!audio.samples.allFinite()) throw Error(ErrorKind::PreconditionFailed, "audio contains non-finite samples");
  const Eigen::Index frames = frame_count(audio, cfg.fps);
  const Eigen::Index window = samples_per_frame(audio.sample_rate, cfg.fps);
  const Matrix bank = triangular_filterbank(cfg.latent_dim, window, audio.sample_rate);
  const Eigen::VectorXd taper = hann(window);

  Eigen::FFT<double> fft;
  std::vector<double> buffer(static_cast<std::size_t>(window));
  std::vector<std::complex<double>> spectrum;
  Eigen::VectorXd power(window / 2 + 1);

  FeatureStream out;
  out.modality = Modality::LatentAudio;
  out.fps = cfg.fps;
  out.values.resize(frames, cfg.latent_dim);
  for (Eigen::Index t = 0; t < frames; ++t) {
    const Eigen::VectorXd seg = frame_window(audio, t, window).cwiseProduct(taper);
    std::copy(seg.data(), seg.data() + window, buffer.begin());
    fft.fwd(spectrum, buffer);
    for (Eigen::Index k = 0; k < power.size(); ++k) {
      power(k) = std::norm(spectrum[static_cast<std::size_t>(k)]) / static_cast<double>(window);
    }
    out.values.row(t) = (bank * power).array().log1p().transpose();
  }
  return out;
}

int text_symbol_id(char c, int vocab) {
  const auto u = static_cast<unsigned char>(c);
  int raw;
  if (std::isalpha(u)) raw = 1 + (std::tolower(u) - 'a');
  else if (std::isdigit(u)) raw = 27 + (u - '0');
  else if (std::isspace(u)) raw = 37;
  else if (std::ispunct(u)) raw = 38;
  else raw = 39;
  if (vocab < 2) return 0;
  return 1 + (raw - 1) % (vocab - 1);
}

FeatureStream text_stream_synthetic(const std::string& transcript, Eigen::Index frames, const FeatureConfig& cfg) {
  if (frames < 1) throw Error(ErrorKind::ClipTooShort, "text stream needs at least one frame");
  const int vocab = cfg.text_vocab;
  if (vocab < 2) throw Error(ErrorKind::BadConfigValue, "text vocabulary must hold at least 2 entries");

  // Collapse whitespace runs and trim.
  std::vector<int> symbols;
  bool pending_space = false;
  for (char c : transcript) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !symbols.empty();
      continue;
    }
    if (pending_space) symbols.push_back(text_symbol_id(' ', vocab));
    pending_space = false;
    symbols.push_back(text_symbol_id(c, vocab));
  }

  const double floor_value = 0.1 / (vocab - 1);
  FeatureStream out;
  out.modality = Modality::Text;
  out.fps = cfg.fps;
  out.values = Matrix::Constant(frames, vocab, floor_value);
  const auto n = static_cast<Eigen::Index>(symbols.size());
  for (Eigen::Index i = 0; i < frames; ++i) {
    const int id = n == 0 ? 0 : symbols[static_cast<std::size_t>((i * n) / frames)];
    out.values(i, id) = 0.9;
  }
  return out;
}

FeatureStream text_stream_provider(const ClipRecord& clip, Eigen::Index frames, const FeatureConfig& cfg) {
  if (cfg.text_provider == ProviderKind::File) {
    const auto path = feature_sidecar(clip, "text");
    if (!std::filesystem::exists(path)) {
      throw Error(ErrorKind::NoTextSource, "clip " + clip.clip_id + " has no precomputed " + path.string());
    }
    return resample_stream(load_feature_file(path, Modality::Text, cfg.fps), frames);
  }
  if (!clip.transcript) throw Error(ErrorKind::NoTextSource, "clip " + clip.clip_id + " has no transcript");
  return text_stream_synthetic(*clip.transcript, frames, cfg);
}

Eigen::VectorXd lip_aperture_envelope(const AudioClip& audio, Eigen::Index frames, const FeatureConfig& cfg) {
  const Eigen::Index audio_frames = frame_count(audio, cfg.fps);
  const Eigen::Index window = samples_per_frame(audio.sample_rate, cfg.fps);
  Eigen::VectorXd rms(audio_frames);
  for (Eigen::Index t = 0; t < audio_frames; ++t) {
    const Eigen::Index start = t * window;
    const Eigen::Index avail = std::clamp<Eigen::Index>(audio.samples.size() - start, 1, window);
    rms(t) = std::sqrt(audio.samples.segment(start, avail).squaredNorm() / static_cast<double>(avail));
  }
  const double s = cfg.envelope_smoothing;
  Eigen::VectorXd env(audio_frames);
  for (Eigen::Index t = 0; t < audio_frames; ++t) {
    const double prev = rms(std::max<Eigen::Index>(t - 1, 0));
    const double next = rms(std::min<Eigen::Index>(t + 1, audio_frames - 1));
    env(t) = (1.0 - s) * rms(t) + 0.5 * s * (prev + next);
  }
  const double peak = env.maxCoeff();
  if (peak > 0.0) env /= peak;
  else env.setZero();
  return resample_rows(env, frames).col(0).cwiseMax(0.0).cwiseMin(1.0);
}

Matrix reference_background(const ReferenceImage& ref, int size) {
  Matrix bg(size, size);
  if (ref.image) {
    const Matrix& img = *ref.image;
    if (img.size() == 0) throw Error(ErrorKind::PreconditionFailed, "empty reference image");
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const auto sy = static_cast<Eigen::Index>((static_cast<long long>(y) * img.rows()) / size);
        const auto sx = static_cast<Eigen::Index>((static_cast<long long>(x) * img.cols()) / size);
        bg(y, x) = 0.35 + 0.65 * std::clamp(img(sy, sx), 0.0, 1.0);
      }
    }
    return bg;
  }
  Rng rng(stable_hash(ref.identifier));
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) bg(y, x) = rng.uniform(0.35, 1.0);
  }
  return bg;
}

Matrix render_lip_frame(double aperture, const Matrix& background) {
  const auto size = static_cast<double>(background.rows());
  const double cx = 0.5 * size;
  const double cy = 0.68 * size;
  const double rx = 0.3 * size;
  const double ry = 0.5 + std::clamp(aperture, 0.0, 1.0) * 0.22 * size;
  Matrix frame = background;
  for (Eigen::Index y = 0; y < background.rows(); ++y) {
    for (Eigen::Index x = 0; x < background.cols(); ++x) {
      const double dx = (static_cast<double>(x) + 0.5 - cx) / rx;
      const double dy = (static_cast<double>(y) + 0.5 - cy) / ry;
      if (dx * dx + dy * dy <= 1.0) frame(y, x) = 0.05;
    }
  }
  return frame;
}

LipFrameStream lip_frames_synthetic(const AudioClip& audio, const ReferenceImage& ref, Eigen::Index frames,
                                    const FeatureConfig& cfg) {
  const int size = cfg.image_size;
  LipFrameStream out;
  out.size = size;
  out.fps = cfg.fps;
  out.apertures = lip_aperture_envelope(audio, frames, cfg);
  const Matrix background = reference_background(ref, size);
  out.pixels.resize(frames, static_cast<Eigen::Index>(size) * size);
  for (Eigen::Index t = 0; t < frames; ++t) {
    const Matrix frame = render_lip_frame(out.apertures(t), background);
    for (int y = 0; y < size; ++y) out.pixels.block(t, y * size, 1, size) = frame.row(y);
  }
  return out;
}

// --- PMMF1 ------------------------------------------------------------------

namespace {
static_assert(std::endian::native == std::endian::little, "PMMF1 codec assumes a little-endian host");
constexpr std::string_view kMagic = "PMMF1";
constexpr std::size_t kHeaderBytes = 5 + 4 + 4;
}  // namespace

std::string encode_feature_file(const Matrix& values) {
  const auto rows = static_cast<std::uint32_t>(values.rows());
  const auto cols = static_cast<std::uint32_t>(values.cols());
  std::string out(kMagic);
  out.resize(kHeaderBytes + 4ull * rows * cols);
  std::memcpy(out.data() + 5, &rows, 4);
  std::memcpy(out.data() + 9, &cols, 4);
  char* payload = out.data() + kHeaderBytes;
  for (std::uint32_t r = 0; r < rows; ++r) {
    for (std::uint32_t c = 0; c < cols; ++c) {
      const auto v = static_cast<float>(values(r, c));
      std::memcpy(payload, &v, 4);
      payload += 4;
    }
  }
  return out;
}

Matrix decode_feature_file(std::string_view bytes) {
  if (bytes.size() < 5 || bytes.substr(0, 5) != kMagic) throw Error(ErrorKind::BadMagic, "not a PMMF1 feature file");
  if (bytes.size() < kHeaderBytes) throw Error(ErrorKind::TruncatedPayload, "PMMF1 header is truncated");
  std::uint32_t rows = 0, cols = 0;
  std::memcpy(&rows, bytes.data() + 5, 4);
  std::memcpy(&cols, bytes.data() + 9, 4);
  const std::uint64_t expected = 4ull * rows * cols;
  if (bytes.size() - kHeaderBytes != expected) {
    throw Error(ErrorKind::TruncatedPayload, "PMMF1 payload holds " + std::to_string(bytes.size() - kHeaderBytes) +
                                                 " bytes, header declares " + std::to_string(expected));
  }
  Matrix values(rows, cols);
  const char* payload = bytes.data() + kHeaderBytes;
  for (std::uint32_t r = 0; r < rows; ++r) {
    for (std::uint32_t c = 0; c < cols; ++c) {
      float v;
      std::memcpy(&v, payload, 4);
      payload += 4;
      values(r, c) = v;
    }
  }
  return values;
}

void write_feature_file(const Matrix& values, const std::filesystem::path& path) {
  io::atomic_write(path, encode_feature_file(values));
}

FeatureStream load_feature_file(const std::filesystem::path& path, Modality modality, double fps) {
  FeatureStream s;
  try {
    s.values = decode_feature_file(io::read_file(path));
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + std::string(e.what()));
  }
  if (s.values.rows() < 1 || s.values.cols() < 1) {
    throw Error(ErrorKind::PreconditionFailed, path.string() + ": empty feature stream");
  }
  if (!s.values.allFinite()) throw Error(ErrorKind::PreconditionFailed, path.string() + ": non-finite feature values");
  s.modality = modality;
  s.fps = fps;
  return s;
}

std::filesystem::path feature_sidecar(const ClipRecord& clip, const std::string& kind) {
  std::filesystem::path p(clip.audio_path);
  return p.parent_path() / (p.stem().string() + "." + kind + ".pmmf");
}

Matrix resample_rows(const Matrix& values, Eigen::Index frames) {
  if (values.rows() < 1) throw Error(ErrorKind::PreconditionFailed, "cannot resample an empty stream");
  if (frames < 1) throw Error(ErrorKind::PreconditionFailed, "target frame count must be positive");
  const Eigen::Index n = values.rows();
  if (n == frames) return values;
  if (n == 1) return values.replicate(frames, 1);
  Matrix out(frames, values.cols());
  for (Eigen::Index k = 0; k < frames; ++k) {
    const double pos = frames == 1 ? 0.0 : static_cast<double>(k) * static_cast<double>(n - 1) / static_cast<double>(frames - 1);
    const auto i0 = std::min<Eigen::Index>(static_cast<Eigen::Index>(std::floor(pos)), n - 1);
    const Eigen::Index i1 = std::min<Eigen::Index>(i0 + 1, n - 1);
    const double w = pos - static_cast<double>(i0);
    out.row(k) = w == 0.0 ? Matrix(values.row(i0)) : Matrix(values.row(i0) + w * (values.row(i1) - values.row(i0)));
  }
  return out;
}

FeatureStream resample_stream(const FeatureStream& stream, Eigen::Index frames) {
  FeatureStream out = stream;
  out.values = resample_rows(stream.values, frames);
  return out;
}

ClipFeatures compute_clip_features(const ClipRecord& clip, const AudioClip& audio, const ReferenceImage& ref,
                                   Eigen::Index frames, const FeatureConfig& cfg) {
  ClipFeatures f;
  if (cfg.latent_provider == ProviderKind::File) {
    f.latent = load_feature_file(feature_sidecar(clip, "latent"), Modality::LatentAudio, cfg.fps);
  } else {
    f.latent = audio_latent_synthetic(audio, cfg);
  }
  f.latent = resample_stream(f.latent, frames);
  f.text = text_stream_provider(clip, frames, cfg);
  if (cfg.image_provider == ProviderKind::File) {
    const FeatureStream raw = load_feature_file(feature_sidecar(clip, "lips"), Modality::Image, cfg.fps);
    if (raw.dim() != static_cast<Eigen::Index>(cfg.image_size) * cfg.image_size) {
      throw Error(ErrorKind::DimensionMismatch, "lip frame file width does not match image_size^2");
    }
    f.lips.size = cfg.image_size;
    f.lips.fps = cfg.fps;
    f.lips.pixels = resample_rows(raw.values, frames).cwiseMax(0.0).cwiseMin(1.0);
    f.lips.apertures = Eigen::VectorXd::Zero(frames);
  } else {
    f.lips = lip_frames_synthetic(audio, ref, frames, cfg);
  }
  return f;
}

}  // namespace pmmtalk
