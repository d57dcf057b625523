#include "prosim/audio.hpp"

#include "prosim/error.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <mutex>

namespace prosim {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xFF));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}

void put_tag(std::vector<unsigned char>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

// FFTW's planner is not thread-safe; execution on distinct arrays is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = M_PI * x;
  return std::sin(px) / px;
}

}  // namespace

PcmAudio decode_wav(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw Error(Errc::UnsupportedFormat, "not a RIFF/WAVE file");
  }

  std::uint16_t format = 0;
  std::uint16_t n_channels = 0;
  std::uint32_t rate = 0;
  std::uint16_t bits = 0;
  bool have_fmt = false;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t len = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = bytes.size() - body;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (len < 16 || avail < 16) throw Error(Errc::UnsupportedFormat, "short fmt chunk");
      format = read_u16(chunk + 8);
      n_channels = read_u16(chunk + 10);
      rate = read_u32(chunk + 12);
      bits = read_u16(chunk + 22);
      if (format == kFormatExtensible) {
        if (len < 40 || avail < 40) throw Error(Errc::UnsupportedFormat, "short extensible fmt");
        // First two bytes of the subformat GUID carry the actual format tag.
        format = read_u16(chunk + 8 + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      // Streaming writers sometimes leave the data length at 0 or 0xFFFFFFFF.
      data_len = (len == 0 || len > avail) ? avail : len;
      break;
    }
    pos = body + len + (len & 1u);
  }

  if (!have_fmt) throw Error(Errc::UnsupportedFormat, "missing fmt chunk");
  if (data == nullptr) throw Error(Errc::UnsupportedFormat, "missing data chunk");
  if (n_channels == 0 || rate == 0) throw Error(Errc::UnsupportedFormat, "invalid fmt values");
  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool float32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !float32) {
    throw Error(Errc::UnsupportedFormat,
                "format " + std::to_string(format) + " with " + std::to_string(bits) + " bits");
  }

  const std::size_t bytes_per_sample = bits / 8;
  const std::size_t frame_bytes = bytes_per_sample * n_channels;
  const std::size_t n_frames = data_len / frame_bytes;
  if (n_frames == 0) throw Error(Errc::EmptyAudio, "zero samples");

  PcmAudio out;
  out.sample_rate = static_cast<int>(rate);
  out.channels.assign(n_channels, std::vector<double>(n_frames));
  for (std::size_t i = 0; i < n_frames; ++i) {
    const unsigned char* frame = data + i * frame_bytes;
    for (std::size_t c = 0; c < n_channels; ++c) {
      const unsigned char* s = frame + c * bytes_per_sample;
      double v;
      if (pcm16) {
        v = static_cast<std::int16_t>(read_u16(s)) / 32768.0;
      } else {
        const std::uint32_t raw = read_u32(s);
        float f;
        std::memcpy(&f, &raw, sizeof f);
        v = std::clamp(static_cast<double>(f), -1.0, 1.0);
      }
      out.channels[c][i] = v;
    }
  }
  return out;
}

PcmAudio read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return decode_wav(bytes);
}

void write_wav(const std::filesystem::path& path, const std::vector<std::vector<double>>& channels,
               int sample_rate) {
  if (channels.empty() || sample_rate <= 0) {
    throw Error(Errc::InvalidArgument, "write_wav needs channels and a positive rate");
  }
  const std::size_t n = channels.front().size();
  for (const auto& ch : channels) {
    if (ch.size() != n) throw Error(Errc::InvalidArgument, "channel lengths differ");
  }
  const auto n_ch = static_cast<std::uint16_t>(channels.size());
  const std::uint32_t data_len = static_cast<std::uint32_t>(n * n_ch * 2);

  std::vector<unsigned char> out;
  out.reserve(44 + data_len);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_len);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, n_ch);
  put_u32(out, static_cast<std::uint32_t>(sample_rate));
  put_u32(out, static_cast<std::uint32_t>(sample_rate) * n_ch * 2);
  put_u16(out, static_cast<std::uint16_t>(n_ch * 2));
  put_u16(out, 16);
  put_tag(out, "data");
  put_u32(out, data_len);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& ch : channels) {
      const double v = std::clamp(ch[i], -1.0, 1.0);
      const auto q = static_cast<std::int16_t>(std::lround(std::clamp(v * 32768.0, -32768.0, 32767.0)));
      put_u16(out, static_cast<std::uint16_t>(q));
    }
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(Errc::IoError, "cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error(Errc::IoError, "short write to " + path.string());
}

void write_wav(const std::filesystem::path& path, const Waveform& w) {
  write_wav(path, std::vector<std::vector<double>>{w.samples}, w.sample_rate);
}

void peak_normalize(std::vector<double>& samples) {
  double peak = 0.0;
  for (double s : samples) peak = std::max(peak, std::abs(s));
  if (peak == 0.0) return;
  for (double& s : samples) s /= peak;
}

Waveform to_waveform(const PcmAudio& pcm, std::string clip_id) {
  if (pcm.frames() == 0) throw Error(Errc::EmptyAudio, "zero samples");
  Waveform w;
  w.sample_rate = pcm.sample_rate;
  w.clip_id = std::move(clip_id);
  w.samples.assign(pcm.frames(), 0.0);
  const double scale = 1.0 / static_cast<double>(pcm.channels.size());
  for (const auto& ch : pcm.channels) {
    for (std::size_t i = 0; i < ch.size(); ++i) w.samples[i] += ch[i] * scale;
  }
  peak_normalize(w.samples);
  return w;
}

Waveform load_wav(const std::filesystem::path& path) {
  return to_waveform(read_wav(path), path.stem().string());
}

std::vector<double> resample(const std::vector<double>& x, int source_rate, int target_rate) {
  if (source_rate <= 0 || target_rate <= 0) {
    throw Error(Errc::InvalidArgument, "sample rates must be positive");
  }
  if (source_rate == target_rate) return x;

  constexpr int kZeroCrossings = 16;
  const double ratio = static_cast<double>(target_rate) / source_rate;
  // Cutoff relative to the source Nyquist; lowered when downsampling.
  const double cutoff = std::min(1.0, ratio) * 0.97;
  const double half_width = kZeroCrossings / cutoff;
  const auto n_in = static_cast<long long>(x.size());
  const auto n_out = static_cast<long long>(
      std::llround(static_cast<double>(x.size()) * target_rate / source_rate));

  std::vector<double> y(static_cast<std::size_t>(std::max<long long>(n_out, 0)));
  for (long long i = 0; i < n_out; ++i) {
    const double t = static_cast<double>(i) * source_rate / target_rate;
    const long long lo = std::max<long long>(0, static_cast<long long>(std::ceil(t - half_width)));
    const long long hi = std::min<long long>(n_in - 1, static_cast<long long>(std::floor(t + half_width)));
    double acc = 0.0;
    for (long long j = lo; j <= hi; ++j) {
      const double d = t - static_cast<double>(j);
      // Blackman window over [-half_width, half_width].
      const double u = d / half_width;
      const double win = 0.42 + 0.5 * std::cos(M_PI * u) + 0.08 * std::cos(2.0 * M_PI * u);
      acc += x[static_cast<std::size_t>(j)] * cutoff * sinc(cutoff * d) * win;
    }
    y[static_cast<std::size_t>(i)] = acc;
  }
  return y;
}

Waveform resample(const Waveform& w, int target_rate) {
  if (target_rate <= 0) throw Error(Errc::InvalidArgument, "target rate must be positive");
  if (target_rate == w.sample_rate) return w;
  Waveform out;
  out.clip_id = w.clip_id;
  out.sample_rate = target_rate;
  out.samples = resample(w.samples, w.sample_rate, target_rate);
  // Interpolation ringing may overshoot slightly; keep the [-1, 1] invariant.
  double peak = 0.0;
  for (double s : out.samples) peak = std::max(peak, std::abs(s));
  if (peak > 1.0) {
    for (double& s : out.samples) s /= peak;
  }
  return out;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Eigen::MatrixXd mel_filterbank(int n_mels, int n_fft, int sample_rate) {
  if (n_mels < 1 || n_fft < 2 || sample_rate <= 0) {
    throw Error(Errc::InvalidArgument, "bad filterbank parameters");
  }
  const int n_bins = n_fft / 2 + 1;
  const double nyquist = sample_rate / 2.0;
  const double mel_hi = hz_to_mel(nyquist);
  std::vector<double> edges(static_cast<std::size_t>(n_mels) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_hi * static_cast<double>(i) / (n_mels + 1));
  }

  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(n_bins, n_mels);
  for (int k = 0; k < n_bins; ++k) {
    const double f = static_cast<double>(k) * sample_rate / n_fft;
    for (int m = 0; m < n_mels; ++m) {
      const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
      double w = 0.0;
      if (f > lo && f <= mid) {
        w = (f - lo) / (mid - lo);
      } else if (f > mid && f < hi) {
        w = (hi - f) / (hi - mid);
      }
      fb(k, m) = w;
    }
  }
  return fb;
}

MelSpectrogram mel_spectrogram(const Waveform& w, const MelConfig& cfg) {
  if (cfg.n_mels < 1 || cfg.win_s <= 0.0 || cfg.hop_s <= 0.0) {
    throw Error(Errc::InvalidArgument, "bad mel configuration");
  }
  const auto win = static_cast<std::size_t>(std::lround(cfg.win_s * w.sample_rate));
  const auto hop = static_cast<std::size_t>(std::lround(cfg.hop_s * w.sample_rate));
  if (win < 2 || hop < 1) throw Error(Errc::InvalidArgument, "window or hop below one sample");
  if (w.samples.size() < win) {
    throw Error(Errc::TooShort, "audio shorter than one analysis window");
  }
  int n_fft = cfg.n_fft;
  if (n_fft <= 0) {
    n_fft = 1;
    while (static_cast<std::size_t>(n_fft) < win) n_fft <<= 1;
  }
  if (static_cast<std::size_t>(n_fft) < win) throw Error(Errc::InvalidArgument, "n_fft < window");

  const std::size_t n_frames = 1 + (w.samples.size() - win) / hop;
  const int n_bins = n_fft / 2 + 1;

  std::vector<double> window(win);
  for (std::size_t i = 0; i < win; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(i) / static_cast<double>(win));
  }
  const Eigen::MatrixXd fb = mel_filterbank(cfg.n_mels, n_fft, w.sample_rate);

  double* in = fftw_alloc_real(static_cast<std::size_t>(n_fft));
  fftw_complex* out = fftw_alloc_complex(static_cast<std::size_t>(n_bins));
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_r2c_1d(n_fft, in, out, FFTW_ESTIMATE);
  }

  Eigen::MatrixXd mag(static_cast<Eigen::Index>(n_frames), n_bins);
  for (std::size_t f = 0; f < n_frames; ++f) {
    const double* src = w.samples.data() + f * hop;
    for (std::size_t i = 0; i < win; ++i) in[i] = src[i] * window[i];
    for (int i = static_cast<int>(win); i < n_fft; ++i) in[i] = 0.0;
    fftw_execute(plan);
    for (int k = 0; k < n_bins; ++k) {
      mag(static_cast<Eigen::Index>(f), k) = std::hypot(out[k][0], out[k][1]);
    }
  }

  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(in);
  fftw_free(out);

  MelSpectrogram s;
  s.frames = (mag * fb).cwiseMax(0.0);
  s.frame_hop_s = static_cast<double>(hop) / w.sample_rate;
  s.n_mels = cfg.n_mels;
  return s;
}

}  // namespace prosim
