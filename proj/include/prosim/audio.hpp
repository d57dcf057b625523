#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <string>
#include <vector>

namespace prosim {

inline constexpr int kCanonicalRate = 16000;

struct Waveform {
  std::vector<double> samples;
  int sample_rate = kCanonicalRate;
  std::string clip_id;

  double duration_s() const {
    return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
  }
};

// Raw decoded WAV contents, one vector per channel, samples scaled to [-1, 1]
// but not normalized.
struct PcmAudio {
  std::vector<std::vector<double>> channels;
  int sample_rate = 0;

  std::size_t frames() const { return channels.empty() ? 0 : channels.front().size(); }
};

// Decodes 16-bit integer or 32-bit float RIFF/WAVE (plain or extensible
// header). Throws UnsupportedFormat for anything else, IoError when the file
// cannot be read.
PcmAudio read_wav(const std::filesystem::path& path);
PcmAudio decode_wav(const std::vector<unsigned char>& bytes);

// Writes 16-bit PCM. Samples outside [-1, 1] are clipped.
void write_wav(const std::filesystem::path& path, const std::vector<std::vector<double>>& channels,
               int sample_rate);
void write_wav(const std::filesystem::path& path, const Waveform& w);

// Mono mixdown + peak normalization (skipped for all-zero audio).
Waveform load_wav(const std::filesystem::path& path);
Waveform to_waveform(const PcmAudio& pcm, std::string clip_id = {});

void peak_normalize(std::vector<double>& samples);

// Windowed-sinc band-limited resampling. Identity when rates match.
Waveform resample(const Waveform& w, int target_rate);
std::vector<double> resample(const std::vector<double>& x, int source_rate, int target_rate);

struct MelConfig {
  int n_mels = 80;
  double win_s = 0.025;
  double hop_s = 0.010;
  // 0 selects the smallest power of two >= the window length.
  int n_fft = 0;
};

struct MelSpectrogram {
  Eigen::MatrixXd frames;  // n_frames x n_mels, nonnegative
  double frame_hop_s = 0.0;
  int n_mels = 0;

  Eigen::Index n_frames() const { return frames.rows(); }
};

// Magnitude STFT (Hann window) through a triangular HTK-mel filterbank from
// 0 Hz to Nyquist. Frame count is 1 + floor((len - win) / hop); throws
// TooShort when the audio is shorter than one window.
MelSpectrogram mel_spectrogram(const Waveform& w, const MelConfig& cfg = {});

// (n_fft/2 + 1) x n_mels filter weights.
Eigen::MatrixXd mel_filterbank(int n_mels, int n_fft, int sample_rate);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

}  // namespace prosim
