#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace prosim {

// PEMB on-disk layout, little-endian:
//   "PEMB" | u32 version (=1) | u32 n_layers | u32 dim | n_layers*dim f32
// Vectors are layer-major. Layer 0 is the input embedding.
inline constexpr char kPembMagic[4] = {'P', 'E', 'M', 'B'};
inline constexpr std::uint32_t kPembVersion = 1;
inline constexpr std::size_t kPembHeaderSize = 16;

struct EmbeddingStack {
  std::string clip_id;
  std::string model_name;
  std::uint32_t n_layers = 0;
  std::uint32_t dim = 0;
  std::vector<float> vectors;  // n_layers * dim, layer-major

  std::span<const float> layer(std::size_t index) const;
};

void validate(const EmbeddingStack& s);

std::vector<unsigned char> encode_stack(const EmbeddingStack& s);
// Throws BadMagic, VersionMismatch or Truncated.
EmbeddingStack decode_stack(std::span<const unsigned char> bytes);

void write_stack(const EmbeddingStack& s, const std::filesystem::path& path);
// clip_id and model_name are recovered from "<clip_id>.<model_name>.pemb"
// when the file follows that naming.
EmbeddingStack read_stack(const std::filesystem::path& path);

std::filesystem::path stack_filename(const std::string& clip_id, const std::string& model_name);

// Pooled vector for one layer as doubles. Throws LayerOutOfRange.
std::vector<double> layer_vector(const EmbeddingStack& s, std::size_t layer);

}  // namespace prosim
