#include "prosim/embedding_store.hpp"

#include "prosim/error.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace prosim {

namespace {

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

std::span<const float> EmbeddingStack::layer(std::size_t index) const {
  if (index >= n_layers) {
    throw Error(Errc::LayerOutOfRange,
                "layer " + std::to_string(index) + " of " + std::to_string(n_layers));
  }
  return std::span<const float>(vectors).subspan(index * dim, dim);
}

void validate(const EmbeddingStack& s) {
  if (s.n_layers < 1 || s.dim < 1) {
    throw Error(Errc::InvalidArgument, "stack needs at least one layer and one dimension");
  }
  if (s.vectors.size() != static_cast<std::size_t>(s.n_layers) * s.dim) {
    throw Error(Errc::ShapeMismatch, "vector payload does not match n_layers x dim");
  }
  for (float v : s.vectors) {
    if (!std::isfinite(v)) throw Error(Errc::InvalidArgument, "non-finite embedding value");
  }
}

std::vector<unsigned char> encode_stack(const EmbeddingStack& s) {
  validate(s);
  std::vector<unsigned char> out;
  out.reserve(kPembHeaderSize + s.vectors.size() * 4);
  out.insert(out.end(), kPembMagic, kPembMagic + 4);
  put_u32(out, kPembVersion);
  put_u32(out, s.n_layers);
  put_u32(out, s.dim);
  for (float v : s.vectors) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    put_u32(out, bits);
  }
  return out;
}

EmbeddingStack decode_stack(std::span<const unsigned char> bytes) {
  if (bytes.size() < 4) throw Error(Errc::Truncated, "file shorter than the magic");
  if (std::memcmp(bytes.data(), kPembMagic, 4) != 0) throw Error(Errc::BadMagic, "expected PEMB");
  if (bytes.size() < kPembHeaderSize) throw Error(Errc::Truncated, "incomplete header");
  const std::uint32_t version = get_u32(bytes.data() + 4);
  if (version != kPembVersion) {
    throw Error(Errc::VersionMismatch, "version " + std::to_string(version));
  }
  EmbeddingStack s;
  s.n_layers = get_u32(bytes.data() + 8);
  s.dim = get_u32(bytes.data() + 12);
  if (s.n_layers < 1 || s.dim < 1) throw Error(Errc::InvalidArgument, "empty shape in header");
  const std::size_t count = static_cast<std::size_t>(s.n_layers) * s.dim;
  const std::size_t expected = kPembHeaderSize + count * 4;
  if (bytes.size() < expected) {
    throw Error(Errc::Truncated, std::to_string(bytes.size()) + " bytes, expected " +
                                     std::to_string(expected));
  }
  if (bytes.size() > expected) {
    throw Error(Errc::InvalidArgument, "trailing bytes after payload");
  }
  s.vectors.resize(count);
  const unsigned char* p = bytes.data() + kPembHeaderSize;
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint32_t bits = get_u32(p + 4 * i);
    std::memcpy(&s.vectors[i], &bits, sizeof bits);
  }
  return s;
}

std::filesystem::path stack_filename(const std::string& clip_id, const std::string& model_name) {
  return clip_id + "." + model_name + ".pemb";
}

void write_stack(const EmbeddingStack& s, const std::filesystem::path& path) {
  const auto bytes = encode_stack(s);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(Errc::IoError, "cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error(Errc::IoError, "short write to " + path.string());
}

EmbeddingStack read_stack(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::IoError, "cannot open " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                         std::istreambuf_iterator<char>());
  EmbeddingStack s = decode_stack(bytes);
  if (path.extension() == ".pemb") {
    const std::string stem = path.stem().string();
    const auto dot = stem.rfind('.');
    if (dot != std::string::npos) {
      s.clip_id = stem.substr(0, dot);
      s.model_name = stem.substr(dot + 1);
    } else {
      s.clip_id = stem;
    }
  }
  return s;
}

std::vector<double> layer_vector(const EmbeddingStack& s, std::size_t layer) {
  const auto v = s.layer(layer);
  return {v.begin(), v.end()};
}

}  // namespace prosim
