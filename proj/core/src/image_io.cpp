#include "mmft/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "mmft/errors.hpp"

namespace mmft {

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(std::string_view bytes) : bytes_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  long read_int(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    long v = 0;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      v = v * 10 + (bytes_[pos_] - '0');
      if (v > 1'000'000) throw IoError(std::string("malformed PNM header: ") + what + " too large");
      ++pos_;
    }
    if (pos_ == start) throw IoError(std::string("malformed PNM header: missing ") + what);
    return v;
  }

  std::size_t pos_ = 0;
  std::string_view bytes_;
};

}  // namespace

Tensor decode_pnm(std::string_view bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw IoError("malformed PNM header: expected magic P5 or P6");
  }
  const std::int64_t channels = bytes[1] == '6' ? 3 : 1;
  HeaderReader reader(bytes);
  reader.pos_ = 2;
  const long width = reader.read_int("width");
  const long height = reader.read_int("height");
  const long maxval = reader.read_int("maxval");
  if (width <= 0 || height <= 0) throw IoError("malformed PNM header: zero extent");
  if (maxval != 255) throw IoError("unsupported PNM maxval " + std::to_string(maxval) + " (only 255)");
  if (reader.pos_ >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[reader.pos_]))) {
    throw IoError("malformed PNM header: no whitespace after maxval");
  }
  const std::size_t payload = reader.pos_ + 1;
  const std::size_t pixels = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  const std::size_t needed = pixels * static_cast<std::size_t>(channels);
  if (bytes.size() - payload < needed) {
    throw IoError("truncated PNM payload: expected " + std::to_string(needed) + " bytes, found " +
                  std::to_string(bytes.size() - payload));
  }
  std::vector<Real> values(needed);
  for (std::size_t p = 0; p < pixels; ++p) {
    for (std::int64_t c = 0; c < channels; ++c) {
      const auto byte = static_cast<unsigned char>(bytes[payload + p * channels + c]);
      values[c * pixels + p] = static_cast<Real>(byte) / 255.0;
    }
  }
  return Tensor(Shape{channels, height, width}, std::move(values));
}

std::string encode_pnm(const Tensor& image) {
  if (image.rank() != 3 || (image.dim(0) != 1 && image.dim(0) != 3)) {
    throw ValidationError("save_image: expects a [1,H,W] or [3,H,W] tensor, got " +
                          shape_str(image.shape()));
  }
  const auto channels = image.dim(0), height = image.dim(1), width = image.dim(2);
  std::ostringstream header;
  header << (channels == 3 ? "P6" : "P5") << '\n' << width << ' ' << height << '\n' << 255 << '\n';
  std::string out = header.str();
  const auto pixels = height * width;
  const auto v = image.values();
  out.reserve(out.size() + static_cast<std::size_t>(pixels * channels));
  for (std::int64_t p = 0; p < pixels; ++p) {
    for (std::int64_t c = 0; c < channels; ++c) {
      const Real x = std::clamp(v[c * pixels + p], 0.0, 1.0);
      out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(x * 255.0))));
    }
  }
  return out;
}

Tensor load_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_pnm(bytes);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void save_image(const Tensor& image, const std::filesystem::path& path) {
  const std::string bytes = encode_pnm(image);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace mmft
