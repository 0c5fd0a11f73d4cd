#include "edtk/ppm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "edtk/errors.hpp"
#include "edtk/weight_archive.hpp"

namespace edtk {

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(const std::vector<std::uint8_t>& b) : b_(b) {}

  std::size_t number(const char* what) {
    skip_space_and_comments();
    std::size_t v = 0;
    bool any = false;
    while (pos_ < b_.size() && std::isdigit(b_[pos_])) {
      v = v * 10 + (b_[pos_++] - '0');
      any = true;
      if (v > 1u << 20) throw ShapeError(std::string("PPM: ") + what + " is too large");
    }
    if (!any) throw ShapeError(std::string("PPM: expected ") + what);
    return v;
  }

  std::size_t pos() const { return pos_; }
  void skip_one_space() {
    if (pos_ >= b_.size() || !std::isspace(b_[pos_])) throw ShapeError("PPM: missing whitespace before pixel data");
    ++pos_;
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < b_.size()) {
      if (std::isspace(b_[pos_])) {
        ++pos_;
      } else if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<std::uint8_t>& b_;
  std::size_t pos_ = 2;
};

}  // namespace

Tensor decode_ppm(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') throw ShapeError("PPM: only binary P6 is supported");
  HeaderReader h(bytes);
  const std::size_t w = h.number("width");
  const std::size_t ht = h.number("height");
  const std::size_t maxval = h.number("maxval");
  if (w == 0 || ht == 0) throw ShapeError("PPM: zero image size");
  if (maxval != 255) throw ShapeError("PPM: only 8-bit images (maxval 255) are supported");
  h.skip_one_space();
  const std::size_t start = h.pos();
  if (bytes.size() - start < 3 * w * ht) throw ShapeError("PPM: pixel data truncated");

  Tensor img(Shape{3, ht, w});
  for (std::size_t y = 0; y < ht; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c)
        img.at(c, y, x) = static_cast<float>(bytes[start + 3 * (y * w + x) + c]) / 255.0f;
  return img;
}

Tensor read_ppm(const std::string& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file(path);
  } catch (const ArchiveError&) {
    throw ShapeError("PPM: cannot open '" + path + "'");
  }
  return decode_ppm(bytes);
}

std::vector<std::uint8_t> encode_ppm(const Tensor& image) {
  require_rank3(image.shape(), "encode_ppm");
  if (image.channels() != 3) throw ShapeError("encode_ppm: image must have 3 channels");
  const std::string header = "P6\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  for (std::size_t y = 0; y < image.height(); ++y)
    for (std::size_t x = 0; x < image.width(); ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        const float v = std::clamp(image.at(c, y, x), 0.0f, 1.0f);
        out.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0f)));
      }
  return out;
}

}  // namespace edtk
