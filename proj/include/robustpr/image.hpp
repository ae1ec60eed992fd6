#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <png.h>

#include "robustpr/types.hpp"

namespace robustpr {

/// File missing, unreadable, or corrupt.
class image_read_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File readable but not a variant this library handles.
class image_format_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Channel { gray, red, green, blue };

inline const char* to_string(Channel c) {
  switch (c) {
    case Channel::gray: return "gray";
    case Channel::red: return "R";
    case Channel::green: return "G";
    case Channel::blue: return "B";
  }
  return "?";
}

/// One color plane, intensities in [0, 1], row-major.
struct ImagePlane {
  Index width = 0;
  Index height = 0;
  Channel channel = Channel::gray;
  Vector pixels;
};

struct Image {
  Index width = 0;
  Index height = 0;
  std::string format;  // "png", "ppm", "pgm"
  std::vector<ImagePlane> planes;  // 1 (gray) or 3 (R, G, B)
};

namespace detail {

inline Image image_from_bytes(Index width, Index height, int channels,
                              const std::vector<unsigned char>& bytes, std::string format) {
  Image img;
  img.width = width;
  img.height = height;
  img.format = std::move(format);
  const Channel tags3[3] = {Channel::red, Channel::green, Channel::blue};
  for (int c = 0; c < channels; ++c) {
    ImagePlane plane;
    plane.width = width;
    plane.height = height;
    plane.channel = channels == 1 ? Channel::gray : tags3[c];
    plane.pixels.resize(width * height);
    for (Index p = 0; p < width * height; ++p)
      plane.pixels[p] = bytes[static_cast<std::size_t>(p) * channels + c] / 255.0;
    img.planes.push_back(std::move(plane));
  }
  return img;
}

inline std::vector<unsigned char> bytes_from_image(const Image& img) {
  const int channels = static_cast<int>(img.planes.size());
  std::vector<unsigned char> bytes(static_cast<std::size_t>(img.width * img.height) * channels);
  for (int c = 0; c < channels; ++c) {
    const Vector& px = img.planes[static_cast<std::size_t>(c)].pixels;
    for (Index p = 0; p < img.width * img.height; ++p) {
      const double v = std::clamp(px[p], 0.0, 1.0);
      bytes[static_cast<std::size_t>(p) * channels + c] =
          static_cast<unsigned char>(std::lround(v * 255.0));
    }
  }
  return bytes;
}

struct PngReadCloser {
  png_structp png = nullptr;
  png_infop info = nullptr;
  std::FILE* fp = nullptr;
  ~PngReadCloser() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    if (fp) std::fclose(fp);
  }
};

struct PngWriteCloser {
  png_structp png = nullptr;
  png_infop info = nullptr;
  std::FILE* fp = nullptr;
  ~PngWriteCloser() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    if (fp) std::fclose(fp);
  }
};

inline Image load_png(const std::string& path) {
  PngReadCloser raii;
  raii.fp = std::fopen(path.c_str(), "rb");
  if (!raii.fp) throw image_read_error("cannot open image: " + path);

  unsigned char sig[8];
  if (std::fread(sig, 1, 8, raii.fp) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw image_read_error("not a PNG file: " + path);

  raii.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!raii.png) throw image_read_error("libpng init failed");
  raii.info = png_create_info_struct(raii.png);
  if (!raii.info) throw image_read_error("libpng init failed");

  std::vector<unsigned char> bytes;
  std::vector<png_bytep> rows;
  png_uint_32 width = 0, height = 0;
  int channels = 0;

  if (setjmp(png_jmpbuf(raii.png)))
    throw image_read_error("corrupt PNG: " + path);

  png_init_io(raii.png, raii.fp);
  png_set_sig_bytes(raii.png, 8);
  png_read_info(raii.png, raii.info);

  width = png_get_image_width(raii.png, raii.info);
  height = png_get_image_height(raii.png, raii.info);
  const int color_type = png_get_color_type(raii.png, raii.info);
  const int bit_depth = png_get_bit_depth(raii.png, raii.info);

  // Normalize common variants to 8-bit gray or RGB.
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(raii.png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(raii.png);
  if (png_get_valid(raii.png, raii.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(raii.png);
  if (bit_depth == 16) png_set_strip_16(raii.png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(raii.png);
  png_read_update_info(raii.png, raii.info);

  channels = png_get_channels(raii.png, raii.info);
  if (channels == 2) {  // gray+alpha after tRNS expansion
    png_set_strip_alpha(raii.png);
    png_read_update_info(raii.png, raii.info);
    channels = png_get_channels(raii.png, raii.info);
  }
  if (channels != 1 && channels != 3)
    throw image_format_error("unsupported PNG channel layout in " + path);

  bytes.resize(static_cast<std::size_t>(width) * height * static_cast<std::size_t>(channels));
  rows.resize(height);
  for (png_uint_32 r = 0; r < height; ++r)
    rows[r] = bytes.data() + static_cast<std::size_t>(r) * width * static_cast<std::size_t>(channels);
  png_read_image(raii.png, rows.data());
  png_read_end(raii.png, nullptr);

  return image_from_bytes(static_cast<Index>(width), static_cast<Index>(height), channels, bytes,
                          "png");
}

inline void save_png(const std::string& path, const Image& img) {
  const int channels = static_cast<int>(img.planes.size());
  const auto bytes = bytes_from_image(img);

  PngWriteCloser raii;
  raii.fp = std::fopen(path.c_str(), "wb");
  if (!raii.fp) throw std::runtime_error("cannot write image: " + path);
  raii.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!raii.png) throw std::runtime_error("libpng init failed");
  raii.info = png_create_info_struct(raii.png);
  if (!raii.info) throw std::runtime_error("libpng init failed");

  std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
  for (Index r = 0; r < img.height; ++r)
    rows[static_cast<std::size_t>(r)] = const_cast<png_bytep>(
        bytes.data() + static_cast<std::size_t>(r) * img.width * static_cast<std::size_t>(channels));

  if (setjmp(png_jmpbuf(raii.png)))
    throw std::runtime_error("PNG write failed: " + path);

  png_init_io(raii.png, raii.fp);
  png_set_IHDR(raii.png, raii.info, static_cast<png_uint_32>(img.width),
               static_cast<png_uint_32>(img.height), 8,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(raii.png, raii.info);
  png_write_image(raii.png, rows.data());
  png_write_end(raii.png, nullptr);
}

// Netpbm: binary P5/P6 and plain-text P2/P3, maxval up to 255.
inline int pnm_next_value(std::istream& is, const std::string& path) {
  // Skips whitespace and '#' comments.
  while (is) {
    const int c = is.peek();
    if (c == '#') {
      std::string line;
      std::getline(is, line);
    } else if (std::isspace(c)) {
      is.get();
    } else {
      break;
    }
  }
  int value = -1;
  if (!(is >> value)) throw image_read_error("truncated PNM header: " + path);
  return value;
}

inline Image load_pnm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw image_read_error("cannot open image: " + path);
  char p = 0, kind = 0;
  is.get(p);
  is.get(kind);
  if (p != 'P' || (kind != '2' && kind != '3' && kind != '5' && kind != '6'))
    throw image_format_error("unsupported PNM variant in " + path);
  const bool color = kind == '3' || kind == '6';
  const bool binary = kind == '5' || kind == '6';
  const int channels = color ? 3 : 1;

  const int width = pnm_next_value(is, path);
  const int height = pnm_next_value(is, path);
  const int maxval = pnm_next_value(is, path);
  if (width <= 0 || height <= 0) throw image_read_error("bad PNM dimensions in " + path);
  if (maxval <= 0 || maxval > 255) throw image_format_error("unsupported PNM maxval in " + path);

  const std::size_t count = static_cast<std::size_t>(width) * height * static_cast<std::size_t>(channels);
  std::vector<unsigned char> bytes(count);
  if (binary) {
    is.get();  // single whitespace after maxval
    is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(count));
    if (static_cast<std::size_t>(is.gcount()) != count)
      throw image_read_error("truncated PNM data in " + path);
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      const int v = pnm_next_value(is, path);
      if (v < 0 || v > maxval) throw image_read_error("bad PNM sample in " + path);
      bytes[i] = static_cast<unsigned char>(v);
    }
  }
  if (maxval != 255)
    for (auto& b : bytes) b = static_cast<unsigned char>(std::lround(b * 255.0 / maxval));
  return image_from_bytes(width, height, channels, bytes, color ? "ppm" : "pgm");
}

inline void save_pnm(const std::string& path, const Image& img) {
  const int channels = static_cast<int>(img.planes.size());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write image: " + path);
  os << (channels == 3 ? "P6" : "P5") << "\n" << img.width << " " << img.height << "\n255\n";
  const auto bytes = bytes_from_image(img);
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw std::runtime_error("image write failed: " + path);
}

}  // namespace detail

/// Loads a PNG or PPM/PGM image, dispatching on the file's magic bytes.
inline Image load_image(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw image_read_error("cannot open image: " + path);
  char magic[2] = {0, 0};
  probe.read(magic, 2);
  probe.close();
  if (magic[0] == 'P' && magic[1] >= '1' && magic[1] <= '6') {
    if (magic[1] == '1' || magic[1] == '4')
      throw image_format_error("bitmap PNM variants are not supported: " + path);
    return detail::load_pnm(path);
  }
  if (static_cast<unsigned char>(magic[0]) == 0x89 && magic[1] == 'P') return detail::load_png(path);
  throw image_format_error("unrecognized image format: " + path);
}

/// Writes the image in its recorded format family (png or binary P5/P6).
inline void save_image(const std::string& path, const Image& img) {
  if (img.planes.empty() || (img.planes.size() != 1 && img.planes.size() != 3))
    throw std::invalid_argument("save_image: image must have 1 or 3 planes");
  for (const auto& plane : img.planes)
    if (plane.pixels.size() != img.width * img.height)
      throw std::invalid_argument("save_image: plane dimensions mismatch");
  if (img.format == "png")
    detail::save_png(path, img);
  else
    detail::save_pnm(path, img);
}

}  // namespace robustpr
