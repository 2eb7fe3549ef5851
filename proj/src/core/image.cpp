#include "core/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>

namespace xstab {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

Image load_png(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) fail(Err::Io, "cannot open " + path.string());

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail(Err::Io, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    fail(Err::Io, "png_create_info_struct failed");
  }
  std::vector<png_bytep> row_ptrs;
  Image img;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(Err::Format, "corrupt PNG: " + path.string());
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  if (depth == 16) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(Err::Format, "16-bit PNG not supported: " + path.string());
  }
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  if (png_get_rowbytes(png, info) != static_cast<std::size_t>(w) * 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(Err::Format, "unexpected PNG layout: " + path.string());
  }
  img = Image(h, w);
  row_ptrs.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) row_ptrs[y] = img.pixels.data() + y * w * 3;
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void save_png(const Image& img, const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) fail(Err::Io, "cannot write " + path.string());

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail(Err::Io, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    fail(Err::Io, "png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(Err::Io, "PNG write failed: " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
               static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_const_bytep> row_ptrs(img.height);
  for (std::size_t y = 0; y < img.height; ++y)
    row_ptrs[y] = img.pixels.data() + y * img.width * 3;
  png_write_image(png, const_cast<png_bytepp>(row_ptrs.data()));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// Binary PPM, header "P6 <w> <h> <maxval>" with whitespace/comments between tokens.
Image load_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Err::Io, "cannot open " + path.string());

  auto next_token = [&in, &path]() {
    std::string tok;
    int c = in.get();
    while (c != EOF) {
      if (c == '#') {
        while (c != EOF && c != '\n') c = in.get();
      } else if (std::isspace(c)) {
        c = in.get();
      } else {
        break;
      }
    }
    while (c != EOF && !std::isspace(c)) {
      tok.push_back(static_cast<char>(c));
      c = in.get();
    }
    if (tok.empty()) fail(Err::Format, "truncated PPM header: " + path.string());
    return tok;
  };

  if (next_token() != "P6") fail(Err::Format, "not a P6 PPM: " + path.string());
  const long w = std::stol(next_token());
  const long h = std::stol(next_token());
  const long maxval = std::stol(next_token());
  if (w <= 0 || h <= 0) fail(Err::Format, "bad PPM dims: " + path.string());
  if (maxval != 255) fail(Err::Format, "PPM maxval must be 255: " + path.string());

  Image img(static_cast<std::size_t>(h), static_cast<std::size_t>(w));
  in.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size()))
    fail(Err::Format, "truncated PPM data: " + path.string());
  return img;
}

void save_ppm(const Image& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Err::Io, "cannot write " + path.string());
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
  if (!out) fail(Err::Io, "short write: " + path.string());
}

}  // namespace

Image load_image(const std::filesystem::path& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) fail(Err::Io, "cannot open " + path.string());
  unsigned char magic[8] = {};
  probe.read(reinterpret_cast<char*>(magic), sizeof magic);
  probe.close();
  static const unsigned char png_magic[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  if (std::memcmp(magic, png_magic, 8) == 0) return load_png(path);
  if (magic[0] == 'P' && magic[1] == '6') return load_ppm(path);
  fail(Err::Format, "unrecognized image format: " + path.string());
}

void save_image(const Image& img, const std::filesystem::path& path) {
  if (img.pixels.empty()) fail(Err::EmptyInput, "save_image: empty image");
  const std::string ext = path.extension().string();
  if (ext == ".png") return save_png(img, path);
  if (ext == ".ppm") return save_ppm(img, path);
  fail(Err::Format, "unsupported image extension: " + path.string());
}

Image resize_image_bilinear(const Image& img, std::size_t out_h, std::size_t out_w) {
  if (img.pixels.empty()) fail(Err::EmptyInput, "resize_image_bilinear: empty image");
  if (out_h == 0 || out_w == 0) {
    fail(Err::InvalidParameter, "resize_image_bilinear: zero output dim");
  }
  if (out_h == img.height && out_w == img.width) return img;

  Image out(out_h, out_w);
  const double sy = static_cast<double>(img.height) / static_cast<double>(out_h);
  const double sx = static_cast<double>(img.width) / static_cast<double>(out_w);
  for (std::size_t oy = 0; oy < out_h; ++oy) {
    const double fy = (static_cast<double>(oy) + 0.5) * sy - 0.5;
    const double cy = std::clamp(fy, 0.0, static_cast<double>(img.height - 1));
    const std::size_t y0 = static_cast<std::size_t>(cy);
    const std::size_t y1 = std::min(y0 + 1, img.height - 1);
    const double wy = cy - static_cast<double>(y0);
    for (std::size_t ox = 0; ox < out_w; ++ox) {
      const double fx = (static_cast<double>(ox) + 0.5) * sx - 0.5;
      const double cx = std::clamp(fx, 0.0, static_cast<double>(img.width - 1));
      const std::size_t x0 = static_cast<std::size_t>(cx);
      const std::size_t x1 = std::min(x0 + 1, img.width - 1);
      const double wx = cx - static_cast<double>(x0);
      for (std::size_t c = 0; c < 3; ++c) {
        const double top = img.at(y0, x0, c) * (1.0 - wx) + img.at(y0, x1, c) * wx;
        const double bot = img.at(y1, x0, c) * (1.0 - wx) + img.at(y1, x1, c) * wx;
        out.at(oy, ox, c) = clamp_u8(std::round(top * (1.0 - wy) + bot * wy));
      }
    }
  }
  return out;
}

}  // namespace xstab
