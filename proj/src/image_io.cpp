#include "freespace/image_io.hpp"

#include <png.h>

#include <cctype>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <vector>

#include "freespace/error.hpp"

namespace freespace {

namespace {

bool ends_with_ci(const std::string& s, const std::string& suffix) {
  if (s.size() < suffix.size()) return false;
  for (std::size_t i = 0; i < suffix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[s.size() - suffix.size() + i])) !=
        std::tolower(static_cast<unsigned char>(suffix[i])))
      return false;
  }
  return true;
}

// --- PGM -------------------------------------------------------------

int pgm_next_token(std::istream& in, std::string& tok) {
  tok.clear();
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (!std::isspace(ch)) break;
  }
  if (ch == EOF) return -1;
  do {
    tok.push_back(static_cast<char>(ch));
    ch = in.get();
  } while (ch != EOF && !std::isspace(ch));
  return 0;
}

struct PgmHeader {
  int width, height, maxval;
};

PgmHeader read_pgm_header(std::istream& in, const std::string& path) {
  std::string tok;
  if (pgm_next_token(in, tok) < 0 || tok != "P5")
    throw FormatError(path + ": not a binary PGM (P5) file");
  PgmHeader h{};
  int* fields[3] = {&h.width, &h.height, &h.maxval};
  for (int* f : fields) {
    if (pgm_next_token(in, tok) < 0)
      throw FormatError(path + ": truncated PGM header");
    try {
      *f = std::stoi(tok);
    } catch (...) {
      throw FormatError(path + ": malformed PGM header token '" + tok + "'");
    }
  }
  if (h.width <= 0 || h.height <= 0)
    throw FormatError(path + ": non-positive PGM dimensions");
  return h;
}

template <typename T>
Image<T> read_pgm(const std::string& path, int expected_bytes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path + ": cannot open file");
  const PgmHeader h = read_pgm_header(in, path);
  const int bytes = h.maxval > 255 ? 2 : 1;
  if (bytes != expected_bytes)
    throw FormatError(path + ": expected " +
                      std::to_string(expected_bytes * 8) + "-bit PGM, got " +
                      std::to_string(bytes * 8) + "-bit (maxval " +
                      std::to_string(h.maxval) + ")");
  Image<T> img(h.width, h.height);
  std::vector<unsigned char> rowbuf(static_cast<std::size_t>(h.width) * bytes);
  for (int y = 0; y < h.height; ++y) {
    in.read(reinterpret_cast<char*>(rowbuf.data()),
            static_cast<std::streamsize>(rowbuf.size()));
    if (!in) throw FormatError(path + ": truncated PGM pixel data");
    for (int x = 0; x < h.width; ++x) {
      if (bytes == 2) {
        img(x, y) = static_cast<T>((rowbuf[2 * x] << 8) | rowbuf[2 * x + 1]);
      } else {
        img(x, y) = static_cast<T>(rowbuf[x]);
      }
    }
  }
  return img;
}

template <typename T>
void write_pgm(const std::string& path, const Image<T>& img, int maxval) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(path + ": cannot open file for writing");
  out << "P5\n" << img.width() << " " << img.height() << "\n" << maxval
      << "\n";
  const int bytes = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> rowbuf(static_cast<std::size_t>(img.width()) *
                                    bytes);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const unsigned v = img(x, y);
      if (bytes == 2) {
        rowbuf[2 * x] = static_cast<unsigned char>(v >> 8);
        rowbuf[2 * x + 1] = static_cast<unsigned char>(v & 0xff);
      } else {
        rowbuf[x] = static_cast<unsigned char>(v);
      }
    }
    out.write(reinterpret_cast<const char*>(rowbuf.data()),
              static_cast<std::streamsize>(rowbuf.size()));
  }
  if (!out) throw FormatError(path + ": write failed");
}

// --- PNG -------------------------------------------------------------

struct PngReader {
  std::FILE* fp = nullptr;
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngReader() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    if (fp) std::fclose(fp);
  }
};

template <typename T>
Image<T> read_png(const std::string& path, int expected_depth) {
  PngReader r;
  r.fp = std::fopen(path.c_str(), "rb");
  if (!r.fp) throw FormatError(path + ": cannot open file");
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, r.fp) != 8 || png_sig_cmp(sig, 0, 8))
    throw FormatError(path + ": not a PNG file");
  r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                 nullptr);
  r.info = png_create_info_struct(r.png);
  if (!r.png || !r.info) throw FormatError(path + ": libpng init failed");
  if (setjmp(png_jmpbuf(r.png)))
    throw FormatError(path + ": PNG decode error");
  png_init_io(r.png, r.fp);
  png_set_sig_bytes(r.png, 8);
  png_read_info(r.png, r.info);

  const int depth = png_get_bit_depth(r.png, r.info);
  const int color = png_get_color_type(r.png, r.info);
  if (color != PNG_COLOR_TYPE_GRAY)
    throw FormatError(path + ": expected single-channel grayscale PNG");
  if (depth != expected_depth)
    throw FormatError(path + ": expected " + std::to_string(expected_depth) +
                      "-bit PNG, got " + std::to_string(depth) + "-bit");
  const int width = static_cast<int>(png_get_image_width(r.png, r.info));
  const int height = static_cast<int>(png_get_image_height(r.png, r.info));

  Image<T> img(width, height);
  std::vector<unsigned char> rowbuf(png_get_rowbytes(r.png, r.info));
  for (int y = 0; y < height; ++y) {
    png_read_row(r.png, rowbuf.data(), nullptr);
    for (int x = 0; x < width; ++x) {
      if (expected_depth == 16) {
        img(x, y) = static_cast<T>((rowbuf[2 * x] << 8) | rowbuf[2 * x + 1]);
      } else {
        img(x, y) = static_cast<T>(rowbuf[x]);
      }
    }
  }
  return img;
}

struct PngWriter {
  std::FILE* fp = nullptr;
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngWriter() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    if (fp) std::fclose(fp);
  }
};

template <typename T>
void write_png(const std::string& path, const Image<T>& img, int depth) {
  PngWriter w;
  w.fp = std::fopen(path.c_str(), "wb");
  if (!w.fp) throw FormatError(path + ": cannot open file for writing");
  w.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                  nullptr);
  w.info = png_create_info_struct(w.png);
  if (!w.png || !w.info) throw FormatError(path + ": libpng init failed");
  if (setjmp(png_jmpbuf(w.png)))
    throw FormatError(path + ": PNG encode error");
  png_init_io(w.png, w.fp);
  png_set_IHDR(w.png, w.info, img.width(), img.height(), depth,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(w.png, w.info);
  std::vector<unsigned char> rowbuf(static_cast<std::size_t>(img.width()) *
                                    (depth / 8));
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const unsigned v = img(x, y);
      if (depth == 16) {
        rowbuf[2 * x] = static_cast<unsigned char>(v >> 8);
        rowbuf[2 * x + 1] = static_cast<unsigned char>(v & 0xff);
      } else {
        rowbuf[x] = static_cast<unsigned char>(v);
      }
    }
    png_write_row(w.png, rowbuf.data());
  }
  png_write_end(w.png, nullptr);
}

}  // namespace

bool has_png_extension(const std::string& path) {
  return ends_with_ci(path, ".png");
}

ImageU8 read_gray8(const std::string& path) {
  if (has_png_extension(path)) return read_png<std::uint8_t>(path, 8);
  return read_pgm<std::uint8_t>(path, 1);
}

ImageU16 read_gray16(const std::string& path) {
  if (has_png_extension(path)) return read_png<std::uint16_t>(path, 16);
  return read_pgm<std::uint16_t>(path, 2);
}

void write_gray8(const std::string& path, const ImageU8& img) {
  if (has_png_extension(path)) {
    write_png(path, img, 8);
  } else {
    write_pgm(path, img, 255);
  }
}

void write_gray16(const std::string& path, const ImageU16& img) {
  if (has_png_extension(path)) {
    write_png(path, img, 16);
  } else {
    write_pgm(path, img, 65535);
  }
}

}  // namespace freespace
