#include <png.h>

#include <algorithm>
#include <cctype>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "meshreg/errors.hpp"
#include "meshreg/image.hpp"

namespace meshreg {

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failed for " + path.string());
    return bytes;
}

class PnmTokenizer {
public:
    explicit PnmTokenizer(std::span<const unsigned char> b) : bytes_(b) {}

    unsigned long next_uint() {
        skip_space_and_comments();
        if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_]))
            throw IoError("malformed PGM header");
        unsigned long v = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            v = v * 10 + (bytes_[pos_++] - '0');
            if (v > 1'000'000'000UL) throw IoError("PGM value out of range");
        }
        return v;
    }

    // Exactly one whitespace byte separates the header from binary raster data.
    void skip_single_space() {
        if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_]))
            throw IoError("malformed PGM header");
        ++pos_;
    }

    std::size_t pos() const { return pos_; }

private:
    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    std::span<const unsigned char> bytes_;
    std::size_t pos_ = 2;
};

}  // namespace

ImageGrid decode_pgm(std::span<const unsigned char> bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '2' && bytes[1] != '5'))
        throw IoError("not a PGM (P2/P5) file");
    const bool binary = bytes[1] == '5';
    PnmTokenizer tok(bytes);
    const unsigned long width = tok.next_uint();
    const unsigned long height = tok.next_uint();
    const unsigned long maxval = tok.next_uint();
    if (width == 0 || height == 0) throw IoError("PGM has zero dimension");
    if (maxval == 0 || maxval > 65535) throw IoError("PGM maxval out of range");

    const std::size_t n = width * height;
    std::vector<double> data(n);
    const double scale = 255.0 / static_cast<double>(maxval);
    if (binary) {
        tok.skip_single_space();
        const std::size_t bpp = maxval > 255 ? 2 : 1;
        const std::size_t start = tok.pos();
        if (bytes.size() < start + n * bpp) throw IoError("PGM raster truncated");
        for (std::size_t i = 0; i < n; ++i) {
            unsigned v = bytes[start + i * bpp];
            if (bpp == 2) v = (v << 8) | bytes[start + i * bpp + 1];
            if (v > maxval) throw IoError("PGM sample exceeds maxval");
            data[i] = v * scale;
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            const unsigned long v = tok.next_uint();
            if (v > maxval) throw IoError("PGM sample exceeds maxval");
            data[i] = static_cast<double>(v) * scale;
        }
    }
    return ImageGrid(width, height, std::move(data));
}

namespace {

struct PngSource {
    std::span<const unsigned char> bytes;
    std::size_t pos = 0;
};

void png_read_mem(png_structp png, png_bytep out, png_size_t len) {
    auto* src = static_cast<PngSource*>(png_get_io_ptr(png));
    if (src->pos + len > src->bytes.size()) png_error(png, "truncated PNG");
    std::memcpy(out, src->bytes.data() + src->pos, len);
    src->pos += len;
}

void png_error_fn(png_structp png, png_const_charp msg) {
    auto* buf = static_cast<std::string*>(png_get_error_ptr(png));
    if (buf) *buf = msg;
    png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

}  // namespace

ImageGrid decode_png(std::span<const unsigned char> bytes) {
    if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0)
        throw IoError("not a PNG file");

    std::string error;
    png_structp png =
        png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, png_error_fn, png_warning_fn);
    if (!png) throw IoError("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("png_create_info_struct failed");
    }

    PngSource src{bytes, 0};
    std::vector<unsigned char> raster;
    std::vector<png_bytep> rows;
    png_uint_32 width = 0, height = 0;
    int depth = 0;

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("PNG decode failed: " + error);
    }

    png_set_read_fn(png, &src, png_read_mem);
    png_read_info(png, info);

    const int color = png_get_color_type(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8)
        png_set_expand_gray_1_2_4_to_8(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA ||
        color == PNG_COLOR_TYPE_PALETTE)
        png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    png_read_update_info(png, info);

    width = png_get_image_width(png, info);
    height = png_get_image_height(png, info);
    depth = png_get_bit_depth(png, info);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    raster.resize(rowbytes * height);
    rows.resize(height);
    for (png_uint_32 y = 0; y < height; ++y) rows[y] = raster.data() + y * rowbytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    if (width == 0 || height == 0) throw IoError("PNG has zero dimension");
    std::vector<double> data(static_cast<std::size_t>(width) * height);
    for (png_uint_32 y = 0; y < height; ++y)
        for (png_uint_32 x = 0; x < width; ++x) {
            double v;
            if (depth == 16) {
                const unsigned char* p = rows[y] + 2 * x;
                v = ((p[0] << 8) | p[1]) * (255.0 / 65535.0);
            } else {
                v = rows[y][x];
            }
            data[static_cast<std::size_t>(y) * width + x] = v;
        }
    return ImageGrid(width, height, std::move(data));
}

ImageGrid load_image(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    if (bytes.size() >= 2 && bytes[0] == 'P') return decode_pgm(bytes);
    if (bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0) return decode_png(bytes);
    throw IoError("unsupported image format: " + path.string());
}

void save_pgm(const ImageGrid& img, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
    std::vector<unsigned char> raster(img.size());
    std::transform(img.data().begin(), img.data().end(), raster.begin(), to_byte);
    out.write(reinterpret_cast<const char*>(raster.data()),
              static_cast<std::streamsize>(raster.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

void save_png(const ImageGrid& img, const std::filesystem::path& path) {
    FILE* fp = std::fopen(path.string().c_str(), "wb");
    if (!fp) throw IoError("cannot write " + path.string());
    std::string error;
    png_structp png =
        png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, png_error_fn, png_warning_fn);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, nullptr);
        std::fclose(fp);
        throw IoError("libpng initialisation failed");
    }
    std::vector<unsigned char> raster(img.size());
    std::transform(img.data().begin(), img.data().end(), raster.begin(), to_byte);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw IoError("PNG encode failed: " + error);
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()),
                 static_cast<png_uint_32>(img.height()), 8, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t y = 0; y < img.height(); ++y)
        png_write_row(png, raster.data() + y * img.width());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    if (std::fclose(fp) != 0) throw IoError("write failed for " + path.string());
}

void save_image(const ImageGrid& img, const std::filesystem::path& path) {
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png")
        save_png(img, path);
    else
        save_pgm(img, path);
}

}  // namespace meshreg
