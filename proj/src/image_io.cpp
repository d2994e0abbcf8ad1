#include "qmap/image.hpp"
#include "qmap/errors.hpp"

#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

namespace qmap::img {

namespace {

std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DecodeError("cannot open " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                     std::istreambuf_iterator<char>());
    return bytes;
}

struct PngRead {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngRead() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    }
};

struct PngWrite {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngWrite() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    }
};

struct MemReader {
    const unsigned char* data;
    size_t size;
    size_t pos;
};

void mem_read_cb(png_structp png, png_bytep out, png_size_t n) {
    auto* r = static_cast<MemReader*>(png_get_io_ptr(png));
    if (r->pos + n > r->size) png_error(png, "unexpected end of stream");
    std::memcpy(out, r->data + r->pos, n);
    r->pos += n;
}

Image decode_png(const std::vector<unsigned char>& bytes, const std::string& path) {
    PngRead g;
    g.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!g.png) throw DecodeError("png_create_read_struct failed");
    g.info = png_create_info_struct(g.png);
    if (!g.info) throw DecodeError("png_create_info_struct failed");

    MemReader reader{bytes.data(), bytes.size(), 0};
    std::vector<unsigned char> raster;
    std::vector<png_bytep> rows;

    if (setjmp(png_jmpbuf(g.png)))
        throw DecodeError("corrupt PNG: " + path);

    png_set_read_fn(g.png, &reader, mem_read_cb);
    png_read_info(g.png, g.info);

    png_uint_32 w = 0, h = 0;
    int bit_depth = 0, color_type = 0;
    png_get_IHDR(g.png, g.info, &w, &h, &bit_depth, &color_type, nullptr, nullptr, nullptr);

    if (color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
        throw FormatError("2-channel (gray+alpha) PNG not supported: " + path);

    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(g.png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8)
        png_set_expand_gray_1_2_4_to_8(g.png);
    if (png_get_valid(g.png, g.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(g.png);
    if (color_type & PNG_COLOR_MASK_ALPHA || png_get_valid(g.png, g.info, PNG_INFO_tRNS))
        png_set_strip_alpha(g.png);
    png_set_interlace_handling(g.png);
    png_read_update_info(g.png, g.info);

    int channels = png_get_channels(g.png, g.info);
    bit_depth = png_get_bit_depth(g.png, g.info);
    if (channels != 1 && channels != 3)
        throw FormatError(std::to_string(channels) + "-channel PNG not supported: " + path);

    size_t rowbytes = png_get_rowbytes(g.png, g.info);
    raster.resize(rowbytes * h);
    rows.resize(h);
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = raster.data() + y * rowbytes;
    png_read_image(g.png, rows.data());
    png_read_end(g.png, nullptr);

    Image im(static_cast<int>(h), static_cast<int>(w), channels);
    if (bit_depth == 8) {
        for (png_uint_32 y = 0; y < h; ++y) {
            const unsigned char* row = rows[y];
            for (size_t i = 0; i < static_cast<size_t>(w) * channels; ++i)
                im.data[static_cast<size_t>(y) * w * channels + i] = row[i] / 255.0;
        }
    } else if (bit_depth == 16) {
        for (png_uint_32 y = 0; y < h; ++y) {
            const unsigned char* row = rows[y];
            for (size_t i = 0; i < static_cast<size_t>(w) * channels; ++i) {
                unsigned v = (static_cast<unsigned>(row[2 * i]) << 8) | row[2 * i + 1];
                im.data[static_cast<size_t>(y) * w * channels + i] = v / 65535.0;
            }
        }
    } else {
        throw FormatError("unsupported PNG bit depth " + std::to_string(bit_depth));
    }
    return im;
}

uint32_t le32(const unsigned char* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

uint16_t le16(const unsigned char* p) {
    return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

Image decode_bmp(const std::vector<unsigned char>& b, const std::string& path) {
    if (b.size() < 54) throw DecodeError("truncated BMP: " + path);
    uint32_t data_offset = le32(&b[10]);
    uint32_t header_size = le32(&b[14]);
    if (header_size < 40) throw DecodeError("unsupported BMP header: " + path);
    int32_t width = static_cast<int32_t>(le32(&b[18]));
    int32_t height_raw = static_cast<int32_t>(le32(&b[22]));
    uint16_t bpp = le16(&b[28]);
    uint32_t compression = le32(&b[30]);
    if (compression != 0) throw FormatError("compressed BMP not supported: " + path);
    bool bottom_up = height_raw > 0;
    int height = bottom_up ? height_raw : -height_raw;
    if (width <= 0 || height <= 0) throw DecodeError("bad BMP dimensions: " + path);

    size_t row_size = ((static_cast<size_t>(bpp) * width + 31) / 32) * 4;
    if (b.size() < data_offset + row_size * height)
        throw DecodeError("truncated BMP pixel data: " + path);

    if (bpp == 24 || bpp == 32) {
        Image im(height, width, 3);
        int step = bpp / 8;
        for (int y = 0; y < height; ++y) {
            int src_y = bottom_up ? height - 1 - y : y;
            const unsigned char* row = &b[data_offset + row_size * src_y];
            for (int x = 0; x < width; ++x) {
                im.at(y, x, 0) = row[x * step + 2] / 255.0;
                im.at(y, x, 1) = row[x * step + 1] / 255.0;
                im.at(y, x, 2) = row[x * step + 0] / 255.0;
            }
        }
        return im;
    }
    if (bpp == 8) {
        uint32_t ncolors = le32(&b[46]);
        if (ncolors == 0) ncolors = 256;
        size_t palette_off = 14 + header_size;
        if (b.size() < palette_off + 4 * ncolors) throw DecodeError("truncated BMP palette: " + path);
        bool gray = true;
        for (uint32_t i = 0; i < ncolors && gray; ++i) {
            const unsigned char* e = &b[palette_off + 4 * i];
            gray = (e[0] == e[1] && e[1] == e[2]);
        }
        Image im(height, width, gray ? 1 : 3);
        for (int y = 0; y < height; ++y) {
            int src_y = bottom_up ? height - 1 - y : y;
            const unsigned char* row = &b[data_offset + row_size * src_y];
            for (int x = 0; x < width; ++x) {
                unsigned idx = row[x];
                if (idx >= ncolors) throw DecodeError("BMP palette index out of range: " + path);
                const unsigned char* e = &b[palette_off + 4 * idx];
                if (gray) {
                    im.at(y, x, 0) = e[0] / 255.0;
                } else {
                    im.at(y, x, 0) = e[2] / 255.0;
                    im.at(y, x, 1) = e[1] / 255.0;
                    im.at(y, x, 2) = e[0] / 255.0;
                }
            }
        }
        return im;
    }
    throw FormatError(std::to_string(bpp) + " bpp BMP not supported: " + path);
}

} // namespace

Image load_image(const std::string& path) {
    std::vector<unsigned char> bytes = read_file(path);
    if (bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0)
        return decode_png(bytes, path);
    if (bytes.size() >= 2 && bytes[0] == 'B' && bytes[1] == 'M')
        return decode_bmp(bytes, path);
    throw FormatError("not a PNG or BMP file: " + path);
}

void save_image(const Image& im, const std::string& path) {
    if (im.channels != 1 && im.channels != 3)
        throw FormatError("save_image expects 1 or 3 channels");
    FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw IoError("cannot write " + path);

    PngWrite g;
    g.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!g.png) { std::fclose(fp); throw IoError("png_create_write_struct failed"); }
    g.info = png_create_info_struct(g.png);
    if (!g.info) { std::fclose(fp); throw IoError("png_create_info_struct failed"); }

    std::vector<unsigned char> raster(static_cast<size_t>(im.height) * im.width * im.channels);
    for (size_t i = 0; i < im.data.size(); ++i) {
        double v = std::min(1.0, std::max(0.0, im.data[i]));
        raster[i] = static_cast<unsigned char>(std::lround(255.0 * v));
    }
    std::vector<png_bytep> rows(im.height);
    for (int y = 0; y < im.height; ++y)
        rows[y] = raster.data() + static_cast<size_t>(y) * im.width * im.channels;

    if (setjmp(png_jmpbuf(g.png))) {
        std::fclose(fp);
        throw IoError("png encode failed: " + path);
    }
    png_init_io(g.png, fp);
    png_set_compression_level(g.png, 6); // fixed level so output bytes are reproducible
    png_set_IHDR(g.png, g.info, im.width, im.height, 8,
                 im.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(g.png, g.info);
    png_write_image(g.png, rows.data());
    png_write_end(g.png, nullptr);
    std::fclose(fp);
}

} // namespace qmap::img
