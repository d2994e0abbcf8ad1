#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "qmap/errors.hpp"
#include "qmap/image.hpp"
#include "support/testutil.hpp"

#include <png.h>

#include <cmath>
#include <cstring>
#include <fstream>

using namespace qmap;
using testutil::TempDir;

TEST_CASE("png round trip is bit-exact for 8-bit data") {
    TempDir tmp("img");
    Rng rng(11);

    img::Image im(3, 3, 3);
    // deliberate gradient of distinct byte values
    for (size_t i = 0; i < im.data.size(); ++i) im.data[i] = static_cast<double>(i * 9 % 256) / 255.0;

    std::string path = (tmp / "grad.png").string();
    img::save_image(im, path);
    img::Image back = img::load_image(path);

    REQUIRE(back.height == 3);
    REQUIRE(back.width == 3);
    REQUIRE(back.channels == 3);
    for (size_t i = 0; i < im.data.size(); ++i)
        CHECK(back.data[i] == im.data[i]);
}

TEST_CASE("all-black png decodes to zeros; full-scale byte decodes to 1.0") {
    TempDir tmp("img");
    img::Image black(2, 2, 1);
    img::save_image(black, (tmp / "black.png").string());
    img::Image loaded = img::load_image((tmp / "black.png").string());
    for (double v : loaded.data) CHECK(v == 0.0);

    img::Image white(1, 1, 1);
    white.data[0] = 1.0;
    img::save_image(white, (tmp / "white.png").string());
    CHECK(img::load_image((tmp / "white.png").string()).data[0] == 1.0);
}

TEST_CASE("load_image rejects garbage and missing files") {
    TempDir tmp("img");
    CHECK_THROWS_AS(img::load_image((tmp / "nope.png").string()), DecodeError);
    std::ofstream((tmp / "junk.png").string()) << "this is not an image";
    CHECK_THROWS_AS(img::load_image((tmp / "junk.png").string()), FormatError);
}

TEST_CASE("bmp 24-bit decoding") {
    TempDir tmp("img");
    // 2x2 bottom-up 24bpp BMP, rows padded to 4 bytes (6 -> 8).
    // bottom row: red, green; top row: blue, white
    unsigned char px[] = {
        0, 0, 255, 0, 255, 0, 0, 0,   // file row 0 = image bottom: red, green (BGR)
        255, 0, 0, 255, 255, 255, 0, 0 // file row 1 = image top: blue, white
    };
    unsigned char header[54] = {0};
    header[0] = 'B'; header[1] = 'M';
    uint32_t filesize = 54 + sizeof(px);
    std::memcpy(header + 2, &filesize, 4);
    uint32_t offset = 54; std::memcpy(header + 10, &offset, 4);
    uint32_t hsize = 40; std::memcpy(header + 14, &hsize, 4);
    int32_t w = 2, h = 2; std::memcpy(header + 18, &w, 4); std::memcpy(header + 22, &h, 4);
    uint16_t planes = 1, bpp = 24; std::memcpy(header + 26, &planes, 2); std::memcpy(header + 28, &bpp, 2);

    std::ofstream f((tmp / "t.bmp").string(), std::ios::binary);
    f.write(reinterpret_cast<char*>(header), 54);
    f.write(reinterpret_cast<char*>(px), sizeof(px));
    f.close();

    img::Image im = img::load_image((tmp / "t.bmp").string());
    REQUIRE(im.channels == 3);
    CHECK(im.at(0, 0, 2) == 1.0); // top-left blue
    CHECK(im.at(0, 1, 0) == 1.0); // top-right white
    CHECK(im.at(1, 0, 0) == 1.0); // bottom-left red
    CHECK(im.at(1, 1, 1) == 1.0); // bottom-right green
}

TEST_CASE("to_luminance basics and per-pixel oracle") {
    img::Image white(1, 1, 3);
    white.data = {1.0, 1.0, 1.0};
    CHECK(img::to_luminance(white).at(0, 0) == doctest::Approx(1.0).epsilon(1e-15));

    img::Image red(1, 1, 3);
    red.data = {1.0, 0.0, 0.0};
    CHECK(img::to_luminance(red).at(0, 0) == doctest::Approx(0.299).epsilon(1e-15));

    Rng rng(3);
    img::Image rnd = testutil::random_image(8, 8, 3, rng);
    img::Plane lum = img::to_luminance(rnd);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
            double expect = 0.299 * rnd.at(y, x, 0) + 0.587 * rnd.at(y, x, 1) + 0.114 * rnd.at(y, x, 2);
            CHECK(lum.at(y, x) == doctest::Approx(expect).epsilon(1e-15));
            CHECK(lum.at(y, x) >= 0.0);
            CHECK(lum.at(y, x) <= 1.0);
        }
}

TEST_CASE("patch origins: exact tile, clamped tail, single tile") {
    CHECK(img::patch_origins(144, 144, 120) == std::vector<int>{0});
    CHECK(img::patch_origins(264, 144, 120) == std::vector<int>{0, 120});
    CHECK(img::patch_origins(300, 144, 120) == std::vector<int>{0, 120, 156});
}

TEST_CASE("extract_patches covers the image and reassembles it exactly") {
    Rng rng(5);
    img::Image im = testutil::random_image(300, 300, 3, rng);
    img::PatchGrid grid = img::extract_patches(im);
    CHECK(grid.patches.size() == 9);

    img::Image rebuilt(im.height, im.width, im.channels);
    for (size_t i = 0; i < grid.patches.size(); ++i) {
        auto [r, c] = grid.origins[i];
        for (int y = 0; y < grid.patch_size; ++y)
            for (int x = 0; x < grid.patch_size; ++x)
                for (int ch = 0; ch < 3; ++ch)
                    rebuilt.at(r + y, c + x, ch) = grid.patches[i].at(y, x, ch);
    }
    CHECK(rebuilt.data == im.data);

    // interior neighbors overlap by patch - stride
    img::PatchGrid g264 = img::extract_patches(testutil::random_image(264, 264, 1, rng));
    CHECK(g264.patches.size() == 4);
    CHECK(g264.origins[1].second - g264.origins[0].second == 120);

    CHECK_THROWS_AS(img::extract_patches(testutil::random_image(100, 100, 1, rng)), SizeError);
}

TEST_CASE("crop_border arithmetic, identity and composition") {
    Rng rng(7);
    img::Image im = testutil::random_image(12, 12, 1, rng);
    img::Image inner = img::crop_border(im, 5);
    CHECK(inner.height == 2);
    CHECK(inner.width == 2);

    img::Image same = img::crop_border(im, 0);
    CHECK(same.data == im.data);

    img::Image big = testutil::random_image(20, 20, 3, rng);
    img::Image once = img::crop_border(big, 3);
    for (int y = 0; y < once.height; ++y)
        for (int x = 0; x < once.width; ++x)
            for (int c = 0; c < 3; ++c)
                CHECK(once.at(y, x, c) == big.at(y + 3, x + 3, c));

    img::Image ab = img::crop_border(img::crop_border(big, 2), 4);
    img::Image sum = img::crop_border(big, 6);
    CHECK(ab.data == sum.data);

    CHECK_THROWS_AS(img::crop_border(im, 6), SizeError);
}

TEST_CASE("hflip: fixed point, involution, explicit reversal") {
    Rng rng(9);
    img::Image thin = testutil::random_image(4, 1, 3, rng);
    CHECK(img::hflip(thin).data == thin.data);

    img::Image im = testutil::random_image(6, 7, 3, rng);
    CHECK(img::hflip(img::hflip(im)).data == im.data);

    img::Image small(2, 3, 1);
    small.data = {1, 2, 3, 4, 5, 6};
    img::Image flipped = img::hflip(small);
    CHECK(flipped.data == std::vector<double>{3, 2, 1, 6, 5, 4});
}

TEST_CASE("16-bit png scales by 65535") {
    TempDir tmp("img16");
    std::string path = (tmp / "g16.png").string();
    {
        FILE* fp = std::fopen(path.c_str(), "wb");
        REQUIRE(fp != nullptr);
        png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
        png_infop info = png_create_info_struct(png);
        REQUIRE(setjmp(png_jmpbuf(png)) == 0);
        png_init_io(png, fp);
        png_set_IHDR(png, info, 2, 1, 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                     PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        unsigned char row[4] = {0xFF, 0xFF, 0x12, 0x34}; // 65535, 0x1234 big-endian
        png_bytep rows[1] = {row};
        png_write_image(png, rows);
        png_write_end(png, nullptr);
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
    }
    img::Image im = img::load_image(path);
    REQUIRE(im.channels == 1);
    CHECK(im.data[0] == 1.0);
    CHECK(im.data[1] == double(0x1234) / 65535.0);
}
