#include "promptweight/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>

#include "promptweight/errors.hpp"
#include "promptweight/model.hpp"

namespace promptweight {

RgbImage::RgbImage(int width, int height, double fill)
    : width_(width), height_(height),
      pixels_(static_cast<std::size_t>(width) * height * 3, fill) {
    if (width <= 0 || height <= 0) throw InvariantError("image dimensions must be positive");
}

namespace {

RgbImage from_bytes(int w, int h, const std::uint8_t* src, double maxval) {
    RgbImage img(w, h);
    auto px = img.data();
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = src[i] / maxval;
    return img;
}

RgbImage decode_png(std::span<const std::uint8_t> bytes) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
        throw ParseError(std::string("png: ") + image.message);
    image.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
        png_image_free(&image);
        throw ParseError(std::string("png: ") + image.message);
    }
    return from_bytes(static_cast<int>(image.width), static_cast<int>(image.height), buf.data(),
                      255.0);
}

struct PpmReader {
    std::span<const std::uint8_t> bytes;
    std::size_t pos = 0;

    void skip_space_and_comments() {
        while (pos < bytes.size()) {
            if (std::isspace(bytes[pos])) {
                ++pos;
            } else if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else {
                break;
            }
        }
    }

    int number() {
        skip_space_and_comments();
        if (pos >= bytes.size() || !std::isdigit(bytes[pos])) throw ParseError("ppm: bad header");
        long v = 0;
        while (pos < bytes.size() && std::isdigit(bytes[pos])) {
            v = v * 10 + (bytes[pos++] - '0');
            if (v > 1 << 20) throw ParseError("ppm: header value too large");
        }
        return static_cast<int>(v);
    }
};

}  // namespace

RgbImage decode_ppm(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '6' && bytes[1] != '3'))
        throw ParseError("ppm: expected P6 or P3 magic");
    const bool binary = bytes[1] == '6';
    PpmReader r{bytes, 2};
    const int w = r.number();
    const int h = r.number();
    const int maxval = r.number();
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255)
        throw ParseError("ppm: only 8-bit images with positive size are supported");
    const std::size_t n = static_cast<std::size_t>(w) * h * 3;
    std::vector<std::uint8_t> raw(n);
    if (binary) {
        ++r.pos;  // single whitespace after maxval
        if (bytes.size() - std::min(r.pos, bytes.size()) < n) throw ParseError("ppm: truncated data");
        std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(r.pos), n, raw.begin());
    } else {
        for (auto& v : raw) {
            const int x = r.number();
            if (x > maxval) throw ParseError("ppm: sample exceeds maxval");
            v = static_cast<std::uint8_t>(x);
        }
    }
    return from_bytes(w, h, raw.data(), maxval);
}

RgbImage load_image(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    std::span<const std::uint8_t> bytes(reinterpret_cast<const std::uint8_t*>(text.data()),
                                        text.size());
    static constexpr std::uint8_t kPngMagic[] = {0x89, 'P', 'N', 'G'};
    try {
        if (bytes.size() >= 4 && std::equal(std::begin(kPngMagic), std::end(kPngMagic), bytes.begin()))
            return decode_png(bytes);
        return decode_ppm(bytes);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

std::vector<std::uint8_t> encode_png(const RgbImage& img) {
    std::vector<std::uint8_t> raw(img.data().size());
    std::transform(img.data().begin(), img.data().end(), raw.begin(), [](double v) {
        return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    });

    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width());
    image.height = static_cast<png_uint_32>(img.height());
    image.format = PNG_FORMAT_RGB;

    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&image, nullptr, &size, 0, raw.data(), 0, nullptr))
        throw Error(std::string("png encode: ") + image.message);
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&image, out.data(), &size, 0, raw.data(), 0, nullptr))
        throw Error(std::string("png encode: ") + image.message);
    out.resize(size);
    return out;
}

void save_png(const std::filesystem::path& path, const RgbImage& img) {
    const auto bytes = encode_png(img);
    write_file(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

}  // namespace promptweight
