#include "deflare/image_io.hpp"

#include <png.h>

#include <cstring>
#include <memory>

namespace deflare {

Tensor read_png(const std::string& path) {
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.c_str()))
        throw std::runtime_error("read_png: cannot open " + path + ": " +
                                 image.message);
    image.format = PNG_FORMAT_RGB;
    std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
        png_image_free(&image);
        throw std::runtime_error("read_png: failed to decode " + path + ": " +
                                 image.message);
    }
    const int h = static_cast<int>(image.height), w = static_cast<int>(image.width);
    Tensor img(3, h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(c, y, x) =
                    buffer[(static_cast<size_t>(y) * w + x) * 3 + c] / 255.0;
    return img;
}

void write_png(const std::string& path, const Tensor& img) {
    if (img.c != 3 && img.c != 1)
        throw std::invalid_argument("write_png: expected 1 or 3 channels, got " +
                                    std::to_string(img.c));
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.w);
    image.height = static_cast<png_uint_32>(img.h);
    image.format = img.c == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;

    std::vector<png_byte> buffer(static_cast<size_t>(img.h) * img.w * img.c);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            for (int c = 0; c < img.c; ++c) {
                double v = std::clamp(img.at(c, y, x), 0.0, 1.0);
                buffer[(static_cast<size_t>(y) * img.w + x) * img.c + c] =
                    static_cast<png_byte>(std::lround(v * 255.0));
            }
    if (!png_image_write_to_file(&image, path.c_str(), 0, buffer.data(), 0, nullptr))
        throw std::runtime_error("write_png: failed to write " + path + ": " +
                                 image.message);
}

}  // namespace deflare
