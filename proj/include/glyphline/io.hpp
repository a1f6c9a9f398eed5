#pragma once

#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "glyphline/image.hpp"
#include "glyphline/neuralnet.hpp"  // write_file_atomic / read_file

namespace glyphline {

// ---------------------------------------------------------------------------
// PNG
// ---------------------------------------------------------------------------

/// Decodes a PNG byte stream to 8-bit grayscale or RGB (alpha is composited
/// away, palette and 16-bit inputs are converted).
inline RasterImage decode_png(const std::string& bytes) {
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
        throw std::runtime_error(std::string("png decode: ") + image.message);
    const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
    image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    RasterImage img(static_cast<int>(image.width), static_cast<int>(image.height), color ? 3 : 1);
    if (!png_image_finish_read(&image, nullptr, img.data.data(), 0, nullptr)) {
        png_image_free(&image);
        throw std::runtime_error(std::string("png decode: ") + image.message);
    }
    return img;
}

/// Encodes to an in-memory PNG (grayscale or RGB).
inline std::string encode_png(const RasterImage& img) {
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width);
    image.height = static_cast<png_uint_32>(img.height);
    image.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;

    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&image, nullptr, &size, 0, img.data.data(), 0, nullptr))
        throw std::runtime_error(std::string("png encode: ") + image.message);
    std::string out(size, '\0');
    if (!png_image_write_to_memory(&image, out.data(), &size, 0, img.data.data(), 0, nullptr))
        throw std::runtime_error(std::string("png encode: ") + image.message);
    out.resize(size);
    return out;
}

// ---------------------------------------------------------------------------
// JPEG
// ---------------------------------------------------------------------------

namespace detail {

struct JpegErrorJump {
    jpeg_error_mgr pub;
    std::jmp_buf jump;
};

inline void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorJump*>(cinfo->err);
    std::longjmp(err->jump, 1);
}

}  // namespace detail

/// Decodes a JPEG byte stream to 8-bit grayscale or RGB.
inline RasterImage decode_jpeg(const std::string& bytes) {
    jpeg_decompress_struct cinfo;
    detail::JpegErrorJump jerr;
    cinfo.err = jpeg_std_error(&jerr.pub);
    jerr.pub.error_exit = detail::jpeg_error_exit;

    unsigned char* volatile buf = nullptr;
    if (setjmp(jerr.jump)) {
        jpeg_destroy_decompress(&cinfo);
        std::free(buf);
        throw std::runtime_error("jpeg decode failed");
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, reinterpret_cast<const unsigned char*>(bytes.data()),
                 static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = cinfo.jpeg_color_space == JCS_GRAYSCALE ? JCS_GRAYSCALE : JCS_RGB;
    jpeg_start_decompress(&cinfo);

    const int w = static_cast<int>(cinfo.output_width);
    const int h = static_cast<int>(cinfo.output_height);
    const int ch = cinfo.output_components;
    const std::size_t stride = static_cast<std::size_t>(w) * ch;
    buf = static_cast<unsigned char*>(std::malloc(stride * h));
    if (buf == nullptr) {
        jpeg_destroy_decompress(&cinfo);
        throw std::bad_alloc();
    }
    while (cinfo.output_scanline < cinfo.output_height) {
        unsigned char* row = buf + stride * cinfo.output_scanline;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);

    RasterImage img(w, h, ch);
    std::memcpy(img.data.data(), buf, stride * h);
    std::free(buf);
    return img;
}

// ---------------------------------------------------------------------------
// Format sniffing and file convenience wrappers
// ---------------------------------------------------------------------------

inline bool looks_like_png(const std::string& bytes) {
    static const unsigned char sig[4] = {0x89, 'P', 'N', 'G'};
    return bytes.size() >= 4 && std::memcmp(bytes.data(), sig, 4) == 0;
}

inline bool looks_like_jpeg(const std::string& bytes) {
    return bytes.size() >= 3 && static_cast<unsigned char>(bytes[0]) == 0xff &&
           static_cast<unsigned char>(bytes[1]) == 0xd8 &&
           static_cast<unsigned char>(bytes[2]) == 0xff;
}

/// Decodes PNG or JPEG bytes, dispatching on the magic number.
inline RasterImage decode_image(const std::string& bytes) {
    if (looks_like_png(bytes)) return decode_png(bytes);
    if (looks_like_jpeg(bytes)) return decode_jpeg(bytes);
    throw std::runtime_error("unrecognized image format (expected PNG or JPEG)");
}

inline RasterImage load_image(const std::string& path) { return decode_image(read_file(path)); }

inline void save_png(const std::string& path, const RasterImage& img) {
    write_file_atomic(path, encode_png(img));
}

// ---------------------------------------------------------------------------
// Base64 (RFC 4648, with padding)
// ---------------------------------------------------------------------------

inline std::string base64_encode(const std::string& bytes) {
    static const char* alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 3 <= bytes.size(); i += 3) {
        const std::uint32_t v = (static_cast<unsigned char>(bytes[i]) << 16) |
                                (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                                static_cast<unsigned char>(bytes[i + 2]);
        out.push_back(alphabet[(v >> 18) & 63]);
        out.push_back(alphabet[(v >> 12) & 63]);
        out.push_back(alphabet[(v >> 6) & 63]);
        out.push_back(alphabet[v & 63]);
    }
    const std::size_t rem = bytes.size() - i;
    if (rem == 1) {
        const std::uint32_t v = static_cast<unsigned char>(bytes[i]) << 16;
        out.push_back(alphabet[(v >> 18) & 63]);
        out.push_back(alphabet[(v >> 12) & 63]);
        out.push_back('=');
        out.push_back('=');
    } else if (rem == 2) {
        const std::uint32_t v = (static_cast<unsigned char>(bytes[i]) << 16) |
                                (static_cast<unsigned char>(bytes[i + 1]) << 8);
        out.push_back(alphabet[(v >> 18) & 63]);
        out.push_back(alphabet[(v >> 12) & 63]);
        out.push_back(alphabet[(v >> 6) & 63]);
        out.push_back('=');
    }
    return out;
}

inline std::string base64_decode(const std::string& text) {
    auto value_of = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        return -1;
    };
    std::string out;
    out.reserve(text.size() / 4 * 3);
    std::uint32_t acc = 0;
    int bits = 0;
    for (char c : text) {
        if (c == '=' || c == '\n' || c == '\r') continue;
        const int v = value_of(c);
        if (v < 0) throw std::runtime_error("base64: invalid character");
        acc = (acc << 6) | static_cast<std::uint32_t>(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<char>((acc >> bits) & 0xff));
        }
    }
    return out;
}

}  // namespace glyphline
