#pragma once

// PNG and JPEG codecs for Frame, backed by libpng and libjpeg.

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "reid/error.hpp"
#include "reid/image.hpp"

namespace reid {

namespace detail {

inline std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFound("cannot open " + path.string());
    return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

inline Frame decode_png(const std::vector<unsigned char>& bytes, const std::string& name) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
        throw DecodeError(name + ": " + image.message);
    }
    image.format = PNG_FORMAT_RGB;
    if (image.width < 1 || image.height < 1) {
        png_image_free(&image);
        throw DecodeError(name + ": empty image");
    }
    std::vector<std::uint8_t> px(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, px.data(), 0, nullptr)) {
        const std::string msg = image.message;
        png_image_free(&image);
        throw DecodeError(name + ": " + msg);
    }
    return Frame(static_cast<int>(image.width), static_cast<int>(image.height), std::move(px));
}

struct JpegErrorManager {
    jpeg_error_mgr base;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

extern "C" inline void reid_jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->jump, 1);
}

inline Frame decode_jpeg(const std::vector<unsigned char>& bytes, const std::string& name) {
    jpeg_decompress_struct cinfo;
    JpegErrorManager jerr;
    std::vector<std::uint8_t> px;
    int width = 0;
    int height = 0;

    cinfo.err = jpeg_std_error(&jerr.base);
    jerr.base.error_exit = reid_jpeg_error_exit;
    jerr.message[0] = '\0';
    if (setjmp(jerr.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw DecodeError(name + ": " + jerr.message);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    width = static_cast<int>(cinfo.output_width);
    height = static_cast<int>(cinfo.output_height);
    px.resize(static_cast<std::size_t>(width) * height * 3);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = px.data() + static_cast<std::size_t>(cinfo.output_scanline) * width * 3;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return Frame(width, height, std::move(px));
}

}  // namespace detail

/// Decodes a PNG or JPEG file (detected by signature) to 8-bit RGB.
inline Frame read_image(const std::filesystem::path& path) {
    const auto bytes = detail::read_file_bytes(path);
    const std::string name = path.string();
    static constexpr unsigned char kPngSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSig, 8) == 0) {
        return detail::decode_png(bytes, name);
    }
    if (bytes.size() >= 3 && bytes[0] == 0xff && bytes[1] == 0xd8 && bytes[2] == 0xff) {
        return detail::decode_jpeg(bytes, name);
    }
    throw DecodeError(name + ": unrecognized image format");
}

/// Writes an 8-bit RGB PNG.
inline void write_png(const std::filesystem::path& path, const Frame& frame) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(frame.width());
    image.height = static_cast<png_uint_32>(frame.height());
    image.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&image, path.string().c_str(), 0, frame.pixels().data(), 0, nullptr)) {
        const std::string msg = image.message;
        png_image_free(&image);
        throw Error("IoError", "cannot write " + path.string() + ": " + msg);
    }
}

}  // namespace reid
