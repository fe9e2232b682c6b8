#include "fusion/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace fusion {

namespace {

// skips whitespace and '#' comments in netpbm headers
int next_header_int(std::istream& in, const std::string& path) {
    while (true) {
        int c = in.peek();
        if (c == EOF) throw IoError(path + ": truncated header");
        if (std::isspace(c)) {
            in.get();
        } else if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else {
            break;
        }
    }
    int v;
    if (!(in >> v)) throw IoError(path + ": malformed header");
    return v;
}

}  // namespace

Tensor read_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open image file: " + path);
    char p, kind;
    in.get(p);
    in.get(kind);
    if (p != 'P' || (kind != '2' && kind != '3' && kind != '5' && kind != '6'))
        throw IoError(path + ": not a supported PGM/PPM file (P2/P3/P5/P6)");
    int channels = (kind == '3' || kind == '6') ? 3 : 1;
    bool binary = kind == '5' || kind == '6';
    int w = next_header_int(in, path);
    int h = next_header_int(in, path);
    int maxval = next_header_int(in, path);
    if (w < 1 || h < 1) throw IoError(path + ": bad dimensions");
    if (maxval < 1 || maxval > 255)
        throw IoError(path + ": only 8-bit maxval (<=255) is supported, got " +
                      std::to_string(maxval));

    size_t count = static_cast<size_t>(w) * h * channels;
    std::vector<double> interleaved(count);
    if (binary) {
        in.get();  // single whitespace after maxval
        std::vector<unsigned char> buf(count);
        in.read(reinterpret_cast<char*>(buf.data()), count);
        if (static_cast<size_t>(in.gcount()) != count)
            throw IoError(path + ": truncated pixel data");
        for (size_t i = 0; i < count; ++i)
            interleaved[i] = buf[i] / static_cast<double>(maxval);
    } else {
        for (size_t i = 0; i < count; ++i) {
            int v;
            if (!(in >> v)) throw IoError(path + ": truncated pixel data");
            interleaved[i] = v / static_cast<double>(maxval);
        }
    }
    // interleaved rows -> planar [C,H,W]
    std::vector<double> planar(count);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
            for (int c = 0; c < channels; ++c)
                planar[(static_cast<size_t>(c) * h + i) * w + j] =
                    interleaved[(static_cast<size_t>(i) * w + j) * channels + c];
    return Tensor::from({channels, h, w}, std::move(planar));
}

namespace {
void write_netpbm(const std::string& path, const Tensor& img, int channels,
                  bool binary) {
    if (img.rank() != 3 || img.shape()[0] != channels)
        throw ShapeError("image writer expects [" + std::to_string(channels) +
                         ",H,W], got " + shape_str(img.shape()));
    int h = img.shape()[1], w = img.shape()[2];
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write image file: " + path);
    const char* magic = channels == 3 ? (binary ? "P6" : "P3")
                                      : (binary ? "P5" : "P2");
    out << magic << "\n" << w << " " << h << "\n255\n";
    auto quant = [](double v) {
        int q = static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
        return std::clamp(q, 0, 255);
    };
    const auto& d = img.data();
    size_t hw = static_cast<size_t>(h) * w;
    if (binary) {
        std::vector<unsigned char> buf(hw * channels);
        for (size_t p = 0; p < hw; ++p)
            for (int c = 0; c < channels; ++c)
                buf[p * channels + c] =
                    static_cast<unsigned char>(quant(d[c * hw + p]));
        out.write(reinterpret_cast<const char*>(buf.data()), buf.size());
    } else {
        for (size_t p = 0; p < hw; ++p)
            for (int c = 0; c < channels; ++c) {
                out << quant(d[c * hw + p]);
                out << (((p * channels + c + 1) % 12 == 0) ? '\n' : ' ');
            }
        out << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
}
}  // namespace

void write_pgm(const std::string& path, const Tensor& img, bool binary) {
    write_netpbm(path, img, 1, binary);
}

void write_ppm(const std::string& path, const Tensor& img, bool binary) {
    write_netpbm(path, img, 3, binary);
}

void write_image(const std::string& path, const Tensor& img) {
    if (img.rank() != 3)
        throw ShapeError("write_image expects [C,H,W]");
    if (img.shape()[0] == 1)
        write_pgm(path, img);
    else if (img.shape()[0] == 3)
        write_ppm(path, img);
    else
        throw ShapeError("write_image supports 1 or 3 channels, got " +
                         std::to_string(img.shape()[0]));
}

Tensor to_luminance(const Tensor& img) {
    if (img.rank() != 3)
        throw ShapeError("to_luminance expects [C,H,W]");
    if (img.shape()[0] == 1) return img;
    if (img.shape()[0] != 3)
        throw ShapeError("to_luminance supports 1 or 3 channels");
    int h = img.shape()[1], w = img.shape()[2];
    size_t hw = static_cast<size_t>(h) * w;
    std::vector<double> y(hw);
    const auto& d = img.data();
    for (size_t p = 0; p < hw; ++p)
        y[p] = 0.299 * d[p] + 0.587 * d[hw + p] + 0.114 * d[2 * hw + p];
    return Tensor::from({1, h, w}, std::move(y));
}

Tensor recolor(const Tensor& fused_luma, const Tensor& reference_rgb) {
    if (fused_luma.rank() != 3 || fused_luma.shape()[0] != 1)
        throw ShapeError("recolor expects fused [1,H,W]");
    if (reference_rgb.shape()[0] != 3 ||
        reference_rgb.shape()[1] != fused_luma.shape()[1] ||
        reference_rgb.shape()[2] != fused_luma.shape()[2])
        throw ShapeError("recolor: reference must be [3,H,W] of equal size");
    int h = fused_luma.shape()[1], w = fused_luma.shape()[2];
    size_t hw = static_cast<size_t>(h) * w;
    const auto& yv = fused_luma.data();
    const auto& rv = reference_rgb.data();
    std::vector<double> out(3 * hw);
    for (size_t p = 0; p < hw; ++p) {
        double r = rv[p], g = rv[hw + p], b = rv[2 * hw + p];
        double cb = -0.168736 * r - 0.331264 * g + 0.5 * b;
        double cr = 0.5 * r - 0.418688 * g - 0.081312 * b;
        double y = yv[p];
        out[p] = std::clamp(y + 1.402 * cr, 0.0, 1.0);
        out[hw + p] = std::clamp(y - 0.344136 * cb - 0.714136 * cr, 0.0, 1.0);
        out[2 * hw + p] = std::clamp(y + 1.772 * cb, 0.0, 1.0);
    }
    return Tensor::from({3, h, w}, std::move(out));
}

}  // namespace fusion
