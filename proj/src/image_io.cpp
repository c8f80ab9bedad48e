#include "mhm/image_io.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace mhm {

Tensor to_tensor(const GrayImage& image) {
    const std::size_t hw = image.width * image.height;
    Tensor t({3, image.height, image.width});
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < hw; ++i) t[c * hw + i] = image.pixels[i] / 255.0;
    return t;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
    if (image.pixels.size() != image.width * image.height || image.width == 0 || image.height == 0) {
        throw FormatError("write_pgm: image buffer does not match its extents");
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open " + path.string() + " for writing");
    os << "P5\n" << image.width << ' ' << image.height << "\n255\n";
    os.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
    if (!os) throw FormatError("write failed for " + path.string());
}

namespace {

// Reads the next header integer, skipping whitespace and '#' comments.
std::size_t header_int(std::istream& is, const std::string& where) {
    int ch = is.peek();
    while (ch != EOF) {
        if (ch == '#') {
            std::string discard;
            std::getline(is, discard);
        } else if (std::isspace(ch)) {
            is.get();
        } else {
            break;
        }
        ch = is.peek();
    }
    std::size_t v = 0;
    if (!(is >> v)) throw FormatError(where + ": malformed PGM header");
    return v;
}

}  // namespace

GrayImage read_pgm(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open " + path.string());
    char magic[2] = {0, 0};
    is.read(magic, 2);
    if (!is || magic[0] != 'P' || magic[1] != '5') throw FormatError(path.string() + ": bad magic (expected P5)");
    GrayImage img;
    img.width = header_int(is, path.string());
    img.height = header_int(is, path.string());
    const auto maxval = header_int(is, path.string());
    if (maxval != 255) throw FormatError(path.string() + ": unsupported maxval " + std::to_string(maxval));
    if (img.width == 0 || img.height == 0) throw FormatError(path.string() + ": zero image extent");
    if (!std::isspace(is.get())) throw FormatError(path.string() + ": missing whitespace after header");
    img.pixels.resize(img.width * img.height);
    is.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    if (is.gcount() != static_cast<std::streamsize>(img.pixels.size())) {
        throw FormatError(path.string() + ": truncated pixel data");
    }
    return img;
}

void write_pts(const std::filesystem::path& path, const LandmarkSet& landmarks) {
    std::ofstream os(path);
    if (!os) throw FormatError("cannot open " + path.string() + " for writing");
    os << "version: 1\n" << "n_points: " << landmarks.size() << "\n{\n";
    char buf[96];
    for (const auto& p : landmarks.coords) {
        std::snprintf(buf, sizeof(buf), "%.6f %.6f\n", p.x, p.y);
        os << buf;
    }
    os << "}\n";
}

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

[[noreturn]] void fail(std::size_t line, const std::string& msg) {
    throw FormatError("pts line " + std::to_string(line) + ": " + msg);
}

}  // namespace

LandmarkSet parse_pts(const std::string& text) {
    std::istringstream is(text);
    std::string raw;
    std::size_t line = 0;
    auto next = [&]() -> std::string {
        if (!std::getline(is, raw)) fail(line + 1, "unexpected end of file");
        ++line;
        return trim(raw);
    };

    if (next() != "version: 1") fail(line, "expected 'version: 1'");
    const std::string count_line = next();
    const std::string key = "n_points:";
    if (count_line.rfind(key, 0) != 0) fail(line, "expected 'n_points: N'");
    std::size_t n = 0;
    {
        std::istringstream cs(count_line.substr(key.size()));
        std::string rest;
        if (!(cs >> n) || (cs >> rest)) fail(line, "bad point count");
    }
    if (next() != "{") fail(line, "expected '{'");
    LandmarkSet out;
    for (;;) {
        const std::string l = next();
        if (l == "}") break;
        std::istringstream ps(l);
        Point p;
        std::string rest;
        if (!(ps >> p.x >> p.y) || (ps >> rest)) fail(line, "expected 'x y'");
        out.coords.push_back(p);
        if (out.size() > n) fail(line, "more points than n_points = " + std::to_string(n));
    }
    if (out.size() != n) {
        fail(line, "found " + std::to_string(out.size()) + " points, n_points says " + std::to_string(n));
    }
    return out;
}

LandmarkSet read_pts(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot open " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return parse_pts(ss.str());
}

}  // namespace mhm
