#include "mhm/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace mhm {

namespace {

void check_coord(double c, const HeatmapSpec& spec, const char* what) {
    if (!(c >= 0.0 && c < static_cast<double>(spec.F))) {
        std::ostringstream os;
        os << what << " coordinate " << c << " outside [0, " << spec.F << ")";
        throw std::out_of_range(os.str());
    }
}

void peak_normalize(std::vector<double>& v) {
    const double mx = *std::max_element(v.begin(), v.end());
    if (mx > 0.0) {
        for (auto& x : v) x /= mx;
    }
}

std::vector<double> gaussian_profile(double center, const HeatmapSpec& spec) {
    std::vector<double> g(spec.L);
    const double denom = 2.0 * spec.sigma * spec.sigma;
    for (std::size_t i = 0; i < spec.L; ++i) {
        const double d = static_cast<double>(i) - center;
        g[i] = std::exp(-d * d / denom);
    }
    return g;
}

}  // namespace

char axis_char(Axis a) { return a == Axis::X ? 'x' : 'y'; }

void HeatmapSpec::validate() const {
    if (F < 1) throw std::invalid_argument("heatmap spec: F must be >= 1");
    if (L < 2) throw std::invalid_argument("heatmap spec: L must be >= 2");
    if (!(sigma > 0.0)) throw std::invalid_argument("heatmap spec: sigma must be > 0");
}

Heatmap2D encode2d(Point center, const HeatmapSpec& spec) {
    spec.validate();
    check_coord(center.x, spec, "x");
    check_coord(center.y, spec, "y");
    const double cx = spec.to_grid(center.x), cy = spec.to_grid(center.y);
    const double denom = 2.0 * spec.sigma * spec.sigma;
    Heatmap2D h{spec, std::vector<double>(spec.L * spec.L)};
    for (std::size_t y = 0; y < spec.L; ++y) {
        const double dy = static_cast<double>(y) - cy;
        for (std::size_t x = 0; x < spec.L; ++x) {
            const double dx = static_cast<double>(x) - cx;
            h.values[y * spec.L + x] = std::exp(-(dx * dx + dy * dy) / denom);
        }
    }
    peak_normalize(h.values);
    return h;
}

std::pair<Heatmap1D, Heatmap1D> marginalize(const Heatmap2D& h) {
    const std::size_t L = h.spec.L;
    Heatmap1D hx{h.spec, Axis::X, std::vector<double>(L, 0.0)};
    Heatmap1D hy{h.spec, Axis::Y, std::vector<double>(L, 0.0)};
    for (std::size_t y = 0; y < L; ++y) {
        for (std::size_t x = 0; x < L; ++x) {
            const double v = h.values[y * L + x];
            hx.values[x] += v;
            hy.values[y] += v;
        }
    }
    peak_normalize(hx.values);
    peak_normalize(hy.values);
    return {std::move(hx), std::move(hy)};
}

Heatmap1D encode1d(double coord, const HeatmapSpec& spec, Axis axis) {
    spec.validate();
    check_coord(coord, spec, axis == Axis::X ? "x" : "y");
    Heatmap1D h{spec, axis, gaussian_profile(spec.to_grid(coord), spec)};
    peak_normalize(h.values);
    return h;
}

GridPoint quantize(Point p, const HeatmapSpec& spec) {
    spec.validate();
    check_coord(p.x, spec, "x");
    check_coord(p.y, spec, "y");
    return {static_cast<std::int64_t>(std::floor(spec.to_grid(p.x))),
            static_cast<std::int64_t>(std::floor(spec.to_grid(p.y)))};
}

Point recover(GridPoint g, const HeatmapSpec& spec) {
    spec.validate();
    const auto L = static_cast<std::int64_t>(spec.L);
    if (g.x < 0 || g.x >= L || g.y < 0 || g.y >= L) {
        throw std::out_of_range("grid point (" + std::to_string(g.x) + ", " + std::to_string(g.y) +
                                ") outside [0, " + std::to_string(spec.L) + ")");
    }
    return {spec.from_grid(static_cast<double>(g.x)), spec.from_grid(static_cast<double>(g.y))};
}

double quantization_error(Point p, const HeatmapSpec& spec) {
    const Point r = recover(quantize(p, spec), spec);
    return std::hypot(p.x - r.x, p.y - r.y);
}

std::size_t argmax_index(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("argmax of an empty heatmap");
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) best = i;
    }
    return best;
}

double decode_argmax(std::span<const double> values, const HeatmapSpec& spec) {
    return spec.from_grid(static_cast<double>(argmax_index(values)));
}

double decode_argmax(const Heatmap1D& h) { return decode_argmax(h.values, h.spec); }

std::uint64_t output_size(std::uint64_t N, std::uint64_t L, HeatmapKind kind) {
    if (N < 1 || L < 1) throw std::invalid_argument("output_size: N and L must be >= 1");
    return kind == HeatmapKind::OneD ? 2 * N * L : N * L * L;
}

std::pair<Tensor, Tensor> encode_targets(const LandmarkSet& landmarks, const HeatmapSpec& spec) {
    const std::size_t N = landmarks.size(), L = spec.L;
    if (N == 0) throw std::invalid_argument("encode_targets: empty landmark set");
    Tensor tx({N, L}), ty({N, L});
    for (std::size_t n = 0; n < N; ++n) {
        const auto hx = encode1d(landmarks[n].x, spec, Axis::X);
        const auto hy = encode1d(landmarks[n].y, spec, Axis::Y);
        std::copy(hx.values.begin(), hx.values.end(), tx.data().begin() + static_cast<std::ptrdiff_t>(n * L));
        std::copy(hy.values.begin(), hy.values.end(), ty.data().begin() + static_cast<std::ptrdiff_t>(n * L));
    }
    return {tx, ty};
}

LandmarkSet decode_landmarks(const Tensor& hx, const Tensor& hy, const HeatmapSpec& spec) {
    if (hx.rank() != 2 || hx.shape() != hy.shape() || hx.dim(1) != spec.L) {
        throw ShapeError("decode_landmarks: expected two N x " + std::to_string(spec.L) + " tensors, got " +
                         shape_str(hx.shape()) + " and " + shape_str(hy.shape()));
    }
    const std::size_t N = hx.dim(0), L = spec.L;
    LandmarkSet out;
    out.coords.resize(N);
    for (std::size_t n = 0; n < N; ++n) {
        out[n].x = decode_argmax(hx.data().subspan(n * L, L), spec);
        out[n].y = decode_argmax(hy.data().subspan(n * L, L), spec);
    }
    return out;
}

void write_heatmap(std::ostream& os, const Heatmap1D& h) {
    os << h.spec.L << ' ' << std::setprecision(17) << h.spec.sigma << ' ' << axis_char(h.axis) << '\n';
    for (double v : h.values) os << std::setprecision(17) << v << '\n';
}

Heatmap1D read_heatmap(std::istream& is, std::size_t F) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("heatmap dump: missing header");
    std::istringstream hs(line);
    Heatmap1D h;
    char axis = 0;
    if (!(hs >> h.spec.L >> h.spec.sigma >> axis) || (axis != 'x' && axis != 'y')) {
        throw std::runtime_error("heatmap dump: bad header '" + line + "'");
    }
    h.spec.F = F;
    h.axis = axis == 'x' ? Axis::X : Axis::Y;
    h.values.resize(h.spec.L);
    for (std::size_t i = 0; i < h.spec.L; ++i) {
        if (!std::getline(is, line)) throw std::runtime_error("heatmap dump: expected " + std::to_string(h.spec.L) + " values");
        h.values[i] = std::stod(line);
    }
    return h;
}

}  // namespace mhm
