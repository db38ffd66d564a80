#include "meshreg/field.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <limits>
#include <string>

#include "meshreg/errors.hpp"

namespace meshreg {

namespace {

constexpr double kBaryTol = 1e-9;

}  // namespace

std::array<double, 3> barycentric(const Point2& a, const Point2& b, const Point2& c,
                                  const Point2& p) {
    const double total = orient2d(a, b, c);
    const double wa = orient2d(b, c, p) / total;
    const double wb = orient2d(c, a, p) / total;
    return {wa, wb, 1.0 - wa - wb};
}

PointLocator::PointLocator(const TriMesh& mesh) : mesh_(&mesh) {
    const auto& V = mesh.vertices();
    if (V.empty() || mesh.n_triangles() == 0) throw GeometryError("PointLocator: empty mesh");
    double maxx = V[0].x, maxy = V[0].y;
    minx_ = V[0].x;
    miny_ = V[0].y;
    for (const Vec2& v : V) {
        minx_ = std::min(minx_, v.x); maxx = std::max(maxx, v.x);
        miny_ = std::min(miny_, v.y); maxy = std::max(maxy, v.y);
    }
    const auto side = std::max<long>(1, std::lround(std::sqrt(mesh.n_triangles() / 2.0)));
    nx_ = ny_ = side;
    cell_w_ = std::max(maxx - minx_, 1e-12) / nx_;
    cell_h_ = std::max(maxy - miny_, 1e-12) / ny_;
    bins_.resize(nx_ * ny_);
    auto bx = [&](double x) { return std::clamp(static_cast<long>(std::floor((x - minx_) / cell_w_)), 0L, nx_ - 1); };
    auto by = [&](double y) { return std::clamp(static_cast<long>(std::floor((y - miny_) / cell_h_)), 0L, ny_ - 1); };
    for (std::size_t t = 0; t < mesh.n_triangles(); ++t) {
        const Triangle& tri = mesh.triangle(t);
        double lx = V[tri[0]].x, hx = lx, ly = V[tri[0]].y, hy = ly;
        for (Index v : tri) {
            lx = std::min(lx, V[v].x); hx = std::max(hx, V[v].x);
            ly = std::min(ly, V[v].y); hy = std::max(hy, V[v].y);
        }
        // Pad by the containment tolerance so edge points find both neighbours.
        for (long y = by(ly - 1e-7); y <= by(hy + 1e-7); ++y)
            for (long x = bx(lx - 1e-7); x <= bx(hx + 1e-7); ++x)
                bins_[y * nx_ + x].push_back(static_cast<Index>(t));
    }
}

std::optional<Location> PointLocator::find(const Point2& p) const {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) return std::nullopt;
    const long x = static_cast<long>(std::floor((p.x - minx_) / cell_w_));
    const long y = static_cast<long>(std::floor((p.y - miny_) / cell_h_));
    if (x < -1 || y < -1 || x > nx_ || y > ny_) return std::nullopt;
    const auto& bin = bins_[std::clamp(y, 0L, ny_ - 1) * nx_ + std::clamp(x, 0L, nx_ - 1)];
    const auto& V = mesh_->vertices();
    for (Index t : bin) {  // bins hold ascending triangle indices
        const Triangle& tri = mesh_->triangle(t);
        const auto w = barycentric(V[tri[0]], V[tri[1]], V[tri[2]], p);
        if (w[0] >= -kBaryTol && w[1] >= -kBaryTol && w[2] >= -kBaryTol)
            return Location{static_cast<std::size_t>(t), w};
    }
    return std::nullopt;
}

Location PointLocator::locate(const Point2& p) const {
    if (auto loc = find(p)) return *loc;
    throw GeometryError("point (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                        ") is not covered by the mesh");
}

DenseField densify(const TriMesh& mesh, std::span<const Vec2> u, std::size_t width,
                   std::size_t height) {
    if (u.size() != mesh.n_vertices())
        throw ConfigError("densify: displacement count does not match mesh");
    const PointLocator locator(mesh);
    DenseField field(width, height);
    for (std::size_t y = 0; y < height; ++y)
        for (std::size_t x = 0; x < width; ++x) {
            const Location loc =
                locator.locate({static_cast<double>(x), static_cast<double>(y)});
            const Triangle& tri = mesh.triangle(loc.triangle);
            Vec2 d;
            for (int k = 0; k < 3; ++k) d += loc.weights[k] * u[tri[k]];
            field.ux[y * width + x] = d.x;
            field.uy[y * width + x] = d.y;
        }
    return field;
}

ImageGrid warp_image(const ImageGrid& te, const DenseField& field) {
    if (field.width != te.width() || field.height != te.height())
        throw ConfigError("warp_image: field and image dimensions differ");
    ImageGrid out(te.width(), te.height());
    for (std::size_t y = 0; y < te.height(); ++y)
        for (std::size_t x = 0; x < te.width(); ++x) {
            const Point2 p{static_cast<double>(x), static_cast<double>(y)};
            out.at(x, y) = sample(te, p + field.at(x, y));
        }
    return out;
}

ImageGrid difference_image(const ImageGrid& a, const ImageGrid& b) {
    if (!a.same_shape(b)) throw ConfigError("difference_image: dimensions differ");
    ImageGrid out(a.width(), a.height());
    const auto da = a.data(), db = b.data();
    auto dst = out.mutable_data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = std::abs(da[i] - db[i]);
    return out;
}

namespace {

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int k = 0; k < 4; ++k) out.push_back(static_cast<unsigned char>(v >> (8 * k)));
}

std::uint32_t get_u32(std::span<const unsigned char> b, std::size_t off) {
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(b[off + k]) << (8 * k);
    return v;
}

}  // namespace

std::vector<unsigned char> encode_dense_field(const DenseField& field) {
    std::vector<unsigned char> out{'M', 'R', 'D', 'F'};
    put_u32(out, static_cast<std::uint32_t>(field.width));
    put_u32(out, static_cast<std::uint32_t>(field.height));
    put_u32(out, 0);
    out.reserve(16 + 8 * field.ux.size());
    for (const auto* plane : {&field.ux, &field.uy})
        for (double v : *plane) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    return out;
}

DenseField decode_dense_field(std::span<const unsigned char> bytes) {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), "MRDF", 4) != 0)
        throw IoError("not a dense field file");
    const std::uint32_t w = get_u32(bytes, 4), h = get_u32(bytes, 8);
    const std::size_t n = static_cast<std::size_t>(w) * h;
    if (bytes.size() != 16 + 8 * n) throw IoError("dense field file has wrong length");
    DenseField field(w, h);
    for (std::size_t i = 0; i < n; ++i) {
        field.ux[i] = std::bit_cast<float>(get_u32(bytes, 16 + 4 * i));
        field.uy[i] = std::bit_cast<float>(get_u32(bytes, 16 + 4 * (n + i)));
    }
    return field;
}

void write_dense_field(const DenseField& field, const std::filesystem::path& path) {
    const auto bytes = encode_dense_field(field);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

DenseField read_dense_field(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    return decode_dense_field(bytes);
}

void write_node_csv(const TriMesh& mesh, std::span<const Vec2> u,
                    const std::filesystem::path& path) {
    if (u.size() != mesh.n_vertices()) throw ConfigError("write_node_csv: size mismatch");
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << std::setprecision(17) << "x,y,ux,uy\n";
    for (std::size_t i = 0; i < u.size(); ++i)
        out << mesh.vertex(i).x << ',' << mesh.vertex(i).y << ',' << u[i].x << ',' << u[i].y << '\n';
    if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace meshreg
