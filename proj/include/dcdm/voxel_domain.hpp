#ifndef DCDM_VOXEL_DOMAIN_HPP
#define DCDM_VOXEL_DOMAIN_HPP

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dcdm {

enum class CellLabel : std::uint8_t { Fluid = 0, Boundary = 1 };

/// Labeled voxel grid. Cells are either Fluid (unknown pressure) or
/// Boundary (Neumann wall / obstacle). Indexing is x-major:
/// idx = i + nx*(j + ny*k).
struct VoxelDomain {
    int nx = 0, ny = 0, nz = 0;
    double dx = 1.0;
    std::vector<CellLabel> labels;

    VoxelDomain() = default;
    VoxelDomain(int nx_, int ny_, int nz_, double dx_ = 1.0,
                CellLabel fill = CellLabel::Fluid)
        : nx(nx_), ny(ny_), nz(nz_), dx(dx_) {
        if (nx <= 0 || ny <= 0 || nz <= 0)
            throw std::invalid_argument("invalid dims");
        if (dx <= 0.0)
            throw std::invalid_argument("invalid dx");
        labels.assign(static_cast<std::size_t>(nx) * ny * nz, fill);
    }

    std::size_t size() const { return static_cast<std::size_t>(nx) * ny * nz; }

    int index(int i, int j, int k) const { return i + nx * (j + ny * k); }

    bool in_bounds(int i, int j, int k) const {
        return i >= 0 && i < nx && j >= 0 && j < ny && k >= 0 && k < nz;
    }

    bool is_fluid(int i, int j, int k) const {
        return in_bounds(i, j, k) && labels[index(i, j, k)] == CellLabel::Fluid;
    }

    std::size_t fluid_count() const {
        std::size_t c = 0;
        for (auto l : labels)
            if (l == CellLabel::Fluid) ++c;
        return c;
    }

    static VoxelDomain full_cube(int n, double dx = 1.0) {
        return VoxelDomain(n, n, n, dx);
    }

    bool operator==(const VoxelDomain& o) const {
        return nx == o.nx && ny == o.ny && nz == o.nz && dx == o.dx &&
               labels == o.labels;
    }
};

// Domain file: "VOXD", u32 version=1, u32 nx,ny,nz, f64 dx, nx*ny*nz label
// bytes (0=Fluid, 1=Boundary). Little-endian.
namespace detail {
inline void write_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), 4);
}
inline std::uint32_t read_u32(std::istream& is) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
inline void write_f64(std::ostream& os, double v) {
    os.write(reinterpret_cast<const char*>(&v), 8);
}
inline double read_f64(std::istream& is) {
    double v = 0;
    is.read(reinterpret_cast<char*>(&v), 8);
    return v;
}
} // namespace detail

inline void save_domain(const VoxelDomain& d, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os.write("VOXD", 4);
    detail::write_u32(os, 1);
    detail::write_u32(os, static_cast<std::uint32_t>(d.nx));
    detail::write_u32(os, static_cast<std::uint32_t>(d.ny));
    detail::write_u32(os, static_cast<std::uint32_t>(d.nz));
    detail::write_f64(os, d.dx);
    for (auto l : d.labels) {
        char b = static_cast<char>(l);
        os.write(&b, 1);
    }
    if (!os) throw std::runtime_error("write failure: " + path);
}

inline VoxelDomain load_domain(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "VOXD", 4) != 0)
        throw std::runtime_error("malformed header: bad magic");
    std::uint32_t version = detail::read_u32(is);
    if (version != 1) throw std::runtime_error("malformed header: bad version");
    std::uint32_t nx = detail::read_u32(is);
    std::uint32_t ny = detail::read_u32(is);
    std::uint32_t nz = detail::read_u32(is);
    double dx = detail::read_f64(is);
    if (!is) throw std::runtime_error("malformed header: truncated");
    if (nx == 0 || ny == 0 || nz == 0 || dx <= 0.0)
        throw std::runtime_error("invalid dims");
    VoxelDomain d(static_cast<int>(nx), static_cast<int>(ny),
                  static_cast<int>(nz), dx);
    std::vector<char> buf(d.size());
    is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(is.gcount()) != buf.size())
        throw std::runtime_error("truncated payload");
    for (std::size_t i = 0; i < buf.size(); ++i) {
        if (buf[i] != 0 && buf[i] != 1)
            throw std::runtime_error("invalid label value");
        d.labels[i] = static_cast<CellLabel>(buf[i]);
    }
    return d;
}

} // namespace dcdm

#endif
