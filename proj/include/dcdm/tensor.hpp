#ifndef DCDM_TENSOR_HPP
#define DCDM_TENSOR_HPP

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace dcdm {

/// Dense channel-major 3D feature map: data[c*spatial + i + nx*(j + ny*k)].
template <class T>
struct Tensor4 {
    int channels = 0;
    int nx = 0, ny = 0, nz = 0;
    std::vector<T> data;

    Tensor4() = default;
    Tensor4(int c, int nx_, int ny_, int nz_)
        : channels(c), nx(nx_), ny(ny_), nz(nz_),
          data(static_cast<std::size_t>(c) * nx_ * ny_ * nz_, T(0)) {}

    std::size_t spatial() const { return static_cast<std::size_t>(nx) * ny * nz; }

    T* channel(int c) { return data.data() + c * spatial(); }
    const T* channel(int c) const { return data.data() + c * spatial(); }

    std::size_t sidx(int i, int j, int k) const {
        return static_cast<std::size_t>(i) +
               static_cast<std::size_t>(nx) * (j + static_cast<std::size_t>(ny) * k);
    }
};

struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace dcdm

#endif
