#ifndef DCDM_NETWORK_HPP
#define DCDM_NETWORK_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dcdm/rng.hpp"
#include "dcdm/tensor.hpp"

namespace dcdm {

inline constexpr int kFeatureMaps = 16;

enum class Activation : std::uint32_t { Linear = 0, ReLU = 1 };

struct ConvSpec {
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 3;  // 3 (3x3x3) or 1 (1x1x1)
    Activation activation = Activation::ReLU;

    std::size_t weight_count() const {
        return static_cast<std::size_t>(in_channels) * out_channels * kernel *
               kernel * kernel;
    }
};

template <class T>
struct ConvLayer {
    ConvSpec spec;
    std::vector<T> w;  // [out][in][kz][ky][kx]
    std::vector<T> b;  // [out]
};

/// Two 3x3x3 conv(16->16, ReLU) layers; the block input is added to their
/// output.
template <class T>
struct ResidualBlock {
    ConvLayer<T> conv1, conv2;
};

/// Resolution-independent direction network following the two-level
/// convolutional design: input conv (1->16, linear), residual blocks before
/// the branch, a pooled lower path of residual blocks that is upsampled and
/// added back, residual blocks after the merge, and a per-voxel dense
/// (1x1x1 conv, 16->1, linear) output.
template <class T>
struct ModelWeightsT {
    std::uint32_t tier = 16;  // grid resolution the weights were trained at
    std::vector<ResidualBlock<T>> pre_blocks;
    std::vector<ResidualBlock<T>> lower_blocks;
    std::vector<ResidualBlock<T>> post_blocks;
    ConvLayer<T> input_conv;
    ConvLayer<T> output_conv;

    template <class Fn>
    void for_each_layer(Fn&& fn) {
        fn(input_conv);
        for (auto& blk : pre_blocks) { fn(blk.conv1); fn(blk.conv2); }
        for (auto& blk : lower_blocks) { fn(blk.conv1); fn(blk.conv2); }
        for (auto& blk : post_blocks) { fn(blk.conv1); fn(blk.conv2); }
        fn(output_conv);
    }
    template <class Fn>
    void for_each_layer(Fn&& fn) const {
        const_cast<ModelWeightsT*>(this)->for_each_layer(
            [&](auto& layer) { fn(const_cast<const ConvLayer<T>&>(layer)); });
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for_each_layer([&](const ConvLayer<T>& l) { n += l.w.size() + l.b.size(); });
        return n;
    }
};

using ModelWeights = ModelWeightsT<float>;

/// Residual-block counts (pre-branch, lower, post-merge) per resolution tier.
struct TierBlocks {
    int pre = 1, lower = 2, post = 1;
};

inline TierBlocks tier_blocks(std::uint32_t tier) {
    if (tier >= 128) return {2, 4, 3};
    if (tier >= 64) return {1, 3, 2};
    return {1, 2, 1};  // desk tier: 16^3 / 32^3
}

namespace detail {
template <class T>
ConvLayer<T> make_conv(const ConvSpec& spec, std::mt19937_64& eng) {
    ConvLayer<T> layer;
    layer.spec = spec;
    layer.w.resize(spec.weight_count());
    layer.b.assign(spec.out_channels, T(0));
    // He-uniform fan-in scaling.
    const double fan_in =
        static_cast<double>(spec.in_channels) * spec.kernel * spec.kernel * spec.kernel;
    const double limit = std::sqrt(6.0 / fan_in);
    std::uniform_real_distribution<double> uni(-limit, limit);
    for (auto& v : layer.w) v = static_cast<T>(uni(eng));
    return layer;
}
} // namespace detail

template <class T = float>
ModelWeightsT<T> make_model(std::uint32_t tier, std::uint64_t seed) {
    auto eng = make_engine(seed, "model/init");
    const TierBlocks counts = tier_blocks(tier);
    ModelWeightsT<T> m;
    m.tier = tier;
    m.input_conv =
        detail::make_conv<T>({1, kFeatureMaps, 3, Activation::Linear}, eng);
    const ConvSpec block_spec{kFeatureMaps, kFeatureMaps, 3, Activation::ReLU};
    auto make_blocks = [&](int n, std::vector<ResidualBlock<T>>& out) {
        for (int i = 0; i < n; ++i)
            out.push_back({detail::make_conv<T>(block_spec, eng),
                           detail::make_conv<T>(block_spec, eng)});
    };
    make_blocks(counts.pre, m.pre_blocks);
    make_blocks(counts.lower, m.lower_blocks);
    make_blocks(counts.post, m.post_blocks);
    m.output_conv =
        detail::make_conv<T>({kFeatureMaps, 1, 1, Activation::Linear}, eng);
    return m;
}

// ---------------------------------------------------------------------------
// Layer kernels. Convolutions use zero padding (taps outside the grid are
// skipped), so spatial shape is always preserved.
// ---------------------------------------------------------------------------

namespace detail {

/// out = act(W * in + b). Shifted-accumulate form: for each kernel tap the
/// valid index range is added in bulk, which both vectorizes and realizes
/// zero padding.
template <class T>
void conv_forward(const ConvLayer<T>& layer, const Tensor4<T>& in,
                  Tensor4<T>& out) {
    const int nx = in.nx, ny = in.ny, nz = in.nz;
    const int ic_n = layer.spec.in_channels, oc_n = layer.spec.out_channels;
    const int ks = layer.spec.kernel;
    const int r = ks / 2;
    out = Tensor4<T>(oc_n, nx, ny, nz);
    const std::size_t spatial = in.spatial();
#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < oc_n; ++oc) {
        T* o = out.channel(oc);
        const T bias = layer.b[oc];
        for (std::size_t s = 0; s < spatial; ++s) o[s] = bias;
        for (int ic = 0; ic < ic_n; ++ic) {
            const T* x = in.channel(ic);
            const T* wbase =
                layer.w.data() +
                (static_cast<std::size_t>(oc) * ic_n + ic) * ks * ks * ks;
            for (int dz = -r; dz <= r; ++dz) {
                for (int dy = -r; dy <= r; ++dy) {
                    for (int dx = -r; dx <= r; ++dx) {
                        const T wv =
                            wbase[(dz + r) * ks * ks + (dy + r) * ks + (dx + r)];
                        if (wv == T(0)) continue;
                        const int i0 = std::max(0, -dx), i1 = std::min(nx, nx - dx);
                        const int j0 = std::max(0, -dy), j1 = std::min(ny, ny - dy);
                        const int k0 = std::max(0, -dz), k1 = std::min(nz, nz - dz);
                        const long shift =
                            dx + static_cast<long>(nx) * (dy + static_cast<long>(ny) * dz);
                        for (int k = k0; k < k1; ++k) {
                            for (int j = j0; j < j1; ++j) {
                                const std::size_t row = in.sidx(0, j, k);
                                const T* xs = x + row + shift;
                                T* os = o + row;
                                for (int i = i0; i < i1; ++i) os[i] += wv * xs[i];
                            }
                        }
                    }
                }
            }
        }
        if (layer.spec.activation == Activation::ReLU)
            for (std::size_t s = 0; s < spatial; ++s)
                if (o[s] < T(0)) o[s] = T(0);
    }
}

/// Backward for conv_forward. `out` is the post-activation forward result
/// (its zeros gate the ReLU). Accumulates weight/bias gradients into `grad`
/// and writes the input gradient.
template <class T>
void conv_backward(const ConvLayer<T>& layer, const Tensor4<T>& in,
                   const Tensor4<T>& out, const Tensor4<T>& dout,
                   ConvLayer<T>& grad, Tensor4<T>& din) {
    const int nx = in.nx, ny = in.ny, nz = in.nz;
    const int ic_n = layer.spec.in_channels, oc_n = layer.spec.out_channels;
    const int ks = layer.spec.kernel;
    const int r = ks / 2;
    const std::size_t spatial = in.spatial();

    // dZ = dout gated by the activation.
    Tensor4<T> dz = dout;
    if (layer.spec.activation == Activation::ReLU) {
        for (std::size_t s = 0; s < dz.data.size(); ++s)
            if (out.data[s] <= T(0)) dz.data[s] = T(0);
    }

#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < oc_n; ++oc) {
        const T* g = dz.channel(oc);
        double bsum = 0.0;
        for (std::size_t s = 0; s < spatial; ++s) bsum += g[s];
        grad.b[oc] += static_cast<T>(bsum);
        for (int ic = 0; ic < ic_n; ++ic) {
            const T* x = in.channel(ic);
            T* wg = grad.w.data() +
                    (static_cast<std::size_t>(oc) * ic_n + ic) * ks * ks * ks;
            for (int dz_ = -r; dz_ <= r; ++dz_) {
                for (int dy = -r; dy <= r; ++dy) {
                    for (int dx = -r; dx <= r; ++dx) {
                        const int i0 = std::max(0, -dx), i1 = std::min(nx, nx - dx);
                        const int j0 = std::max(0, -dy), j1 = std::min(ny, ny - dy);
                        const int k0 = std::max(0, -dz_), k1 = std::min(nz, nz - dz_);
                        const long shift =
                            dx + static_cast<long>(nx) *
                                     (dy + static_cast<long>(ny) * dz_);
                        double acc = 0.0;
                        for (int k = k0; k < k1; ++k) {
                            for (int j = j0; j < j1; ++j) {
                                const std::size_t row = in.sidx(0, j, k);
                                const T* xs = x + row + shift;
                                const T* gs = g + row;
                                for (int i = i0; i < i1; ++i) acc += gs[i] * xs[i];
                            }
                        }
                        wg[(dz_ + r) * ks * ks + (dy + r) * ks + (dx + r)] +=
                            static_cast<T>(acc);
                    }
                }
            }
        }
    }

    din = Tensor4<T>(ic_n, nx, ny, nz);
#pragma omp parallel for schedule(static)
    for (int ic = 0; ic < ic_n; ++ic) {
        T* d = din.channel(ic);
        for (int oc = 0; oc < oc_n; ++oc) {
            const T* g = dz.channel(oc);
            const T* wbase =
                layer.w.data() +
                (static_cast<std::size_t>(oc) * ic_n + ic) * ks * ks * ks;
            for (int dz_ = -r; dz_ <= r; ++dz_) {
                for (int dy = -r; dy <= r; ++dy) {
                    for (int dx = -r; dx <= r; ++dx) {
                        const T wv =
                            wbase[(dz_ + r) * ks * ks + (dy + r) * ks + (dx + r)];
                        if (wv == T(0)) continue;
                        const int i0 = std::max(0, -dx), i1 = std::min(nx, nx - dx);
                        const int j0 = std::max(0, -dy), j1 = std::min(ny, ny - dy);
                        const int k0 = std::max(0, -dz_), k1 = std::min(nz, nz - dz_);
                        const long shift =
                            dx + static_cast<long>(nx) *
                                     (dy + static_cast<long>(ny) * dz_);
                        // d[in position] += w * g[out position]; iterate out
                        // positions and scatter through the shift.
                        for (int k = k0; k < k1; ++k) {
                            for (int j = j0; j < j1; ++j) {
                                const std::size_t row = din.sidx(0, j, k);
                                T* ds = d + row + shift;
                                const T* gs = g + row;
                                for (int i = i0; i < i1; ++i) ds[i] += wv * gs[i];
                            }
                        }
                    }
                }
            }
        }
    }
}

template <class T>
void avgpool2_forward(const Tensor4<T>& in, Tensor4<T>& out) {
    if (in.nx % 2 || in.ny % 2 || in.nz % 2)
        throw ShapeError("average pooling requires even dims");
    out = Tensor4<T>(in.channels, in.nx / 2, in.ny / 2, in.nz / 2);
#pragma omp parallel for schedule(static)
    for (int c = 0; c < in.channels; ++c) {
        const T* x = in.channel(c);
        T* o = out.channel(c);
        for (int k = 0; k < out.nz; ++k)
            for (int j = 0; j < out.ny; ++j)
                for (int i = 0; i < out.nx; ++i) {
                    T s = T(0);
                    for (int dk = 0; dk < 2; ++dk)
                        for (int dj = 0; dj < 2; ++dj)
                            for (int di = 0; di < 2; ++di)
                                s += x[in.sidx(2 * i + di, 2 * j + dj, 2 * k + dk)];
                    o[out.sidx(i, j, k)] = s / T(8);
                }
    }
}

template <class T>
void avgpool2_backward(const Tensor4<T>& dout, Tensor4<T>& din, int nx, int ny,
                       int nz) {
    din = Tensor4<T>(dout.channels, nx, ny, nz);
#pragma omp parallel for schedule(static)
    for (int c = 0; c < dout.channels; ++c) {
        const T* g = dout.channel(c);
        T* d = din.channel(c);
        for (int k = 0; k < nz; ++k)
            for (int j = 0; j < ny; ++j)
                for (int i = 0; i < nx; ++i)
                    d[din.sidx(i, j, k)] =
                        g[dout.sidx(i / 2, j / 2, k / 2)] / T(8);
    }
}

/// Nearest-neighbor x2 replication.
template <class T>
void upsample2_forward(const Tensor4<T>& in, Tensor4<T>& out) {
    out = Tensor4<T>(in.channels, in.nx * 2, in.ny * 2, in.nz * 2);
#pragma omp parallel for schedule(static)
    for (int c = 0; c < in.channels; ++c) {
        const T* x = in.channel(c);
        T* o = out.channel(c);
        for (int k = 0; k < out.nz; ++k)
            for (int j = 0; j < out.ny; ++j)
                for (int i = 0; i < out.nx; ++i)
                    o[out.sidx(i, j, k)] = x[in.sidx(i / 2, j / 2, k / 2)];
    }
}

template <class T>
void upsample2_backward(const Tensor4<T>& dout, Tensor4<T>& din, int nx, int ny,
                        int nz) {
    din = Tensor4<T>(dout.channels, nx, ny, nz);
#pragma omp parallel for schedule(static)
    for (int c = 0; c < dout.channels; ++c) {
        const T* g = dout.channel(c);
        T* d = din.channel(c);
        for (int k = 0; k < dout.nz; ++k)
            for (int j = 0; j < dout.ny; ++j)
                for (int i = 0; i < dout.nx; ++i)
                    d[din.sidx(i / 2, j / 2, k / 2)] += g[dout.sidx(i, j, k)];
    }
}

} // namespace detail

/// Cached activations from a forward pass, consumed by the backward pass.
template <class T>
struct ForwardTrace {
    struct BlockCache {
        Tensor4<T> input;  // block input (also the skip)
        Tensor4<T> h1;     // after conv1+ReLU
        Tensor4<T> h2;     // after conv2+ReLU
    };
    Tensor4<T> input;          // 1-channel network input
    Tensor4<T> embedded;       // after input conv
    std::vector<BlockCache> pre, lower, post;
    Tensor4<T> branch_point;   // upper activation fed to the pool
    Tensor4<T> pooled;         // lower-path input
    Tensor4<T> lower_out;      // lower-path output before upsampling
    Tensor4<T> upsampled;
    Tensor4<T> merged;         // upper + upsampled lower
    Tensor4<T> features;       // input to the output conv
    Tensor4<T> output;         // 1-channel result
};

namespace detail {
template <class T>
void block_forward(const ResidualBlock<T>& blk, const Tensor4<T>& x,
                   typename ForwardTrace<T>::BlockCache& cache, Tensor4<T>& out) {
    cache.input = x;
    conv_forward(blk.conv1, x, cache.h1);
    conv_forward(blk.conv2, cache.h1, cache.h2);
    out = cache.h2;
    for (std::size_t s = 0; s < out.data.size(); ++s) out.data[s] += x.data[s];
}

template <class T>
void block_backward(const ResidualBlock<T>& blk,
                    const typename ForwardTrace<T>::BlockCache& cache,
                    const Tensor4<T>& dout, ResidualBlock<T>& grad,
                    Tensor4<T>& din) {
    Tensor4<T> dh1;
    conv_backward(blk.conv2, cache.h1, cache.h2, dout, grad.conv2, dh1);
    conv_backward(blk.conv1, cache.input, cache.h1, dh1, grad.conv1, din);
    for (std::size_t s = 0; s < din.data.size(); ++s) din.data[s] += dout.data[s];
}
} // namespace detail

/// Run the network on a 1-channel tensor; fills the trace when given.
template <class T>
Tensor4<T> forward(const ModelWeightsT<T>& m, const Tensor4<T>& input,
                   ForwardTrace<T>* trace = nullptr) {
    if (input.channels != 1) throw ShapeError("network input must be 1-channel");
    if (input.nx % 2 || input.ny % 2 || input.nz % 2)
        throw ShapeError("grid dims must be even (one pooling level)");
    ForwardTrace<T> local;
    ForwardTrace<T>& t = trace ? *trace : local;
    t.input = input;
    detail::conv_forward(m.input_conv, input, t.embedded);
    Tensor4<T> x = t.embedded;
    t.pre.resize(m.pre_blocks.size());
    for (std::size_t b = 0; b < m.pre_blocks.size(); ++b) {
        Tensor4<T> next;
        detail::block_forward(m.pre_blocks[b], x, t.pre[b], next);
        x = std::move(next);
    }
    t.branch_point = x;
    detail::avgpool2_forward(x, t.pooled);
    Tensor4<T> y = t.pooled;
    t.lower.resize(m.lower_blocks.size());
    for (std::size_t b = 0; b < m.lower_blocks.size(); ++b) {
        Tensor4<T> next;
        detail::block_forward(m.lower_blocks[b], y, t.lower[b], next);
        y = std::move(next);
    }
    t.lower_out = y;
    detail::upsample2_forward(y, t.upsampled);
    t.merged = t.branch_point;
    for (std::size_t s = 0; s < t.merged.data.size(); ++s)
        t.merged.data[s] += t.upsampled.data[s];
    x = t.merged;
    t.post.resize(m.post_blocks.size());
    for (std::size_t b = 0; b < m.post_blocks.size(); ++b) {
        Tensor4<T> next;
        detail::block_forward(m.post_blocks[b], x, t.post[b], next);
        x = std::move(next);
    }
    t.features = std::move(x);
    detail::conv_forward(m.output_conv, t.features, t.output);
    return t.output;
}

/// Zero-initialized gradient holder with the same shapes as `m`.
template <class T>
ModelWeightsT<T> zero_like(const ModelWeightsT<T>& m) {
    ModelWeightsT<T> g = m;
    g.for_each_layer([](ConvLayer<T>& l) {
        std::fill(l.w.begin(), l.w.end(), T(0));
        std::fill(l.b.begin(), l.b.end(), T(0));
    });
    return g;
}

/// Backpropagate d(loss)/d(output) through the trace; accumulates into
/// `grad` (zero it first for a fresh gradient).
template <class T>
void backward(const ModelWeightsT<T>& m, const ForwardTrace<T>& t,
              const Tensor4<T>& doutput, ModelWeightsT<T>& grad) {
    Tensor4<T> d;
    detail::conv_backward(m.output_conv, t.features, t.output, doutput,
                          grad.output_conv, d);
    for (int b = static_cast<int>(m.post_blocks.size()) - 1; b >= 0; --b) {
        Tensor4<T> dprev;
        detail::block_backward(m.post_blocks[b], t.post[b], d,
                               grad.post_blocks[b], dprev);
        d = std::move(dprev);
    }
    // Merge point: gradient splits into the upper path and the lower path.
    Tensor4<T> dlower_up = d;  // gradient w.r.t. the upsampled tensor
    Tensor4<T> dlow;
    detail::upsample2_backward(dlower_up, dlow, t.lower_out.nx, t.lower_out.ny,
                               t.lower_out.nz);
    for (int b = static_cast<int>(m.lower_blocks.size()) - 1; b >= 0; --b) {
        Tensor4<T> dprev;
        detail::block_backward(m.lower_blocks[b], t.lower[b], dlow,
                               grad.lower_blocks[b], dprev);
        dlow = std::move(dprev);
    }
    Tensor4<T> dbranch_from_pool;
    detail::avgpool2_backward(dlow, dbranch_from_pool, t.branch_point.nx,
                              t.branch_point.ny, t.branch_point.nz);
    for (std::size_t s = 0; s < d.data.size(); ++s)
        d.data[s] += dbranch_from_pool.data[s];
    for (int b = static_cast<int>(m.pre_blocks.size()) - 1; b >= 0; --b) {
        Tensor4<T> dprev;
        detail::block_backward(m.pre_blocks[b], t.pre[b], d, grad.pre_blocks[b],
                               dprev);
        d = std::move(dprev);
    }
    Tensor4<T> dinput;
    detail::conv_backward(m.input_conv, t.input, t.embedded, d, grad.input_conv,
                          dinput);
}

// ---------------------------------------------------------------------------
// Weight file: "DCDW", u32 version=1, u32 tier, u32 layer count, per layer
// u32 in/out/kernel/activation then f32 weights and biases.
// ---------------------------------------------------------------------------

template <class T>
void save_weights(const ModelWeightsT<T>& m, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    auto u32 = [&](std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); };
    os.write("DCDW", 4);
    u32(1);
    u32(m.tier);
    u32(static_cast<std::uint32_t>(m.pre_blocks.size()));
    u32(static_cast<std::uint32_t>(m.lower_blocks.size()));
    u32(static_cast<std::uint32_t>(m.post_blocks.size()));
    std::uint32_t layer_count = 0;
    m.for_each_layer([&](const ConvLayer<T>&) { ++layer_count; });
    u32(layer_count);
    m.for_each_layer([&](const ConvLayer<T>& l) {
        u32(static_cast<std::uint32_t>(l.spec.in_channels));
        u32(static_cast<std::uint32_t>(l.spec.out_channels));
        u32(static_cast<std::uint32_t>(l.spec.kernel));
        u32(static_cast<std::uint32_t>(l.spec.activation));
        std::vector<float> buf(l.w.size());
        for (std::size_t i = 0; i < buf.size(); ++i)
            buf[i] = static_cast<float>(l.w[i]);
        os.write(reinterpret_cast<const char*>(buf.data()), 4l * buf.size());
        buf.assign(l.b.size(), 0.0f);
        for (std::size_t i = 0; i < buf.size(); ++i)
            buf[i] = static_cast<float>(l.b[i]);
        os.write(reinterpret_cast<const char*>(buf.data()), 4l * buf.size());
    });
    if (!os) throw std::runtime_error("write failure: " + path);
}

template <class T = float>
ModelWeightsT<T> load_weights(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "DCDW", 4) != 0)
        throw std::runtime_error("malformed header: bad magic");
    auto u32 = [&]() {
        std::uint32_t v = 0;
        is.read(reinterpret_cast<char*>(&v), 4);
        return v;
    };
    if (u32() != 1) throw std::runtime_error("malformed header: bad version");
    ModelWeightsT<T> m;
    m.tier = u32();
    const std::uint32_t pre_n = u32(), lower_n = u32(), post_n = u32();
    const std::uint32_t layer_count = u32();
    if (!is) throw std::runtime_error("malformed header: truncated");
    if (layer_count != 2 + 2 * (pre_n + lower_n + post_n))
        throw std::runtime_error("malformed header: layer count mismatch");
    m.pre_blocks.resize(pre_n);
    m.lower_blocks.resize(lower_n);
    m.post_blocks.resize(post_n);
    auto read_layer = [&](ConvLayer<T>& l) {
        l.spec.in_channels = static_cast<int>(u32());
        l.spec.out_channels = static_cast<int>(u32());
        l.spec.kernel = static_cast<int>(u32());
        l.spec.activation = static_cast<Activation>(u32());
        if (l.spec.kernel != 1 && l.spec.kernel != 3)
            throw std::runtime_error("malformed layer: bad kernel");
        std::vector<float> buf(l.spec.weight_count());
        is.read(reinterpret_cast<char*>(buf.data()), 4l * buf.size());
        l.w.assign(buf.begin(), buf.end());
        buf.resize(l.spec.out_channels);
        is.read(reinterpret_cast<char*>(buf.data()), 4l * buf.size());
        l.b.assign(buf.begin(), buf.end());
        if (!is) throw std::runtime_error("truncated payload");
    };
    m.for_each_layer([&](ConvLayer<T>& l) { read_layer(l); });
    return m;
}

/// Non-empty when applying at a resolution below the training tier, which
/// the architecture was not selected for.
template <class T>
std::string tier_mismatch_warning(const ModelWeightsT<T>& m, int grid_n) {
    if (static_cast<std::uint32_t>(grid_n) < m.tier)
        return "model trained at tier " + std::to_string(m.tier) +
               " applied at lower resolution " + std::to_string(grid_n);
    return {};
}

} // namespace dcdm

#endif
