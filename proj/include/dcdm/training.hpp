#ifndef DCDM_TRAINING_HPP
#define DCDM_TRAINING_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "dcdm/network.hpp"
#include "dcdm/rng.hpp"
#include "dcdm/solvers.hpp"
#include "dcdm/sparse_matrix.hpp"
#include "dcdm/training_data.hpp"
#include "dcdm/voxel_domain.hpp"

namespace dcdm {

struct CollapsedOutput : std::runtime_error {
    CollapsedOutput() : std::runtime_error("network output has f'Af <= 0") {}
};

struct TrainConfig {
    double learning_rate = 1e-4;
    int epochs = 50;
    int batch_size = 16;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

namespace detail {

template <class T>
Tensor4<T> to_tensor(const std::vector<double>& v, int nx, int ny, int nz) {
    if (v.size() != static_cast<std::size_t>(nx) * ny * nz)
        throw ShapeError("vector length does not match grid dims");
    Tensor4<T> t(1, nx, ny, nz);
    for (std::size_t s = 0; s < v.size(); ++s) t.data[s] = static_cast<T>(v[s]);
    return t;
}

template <class T>
std::vector<double> to_vector(const Tensor4<T>& t) {
    std::vector<double> v(t.spatial());
    const T* p = t.channel(0);
    for (std::size_t s = 0; s < v.size(); ++s) v[s] = static_cast<double>(p[s]);
    return v;
}

/// Loss of one sample plus, when requested, d(loss)/d(f) in f64. With
/// e = r - alpha*A*f and alpha = r'f / f'Af:
///   dL/df = -(e'Af)/(||e|| f'Af) (r - 2 alpha A f) - (alpha/||e||) A e.
/// The quotient rule through alpha is kept; treating alpha as constant
/// changes the optimization landscape.
inline double loss_value_and_grad(const SparseMatrix& a,
                                  const std::vector<double>& r,
                                  const std::vector<double>& f,
                                  std::vector<double>* dloss_df) {
    const std::vector<double> af = matvec(a, f);
    const double faf = dot(f, af);
    if (faf <= 1e-14 * dot(f, f) || faf <= 0.0) throw CollapsedOutput();
    const double alpha = dot(r, f) / faf;
    std::vector<double> e = r;
    axpy(-alpha, af, e);
    const double l = norm2(e);
    if (dloss_df) {
        dloss_df->assign(f.size(), 0.0);
        if (l > 0.0) {
            const double eaf = dot(e, af);
            const double c1 = -eaf / (l * faf);
            // c1 * (r - 2 alpha Af) - (alpha / l) * A e
            const std::vector<double> ae = matvec(a, e);
            for (std::size_t i = 0; i < f.size(); ++i)
                (*dloss_df)[i] =
                    c1 * (r[i] - 2.0 * alpha * af[i]) - (alpha / l) * ae[i];
        }
    }
    return l;
}

} // namespace detail

/// Single-sample loss ||r - alpha A f(c,r)||_2 with the A-norm-optimal alpha.
template <class T>
double loss(const ModelWeightsT<T>& m, const SparseMatrix& a,
            const std::vector<double>& r, int nx, int ny, int nz) {
    const Tensor4<T> in = detail::to_tensor<T>(r, nx, ny, nz);
    const Tensor4<T> out = forward(m, in);
    return detail::loss_value_and_grad(a, r, detail::to_vector(out), nullptr);
}

struct BatchResult {
    double mean_loss = 0.0;
    int collapsed = 0;  // samples replaced by unit loss with zero gradient
};

/// Mean loss and gradient over a batch. Per-sample gradients are computed
/// independently (parallel-safe) and reduced in sample order, so the result
/// does not depend on thread count.
template <class T>
BatchResult batch_backward(const ModelWeightsT<T>& m, const SparseMatrix& a,
                           const std::vector<const std::vector<double>*>& batch,
                           int nx, int ny, int nz, ModelWeightsT<T>& grad) {
    const int bs = static_cast<int>(batch.size());
    if (bs == 0) throw std::invalid_argument("empty batch");
    std::vector<ModelWeightsT<T>> grads(bs);
    std::vector<double> losses(bs, 0.0);
    std::vector<char> collapsed(bs, 0);
#pragma omp parallel for schedule(dynamic, 1)
    for (int s = 0; s < bs; ++s) {
        const std::vector<double>& r = *batch[s];
        ForwardTrace<T> trace;
        const Tensor4<T> in = detail::to_tensor<T>(r, nx, ny, nz);
        const Tensor4<T> out = forward(m, in, &trace);
        std::vector<double> g;
        double l;
        try {
            l = detail::loss_value_and_grad(a, r, detail::to_vector(out), &g);
        } catch (const CollapsedOutput&) {
            collapsed[s] = 1;
            losses[s] = norm2(r);
            continue;
        }
        losses[s] = l;
        Tensor4<T> dout(1, nx, ny, nz);
        for (std::size_t i = 0; i < g.size(); ++i)
            dout.data[i] = static_cast<T>(g[i]);
        grads[s] = zero_like(m);
        backward(m, trace, dout, grads[s]);
    }
    grad = zero_like(m);
    BatchResult res;
    for (int s = 0; s < bs; ++s) {
        res.mean_loss += losses[s];
        if (collapsed[s]) {
            ++res.collapsed;
            continue;
        }
        // Ordered reduction, scaled to the batch mean.
        auto git = [&](auto&& fn) { grads[s].for_each_layer(fn); };
        std::size_t cursor = 0;
        std::vector<std::vector<T>*> dst;
        grad.for_each_layer([&](ConvLayer<T>& l) {
            dst.push_back(&l.w);
            dst.push_back(&l.b);
        });
        git([&](ConvLayer<T>& l) {
            for (std::size_t i = 0; i < l.w.size(); ++i)
                (*dst[cursor])[i] += l.w[i] / T(bs);
            ++cursor;
            for (std::size_t i = 0; i < l.b.size(); ++i)
                (*dst[cursor])[i] += l.b[i] / T(bs);
            ++cursor;
        });
    }
    res.mean_loss /= bs;
    return res;
}

struct TrainHistory {
    std::vector<double> train_loss;  // per epoch
    std::vector<double> val_loss;    // per epoch (NaN when no split)
    int best_epoch = -1;
    int collapsed_samples = 0;
    bool aborted = false;
};

/// ADAM training over shuffled mini-batches with a held-out 5% validation
/// split; returns the weights from the best validation epoch. Deterministic
/// under a fixed config seed.
template <class T>
std::pair<ModelWeightsT<T>, TrainHistory> train(const ModelWeightsT<T>& w0,
                                                const TrainingSet& dataset,
                                                const SparseMatrix& a, int nx,
                                                int ny, int nz,
                                                const TrainConfig& cfg) {
    TrainHistory hist;
    if (cfg.epochs == 0) return {w0, hist};
    if (cfg.learning_rate <= 0.0)
        throw std::invalid_argument("learning_rate must be positive");
    const int total = static_cast<int>(dataset.vectors.size());
    if (total == 0) throw std::invalid_argument("empty dataset");

    std::vector<int> order(total);
    std::iota(order.begin(), order.end(), 0);
    {
        auto eng = make_engine(cfg.seed, "train/split");
        std::shuffle(order.begin(), order.end(), eng);
    }
    const int val_n = total / 20;
    std::vector<int> val_idx(order.begin(), order.begin() + val_n);
    std::vector<int> train_idx(order.begin() + val_n, order.end());

    ModelWeightsT<T> w = w0;
    ModelWeightsT<T> best = w0;
    double best_val = std::numeric_limits<double>::infinity();

    // Flattened ADAM state aligned with for_each_layer order.
    std::vector<std::vector<double>> mom, vel;
    w.for_each_layer([&](ConvLayer<T>& l) {
        mom.emplace_back(l.w.size(), 0.0);
        mom.emplace_back(l.b.size(), 0.0);
        vel.emplace_back(l.w.size(), 0.0);
        vel.emplace_back(l.b.size(), 0.0);
    });
    long step = 0;

    auto eval_val = [&](const ModelWeightsT<T>& model) {
        if (val_idx.empty()) return std::numeric_limits<double>::quiet_NaN();
        double sum = 0.0;
        for (int idx : val_idx) {
            try {
                sum += loss(model, a, dataset.vectors[idx], nx, ny, nz);
            } catch (const CollapsedOutput&) {
                sum += norm2(dataset.vectors[idx]);
            }
        }
        return sum / static_cast<double>(val_idx.size());
    };

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto eng = make_engine(cfg.seed ^ static_cast<std::uint64_t>(epoch + 1),
                               "train/shuffle");
        std::vector<int> idx = train_idx;
        std::shuffle(idx.begin(), idx.end(), eng);

        double epoch_loss = 0.0;
        long epoch_samples = 0;
        int epoch_collapsed = 0;
        bool nan_abort = false;
        for (std::size_t start = 0; start < idx.size();
             start += cfg.batch_size) {
            const std::size_t end = std::min(idx.size(), start + cfg.batch_size);
            std::vector<const std::vector<double>*> batch;
            for (std::size_t s = start; s < end; ++s)
                batch.push_back(&dataset.vectors[idx[s]]);
            ModelWeightsT<T> grad;
            const BatchResult br =
                batch_backward(w, a, batch, nx, ny, nz, grad);
            if (!std::isfinite(br.mean_loss)) {
                nan_abort = true;
                break;
            }
            epoch_loss += br.mean_loss * static_cast<double>(batch.size());
            epoch_samples += static_cast<long>(batch.size());
            epoch_collapsed += br.collapsed;

            ++step;
            const double bc1 = 1.0 - std::pow(cfg.beta1, step);
            const double bc2 = 1.0 - std::pow(cfg.beta2, step);
            std::size_t slot = 0;
            std::vector<std::vector<T>*> params, gslices;
            w.for_each_layer([&](ConvLayer<T>& l) {
                params.push_back(&l.w);
                params.push_back(&l.b);
            });
            grad.for_each_layer([&](ConvLayer<T>& l) {
                gslices.push_back(&l.w);
                gslices.push_back(&l.b);
            });
            for (slot = 0; slot < params.size(); ++slot) {
                auto& p = *params[slot];
                auto& g = *gslices[slot];
                auto& mo = mom[slot];
                auto& ve = vel[slot];
                for (std::size_t i = 0; i < p.size(); ++i) {
                    const double gi = static_cast<double>(g[i]);
                    mo[i] = cfg.beta1 * mo[i] + (1.0 - cfg.beta1) * gi;
                    ve[i] = cfg.beta2 * ve[i] + (1.0 - cfg.beta2) * gi * gi;
                    const double mhat = mo[i] / bc1;
                    const double vhat = ve[i] / bc2;
                    p[i] -= static_cast<T>(cfg.learning_rate * mhat /
                                           (std::sqrt(vhat) + cfg.epsilon));
                }
            }
        }
        if (nan_abort) {
            hist.aborted = true;
            break;
        }
        hist.collapsed_samples += epoch_collapsed;
        hist.train_loss.push_back(epoch_loss /
                                  static_cast<double>(epoch_samples));
        const double vl = eval_val(w);
        hist.val_loss.push_back(vl);
        const double selector = val_idx.empty() ? hist.train_loss.back() : vl;
        if (selector < best_val) {
            best_val = selector;
            best = w;
            hist.best_epoch = epoch;
        }
        if (epoch_collapsed >
            std::max<long>(1, epoch_samples / 100)) {
            hist.aborted = true;
            break;
        }
    }
    if (hist.best_epoch < 0) return {w0, hist};
    return {best, hist};
}

/// Wrap the model as a direction oracle for dcdm. Boundary cells of the
/// domain are zeroed on output; the network itself sees the full grid.
template <class T>
DirectionOracle as_oracle(const ModelWeightsT<T>& m, const VoxelDomain& domain) {
    auto model = std::make_shared<ModelWeightsT<T>>(m);
    auto dom = std::make_shared<VoxelDomain>(domain);
    return [model, dom](const std::vector<double>& r) {
        const Tensor4<T> in =
            detail::to_tensor<T>(r, dom->nx, dom->ny, dom->nz);
        const Tensor4<T> out = forward(*model, in);
        std::vector<double> d = detail::to_vector(out);
        for (std::size_t i = 0; i < d.size(); ++i)
            if (dom->labels[i] == CellLabel::Boundary) d[i] = 0.0;
        return d;
    };
}

} // namespace dcdm

#endif
