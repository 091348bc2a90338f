#ifndef DCDM_TRAINING_DATA_HPP
#define DCDM_TRAINING_DATA_HPP

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dcdm/lanczos.hpp"
#include "dcdm/rng.hpp"
#include "dcdm/sparse_matrix.hpp"

namespace dcdm {

struct TrainingSet {
    std::vector<std::vector<double>> vectors;  // unit-norm, in span(A)
    int m = 0;
    int theta = 0;
    std::uint64_t seed = 0;
    int nx = 0, ny = 0, nz = 0;
};

/// Draw training vectors b^i = sum_j c_j q_j / ||.|| with coefficients
/// N(0,1), amplified 9x inside the band [j_tilde, m/2 + theta]. j_tilde is
/// the first index whose Ritz value exceeds 1e-8 * lambda_max. Each vector
/// uses its own substream (seed, i), so generation order and thread count
/// never change the output.
inline TrainingSet sample_training_vectors(const RitzBasis& basis, int count,
                                           int theta, std::uint64_t seed) {
    if (count < 1) throw std::invalid_argument("count must be >= 1");
    if (theta < 0) throw std::invalid_argument("theta must be >= 0");
    const int m = basis.m();
    const int n = static_cast<int>(basis.q.front().size());
    const double lambda_max = basis.lambdas.back();
    const double tol_null = 1e-8 * lambda_max;
    int j_tilde = -1;
    for (int j = 0; j < m; ++j) {
        if (basis.lambdas[j] > tol_null) {
            j_tilde = j;
            break;
        }
    }
    if (j_tilde < 0) throw NoPositiveSpectrum();
    const int band_hi = m / 2 + theta;

    TrainingSet set;
    set.vectors.assign(count, {});
    set.m = m;
    set.theta = theta;
    set.seed = seed;
    const std::uint64_t base = substream_seed(seed, "training/coeffs");
#pragma omp parallel for schedule(static)
    for (int i = 0; i < count; ++i) {
        std::mt19937_64 eng(splitmix64(base ^ static_cast<std::uint64_t>(i)));
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::vector<double> b(n, 0.0);
        for (int j = 0; j < m; ++j) {
            double c = gauss(eng);
            if (j >= j_tilde && j <= band_hi) c *= 9.0;
            axpy(c, basis.q[j], b);
        }
        const double nrm = norm2(b);
        for (double& v : b) v /= nrm;
        set.vectors[i] = std::move(b);
    }
    return set;
}

// Dataset file: "DCDS", u32 version=1, u32 count, u32 n, count*n f32
// little-endian, then a trailing key=value text block.
inline void save_training_set(const TrainingSet& set, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os.write("DCDS", 4);
    const std::uint32_t version = 1;
    const std::uint32_t count = static_cast<std::uint32_t>(set.vectors.size());
    const std::uint32_t n = static_cast<std::uint32_t>(set.vectors.front().size());
    os.write(reinterpret_cast<const char*>(&version), 4);
    os.write(reinterpret_cast<const char*>(&count), 4);
    os.write(reinterpret_cast<const char*>(&n), 4);
    std::vector<float> row(n);
    for (const auto& v : set.vectors) {
        for (std::uint32_t i = 0; i < n; ++i) row[i] = static_cast<float>(v[i]);
        os.write(reinterpret_cast<const char*>(row.data()), 4l * n);
    }
    std::ostringstream meta;
    meta << "m=" << set.m << "\n"
         << "theta=" << set.theta << "\n"
         << "seed=" << set.seed << "\n"
         << "dims=" << set.nx << "x" << set.ny << "x" << set.nz << "\n";
    const std::string text = meta.str();
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!os) throw std::runtime_error("write failure: " + path);
}

inline TrainingSet load_training_set(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "DCDS", 4) != 0)
        throw std::runtime_error("malformed header: bad magic");
    std::uint32_t version = 0, count = 0, n = 0;
    is.read(reinterpret_cast<char*>(&version), 4);
    is.read(reinterpret_cast<char*>(&count), 4);
    is.read(reinterpret_cast<char*>(&n), 4);
    if (!is || version != 1) throw std::runtime_error("malformed header");
    if (count == 0 || n == 0) throw std::runtime_error("invalid dims");
    TrainingSet set;
    set.vectors.assign(count, std::vector<double>(n));
    std::vector<float> row(n);
    for (std::uint32_t i = 0; i < count; ++i) {
        is.read(reinterpret_cast<char*>(row.data()), 4l * n);
        if (static_cast<std::size_t>(is.gcount()) != 4ul * n)
            throw std::runtime_error("truncated payload");
        for (std::uint32_t j = 0; j < n; ++j) set.vectors[i][j] = row[j];
    }
    std::string line;
    while (std::getline(is, line)) {
        const auto pos = line.find('=');
        if (pos == std::string::npos) continue;
        const std::string key = line.substr(0, pos);
        const std::string val = line.substr(pos + 1);
        if (key == "m") set.m = std::stoi(val);
        else if (key == "theta") set.theta = std::stoi(val);
        else if (key == "seed") set.seed = std::stoull(val);
        else if (key == "dims")
            std::sscanf(val.c_str(), "%dx%dx%d", &set.nx, &set.ny, &set.nz);
    }
    return set;
}

} // namespace dcdm

#endif
