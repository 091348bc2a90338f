#ifndef DCDM_DCDM_HPP
#define DCDM_DCDM_HPP

#include "dcdm/bench.hpp"
#include "dcdm/fluid.hpp"
#include "dcdm/lanczos.hpp"
#include "dcdm/network.hpp"
#include "dcdm/poisson.hpp"
#include "dcdm/rng.hpp"
#include "dcdm/solvers.hpp"
#include "dcdm/sparse_matrix.hpp"
#include "dcdm/tensor.hpp"
#include "dcdm/training.hpp"
#include "dcdm/training_data.hpp"
#include "dcdm/voxel_domain.hpp"

#endif
