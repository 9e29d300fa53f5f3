#pragma once

#include <cstdint>

#include "arcade/tensor.hpp"

namespace arcade::train {

// Smallest d such that the top-d principal components of the sample matrix
// capture at least `threshold` of the total variance.
int latent_dim_from_pca(const Tensor& samples, double threshold = 0.95);

}  // namespace arcade::train
