#include "arcade/pca.hpp"

#include <Eigen/Dense>

#include "arcade/errors.hpp"

namespace arcade::train {

int latent_dim_from_pca(const Tensor& samples, double threshold) {
  if (samples.rank() != 2) throw ContractError("latent_dim_from_pca: [N,w] required");
  const std::int64_t n = samples.dim(0), w = samples.dim(1);
  if (n < 2) throw ContractError("latent_dim_from_pca: need at least 2 samples");
  if (threshold <= 0.0 || threshold > 1.0)
    throw ConfigError("latent_dim_from_pca: threshold must be in (0,1]");

  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
      x(samples.data(), n, w);
  Eigen::RowVectorXd mean = x.colwise().mean();
  Eigen::MatrixXd centered = x.rowwise() - mean;
  Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("latent_dim_from_pca: eigendecomposition failed");
  Eigen::VectorXd ev = es.eigenvalues();  // ascending

  double total = 0.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) total += std::max(ev[i], 0.0);
  if (total <= 0.0) return 1;  // all samples identical

  double acc = 0.0;
  int d = 0;
  for (Eigen::Index i = ev.size() - 1; i >= 0; --i) {
    acc += std::max(ev[i], 0.0);
    ++d;
    if (acc >= threshold * total) break;
  }
  return d;
}

}  // namespace arcade::train
