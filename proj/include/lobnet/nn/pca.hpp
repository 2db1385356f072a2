#pragma once

#include "lobnet/nn/tensor.hpp"

#include <span>
#include <vector>

namespace lobnet::nn {

struct PcaModel {
    std::vector<double> mean;                 // d
    Tensor components;                        // m x d, orthonormal rows
    std::vector<double> explained_variance;   // m, descending
    std::vector<double> explained_ratio;      // m, fraction of total variance
    std::size_t informative = 0;              // eigenvalues above tolerance
    bool rank_deficient = false;              // informative < requested

    std::size_t input_dim() const noexcept { return mean.size(); }
    std::size_t output_dim() const noexcept { return components.rows(); }

    void transform(std::span<const double> x, std::span<double> out) const;
    std::vector<double> transform(std::span<const double> x) const;
    /// Row-wise transform of an n x d matrix.
    Tensor transform(const Tensor& x) const;

    std::size_t forward_flops() const noexcept { return components.size(); }
};

struct PcaOptions {
    /// Eigenvalues <= tolerance * largest count as uninformative.
    double rank_tolerance = 1e-10;
    /// Return exactly the requested number of components even when some
    /// are uninformative (they are still orthonormal). Otherwise return
    /// only the informative ones.
    bool pad_to_requested = false;
};

/// Principal components of the sample covariance of `x` (n x d, n >= 2),
/// ordered by explained variance. Each component's sign is fixed so that its
/// largest-magnitude entry is positive.
PcaModel pca_fit(const Tensor& x, std::size_t components, PcaOptions options = {});

}  // namespace lobnet::nn
