#include "lobnet/nn/pca.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace lobnet::nn {

void PcaModel::transform(std::span<const double> x, std::span<double> out) const {
    const std::size_t d = input_dim();
    const std::size_t m = output_dim();
    if (x.size() != d || out.size() != m) throw Error(Errc::ShapeMismatch, "pca transform dimension mismatch");
    for (std::size_t k = 0; k < m; ++k) {
        const auto comp = components.row(k);
        double acc = 0.0;
        for (std::size_t j = 0; j < d; ++j) acc += comp[j] * (x[j] - mean[j]);
        out[k] = acc;
    }
}

std::vector<double> PcaModel::transform(std::span<const double> x) const {
    std::vector<double> out(output_dim());
    transform(x, out);
    return out;
}

Tensor PcaModel::transform(const Tensor& x) const {
    Tensor out = Tensor::matrix(x.rows(), output_dim());
    for (std::size_t r = 0; r < x.rows(); ++r) transform(x.row(r), out.row(r));
    return out;
}

PcaModel pca_fit(const Tensor& x, std::size_t components, PcaOptions options) {
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    if (n < 2) throw Error(Errc::PreconditionViolation, "pca needs at least 2 rows");
    if (components == 0 || components > d) throw Error(Errc::BadLayout, "pca component count must be in [1, d]");

    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const RowMajor> data(x.data().data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    const Eigen::RowVectorXd mean = data.colwise().mean();
    const Eigen::MatrixXd centered = data.rowwise() - mean;
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) throw Error(Errc::RankDeficient, "covariance eigendecomposition failed");
    // Eigen returns ascending eigenvalues.
    const Eigen::VectorXd values = solver.eigenvalues().reverse();
    const Eigen::MatrixXd vectors = solver.eigenvectors().rowwise().reverse();

    const double total = std::max(values.sum(), 0.0);
    const double largest = std::max(values(0), 0.0);
    std::size_t informative = 0;
    for (Eigen::Index k = 0; k < values.size(); ++k) {
        if (values(k) > options.rank_tolerance * largest && values(k) > 0.0) ++informative;
    }

    PcaModel model;
    model.mean.assign(mean.data(), mean.data() + d);
    model.informative = informative;
    model.rank_deficient = informative < components;
    const std::size_t keep = options.pad_to_requested ? components : std::min(components, informative);
    model.components = Tensor::matrix(keep, d);
    for (std::size_t k = 0; k < keep; ++k) {
        Eigen::VectorXd v = vectors.col(static_cast<Eigen::Index>(k));
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0.0) v = -v;
        for (std::size_t j = 0; j < d; ++j) model.components(k, j) = v(static_cast<Eigen::Index>(j));
        const double ev = std::max(values(static_cast<Eigen::Index>(k)), 0.0);
        model.explained_variance.push_back(ev);
        model.explained_ratio.push_back(total > 0.0 ? ev / total : 0.0);
    }
    return model;
}

}  // namespace lobnet::nn
