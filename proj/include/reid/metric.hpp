#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <zlib.h>

#include "reid/error.hpp"
#include "reid/image_io.hpp"

namespace reid {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---------------------------------------------------------------------------
// PCA

struct PcaModel {
    VectorXd mean;           // d
    MatrixXd components;     // p x d, orthonormal rows, descending variance
    VectorXd variances;      // p eigenvalues of the sample covariance
    std::size_t requested_p = 0;

    std::size_t input_dim() const noexcept { return static_cast<std::size_t>(mean.size()); }
    std::size_t output_dim() const noexcept { return static_cast<std::size_t>(components.rows()); }
    /// True when the data rank forced fewer components than requested.
    bool rank_reduced() const noexcept { return output_dim() < requested_p; }
};

/// Fits PCA to the rows of `samples` (n x d).
///
/// Components come from a thin SVD of the centred data; eigenvalues are
/// sigma^2 / (n - 1). If the centred data has rank below `p`, the model keeps
/// only the rank-many components and `rank_reduced()` reports it. Each
/// component's largest-magnitude entry is made positive.
inline PcaModel fit_pca(const MatrixXd& samples, std::size_t p) {
    const auto n = samples.rows();
    const auto d = samples.cols();
    if (n < 2) throw InvalidArgument("PCA needs at least 2 samples");
    if (p < 1) throw InvalidArgument("PCA target dimension must be >= 1");

    PcaModel model;
    model.requested_p = p;
    model.mean = samples.colwise().mean().transpose();
    const MatrixXd centered = samples.rowwise() - model.mean.transpose();

    Eigen::BDCSVD<MatrixXd> svd(centered, Eigen::ComputeThinV);
    const VectorXd& sigma = svd.singularValues();
    const double tol = sigma.size() > 0 ? sigma(0) * 1e-10 * static_cast<double>(std::max(n, d)) : 0.0;
    Eigen::Index rank = 0;
    while (rank < sigma.size() && sigma(rank) > tol) ++rank;
    if (rank == 0) throw SingularCovariance("PCA input has zero variance");

    const Eigen::Index keep = std::min<Eigen::Index>(static_cast<Eigen::Index>(p), rank);
    model.components = svd.matrixV().leftCols(keep).transpose();
    model.variances = sigma.head(keep).array().square() / static_cast<double>(n - 1);
    for (Eigen::Index r = 0; r < keep; ++r) {
        Eigen::Index arg = 0;
        model.components.row(r).cwiseAbs().maxCoeff(&arg);
        if (model.components(r, arg) < 0) model.components.row(r) *= -1.0;
    }
    return model;
}

inline VectorXd project(const PcaModel& model, const VectorXd& v) {
    if (v.size() != model.mean.size()) {
        throw DimMismatch("projecting a " + std::to_string(v.size()) + "-d vector with a " +
                          std::to_string(model.mean.size()) + "-d PCA model");
    }
    return model.components * (v - model.mean);
}

/// Projects every row of `samples`; returns n x p.
inline MatrixXd project_rows(const PcaModel& model, const MatrixXd& samples) {
    if (samples.cols() != model.mean.size()) {
        throw DimMismatch("projecting " + std::to_string(samples.cols()) + "-d rows with a " +
                          std::to_string(model.mean.size()) + "-d PCA model");
    }
    return (samples.rowwise() - model.mean.transpose()) * model.components.transpose();
}

// ---------------------------------------------------------------------------
// KISSME

struct MahalanobisModel {
    MatrixXd M;

    std::size_t dim() const noexcept { return static_cast<std::size_t>(M.rows()); }
    static MahalanobisModel identity(std::size_t p) { return {MatrixXd::Identity(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p))}; }
};

/// Index pairs into the rows of `points`.
struct PairSet {
    MatrixXd points;
    std::vector<std::pair<std::size_t, std::size_t>> similar;
    std::vector<std::pair<std::size_t, std::size_t>> dissimilar;
};

inline constexpr double kKissmeShrinkage = 1e-4;

namespace detail {

inline MatrixXd pair_scatter(const MatrixXd& points, std::span<const std::pair<std::size_t, std::size_t>> pairs) {
    const auto p = points.cols();
    MatrixXd diffs(static_cast<Eigen::Index>(pairs.size()), p);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto [a, b] = pairs[i];
        if (a >= static_cast<std::size_t>(points.rows()) || b >= static_cast<std::size_t>(points.rows())) {
            throw InvalidArgument("pair index out of range");
        }
        diffs.row(static_cast<Eigen::Index>(i)) = points.row(static_cast<Eigen::Index>(a)) - points.row(static_cast<Eigen::Index>(b));
    }
    return (diffs.transpose() * diffs) / static_cast<double>(pairs.size());
}

inline MatrixXd regularized_inverse(MatrixXd sigma, const char* which) {
    const auto p = sigma.rows();
    const double trace = sigma.trace();
    if (!(trace > 0.0) || !std::isfinite(trace)) {
        throw SingularCovariance(std::string(which) + " pair covariance has zero trace");
    }
    sigma.diagonal().array() += kKissmeShrinkage * trace / static_cast<double>(p);
    Eigen::LLT<MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) {
        throw SingularCovariance(std::string(which) + " pair covariance is not positive definite");
    }
    return llt.solve(MatrixXd::Identity(p, p));
}

}  // namespace detail

/// M = PSD part of (Sigma_S^-1 - Sigma_D^-1), each covariance shrunk by
/// (1e-4 * trace / p) I before inversion. Negative eigenvalues are clipped to 0.
inline MahalanobisModel kissme_from_covariances(const MatrixXd& sigma_similar, const MatrixXd& sigma_dissimilar) {
    if (sigma_similar.rows() != sigma_dissimilar.rows() || sigma_similar.rows() != sigma_similar.cols() ||
        sigma_dissimilar.rows() != sigma_dissimilar.cols()) {
        throw DimMismatch("KISSME covariances must be square and of equal size");
    }
    MatrixXd m0 = detail::regularized_inverse(sigma_similar, "similar") -
                  detail::regularized_inverse(sigma_dissimilar, "dissimilar");
    m0 = 0.5 * (m0 + m0.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(m0);
    const VectorXd clipped = eig.eigenvalues().cwiseMax(0.0);
    MatrixXd m = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
    m = 0.5 * (m + m.transpose());
    return {std::move(m)};
}

/// Sigma_S and Sigma_D are second moments of the pair differences
/// (1/m) sum (a - b)(a - b)^T over the similar and dissimilar pairs.
inline MahalanobisModel fit_kissme(const PairSet& pairs) {
    if (pairs.similar.empty() || pairs.dissimilar.empty()) {
        throw InsufficientPairs("KISSME needs similar and dissimilar pairs (got " +
                                std::to_string(pairs.similar.size()) + " and " +
                                std::to_string(pairs.dissimilar.size()) + ")");
    }
    auto normalized = [](std::pair<std::size_t, std::size_t> pr) {
        return std::minmax(pr.first, pr.second);
    };
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (const auto& pr : pairs.similar) seen.insert(normalized(pr));
    for (const auto& pr : pairs.dissimilar) {
        if (seen.count(normalized(pr))) {
            throw InvalidArgument("pair (" + std::to_string(pr.first) + "," + std::to_string(pr.second) +
                                  ") is both similar and dissimilar");
        }
    }
    return kissme_from_covariances(detail::pair_scatter(pairs.points, pairs.similar),
                                   detail::pair_scatter(pairs.points, pairs.dissimilar));
}

inline double maha_dist(const MahalanobisModel& model, const VectorXd& a, const VectorXd& b) {
    if (a.size() != model.M.rows() || b.size() != model.M.rows()) {
        throw DimMismatch("Mahalanobis model is " + std::to_string(model.M.rows()) + "-d, vectors are " +
                          std::to_string(a.size()) + "-d and " + std::to_string(b.size()) + "-d");
    }
    const VectorXd diff = a - b;
    return std::sqrt(std::max(0.0, diff.dot(model.M * diff)));
}

inline double euclidean_dist(const VectorXd& a, const VectorXd& b) {
    if (a.size() != b.size()) {
        throw DimMismatch("vectors are " + std::to_string(a.size()) + "-d and " + std::to_string(b.size()) + "-d");
    }
    return (a - b).norm();
}

// ---------------------------------------------------------------------------
// Set-to-set distances

enum class SetMeasure { min, avg };

inline std::string to_string(SetMeasure m) { return m == SetMeasure::min ? "min" : "avg"; }

inline SetMeasure parse_measure(const std::string& name) {
    if (name == "min") return SetMeasure::min;
    if (name == "avg") return SetMeasure::avg;
    throw InvalidArgument("unknown set measure '" + name + "'");
}

/// d_min: smallest distance over all cross pairs.
template <class T, class Dist>
double set_distance_min(std::span<const T> x, std::span<const T> y, Dist&& dist) {
    if (x.empty() || y.empty()) throw EmptySet("set distance needs two nonempty sets");
    double best = std::numeric_limits<double>::infinity();
    for (const auto& xi : x) {
        for (const auto& yj : y) best = std::min(best, static_cast<double>(dist(xi, yj)));
    }
    return best;
}

/// d_avg: sum_i min_j d(x_i, y_j) / (2 n_x) + sum_j min_i d(x_i, y_j) / (2 n_y).
template <class T, class Dist>
double set_distance_avg(std::span<const T> x, std::span<const T> y, Dist&& dist) {
    if (x.empty() || y.empty()) throw EmptySet("set distance needs two nonempty sets");
    std::vector<double> row_min(x.size(), std::numeric_limits<double>::infinity());
    std::vector<double> col_min(y.size(), std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = 0; j < y.size(); ++j) {
            const double d = static_cast<double>(dist(x[i], y[j]));
            row_min[i] = std::min(row_min[i], d);
            col_min[j] = std::min(col_min[j], d);
        }
    }
    double sx = 0.0;
    double sy = 0.0;
    for (double v : row_min) sx += v;
    for (double v : col_min) sy += v;
    return sx / (2.0 * static_cast<double>(x.size())) + sy / (2.0 * static_cast<double>(y.size()));
}

template <class T, class Dist>
double set_distance(SetMeasure measure, std::span<const T> x, std::span<const T> y, Dist&& dist) {
    return measure == SetMeasure::min ? set_distance_min(x, y, dist) : set_distance_avg(x, y, dist);
}

// ---------------------------------------------------------------------------
// Model file: "RDM1", u32 p, u32 d, mean[d], components[p*d] (row-major),
// M[p*p] (row-major) as little-endian f64, then CRC-32 (u32 LE) of every
// preceding byte.

struct MetricModel {
    PcaModel pca;
    MahalanobisModel maha;
};

namespace detail {

inline void put_f64(std::string& buf, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

inline double get_f64(const unsigned char* p) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

inline void put_le32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint32_t get_le32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint32_t crc32_of(const void* data, std::size_t size) {
    return static_cast<std::uint32_t>(::crc32(::crc32(0L, Z_NULL, 0), static_cast<const Bytef*>(data),
                                              static_cast<uInt>(size)));
}

}  // namespace detail

inline std::string encode_model(const MetricModel& model) {
    const auto p = model.pca.components.rows();
    const auto d = model.pca.components.cols();
    if (model.pca.mean.size() != d || model.maha.M.rows() != p || model.maha.M.cols() != p) {
        throw DimMismatch("model parts disagree on dimensions");
    }
    std::string buf = "RDM1";
    detail::put_le32(buf, static_cast<std::uint32_t>(p));
    detail::put_le32(buf, static_cast<std::uint32_t>(d));
    for (Eigen::Index i = 0; i < d; ++i) detail::put_f64(buf, model.pca.mean(i));
    for (Eigen::Index r = 0; r < p; ++r) {
        for (Eigen::Index c = 0; c < d; ++c) detail::put_f64(buf, model.pca.components(r, c));
    }
    for (Eigen::Index r = 0; r < p; ++r) {
        for (Eigen::Index c = 0; c < p; ++c) detail::put_f64(buf, model.maha.M(r, c));
    }
    detail::put_le32(buf, detail::crc32_of(buf.data(), buf.size()));
    return buf;
}

inline MetricModel decode_model(std::span<const unsigned char> bytes, const std::string& name = "model") {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), "RDM1", 4) != 0) {
        throw FormatError(name + ": missing RDM1 header");
    }
    const std::uint32_t stored = detail::get_le32(bytes.data() + bytes.size() - 4);
    if (stored != detail::crc32_of(bytes.data(), bytes.size() - 4)) {
        throw ChecksumMismatch(name + ": CRC-32 mismatch");
    }
    const std::uint32_t p = detail::get_le32(bytes.data() + 4);
    const std::uint32_t d = detail::get_le32(bytes.data() + 8);
    const std::uint64_t expected = 12 + 8ULL * (d + static_cast<std::uint64_t>(p) * d + static_cast<std::uint64_t>(p) * p) + 4;
    if (bytes.size() != expected) {
        throw FormatError(name + ": size " + std::to_string(bytes.size()) + ", header implies " + std::to_string(expected));
    }
    MetricModel model;
    const unsigned char* q = bytes.data() + 12;
    model.pca.mean.resize(d);
    for (std::uint32_t i = 0; i < d; ++i, q += 8) model.pca.mean(i) = detail::get_f64(q);
    model.pca.components.resize(p, d);
    for (std::uint32_t r = 0; r < p; ++r) {
        for (std::uint32_t c = 0; c < d; ++c, q += 8) model.pca.components(r, c) = detail::get_f64(q);
    }
    model.maha.M.resize(p, p);
    for (std::uint32_t r = 0; r < p; ++r) {
        for (std::uint32_t c = 0; c < p; ++c, q += 8) model.maha.M(r, c) = detail::get_f64(q);
    }
    model.pca.requested_p = p;
    return model;
}

inline void write_model(const std::filesystem::path& path, const MetricModel& model) {
    const std::string buf = encode_model(model);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("IoError", "cannot write " + path.string());
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

inline MetricModel read_model(const std::filesystem::path& path) {
    const auto bytes = detail::read_file_bytes(path);
    return decode_model(bytes, path.string());
}

}  // namespace reid
