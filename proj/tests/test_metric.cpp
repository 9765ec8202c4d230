#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "reid/metric.hpp"
#include "reid/rng.hpp"
#include "support.hpp"

using namespace reid;
using reid::test::TempDir;

namespace {

MatrixXd random_matrix(RngHandle& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
    MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = scale * rng.normal();
    }
    return m;
}

VectorXd random_vec(RngHandle& rng, Eigen::Index d, double scale = 1.0) {
    VectorXd v(d);
    for (Eigen::Index i = 0; i < d; ++i) v(i) = scale * rng.normal();
    return v;
}

// Plain enumeration of all cross pairs, written without shared helpers.
double oracle_min(const std::vector<VectorXd>& x, const std::vector<VectorXd>& y) {
    double best = INFINITY;
    for (const auto& a : x) {
        for (const auto& b : y) best = std::min(best, std::sqrt((a - b).squaredNorm()));
    }
    return best;
}

double oracle_avg(const std::vector<VectorXd>& x, const std::vector<VectorXd>& y) {
    double sx = 0, sy = 0;
    for (const auto& a : x) {
        double m = INFINITY;
        for (const auto& b : y) m = std::min(m, std::sqrt((a - b).squaredNorm()));
        sx += m;
    }
    for (const auto& b : y) {
        double m = INFINITY;
        for (const auto& a : x) m = std::min(m, std::sqrt((a - b).squaredNorm()));
        sy += m;
    }
    return sx / (2.0 * static_cast<double>(x.size())) + sy / (2.0 * static_cast<double>(y.size()));
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

MetricModel random_model(RngHandle& rng, Eigen::Index p, Eigen::Index d) {
    MetricModel m;
    m.pca.mean = random_vec(rng, d);
    m.pca.components = random_matrix(rng, p, d);
    m.maha.M = random_matrix(rng, p, p);
    return m;
}

}  // namespace

// --- pca ---------------------------------------------------------------

TEST(Pca, MatchesCovarianceEigendecomposition) {
    RngHandle rng(1);
    const MatrixXd mix = random_matrix(rng, 6, 6);
    const MatrixXd x = random_matrix(rng, 200, 6) * mix + MatrixXd::Constant(200, 6, 3.0);
    const PcaModel m = fit_pca(x, 4);
    ASSERT_EQ(m.output_dim(), 4u);
    EXPECT_FALSE(m.rank_reduced());

    // Oracle: eigendecomposition of the (n-1)-normalized covariance.
    const VectorXd mean = x.colwise().mean();
    const MatrixXd c = x.rowwise() - mean.transpose();
    const MatrixXd cov = c.transpose() * c / 199.0;
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(cov);
    for (int k = 0; k < 4; ++k) {
        const double lambda = eig.eigenvalues()(5 - k);
        VectorXd vec = eig.eigenvectors().col(5 - k);
        Eigen::Index arg;
        vec.cwiseAbs().maxCoeff(&arg);
        if (vec(arg) < 0) vec = -vec;
        EXPECT_LT(rel_err(m.variances(k), lambda), 1e-9);
        EXPECT_LT((m.components.row(k).transpose() - vec).norm(), 1e-7);
    }
    EXPECT_LT((m.components * m.components.transpose() - MatrixXd::Identity(4, 4)).norm(), 1e-10);
    EXPECT_LT((m.mean - mean).norm(), 1e-12);

    // Projected training data is decorrelated with the component variances.
    const MatrixXd y = project_rows(m, x);
    const MatrixXd ycov = y.transpose() * y / 199.0;
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            EXPECT_NEAR(ycov(i, j), i == j ? m.variances(i) : 0.0, 1e-9 * m.variances(0));
        }
    }
    const VectorXd v = x.row(17).transpose();
    EXPECT_LT((project(m, v) - y.row(17).transpose()).norm(), 1e-10);
}

TEST(Pca, RankReduction) {
    RngHandle rng(2);
    const MatrixXd x = random_matrix(rng, 5, 10);
    const PcaModel m = fit_pca(x, 8);
    EXPECT_EQ(m.output_dim(), 4u);  // 5 centred samples span 4 dimensions
    EXPECT_TRUE(m.rank_reduced());
    EXPECT_EQ(m.requested_p, 8u);
}

TEST(Pca, Errors) {
    RngHandle rng(3);
    EXPECT_THROW(fit_pca(random_matrix(rng, 1, 3), 2), InvalidArgument);
    EXPECT_THROW(fit_pca(MatrixXd::Constant(4, 3, 2.0), 2), SingularCovariance);
    const PcaModel m = fit_pca(random_matrix(rng, 10, 3), 2);
    EXPECT_THROW(project(m, VectorXd::Zero(4)), DimMismatch);
}

// --- kissme ------------------------------------------------------------

TEST(Kissme, IsotropicClosedForm) {
    // The worst of 25 entries is a noisy statistic at 1e4 pairs, so check the
    // per-entry 5% bound over several seeds, plus an unbiased mean diagonal.
    const int p = 5, n = 10000, seeds = 10;
    const double ss = 1.0, sd = 2.0;
    const double want = 1.0 / (ss * ss) - 1.0 / (sd * sd);
    int within = 0;
    double diag_sum = 0;
    for (int seed = 0; seed < seeds; ++seed) {
        RngHandle rng(static_cast<std::uint64_t>(seed));
        PairSet pairs;
        pairs.points.resize(4 * n, p);
        for (int i = 0; i < n; ++i) {
            const VectorXd a = random_vec(rng, p, 3.0);
            pairs.points.row(2 * i) = a.transpose();
            pairs.points.row(2 * i + 1) = (a + random_vec(rng, p, ss)).transpose();
            pairs.similar.emplace_back(2 * i, 2 * i + 1);
            const VectorXd b = random_vec(rng, p, 3.0);
            pairs.points.row(2 * n + 2 * i) = b.transpose();
            pairs.points.row(2 * n + 2 * i + 1) = (b + random_vec(rng, p, sd)).transpose();
            pairs.dissimilar.emplace_back(2 * n + 2 * i, 2 * n + 2 * i + 1);
        }
        const auto m = fit_kissme(pairs);
        const double worst = (m.M - want * MatrixXd::Identity(p, p)).cwiseAbs().maxCoeff();
        EXPECT_LT(worst, 0.08 * want) << seed;
        within += worst <= 0.05 * want;
        diag_sum += m.M.diagonal().mean();
    }
    EXPECT_GE(within, seeds - 1);
    EXPECT_NEAR(diag_sum / seeds, want, 0.01 * want);
}

TEST(Kissme, DiagonalMatchesHandInverse) {
    RngHandle rng(5);
    PairSet pairs;
    const int n = 2000;
    pairs.points.resize(4 * n, 2);
    for (int i = 0; i < n; ++i) {
        const VectorXd a = random_vec(rng, 2);
        pairs.points.row(2 * i) = a.transpose();
        pairs.points.row(2 * i + 1) = (a + VectorXd{{0.0, 0.1 * rng.normal()}}).transpose();
        pairs.similar.emplace_back(2 * i, 2 * i + 1);
        const VectorXd b = random_vec(rng, 2);
        pairs.points.row(2 * n + 2 * i) = b.transpose();
        pairs.points.row(2 * n + 2 * i + 1) = (b + random_vec(rng, 2)).transpose();
        pairs.dissimilar.emplace_back(2 * n + 2 * i, 2 * n + 2 * i + 1);
    }
    // Oracle: second moments by hand, shrink, invert 2x2, clip.
    auto moments = [&](const auto& list) {
        double s00 = 0, s01 = 0, s11 = 0;
        for (auto [a, b] : list) {
            const double d0 = pairs.points(a, 0) - pairs.points(b, 0);
            const double d1 = pairs.points(a, 1) - pairs.points(b, 1);
            s00 += d0 * d0;
            s01 += d0 * d1;
            s11 += d1 * d1;
        }
        const double k = static_cast<double>(list.size());
        double m00 = s00 / k, m01 = s01 / k, m11 = s11 / k;
        const double shrink = 1e-4 * (m00 + m11) / 2;
        m00 += shrink;
        m11 += shrink;
        const double det = m00 * m11 - m01 * m01;
        return std::array<double, 3>{m11 / det, -m01 / det, m00 / det};
    };
    const auto is = moments(pairs.similar);
    const auto id = moments(pairs.dissimilar);
    const double a = is[0] - id[0], b = is[1] - id[1], c = is[2] - id[2];
    const double tr = a + c, disc = std::sqrt((a - c) * (a - c) / 4 + b * b);
    ASSERT_GT(tr / 2 - disc, 0.0);  // already PSD here, so clipping is a no-op
    const auto m = fit_kissme(pairs);
    EXPECT_LT(rel_err(m.M(0, 0), a), 1e-8);
    EXPECT_LT(rel_err(m.M(1, 1), c), 1e-8);
    EXPECT_NEAR(m.M(0, 1), b, 1e-8 * std::abs(a));
    // Along the similar-pair axis the learned distance is sqrt(M11) times Euclidean.
    const VectorXd u{{0.0, 1.0}};
    EXPECT_NEAR(maha_dist(m, VectorXd::Zero(2), u) / euclidean_dist(VectorXd::Zero(2), u), std::sqrt(c), 1e-9);
    EXPECT_GT(std::sqrt(c), 9.0);
}

TEST(Kissme, PsdAndSymmetricOnRandomPairs) {
    RngHandle rng(6);
    for (int t = 0; t < 50; ++t) {
        const Eigen::Index p = 2 + static_cast<Eigen::Index>(rng.uniform_index(6));
        PairSet pairs;
        pairs.points = random_matrix(rng, 40, p);
        for (std::size_t i = 0; i < 20; ++i) pairs.similar.emplace_back(i, (i + 1) % 20);
        for (std::size_t i = 0; i < 20; ++i) pairs.dissimilar.emplace_back(i, 20 + i);
        const auto m = fit_kissme(pairs);
        EXPECT_LT((m.M - m.M.transpose()).cwiseAbs().maxCoeff(), 1e-10);
        Eigen::SelfAdjointEigenSolver<MatrixXd> eig(m.M);
        EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-10);
        for (int k = 0; k < 20; ++k) {
            const VectorXd v = random_vec(rng, p);
            EXPECT_GE(v.dot(m.M * v), -1e-9 * v.squaredNorm());
        }
    }
}

TEST(Kissme, Errors) {
    PairSet pairs;
    pairs.points = MatrixXd::Identity(3, 3);
    EXPECT_THROW(fit_kissme(pairs), InsufficientPairs);
    pairs.similar = {{0, 1}};
    EXPECT_THROW(fit_kissme(pairs), InsufficientPairs);
    pairs.dissimilar = {{1, 0}};
    EXPECT_THROW(fit_kissme(pairs), InvalidArgument);
    pairs.dissimilar = {{0, 2}};
    pairs.points = MatrixXd::Zero(3, 3);
    EXPECT_THROW(fit_kissme(pairs), SingularCovariance);
    EXPECT_THROW(kissme_from_covariances(MatrixXd::Identity(2, 2), MatrixXd::Identity(3, 3)), DimMismatch);
}

TEST(Distance, MahalanobisIdentityIsEuclidean) {
    RngHandle rng(7);
    for (int t = 0; t < 200; ++t) {
        const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.uniform_index(10));
        const VectorXd a = random_vec(rng, d), b = random_vec(rng, d);
        const double e = euclidean_dist(a, b);
        EXPECT_LE(std::abs(maha_dist(MahalanobisModel::identity(static_cast<std::size_t>(d)), a, b) - e), 1e-12 * e);
    }
    EXPECT_THROW(euclidean_dist(VectorXd::Zero(2), VectorXd::Zero(3)), DimMismatch);
    EXPECT_THROW(maha_dist(MahalanobisModel::identity(2), VectorXd::Zero(3), VectorXd::Zero(3)), DimMismatch);
}

// --- set distances -----------------------------------------------------

TEST(SetDistance, Examples) {
    const std::vector<VectorXd> x = {VectorXd{{0.0, 0.0}}};
    const std::vector<VectorXd> y = {VectorXd{{3.0, 4.0}}};
    EXPECT_DOUBLE_EQ(set_distance_min<VectorXd>(x, y, euclidean_dist), 5.0);
    EXPECT_DOUBLE_EQ(set_distance_avg<VectorXd>(x, y, euclidean_dist), 5.0);
    // x = {0, 10}, y = {1}: row minima {1, 9}, column minimum {1}.
    const std::vector<VectorXd> a = {VectorXd{{0.0}}, VectorXd{{10.0}}};
    const std::vector<VectorXd> b = {VectorXd{{1.0}}};
    EXPECT_DOUBLE_EQ(set_distance_min<VectorXd>(a, b, euclidean_dist), 1.0);
    EXPECT_DOUBLE_EQ(set_distance_avg<VectorXd>(a, b, euclidean_dist), 10.0 / 4 + 1.0 / 2);
    EXPECT_THROW(set_distance_min<VectorXd>({}, b, euclidean_dist), EmptySet);
    EXPECT_THROW(set_distance_avg<VectorXd>(a, {}, euclidean_dist), EmptySet);
}

TEST(SetDistance, MatchesBruteForce) {
    RngHandle rng(8);
    for (int t = 0; t < 1000; ++t) {
        const Eigen::Index d = 2 + static_cast<Eigen::Index>(rng.uniform_index(7));
        std::vector<VectorXd> x(1 + rng.uniform_index(6)), y(1 + rng.uniform_index(6));
        for (auto& v : x) v = random_vec(rng, d);
        for (auto& v : y) v = random_vec(rng, d);
        EXPECT_LE(rel_err(set_distance<VectorXd>(SetMeasure::min, x, y, euclidean_dist), oracle_min(x, y)), 1e-12);
        EXPECT_LE(rel_err(set_distance<VectorXd>(SetMeasure::avg, x, y, euclidean_dist), oracle_avg(x, y)), 1e-12);
    }
}

TEST(SetDistance, SymmetricAndScaleEquivariant) {
    RngHandle rng(9);
    for (int t = 0; t < 200; ++t) {
        std::vector<VectorXd> x(1 + rng.uniform_index(5)), y(1 + rng.uniform_index(5));
        for (auto& v : x) v = random_vec(rng, 3);
        for (auto& v : y) v = random_vec(rng, 3);
        const double c = rng.uniform(0.1, 10);
        auto scaled = [c](std::vector<VectorXd> s) {
            for (auto& v : s) v *= c;
            return s;
        };
        for (auto m : {SetMeasure::min, SetMeasure::avg}) {
            const double dxy = set_distance<VectorXd>(m, x, y, euclidean_dist);
            EXPECT_NEAR(set_distance<VectorXd>(m, y, x, euclidean_dist), dxy, 1e-12 * dxy);
            EXPECT_NEAR(set_distance<VectorXd>(m, scaled(x), scaled(y), euclidean_dist), c * dxy, 1e-12 * c * dxy);
        }
        EXPECT_LE(set_distance<VectorXd>(SetMeasure::min, x, y, euclidean_dist),
                  set_distance<VectorXd>(SetMeasure::avg, x, y, euclidean_dist) + 1e-12);
    }
}

TEST(SetDistance, MeasureNames) {
    EXPECT_EQ(parse_measure("min"), SetMeasure::min);
    EXPECT_EQ(parse_measure(to_string(SetMeasure::avg)), SetMeasure::avg);
    EXPECT_THROW(parse_measure("max"), InvalidArgument);
}

// --- model file ----------------------------------------------------------

TEST(ModelFile, RoundTripBitExact) {
    TempDir dir("model");
    RngHandle rng(10);
    const auto m = random_model(rng, 3, 7);
    write_model(dir / "m.rdm", m);
    const auto r = read_model(dir / "m.rdm");
    EXPECT_EQ(std::memcmp(r.pca.mean.data(), m.pca.mean.data(), sizeof(double) * 7), 0);
    EXPECT_EQ(std::memcmp(r.pca.components.data(), m.pca.components.data(), sizeof(double) * 21), 0);
    EXPECT_EQ(std::memcmp(r.maha.M.data(), m.maha.M.data(), sizeof(double) * 9), 0);
    EXPECT_EQ(encode_model(r), encode_model(m));
    EXPECT_EQ(encode_model(m).size(), 4u + 8 + 8 * (7 + 21 + 9) + 4);
}

TEST(ModelFile, EveryBitFlipIsRejected) {
    RngHandle rng(11);
    const std::string good = encode_model(random_model(rng, 2, 3));
    for (std::size_t bit = 0; bit < good.size() * 8; ++bit) {
        std::string bad = good;
        bad[bit / 8] = static_cast<char>(bad[bit / 8] ^ (1 << (bit % 8)));
        const auto* p = reinterpret_cast<const unsigned char*>(bad.data());
        if (bit < 32) {
            EXPECT_THROW(decode_model({p, bad.size()}), FormatError) << bit;
        } else {
            EXPECT_THROW(decode_model({p, bad.size()}), ChecksumMismatch) << bit;
        }
    }
}

TEST(ModelFile, Errors) {
    TempDir dir("model_err");
    EXPECT_THROW(read_model(dir / "none.rdm"), NotFound);
    std::ofstream(dir / "x.rdm") << "RDM";
    EXPECT_THROW(read_model(dir / "x.rdm"), FormatError);
    MetricModel bad;
    bad.pca.mean = VectorXd::Zero(3);
    bad.pca.components = MatrixXd::Zero(2, 3);
    bad.maha.M = MatrixXd::Zero(3, 3);
    EXPECT_THROW(encode_model(bad), DimMismatch);
}
