#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace labelsift {

struct KMeansOptions {
    std::size_t clusters = 2;
    std::size_t max_iterations = 100;
    /// Stop once no centroid moves by more than this (Euclidean).
    double tolerance = 1e-6;
    std::uint64_t seed = 0;
};

struct KMeansResult {
    /// clusters x dims, one centroid per row.
    Eigen::MatrixXd centroids;
    std::vector<std::size_t> assignment;
    std::size_t iterations = 0;
};

/// Lloyd's algorithm with seeded k-means++ seeding. Points are the rows of
/// `points`. Distance ties go to the lowest cluster index; a cluster that
/// loses all members keeps its previous centroid. When every remaining
/// point coincides with a chosen centre, seeding takes the lowest-index
/// unchosen point. Requires 1 <= clusters <= rows.
KMeansResult kmeans(const Eigen::MatrixXd& points, const KMeansOptions& options);

}  // namespace labelsift
