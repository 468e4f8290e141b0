#include "labelsift/kmeans.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "labelsift/random.hpp"

namespace labelsift {
namespace {

std::size_t nearest(const Eigen::MatrixXd& centroids, const Eigen::MatrixXd& points, Eigen::Index row,
                    double* distance = nullptr) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
        const double d = (points.row(row) - centroids.row(c)).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = static_cast<std::size_t>(c);
        }
    }
    if (distance != nullptr) {
        *distance = best_d;
    }
    return best;
}

Eigen::MatrixXd seed_plus_plus(const Eigen::MatrixXd& points, std::size_t clusters, Rng& rng) {
    const auto n = static_cast<std::size_t>(points.rows());
    Eigen::MatrixXd centroids(static_cast<Eigen::Index>(clusters), points.cols());
    std::vector<bool> chosen(n, false);
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());

    auto first = static_cast<std::size_t>(rng.below(n));
    centroids.row(0) = points.row(static_cast<Eigen::Index>(first));
    chosen[first] = true;

    for (std::size_t c = 1; c < clusters; ++c) {
        double total = 0.0;
        const auto last = centroids.row(static_cast<Eigen::Index>(c - 1));
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], (points.row(static_cast<Eigen::Index>(i)) - last).squaredNorm());
            total += chosen[i] ? 0.0 : d2[i];
        }
        std::size_t pick = n;
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double cumulative = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (chosen[i]) {
                    continue;
                }
                cumulative += d2[i];
                if (cumulative > target && d2[i] > 0.0) {
                    pick = i;
                    break;
                }
            }
            if (pick == n) {
                // Rounding left target at the very top; take the last positive-weight point.
                for (std::size_t i = n; i-- > 0;) {
                    if (!chosen[i] && d2[i] > 0.0) {
                        pick = i;
                        break;
                    }
                }
            }
        } else {
            for (std::size_t i = 0; i < n; ++i) {
                if (!chosen[i]) {
                    pick = i;
                    break;
                }
            }
        }
        chosen[pick] = true;
        centroids.row(static_cast<Eigen::Index>(c)) = points.row(static_cast<Eigen::Index>(pick));
    }
    return centroids;
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& points, const KMeansOptions& options) {
    const auto n = static_cast<std::size_t>(points.rows());
    if (options.clusters == 0 || options.clusters > n) {
        throw std::invalid_argument("kmeans: need 1 <= clusters <= number of points");
    }
    Rng rng(options.seed);
    KMeansResult result;
    result.centroids = seed_plus_plus(points, options.clusters, rng);
    result.assignment.assign(n, 0);

    const auto k = static_cast<Eigen::Index>(options.clusters);
    Eigen::MatrixXd sums(k, points.cols());
    std::vector<std::size_t> counts(options.clusters);
    for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
        for (std::size_t i = 0; i < n; ++i) {
            result.assignment[i] = nearest(result.centroids, points, static_cast<Eigen::Index>(i));
        }
        sums.setZero();
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            sums.row(static_cast<Eigen::Index>(result.assignment[i])) += points.row(static_cast<Eigen::Index>(i));
            ++counts[result.assignment[i]];
        }
        double shift = 0.0;
        for (Eigen::Index c = 0; c < k; ++c) {
            const auto count = counts[static_cast<std::size_t>(c)];
            if (count == 0) {
                continue;
            }
            const Eigen::RowVectorXd updated = sums.row(c) / static_cast<double>(count);
            shift = std::max(shift, (updated - result.centroids.row(c)).norm());
            result.centroids.row(c) = updated;
        }
        result.iterations = iter + 1;
        if (shift <= options.tolerance) {
            break;
        }
    }
    // Final assignment against the final centroids.
    for (std::size_t i = 0; i < n; ++i) {
        result.assignment[i] = nearest(result.centroids, points, static_cast<Eigen::Index>(i));
    }
    return result;
}

}  // namespace labelsift
