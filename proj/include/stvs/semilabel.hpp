#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include "stvs/core.hpp"

namespace stvs::semilabel {

using IdPair = std::pair<std::int64_t, std::int64_t>;  // stored with first < second

struct SeedThresholds {
    double v_stable = 0.9;
    double v_unstable = 0.7;
    double tail_fraction = 0.2;
    double recovery_margin = 0.02;

    void validate() const;
};

class ConstraintSet {
public:
    ConstraintSet() = default;
    /// Normalizes pair order and rejects inconsistent input with ConstraintError.
    ConstraintSet(std::set<std::int64_t> seed_stable, std::set<std::int64_t> seed_unstable,
                  std::set<IdPair> must_links, std::set<IdPair> cannot_links);

    const std::set<std::int64_t>& seed_stable() const { return seed_stable_; }
    const std::set<std::int64_t>& seed_unstable() const { return seed_unstable_; }
    const std::set<IdPair>& must_links() const { return must_links_; }
    const std::set<IdPair>& cannot_links() const { return cannot_links_; }

    /// Lowest-id seed of each class.
    std::int64_t stable_anchor() const;
    std::int64_t unstable_anchor() const;

private:
    void validate() const;

    std::set<std::int64_t> seed_stable_, seed_unstable_;
    std::set<IdPair> must_links_, cannot_links_;
};

IdPair make_pair_sorted(std::int64_t a, std::int64_t b);

bool is_seed_stable(const core::TimeSeriesInstance& inst, int buses, const SeedThresholds& th = {});
bool is_seed_unstable(const core::TimeSeriesInstance& inst, int buses, const SeedThresholds& th = {});

/// Star must-links to each class anchor, cannot-links from every seed to the
/// opposite anchor. Throws InsufficientSeedsError when a class has no seed.
ConstraintSet derive_constraints(const core::Dataset& ds, const SeedThresholds& th = {});

double ts_distance(const Series& a, const Series& b);

/// Pointwise mean of member series, flattened row-major to length m*d.
std::vector<Eigen::VectorXd> compute_centers(const core::Dataset& ds,
                                             const std::map<std::int64_t, int>& assignment, int k);

struct ClusterResult {
    std::map<std::int64_t, Class> labels;
    std::map<std::int64_t, int> assignment;  // raw cluster index
    int iterations = 0;
    bool converged = false;
    int rescues = 0;
};

/// Anchored COP k-means with k = 2. `seed` is accepted for interface
/// symmetry; anchored init and id-ordered assignment leave nothing random.
ClusterResult cop_kmeans(const core::Dataset& ds, const ConstraintSet& cs, int k = 2,
                         int max_iter = 100, std::uint64_t seed = 0);

/// Number of must/cannot-links broken by an assignment (ids missing from it are skipped).
int count_violations(const ConstraintSet& cs, const std::map<std::int64_t, int>& assignment);

/// Sum over instances of squared distance to the member mean of their cluster.
double within_cluster_ss(const core::Dataset& ds, const std::map<std::int64_t, int>& assignment, int k);

core::Dataset apply_labels(const core::Dataset& ds, const std::map<std::int64_t, Class>& labels);

namespace detail {

/// Refills empty clusters with the unconstrained point farthest from the
/// nearest non-empty center. Returns how many clusters were refilled.
int rescue_empty_clusters(const std::vector<Eigen::VectorXd>& points,
                          const std::vector<std::int64_t>& ids, const ConstraintSet& cs,
                          std::vector<int>& assign, const std::vector<Eigen::VectorXd>& centers,
                          int k);

}  // namespace detail

}  // namespace stvs::semilabel
