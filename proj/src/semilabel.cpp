#include "stvs/semilabel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_map>

#include "stvs/error.hpp"

namespace stvs::semilabel {

namespace {

std::string pair_str(const IdPair& p) {
    return "(" + std::to_string(p.first) + "," + std::to_string(p.second) + ")";
}

Eigen::VectorXd flatten(const Series& s) {
    return Eigen::Map<const Eigen::VectorXd>(s.data(), s.size());
}

struct Adjacency {
    std::unordered_map<std::int64_t, std::vector<std::int64_t>> must, cannot;

    explicit Adjacency(const ConstraintSet& cs) {
        for (auto [a, b] : cs.must_links()) {
            must[a].push_back(b);
            must[b].push_back(a);
        }
        for (auto [a, b] : cs.cannot_links()) {
            cannot[a].push_back(b);
            cannot[b].push_back(a);
        }
    }

    const std::vector<std::int64_t>& of(const std::unordered_map<std::int64_t, std::vector<std::int64_t>>& m,
                                        std::int64_t id) const {
        static const std::vector<std::int64_t> none;
        auto it = m.find(id);
        return it == m.end() ? none : it->second;
    }
};

// Union-find over ids, used for the transitive-closure consistency check.
class Components {
public:
    std::int64_t find(std::int64_t x) {
        auto it = parent_.find(x);
        if (it == parent_.end()) {
            parent_[x] = x;
            return x;
        }
        if (it->second == x) return x;
        const auto root = find(it->second);
        parent_[x] = root;
        return root;
    }
    void unite(std::int64_t a, std::int64_t b) { parent_[find(a)] = find(b); }

private:
    std::unordered_map<std::int64_t, std::int64_t> parent_;
};

}  // namespace

void SeedThresholds::validate() const {
    if (!(v_unstable > 0.0 && v_unstable < v_stable))
        throw RangeError("thresholds need 0 < v_unstable < v_stable");
    if (!(tail_fraction > 0.0 && tail_fraction <= 1.0))
        throw RangeError("tail_fraction must lie in (0, 1]");
    if (!(recovery_margin >= 0.0)) throw RangeError("recovery_margin must be non-negative");
}

IdPair make_pair_sorted(std::int64_t a, std::int64_t b) {
    return a < b ? IdPair{a, b} : IdPair{b, a};
}

ConstraintSet::ConstraintSet(std::set<std::int64_t> seed_stable, std::set<std::int64_t> seed_unstable,
                             std::set<IdPair> must_links, std::set<IdPair> cannot_links)
    : seed_stable_(std::move(seed_stable)), seed_unstable_(std::move(seed_unstable)) {
    for (auto [a, b] : must_links) must_links_.insert(make_pair_sorted(a, b));
    for (auto [a, b] : cannot_links) cannot_links_.insert(make_pair_sorted(a, b));
    validate();
}

void ConstraintSet::validate() const {
    for (auto id : seed_stable_)
        if (seed_unstable_.count(id))
            throw ConstraintError("instance " + std::to_string(id) + " is a seed of both classes");
    for (const auto& p : must_links_) {
        if (p.first == p.second) throw ConstraintError("self must-link on " + std::to_string(p.first));
        if (cannot_links_.count(p))
            throw ConstraintError("pair " + pair_str(p) + " is both must-linked and cannot-linked");
    }
    for (const auto& p : cannot_links_)
        if (p.first == p.second) throw ConstraintError("self cannot-link on " + std::to_string(p.first));
    Components comp;
    for (auto [a, b] : must_links_) comp.unite(a, b);
    for (const auto& p : cannot_links_)
        if (comp.find(p.first) == comp.find(p.second))
            throw ConstraintError("cannot-link " + pair_str(p) + " joins instances connected by must-links");
    std::map<std::int64_t, std::int64_t> stable_root;
    for (auto id : seed_stable_) stable_root[comp.find(id)] = id;
    for (auto id : seed_unstable_)
        if (auto it = stable_root.find(comp.find(id)); it != stable_root.end())
            throw ConstraintError("must-links join stable seed " + std::to_string(it->second) +
                                  " and unstable seed " + std::to_string(id));
}

std::int64_t ConstraintSet::stable_anchor() const {
    if (seed_stable_.empty()) throw InsufficientSeedsError("no seed-stable instance");
    return *seed_stable_.begin();
}

std::int64_t ConstraintSet::unstable_anchor() const {
    if (seed_unstable_.empty()) throw InsufficientSeedsError("no seed-unstable instance");
    return *seed_unstable_.begin();
}

bool is_seed_stable(const core::TimeSeriesInstance& inst, int buses, const SeedThresholds& th) {
    return inst.series.leftCols(buses).minCoeff() >= th.v_stable;
}

bool is_seed_unstable(const core::TimeSeriesInstance& inst, int buses, const SeedThresholds& th) {
    const auto m = inst.steps();
    const auto tail = std::max<Eigen::Index>(
        1, static_cast<Eigen::Index>(std::ceil(th.tail_fraction * static_cast<double>(m) - 1e-9)));
    const auto u = inst.series.leftCols(buses);
    if (u.bottomRows(tail).maxCoeff() > th.v_unstable) return false;
    const double start_mean = u.row(m - tail).mean();
    const double end_mean = u.row(m - 1).mean();
    return end_mean - start_mean <= th.recovery_margin;
}

ConstraintSet derive_constraints(const core::Dataset& ds, const SeedThresholds& th) {
    th.validate();
    std::set<std::int64_t> stable, unstable;
    for (const auto& inst : ds.instances) {
        if (is_seed_stable(inst, ds.meta.buses, th)) {
            stable.insert(inst.id);
        } else if (is_seed_unstable(inst, ds.meta.buses, th)) {
            unstable.insert(inst.id);
        }
    }
    if (stable.empty() || unstable.empty())
        throw InsufficientSeedsError("found " + std::to_string(stable.size()) + " stable and " +
                                     std::to_string(unstable.size()) +
                                     " unstable seeds; both classes need at least one");
    const auto sa = *stable.begin();
    const auto ua = *unstable.begin();
    std::set<IdPair> must, cannot;
    for (auto id : stable)
        if (id != sa) must.insert(make_pair_sorted(sa, id));
    for (auto id : unstable)
        if (id != ua) must.insert(make_pair_sorted(ua, id));
    cannot.insert(make_pair_sorted(sa, ua));
    for (auto id : stable)
        if (id != sa) cannot.insert(make_pair_sorted(id, ua));
    for (auto id : unstable)
        if (id != ua) cannot.insert(make_pair_sorted(id, sa));
    return ConstraintSet(std::move(stable), std::move(unstable), std::move(must), std::move(cannot));
}

double ts_distance(const Series& a, const Series& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ShapeError("ts_distance needs equal shapes, got " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " and " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()));
    return std::sqrt((a - b).squaredNorm());
}

std::vector<Eigen::VectorXd> compute_centers(const core::Dataset& ds,
                                             const std::map<std::int64_t, int>& assignment, int k) {
    if (k < 1) throw RangeError("k must be positive");
    const Eigen::Index len = static_cast<Eigen::Index>(ds.meta.steps) * ds.meta.channels();
    std::vector<Eigen::VectorXd> centers(static_cast<std::size_t>(k), Eigen::VectorXd::Zero(len));
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (const auto& inst : ds.instances) {
        auto it = assignment.find(inst.id);
        if (it == assignment.end()) continue;
        if (it->second < 0 || it->second >= k) throw RangeError("cluster index out of range");
        if (inst.series.size() != len) throw ShapeError("instance shape differs from dataset meta");
        centers[static_cast<std::size_t>(it->second)] += flatten(inst.series);
        ++counts[static_cast<std::size_t>(it->second)];
    }
    for (int c = 0; c < k; ++c) {
        if (counts[static_cast<std::size_t>(c)] == 0)
            throw EmptyClusterError("cluster " + std::to_string(c) + " has no members");
        centers[static_cast<std::size_t>(c)] /= counts[static_cast<std::size_t>(c)];
    }
    return centers;
}

int count_violations(const ConstraintSet& cs, const std::map<std::int64_t, int>& assignment) {
    int bad = 0;
    auto lookup = [&](std::int64_t id) -> std::optional<int> {
        auto it = assignment.find(id);
        if (it == assignment.end()) return std::nullopt;
        return it->second;
    };
    for (auto [a, b] : cs.must_links()) {
        auto ca = lookup(a), cb = lookup(b);
        if (ca && cb && *ca != *cb) ++bad;
    }
    for (auto [a, b] : cs.cannot_links()) {
        auto ca = lookup(a), cb = lookup(b);
        if (ca && cb && *ca == *cb) ++bad;
    }
    return bad;
}

double within_cluster_ss(const core::Dataset& ds, const std::map<std::int64_t, int>& assignment, int k) {
    const auto centers = compute_centers(ds, assignment, k);
    double total = 0.0;
    for (const auto& inst : ds.instances) {
        auto it = assignment.find(inst.id);
        if (it == assignment.end()) continue;
        total += (flatten(inst.series) - centers[static_cast<std::size_t>(it->second)]).squaredNorm();
    }
    return total;
}

core::Dataset apply_labels(const core::Dataset& ds, const std::map<std::int64_t, Class>& labels) {
    core::Dataset out = ds;
    for (auto& inst : out.instances) {
        auto it = labels.find(inst.id);
        if (it == labels.end()) throw MissingLabelError("no label for instance " + std::to_string(inst.id));
        inst.label = it->second;
    }
    return out;
}

namespace detail {

int rescue_empty_clusters(const std::vector<Eigen::VectorXd>& points,
                          const std::vector<std::int64_t>& ids, const ConstraintSet& cs,
                          std::vector<int>& assign, const std::vector<Eigen::VectorXd>& centers, int k) {
    const Adjacency adj(cs);
    std::unordered_map<std::int64_t, std::size_t> pos;
    for (std::size_t i = 0; i < ids.size(); ++i) pos[ids[i]] = i;
    int rescued = 0;
    for (int target = 0; target < k; ++target) {
        std::vector<int> counts(static_cast<std::size_t>(k), 0);
        for (int a : assign) ++counts[static_cast<std::size_t>(a)];
        if (counts[static_cast<std::size_t>(target)] > 0) continue;

        std::size_t best = ids.size();
        double best_d = -1.0;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const int from = assign[i];
            if (counts[static_cast<std::size_t>(from)] < 2) continue;
            // Moving a point must not break any link with already placed partners.
            bool ok = true;
            for (auto p : adj.of(adj.must, ids[i])) ok = ok && !pos.count(p);
            for (auto p : adj.of(adj.cannot, ids[i]))
                if (auto it = pos.find(p); it != pos.end() && assign[it->second] == target) ok = false;
            if (!ok) continue;
            const double d = (points[i] - centers[static_cast<std::size_t>(from)]).squaredNorm();
            if (d > best_d) {
                best_d = d;
                best = i;
            }
        }
        if (best == ids.size())
            throw EmptyClusterError("cluster " + std::to_string(target) +
                                    " is empty and no instance can be moved into it");
        assign[best] = target;
        ++rescued;
    }
    return rescued;
}

}  // namespace detail

ClusterResult cop_kmeans(const core::Dataset& ds, const ConstraintSet& cs, int k, int max_iter,
                         std::uint64_t /*seed*/) {
    if (k != 2) throw RangeError("cop_kmeans supports k = 2 only");
    if (max_iter < 1) throw RangeError("max_iter must be at least 1");
    if (ds.empty()) throw EmptyInputError("cannot cluster an empty dataset");

    // Process in ascending id order regardless of file order.
    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](auto a, auto b) { return ds.instances[a].id < ds.instances[b].id; });
    std::vector<std::int64_t> ids;
    std::vector<Eigen::VectorXd> points;
    std::unordered_map<std::int64_t, std::size_t> pos;
    for (auto i : order) {
        pos[ds.instances[i].id] = ids.size();
        ids.push_back(ds.instances[i].id);
        points.push_back(flatten(ds.instances[i].series));
    }
    const auto sa = cs.stable_anchor();
    const auto ua = cs.unstable_anchor();
    for (auto id : {sa, ua})
        if (!pos.count(id)) throw ConstraintError("anchor " + std::to_string(id) + " is not in the dataset");

    const Adjacency adj(cs);
    std::vector<Eigen::VectorXd> centers{points[pos[sa]], points[pos[ua]]};
    std::vector<int> assign(ids.size(), -1), previous;
    ClusterResult result;

    for (int iter = 0; iter < max_iter; ++iter) {
        std::fill(assign.begin(), assign.end(), -1);
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const double d0 = (points[i] - centers[0]).squaredNorm();
            const double d1 = (points[i] - centers[1]).squaredNorm();
            const int pref[2] = {d1 < d0 ? 1 : 0, d1 < d0 ? 0 : 1};
            int chosen = -1;
            for (int c : pref) {
                bool ok = true;
                for (auto p : adj.of(adj.must, ids[i])) {
                    auto it = pos.find(p);
                    if (it != pos.end() && assign[it->second] >= 0 && assign[it->second] != c) ok = false;
                }
                for (auto p : adj.of(adj.cannot, ids[i])) {
                    auto it = pos.find(p);
                    if (it != pos.end() && assign[it->second] == c) ok = false;
                }
                if (ok) {
                    chosen = c;
                    break;
                }
            }
            if (chosen < 0) {
                std::string msg = "instance " + std::to_string(ids[i]) + " has no feasible cluster; blocked by";
                for (auto p : adj.of(adj.must, ids[i]))
                    if (auto it = pos.find(p); it != pos.end() && assign[it->second] >= 0)
                        msg += " must-link " + pair_str(make_pair_sorted(ids[i], p));
                for (auto p : adj.of(adj.cannot, ids[i]))
                    if (auto it = pos.find(p); it != pos.end() && assign[it->second] >= 0)
                        msg += " cannot-link " + pair_str(make_pair_sorted(ids[i], p));
                throw InfeasibleError(msg);
            }
            assign[i] = chosen;
        }
        result.rescues += detail::rescue_empty_clusters(points, ids, cs, assign, centers, k);
        result.iterations = iter + 1;

        for (int c = 0; c < k; ++c) centers[static_cast<std::size_t>(c)].setZero();
        std::vector<int> counts(static_cast<std::size_t>(k), 0);
        for (std::size_t i = 0; i < ids.size(); ++i) {
            centers[static_cast<std::size_t>(assign[i])] += points[i];
            ++counts[static_cast<std::size_t>(assign[i])];
        }
        for (int c = 0; c < k; ++c) centers[static_cast<std::size_t>(c)] /= counts[static_cast<std::size_t>(c)];

        if (assign == previous) {
            result.converged = true;
            break;
        }
        previous = assign;
    }

    const int stable_cluster = assign[pos[sa]];
    for (std::size_t i = 0; i < ids.size(); ++i) {
        result.assignment[ids[i]] = assign[i];
        result.labels[ids[i]] = assign[i] == stable_cluster ? Class::Stable : Class::Unstable;
    }
    if (const int bad = count_violations(cs, result.assignment); bad != 0)
        throw InternalError("clustering left " + std::to_string(bad) + " constraint violations");
    return result;
}

}  // namespace stvs::semilabel
