// Independent reference implementations used only by the tests. They are
// written with plain loops and std::vector so they share no code paths with
// the library they check.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include "stvs/core.hpp"
#include "stvs/lstm.hpp"
#include "stvs/rng.hpp"
#include "stvs/semilabel.hpp"

namespace oracle {

using Vec = std::vector<double>;

inline double sigm(double z) { return 1.0 / (1.0 + std::exp(-z)); }

struct ScalarCell {
    Vec h, c, f, i, o, g;
};

// One LSTM step evaluated element by element.
inline ScalarCell scalar_step(const stvs::lstm::LstmLayer& ly, const Vec& h_prev, const Vec& c_prev, const Vec& x) {
    const int H = ly.hidden_dim;
    Vec hx(h_prev);
    hx.insert(hx.end(), x.begin(), x.end());
    ScalarCell out;
    out.h.assign(H, 0), out.c.assign(H, 0), out.f.assign(H, 0), out.i.assign(H, 0), out.o.assign(H, 0), out.g.assign(H, 0);
    for (int r = 0; r < H; ++r) {
        double zf = ly.b_f[r], zi = ly.b_i[r], zo = ly.b_o[r], zc = ly.b_c[r];
        for (std::size_t k = 0; k < hx.size(); ++k) {
            zf += ly.W_f(r, k) * hx[k];
            zi += ly.W_i(r, k) * hx[k];
            zo += ly.W_o(r, k) * hx[k];
            zc += ly.W_c(r, k) * hx[k];
        }
        out.f[r] = sigm(zf);
        out.i[r] = sigm(zi);
        out.o[r] = sigm(zo);
        out.g[r] = std::tanh(zc);
        out.c[r] = out.f[r] * c_prev[r] + out.i[r] * out.g[r];
        out.h[r] = out.o[r] * std::tanh(out.c[r]);
    }
    return out;
}

// Full inference-mode forward pass returning (P(stable), P(unstable)).
inline std::pair<double, double> scalar_forward(const stvs::lstm::LstmModel& m, const stvs::Series& s) {
    std::vector<Vec> inputs;
    for (Eigen::Index t = 0; t < s.rows(); ++t) {
        Vec x;
        for (Eigen::Index c = 0; c < s.cols(); ++c) x.push_back(s(t, c));
        inputs.push_back(x);
    }
    for (const auto& ly : m.layers) {
        Vec h(m.hidden_dim, 0.0), c(m.hidden_dim, 0.0);
        std::vector<Vec> outs;
        for (const auto& x : inputs) {
            auto st = scalar_step(ly, h, c, x);
            h = st.h;
            c = st.c;
            outs.push_back(h);
        }
        inputs = outs;
    }
    const Vec& h = inputs.back();
    double z0 = m.b_s[0], z1 = m.b_s[1];
    for (int k = 0; k < m.hidden_dim; ++k) {
        z0 += m.W_s(0, k) * h[k];
        z1 += m.W_s(1, k) * h[k];
    }
    const double mx = std::max(z0, z1);
    const double e0 = std::exp(z0 - mx), e1 = std::exp(z1 - mx);
    return {e0 / (e0 + e1), e1 / (e0 + e1)};
}

// Fraction of (stable, unstable) pairs ranked correctly, ties counted half.
inline double mann_whitney(const std::vector<double>& scores, const std::vector<stvs::Class>& labels) {
    double wins = 0.0;
    std::int64_t pairs = 0;
    for (std::size_t a = 0; a < scores.size(); ++a) {
        if (labels[a] != stvs::Class::Stable) continue;
        for (std::size_t b = 0; b < scores.size(); ++b) {
            if (labels[b] != stvs::Class::Unstable) continue;
            ++pairs;
            if (scores[a] > scores[b]) wins += 1.0;
            else if (scores[a] == scores[b]) wins += 0.5;
        }
    }
    return wins / static_cast<double>(pairs);
}

struct Counts {
    std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

inline Counts count_pairs(const std::vector<stvs::Class>& pred, const std::vector<stvs::Class>& truth) {
    Counts c;
    for (std::size_t k = 0; k < pred.size(); ++k) {
        if (pred[k] == stvs::Class::Stable && truth[k] == stvs::Class::Stable) c.tp++;
        if (pred[k] == stvs::Class::Stable && truth[k] == stvs::Class::Unstable) c.fp++;
        if (pred[k] == stvs::Class::Unstable && truth[k] == stvs::Class::Stable) c.fn++;
        if (pred[k] == stvs::Class::Unstable && truth[k] == stvs::Class::Unstable) c.tn++;
    }
    return c;
}

// Rebuilds the confusion matrix from scratch at +inf and at every distinct score.
inline std::vector<std::pair<double, double>> naive_roc(const std::vector<double>& scores,
                                                        const std::vector<stvs::Class>& labels) {
    std::set<double, std::greater<>> thresholds(scores.begin(), scores.end());
    std::vector<double> sweep{std::numeric_limits<double>::infinity()};
    sweep.insert(sweep.end(), thresholds.begin(), thresholds.end());
    std::vector<std::pair<double, double>> pts;
    for (double thr : sweep) {
        std::vector<stvs::Class> pred;
        for (double s : scores) pred.push_back(s >= thr ? stvs::Class::Stable : stvs::Class::Unstable);
        const auto c = count_pairs(pred, labels);
        pts.emplace_back(static_cast<double>(c.fp) / static_cast<double>(c.fp + c.tn),
                         static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn));
    }
    return pts;
}

// Minimum within-cluster sum of squares over every constraint-feasible
// 2-partition with both sides non-empty. Returns +inf when none exists.
inline double best_feasible_wcss(const stvs::core::Dataset& ds, const stvs::semilabel::ConstraintSet& cs,
                                 std::map<std::int64_t, int>* best_assignment = nullptr) {
    const std::size_t n = ds.size();
    std::map<std::int64_t, std::size_t> pos;
    for (std::size_t k = 0; k < n; ++k) pos[ds.instances[k].id] = k;
    double best = std::numeric_limits<double>::infinity();
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        auto side = [&](std::int64_t id) { return (mask >> pos.at(id)) & 1u; };
        bool ok = mask != 0 && mask != (1u << n) - 1;
        for (auto [a, b] : cs.must_links()) ok = ok && side(a) == side(b);
        for (auto [a, b] : cs.cannot_links()) ok = ok && side(a) != side(b);
        if (!ok) continue;
        double total = 0.0;
        for (unsigned s = 0; s < 2; ++s) {
            std::vector<std::size_t> members;
            for (std::size_t k = 0; k < n; ++k)
                if (((mask >> k) & 1u) == s) members.push_back(k);
            const auto& first = ds.instances[members[0]].series;
            for (Eigen::Index r = 0; r < first.rows(); ++r)
                for (Eigen::Index c = 0; c < first.cols(); ++c) {
                    double mean = 0.0;
                    for (auto k : members) mean += ds.instances[k].series(r, c);
                    mean /= static_cast<double>(members.size());
                    for (auto k : members) {
                        const double d = ds.instances[k].series(r, c) - mean;
                        total += d * d;
                    }
                }
        }
        if (total < best) {
            best = total;
            if (best_assignment) {
                best_assignment->clear();
                for (std::size_t k = 0; k < n; ++k) (*best_assignment)[ds.instances[k].id] = (mask >> k) & 1u;
            }
        }
    }
    return best;
}

struct Split {
    int feature = -1;
    double threshold = 0.0;
    double impurity = std::numeric_limits<double>::infinity();
};

// Every (feature, midpoint) pair scored by direct counting.
inline Split brute_force_split(const std::vector<std::vector<double>>& x, const std::vector<int>& y, int min_leaf) {
    Split best;
    const std::size_t n = x.size();
    auto g = [](double s, double u) {
        const double t = s + u;
        return t == 0 ? 0.0 : 1.0 - (s / t) * (s / t) - (u / t) * (u / t);
    };
    for (std::size_t f = 0; f < x[0].size(); ++f) {
        std::set<double> vals;
        for (const auto& row : x) vals.insert(row[f]);
        std::vector<double> v(vals.begin(), vals.end());
        for (std::size_t k = 0; k + 1 < v.size(); ++k) {
            const double thr = v[k] + (v[k + 1] - v[k]) / 2.0;
            double ls = 0, lu = 0, rs = 0, ru = 0;
            for (std::size_t r = 0; r < n; ++r) {
                const bool left = x[r][f] <= thr;
                (left ? (y[r] == 0 ? ls : lu) : (y[r] == 0 ? rs : ru)) += 1;
            }
            if (ls + lu < min_leaf || rs + ru < min_leaf) continue;
            const double imp = ((ls + lu) * g(ls, lu) + (rs + ru) * g(rs, ru)) / static_cast<double>(n);
            if (imp < best.impurity - 1e-12) best = {static_cast<int>(f), thr, imp};
        }
    }
    return best;
}

inline stvs::core::Dataset random_dataset(std::size_t n, int buses, int steps, std::uint64_t seed) {
    stvs::Rng rng(seed);
    stvs::core::Dataset ds;
    ds.meta.buses = buses;
    ds.meta.steps = steps;
    for (std::size_t k = 0; k < n; ++k) {
        stvs::core::TimeSeriesInstance inst;
        inst.id = static_cast<std::int64_t>(k);
        inst.series.resize(steps, 3 * buses);
        for (Eigen::Index r = 0; r < inst.series.rows(); ++r)
            for (Eigen::Index c = 0; c < inst.series.cols(); ++c) inst.series(r, c) = rng.uniform(-1.0, 2.0);
        inst.label = rng.uniform() < 0.5 ? stvs::Class::Stable : stvs::Class::Unstable;
        ds.instances.push_back(std::move(inst));
    }
    return ds;
}

}  // namespace oracle
