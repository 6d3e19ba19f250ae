// Acceptance run: prints one PASS/FAIL line per criterion and exits nonzero
// if any criterion fails. Optional argv[1] names the scratch directory.
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "stvs/checkpoint.hpp"
#include "stvs/commands.hpp"
#include "stvs/dataset_io.hpp"
#include "stvs/error.hpp"
#include "stvs/hash.hpp"
#include "stvs/metrics.hpp"
#include "stvs/semilabel.hpp"
#include "stvs/simgen.hpp"

using namespace stvs;
namespace fs = std::filesystem;
using checkpoint::ModelKind;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string num(double v, int digits = 4) {
    std::ostringstream s;
    s << std::setprecision(digits) << v;
    return s.str();
}

const std::vector<int> kOtws{3, 6, 9, 12};

// Everything the pipeline criteria share.
struct DeskRun {
    fs::path dir;
    fs::path raw, labeled;
    cli::LabelSummary label;
    std::map<std::pair<std::string, int>, double> accuracy;  // (model, otw) -> test accuracy
    std::map<std::pair<std::string, int>, double> truth_accuracy;
    double seconds = 0.0;
    std::vector<fs::path> lstm_checkpoints;
};

cli::TrainOptions desk_train(const fs::path& data, ModelKind kind, int otw, const fs::path& out) {
    cli::TrainOptions t;
    t.dataset = data;
    t.kind = kind;
    t.otw_steps = otw;
    t.lstm.hidden_dim = 32;
    t.lstm.epochs = 30;
    t.out = out;
    return t;
}

// generate -> label -> train (lstm, dt, svm at every window) -> evaluate.
DeskRun run_desk(const fs::path& dir, bool baselines) {
    DeskRun r;
    r.dir = dir;
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ostringstream log, warn;
    const auto t0 = Clock::now();
    cli::GenerateOptions g;
    g.out = r.raw = dir / "desk.jsonl";
    cli::run_generate(g, log);
    cli::LabelOptions l;
    l.in = r.raw;
    l.out = r.labeled = dir / "desk_labeled.jsonl";
    r.label = cli::run_label(l, log);
    cli::EvaluateOptions ev;
    for (int k : kOtws) {
        for (auto kind : {ModelKind::Lstm, ModelKind::Cart, ModelKind::Svm}) {
            if (!baselines && kind != ModelKind::Lstm) continue;
            auto path = dir / ("ck_" + checkpoint::to_string(kind) + "_" + std::to_string(k) + ".json");
            cli::run_train(desk_train(r.labeled, kind, k, path), log);
            ev.checkpoints.push_back(path);
            if (kind == ModelKind::Lstm) r.lstm_checkpoints.push_back(path);
        }
    }
    ev.dataset = r.labeled;
    ev.otw_steps = kOtws;
    ev.out_dir = dir / "report";
    auto rep = cli::run_evaluate(ev, log, warn);
    r.seconds = since(t0);
    for (const auto& row : rep.rows) {
        r.accuracy[{row.model, row.otw_steps}] = row.accuracy;
        if (row.truth_accuracy) r.truth_accuracy[{row.model, row.otw_steps}] = *row.truth_accuracy;
    }
    return r;
}

Outcome gradients() {
    const auto t0 = Clock::now();
    double worst = 0.0;
    std::size_t checked = 0;
    int runs = 0;
    // Train-mode masks with dropout, and without dropout.
    for (double rate : {0.25, 0.0}) {
        gradcheck::Fixture fx;
        fx.dropout = rate;
        fx.logit_dropout = rate > 0.0;
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            auto r = gradcheck::run(fx, seed);
            worst = std::max(worst, r.max_rel_err);
            checked += r.checked;
            ++runs;
        }
    }
    const double secs = since(t0);
    return {worst < 1e-4 && secs < 10.0,
            "max relative error " + num(worst, 3) + " over " + std::to_string(runs) + " seeded runs (" +
                std::to_string(checked) + " parameters checked) in " + num(secs, 2) + " s"};
}

Outcome metrics_oracles() {
    Rng rng(2024);
    double worst = 0.0;
    bool roc_equal = true;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng.below(199);
        std::vector<double> scores;
        std::vector<Class> labels;
        for (std::size_t k = 0; k < n; ++k) {
            labels.push_back(k == 0 ? Class::Stable : k == 1 ? Class::Unstable
                                                             : (rng.uniform() < 0.5 ? Class::Stable : Class::Unstable));
            double s = rng.uniform();
            if (rng.uniform() < 0.3) s = std::round(s * 5.0) / 5.0;  // ties
            if (k > 0 && rng.uniform() < 0.2) s = scores[rng.below(k)];
            scores.push_back(s);
        }
        const auto curve = metrics::roc_curve(scores, labels);
        worst = std::max(worst, std::abs(metrics::auc(curve) - oracle::mann_whitney(scores, labels)));
        const auto naive = oracle::naive_roc(scores, labels);
        if (naive.size() != curve.points.size()) {
            roc_equal = false;
            continue;
        }
        for (std::size_t k = 0; k < naive.size(); ++k)
            roc_equal = roc_equal && curve.points[k].fpr == naive[k].first && curve.points[k].tpr == naive[k].second;
    }
    return {worst <= 1e-12 && roc_equal, "100 fixtures: max |AUC - pair count| = " + num(worst, 3) +
                                             ", ROC points " + (roc_equal ? "identical" : "DIFFER") +
                                             " to per-threshold recomputation"};
}

Outcome clustering(const DeskRun& desk, const fs::path& scratch) {
    using namespace semilabel;
    int violations = 0, runs = 0, matched = 0, exhaustive = 0;
    // Random star constraint sets and exhaustive separable fixtures.
    for (std::uint64_t seed = 1; seed <= 40; ++seed) {
        Rng rng(seed);
        const std::size_t n = seed <= 20 ? 6 + seed % 7 : 40;
        core::Dataset ds;
        ds.meta.buses = 1;
        ds.meta.steps = 4;
        std::set<std::int64_t> s, u;
        for (std::size_t k = 0; k < n; ++k) {
            const int group = k < 2 ? static_cast<int>(k) : static_cast<int>(rng.below(2));
            core::TimeSeriesInstance inst;
            inst.id = static_cast<std::int64_t>(2 * k + 3);
            inst.series.resize(4, 3);
            for (Eigen::Index j = 0; j < inst.series.size(); ++j)
                inst.series.data()[j] = (group ? 4.0 : 0.0) + rng.uniform(-0.3, 0.3);
            if (k < 2 || rng.uniform() < 0.4) (group ? u : s).insert(inst.id);
            ds.instances.push_back(inst);
        }
        const auto sa = *s.begin(), ua = *u.begin();
        std::set<IdPair> must, cannot{make_pair_sorted(sa, ua)};
        for (auto id : s)
            if (id != sa) must.insert(make_pair_sorted(sa, id)), cannot.insert(make_pair_sorted(id, ua));
        for (auto id : u)
            if (id != ua) must.insert(make_pair_sorted(ua, id)), cannot.insert(make_pair_sorted(id, sa));
        ConstraintSet cs(s, u, must, cannot);
        auto r = cop_kmeans(ds, cs);
        ++runs;
        violations += count_violations(cs, r.assignment);
        if (n <= 12) {
            ++exhaustive;
            const double got = within_cluster_ss(ds, r.assignment, 2);
            const double best = oracle::best_feasible_wcss(ds, cs);
            matched += best <= got + 1e-9 && std::abs(got - best) <= 1e-9 * std::max(1.0, best);
        }
    }
    // Desk dataset at the default noise (from the shared run) and without noise.
    const double noisy = desk.label.truth_agreement.value_or(0.0);
    std::ostringstream log;
    cli::GenerateOptions g;
    g.grid.noise_sigma = 0.0;
    g.out = scratch / "desk_noiseless.jsonl";
    cli::run_generate(g, log);
    cli::LabelOptions l;
    l.in = g.out;
    l.out = scratch / "desk_noiseless_labeled.jsonl";
    const auto clean = cli::run_label(l, log);
    const double quiet = clean.truth_agreement.value_or(0.0);
    // Constraint check on the desk labelings themselves.
    for (const fs::path* path : {&desk.labeled, static_cast<const fs::path*>(&l.out)}) {
        auto ds = io::read_dataset(*path);
        auto cs = derive_constraints(ds);
        std::map<std::int64_t, int> a;
        for (const auto& inst : ds.instances) a[inst.id] = *inst.label == Class::Stable ? 0 : 1;
        violations += count_violations(cs, a);
        ++runs;
    }
    const bool pass = violations == 0 && matched == exhaustive && noisy >= 0.95 && quiet == 1.0;
    return {pass, std::to_string(violations) + " violations in " + std::to_string(runs) + " runs; exhaustive optimum matched " +
                      std::to_string(matched) + "/" + std::to_string(exhaustive) + "; truth agreement " + num(noisy, 5) +
                      " (noise 0.01), " + num(quiet, 5) + " (noise 0)"};
}

Outcome comparison(const DeskRun& d) {
    bool ok = true;
    std::string detail;
    for (int k : kOtws) {
        const double a = d.accuracy.at({"lstm", k}), c = d.accuracy.at({"dt", k}), s = d.accuracy.at({"svm", k});
        ok = ok && a >= c && a >= s;
        detail += "otw " + std::to_string(k) + ": lstm " + num(a) + " dt " + num(c) + " svm " + num(s) + "; ";
    }
    const double a3 = d.accuracy.at({"lstm", 3});
    ok = ok && a3 >= 0.90;
    return {ok, detail + "lstm@3 >= 0.90: " + (a3 >= 0.90 ? "yes" : "no")};
}

Outcome monotone(const DeskRun& d) {
    const double a3 = d.accuracy.at({"lstm", 3}), a12 = d.accuracy.at({"lstm", 12});
    return {a12 >= a3 - 0.01, "lstm accuracy otw 3 = " + num(a3) + ", otw 12 = " + num(a12)};
}

Outcome determinism(const DeskRun& a, const DeskRun& b) {
    std::vector<std::pair<fs::path, fs::path>> files{{a.raw, b.raw},
                                                     {io::header_path(a.raw), io::header_path(b.raw)},
                                                     {a.labeled, b.labeled},
                                                     {io::header_path(a.labeled), io::header_path(b.labeled)}};
    for (std::size_t k = 0; k < a.lstm_checkpoints.size(); ++k) files.emplace_back(a.lstm_checkpoints[k], b.lstm_checkpoints[k]);
    std::size_t same = 0;
    for (const auto& [x, y] : files) same += sha256_file(x) == sha256_file(y);
    return {same == files.size() && !files.empty(),
            std::to_string(same) + "/" + std::to_string(files.size()) +
                " dataset and checkpoint files byte-identical across two runs (dataset sha256 " +
                sha256_file(a.raw).substr(0, 12) + ")"};
}

Outcome runtime(const DeskRun& d) {
    return {d.seconds < 15 * 60.0, "full desk pipeline (12 checkpoints + report) took " + num(d.seconds, 3) + " s"};
}

Outcome properties(const fs::path& scratch) {
    Rng rng(77);
    double softmax_err = 0.0;
    bool gates = true;
    for (int trial = 0; trial < 1000; ++trial) {
        auto m = lstm::init_model(6, 1 + static_cast<int>(rng.below(8)), 1 + trial % 2, trial);
        Series s(1 + static_cast<int>(rng.below(8)), 6);
        for (Eigen::Index k = 0; k < s.size(); ++k) s.data()[k] = rng.uniform(-2.0, 2.0);
        auto cache = lstm::forward_batch(lstm::to_batch({&s}), m, lstm::Mode::Infer);
        softmax_err = std::max(softmax_err, std::abs(cache.probs.col(0).sum() - 1.0));
        for (const auto& layer : cache.layers)
            for (const auto& st : layer)
                gates = gates && st.f.minCoeff() > 0 && st.f.maxCoeff() < 1 && st.i.minCoeff() > 0 &&
                        st.i.maxCoeff() < 1 && st.o.minCoeff() > 0 && st.o.maxCoeff() < 1 &&
                        st.g.cwiseAbs().maxCoeff() < 1 && st.h.cwiseAbs().maxCoeff() <= 1;
    }
    double round_trip = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        auto ds = oracle::random_dataset(5, 2, 8, seed);
        auto st = core::fit_normalizer(ds);
        for (const auto& inst : ds.instances) {
            auto back = core::invert_normalizer(core::apply_normalizer(inst.series, st), st);
            round_trip = std::max(round_trip, ((back - inst.series).array().abs() /
                                               inst.series.array().abs().max(1e-300)).maxCoeff());
        }
    }
    auto ds = oracle::random_dataset(20, 3, 7, 5);
    ds.meta.norm_stats = core::fit_normalizer(ds);
    io::write_dataset(ds, scratch / "roundtrip.jsonl");
    auto back = io::read_dataset(scratch / "roundtrip.jsonl");
    bool bit_exact = back.size() == ds.size();
    for (std::size_t k = 0; bit_exact && k < ds.size(); ++k)
        bit_exact = std::memcmp(back.instances[k].series.data(), ds.instances[k].series.data(),
                                sizeof(double) * static_cast<std::size_t>(ds.instances[k].series.size())) == 0 &&
                    back.instances[k].id == ds.instances[k].id;
    checkpoint::Checkpoint ck;
    ck.otw_steps = 7;
    ck.buses = 3;
    ck.norm = *ds.meta.norm_stats;
    ck.lstm = lstm::init_model(9, 6, 2, 9);
    checkpoint::save(ck, scratch / "roundtrip_ck.json");
    auto ck2 = checkpoint::load(scratch / "roundtrip_ck.json");
    auto pa = std::as_const(*ck.lstm).blocks();
    auto pb = std::as_const(*ck2.lstm).blocks();
    for (std::size_t k = 0; bit_exact && k < pa.size(); ++k)
        bit_exact = std::memcmp(pa[k].data(), pb[k].data(), pa[k].size_bytes()) == 0;
    bit_exact = bit_exact && checkpoint::serialize(ck2) == checkpoint::serialize(ck);
    return {softmax_err < 1e-12 && gates && round_trip <= 1e-12 && bit_exact,
            "softmax |sum-1| max " + num(softmax_err, 3) + ", gate bounds " + (gates ? "hold" : "VIOLATED") +
                ", normalization round trip " + num(round_trip, 3) + ", serialization " +
                (bit_exact ? "bit-exact" : "NOT bit-exact")};
}

}  // namespace

int main(int argc, char** argv) {
    const fs::path scratch = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "stvs_acceptance";
    fs::create_directories(scratch);

    int failed = 0;
    auto report = [&](int id, const std::string& name, const std::function<Outcome()>& fn) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << id << " (" << name << "): " << o.detail << std::endl;
    };

    report(1, "gradient correctness", gradients);
    report(2, "metrics oracle equivalence", metrics_oracles);

    DeskRun first, second;
    std::string pipeline_error;
    try {
        first = run_desk(scratch / "run_a", true);
        second = run_desk(scratch / "run_b", false);
    } catch (const std::exception& e) {
        pipeline_error = e.what();
    }
    auto needs_pipeline = [&](const std::function<Outcome()>& fn) {
        return [&, fn]() -> Outcome {
            if (!pipeline_error.empty()) return {false, "pipeline failed: " + pipeline_error};
            return fn();
        };
    };
    report(3, "clustering", needs_pipeline([&] { return clustering(first, scratch); }));
    report(4, "end-to-end comparison", needs_pipeline([&] { return comparison(first); }));
    report(5, "accuracy grows with window", needs_pipeline([&] { return monotone(first); }));
    report(6, "determinism", needs_pipeline([&] { return determinism(first, second); }));
    report(7, "runtime budget", needs_pipeline([&] { return runtime(first); }));
    report(8, "property suites", [&] { return properties(scratch); });

    if (pipeline_error.empty()) {
        for (const auto& [key, acc] : first.truth_accuracy)
            std::cout << "      truth accuracy " << key.first << " otw " << key.second << ": " << num(acc) << "\n";
    }
    std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
    return failed == 0 ? 0 : 1;
}
