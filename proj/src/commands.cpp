#include "stvs/commands.hpp"

#include <algorithm>
#include <chrono>
#include <iomanip>
#include <ostream>
#include <set>

#include "stvs/baselines.hpp"
#include "stvs/dataset_io.hpp"
#include "stvs/error.hpp"
#include "stvs/hash.hpp"

namespace stvs::cli {

using nlohmann::json;

namespace {

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void ensure_parent(const fs::path& p) {
    if (p.empty()) throw ConfigError("output path is empty");
    const auto parent = p.parent_path();
    if (!parent.empty()) {
        std::error_code ec;
        fs::create_directories(parent, ec);
        if (ec) throw IoError("cannot create directory '" + parent.string() + "': " + ec.message());
    }
}

fs::path sibling(const fs::path& p, const std::string& suffix) {
    auto s = p;
    s += suffix;
    return s;
}

std::size_t count_class(const core::Dataset& ds, Class c, bool truth) {
    return static_cast<std::size_t>(std::count_if(ds.instances.begin(), ds.instances.end(), [&](const auto& i) {
        const auto& v = truth ? i.truth : i.label;
        return v && *v == c;
    }));
}

void require_labeled(const core::Dataset& ds, const fs::path& path) {
    for (const auto& inst : ds.instances)
        if (!inst.label)
            throw MissingLabelError("instance " + std::to_string(inst.id) + " in '" + path.string() +
                                    "' has no label; run `label` first");
}

json train_config_json(const TrainOptions& opt) {
    json j{{"model", checkpoint::to_string(opt.kind)},
           {"otw_steps", opt.otw_steps},
           {"train_fraction", opt.train_fraction},
           {"split_seed", opt.split_seed},
           {"seed", opt.seed}};
    switch (opt.kind) {
        case checkpoint::ModelKind::Lstm:
            j["learning_rate"] = opt.lstm.learning_rate;
            j["dropout_rate"] = opt.lstm.dropout_rate;
            j["hidden_dim"] = opt.lstm.hidden_dim;
            j["batch_size"] = opt.lstm.batch_size;
            j["epochs"] = opt.lstm.epochs;
            j["beta1"] = opt.lstm.beta1;
            j["beta2"] = opt.lstm.beta2;
            j["epsilon"] = opt.lstm.epsilon;
            j["depth"] = opt.lstm.depth;
            j["loss"] = opt.lstm.loss == lstm::LossKind::SquaredL2 ? "l2" : "cross_entropy";
            j["logit_dropout"] = opt.lstm.logit_dropout;
            break;
        case checkpoint::ModelKind::Cart:
            j["max_depth"] = opt.cart_max_depth;
            j["min_leaf"] = opt.cart_min_leaf;
            break;
        case checkpoint::ModelKind::Svm:
            j["lambda"] = opt.svm_lambda;
            j["epochs"] = opt.svm_epochs;
            break;
    }
    return j;
}

double accuracy_of(const std::vector<Class>& pred, const std::vector<Class>& truth) {
    return metrics::accuracy(metrics::confusion(pred, truth));
}

}  // namespace

RunManifest::RunManifest(std::string command) : command_(std::move(command)) {}

void RunManifest::add_input(const fs::path& p) {
    inputs_.push_back({{"path", p.string()}, {"sha256", sha256_file(p)}});
}

void RunManifest::add_output(const fs::path& p) {
    outputs_.push_back({{"path", p.string()}, {"sha256", sha256_file(p)}});
}

json RunManifest::to_json() const {
    return json{{"command", command_}, {"config", config_},   {"seeds", seeds_},     {"inputs", inputs_},
                {"outputs", outputs_}, {"timings_s", timings_}, {"summary", summary_}};
}

void RunManifest::write(const fs::path& path) const {
    io::write_text(path, to_json().dump(2) + "\n");
}

fs::path manifest_path(const fs::path& output) { return sibling(output, ".manifest.json"); }

json grid_to_json(const simgen::GridConfig& c) {
    return json{{"L", c.buses},
                {"n_lines", c.n_lines},
                {"load_levels", c.load_levels},
                {"motor_fractions", c.motor_fractions},
                {"fault_positions", c.fault_positions},
                {"clear_times_s", c.clear_times_s},
                {"fault_time_s", c.fault_time_s},
                {"m", c.steps},
                {"dt_s", c.dt_s},
                {"noise_sigma", c.noise_sigma},
                {"seed", c.seed},
                {"samples", c.samples},
                {"severity_threshold", c.severity.threshold},
                {"w_load", c.severity.w_load},
                {"w_motor", c.severity.w_motor},
                {"w_clear", c.severity.w_clear},
                {"w_draw", c.severity.w_draw}};
}

GenerateSummary run_generate(const GenerateOptions& opt, std::ostream& out) {
    Stopwatch clock;
    opt.grid.validate();
    ensure_parent(opt.out);
    const auto ds = simgen::generate_dataset(opt.grid);
    const double gen_s = clock.seconds();
    io::write_dataset(ds, opt.out);

    GenerateSummary s;
    s.instances = ds.size();
    s.scenarios = opt.grid.grid_size();
    s.stable = count_class(ds, Class::Stable, true);
    s.unstable = count_class(ds, Class::Unstable, true);

    RunManifest man("generate");
    man.set_config(grid_to_json(opt.grid));
    man.add_seed("master", opt.grid.seed);
    man.add_output(opt.out);
    man.add_output(io::header_path(opt.out));
    man.add_timing("generate", gen_s);
    man.add_timing("total", clock.seconds());
    man.set_summary({{"instances", s.instances}, {"scenarios", s.scenarios}, {"stable", s.stable}, {"unstable", s.unstable}});
    man.write(manifest_path(opt.out));

    const double n = static_cast<double>(std::max<std::size_t>(s.instances, 1));
    out << "scenarios in grid: " << s.scenarios << "\n"
        << "instances written: " << s.instances << " (L=" << ds.meta.buses << ", m=" << ds.meta.steps
        << ", d=" << ds.meta.channels() << ")\n"
        << std::fixed << std::setprecision(1) << "truth balance: stable " << s.stable << " (" << 100.0 * s.stable / n
        << "%), unstable " << s.unstable << " (" << 100.0 * s.unstable / n << "%)\n"
        << std::defaultfloat << "dataset: " << opt.out.string() << "\n";
    return s;
}

LabelSummary run_label(const LabelOptions& opt, std::ostream& out) {
    Stopwatch clock;
    auto ds = io::read_dataset(opt.in);
    LabelSummary s;
    s.overwritten = static_cast<std::size_t>(
        std::count_if(ds.instances.begin(), ds.instances.end(), [](const auto& i) { return i.label.has_value(); }));

    semilabel::ConstraintSet cs;
    try {
        cs = semilabel::derive_constraints(ds, opt.thresholds);
    } catch (const InsufficientSeedsError& e) {
        throw InsufficientSeedsError(std::string(e.what()) +
                                     ". Try raising --v-unstable, lowering --v-stable or changing --tail-fraction.");
    }
    const auto result = semilabel::cop_kmeans(ds, cs, 2, opt.max_iter, opt.seed);
    ds = semilabel::apply_labels(ds, result.labels);
    ensure_parent(opt.out);
    io::write_dataset(ds, opt.out);

    s.seed_stable = cs.seed_stable().size();
    s.seed_unstable = cs.seed_unstable().size();
    s.must_links = cs.must_links().size();
    s.cannot_links = cs.cannot_links().size();
    s.iterations = result.iterations;
    s.converged = result.converged;
    s.labeled_stable = count_class(ds, Class::Stable, false);
    s.labeled_unstable = count_class(ds, Class::Unstable, false);
    const bool has_truth = std::all_of(ds.instances.begin(), ds.instances.end(), [](const auto& i) { return i.truth.has_value(); });
    if (has_truth && !ds.empty()) {
        std::size_t agree = 0;
        for (const auto& i : ds.instances) agree += *i.label == *i.truth ? 1 : 0;
        s.truth_agreement = static_cast<double>(agree) / static_cast<double>(ds.size());
    }

    RunManifest man("label");
    man.set_config({{"v_stable", opt.thresholds.v_stable},
                    {"v_unstable", opt.thresholds.v_unstable},
                    {"tail_fraction", opt.thresholds.tail_fraction},
                    {"recovery_margin", opt.thresholds.recovery_margin},
                    {"max_iter", opt.max_iter}});
    man.add_seed("seed", opt.seed);
    man.add_input(opt.in);
    man.add_output(opt.out);
    man.add_timing("total", clock.seconds());
    json summary{{"seed_stable", s.seed_stable},     {"seed_unstable", s.seed_unstable},
                 {"must_links", s.must_links},       {"cannot_links", s.cannot_links},
                 {"iterations", s.iterations},       {"converged", s.converged},
                 {"labeled_stable", s.labeled_stable}, {"labeled_unstable", s.labeled_unstable},
                 {"overwritten", s.overwritten}};
    summary["truth_agreement"] = s.truth_agreement ? json(*s.truth_agreement) : json(nullptr);
    man.set_summary(summary);
    man.write(manifest_path(opt.out));

    if (s.overwritten > 0) out << "note: overwrote " << s.overwritten << " existing labels\n";
    out << "seeds: " << s.seed_stable << " stable, " << s.seed_unstable << " unstable\n"
        << "constraints: " << s.must_links << " must-link, " << s.cannot_links << " cannot-link\n"
        << "iterations: " << s.iterations << (s.converged ? " (converged)" : " (hit max_iter)") << "\n"
        << "cluster sizes: stable " << s.labeled_stable << ", unstable " << s.labeled_unstable << "\n";
    if (s.truth_agreement)
        out << "agreement with generator truth: " << std::fixed << std::setprecision(4) << *s.truth_agreement
            << std::defaultfloat << "\n";
    out << "labeled dataset: " << opt.out.string() << "\n";
    return s;
}

checkpoint::Checkpoint run_train(const TrainOptions& opt, std::ostream& out) {
    Stopwatch clock;
    const auto ds = io::read_dataset(opt.dataset);
    require_labeled(ds, opt.dataset);
    if (opt.otw_steps < 1 || opt.otw_steps > ds.meta.steps)
        throw RangeError("otw_steps " + std::to_string(opt.otw_steps) + " outside [1, " + std::to_string(ds.meta.steps) + "]");

    const auto [train_ids, test_ids] = core::split_ids(ds, opt.train_fraction, opt.split_seed);
    const auto train_w = core::window(core::subset(ds, train_ids), opt.otw_steps);
    const auto test_w = core::window(core::subset(ds, test_ids), opt.otw_steps);
    const auto norm = core::fit_normalizer(train_w);
    const auto train_n = core::apply_normalizer(train_w, norm);
    const auto test_n = core::apply_normalizer(test_w, norm);
    const double prep_s = clock.seconds();

    checkpoint::Checkpoint ck;
    ck.kind = opt.kind;
    ck.otw_steps = opt.otw_steps;
    ck.buses = ds.meta.buses;
    ck.dt_s = ds.meta.dt_s;
    ck.norm = norm;
    ck.split_seed = opt.split_seed;
    ck.train_fraction = opt.train_fraction;
    ck.config = train_config_json(opt);
    ck.config["dataset_sha256"] = sha256_file(opt.dataset);

    auto test_accuracy = [&](const auto& predict_one) {
        if (test_n.empty()) return std::optional<double>{};
        std::vector<Class> pred, truth;
        for (const auto& inst : test_n.instances) {
            pred.push_back(predict_one(inst).cls);
            truth.push_back(*inst.label);
        }
        return std::optional<double>{accuracy_of(pred, truth)};
    };

    switch (opt.kind) {
        case checkpoint::ModelKind::Lstm: {
            auto cfg = opt.lstm;
            cfg.seed = opt.seed;
            auto res = lstm::train(train_n, test_n, cfg);
            ck.lstm = std::move(res.model);
            ck.history = std::move(res.history);
            break;
        }
        case checkpoint::ModelKind::Cart: {
            const auto samples = baselines::flatten_all(train_n, opt.otw_steps);
            ck.cart = baselines::train_cart(samples, opt.cart_max_depth, opt.cart_min_leaf, opt.seed);
            std::size_t wrong = 0;
            for (const auto& s : samples) wrong += baselines::predict_cart(*ck.cart, s.features).cls != s.label;
            const auto acc = test_accuracy([&](const auto& inst) {
                return baselines::predict_cart(*ck.cart, baselines::flatten_series(inst.series, opt.otw_steps));
            });
            ck.history.push_back({1, static_cast<double>(wrong) / static_cast<double>(samples.size()), acc});
            break;
        }
        case checkpoint::ModelKind::Svm: {
            const auto samples = baselines::flatten_all(train_n, opt.otw_steps);
            ck.svm = baselines::train_svm(samples, opt.svm_lambda, opt.svm_epochs, opt.seed);
            const auto acc = test_accuracy([&](const auto& inst) {
                return baselines::predict_svm(*ck.svm, baselines::flatten_series(inst.series, opt.otw_steps));
            });
            ck.history.push_back({1, baselines::svm_objective(*ck.svm, samples), acc});
            break;
        }
    }
    const double train_s = clock.seconds() - prep_s;

    ensure_parent(opt.out);
    checkpoint::save(ck, opt.out);
    const auto hist_path = sibling(opt.out, ".history.csv");
    io::write_text(hist_path, report::history_csv(ck.history));

    RunManifest man("train");
    man.set_config(ck.config);
    man.add_seed("split", opt.split_seed);
    man.add_seed("model", opt.seed);
    man.add_input(opt.dataset);
    man.add_output(opt.out);
    man.add_output(hist_path);
    man.add_timing("prepare", prep_s);
    man.add_timing("train", train_s);
    man.add_timing("total", clock.seconds());
    const auto& last = ck.history.back();
    man.set_summary({{"train_size", train_ids.size()},
                     {"test_size", test_ids.size()},
                     {"final_loss", last.loss},
                     {"final_test_accuracy", last.accuracy ? json(*last.accuracy) : json(nullptr)}});
    man.write(manifest_path(opt.out));

    out << checkpoint::to_string(opt.kind) << " otw=" << opt.otw_steps << " train=" << train_ids.size()
        << " test=" << test_ids.size();
    if (last.accuracy) out << " test_accuracy=" << std::fixed << std::setprecision(4) << *last.accuracy << std::defaultfloat;
    out << " (" << std::fixed << std::setprecision(1) << train_s << std::defaultfloat << " s)\n"
        << "checkpoint: " << opt.out.string() << "\n";
    return ck;
}

EvalSplit eval_split_from_string(const std::string& s) {
    if (s == "test") return EvalSplit::Test;
    if (s == "train") return EvalSplit::Train;
    if (s == "all") return EvalSplit::All;
    throw ConfigError("unknown split '" + s + "' (expected test, train or all)");
}

std::string to_string(EvalSplit s) {
    switch (s) {
        case EvalSplit::Test: return "test";
        case EvalSplit::Train: return "train";
        case EvalSplit::All: return "all";
    }
    throw InternalError("bad split");
}

report::EvaluationReport run_evaluate(const EvaluateOptions& opt, std::ostream& out, std::ostream& err) {
    Stopwatch clock;
    if (opt.otw_steps.empty()) throw ConfigError("evaluate needs at least one --otw value");
    if (opt.checkpoints.empty()) throw ConfigError("evaluate needs at least one checkpoint");
    const auto ds = io::read_dataset(opt.dataset);
    require_labeled(ds, opt.dataset);
    const std::set<int> wanted(opt.otw_steps.begin(), opt.otw_steps.end());

    report::EvaluationReport rep;
    rep.split = to_string(opt.split);
    rep.dataset = opt.dataset.string();
    RunManifest man("evaluate");
    man.add_input(opt.dataset);

    for (const auto& path : opt.checkpoints) {
        const auto ck = checkpoint::load(path);
        man.add_input(path);
        if (ck.buses != ds.meta.buses)
            throw ShapeError("checkpoint '" + path.string() + "' expects L=" + std::to_string(ck.buses) +
                             " but the dataset has L=" + std::to_string(ds.meta.buses));
        if (ck.otw_steps > ds.meta.steps)
            throw ShapeError("checkpoint '" + path.string() + "' needs " + std::to_string(ck.otw_steps) +
                             " steps but the dataset has m=" + std::to_string(ds.meta.steps));
        if (!wanted.count(ck.otw_steps)) {
            err << "warning: skipping '" << path.string() << "' (trained at otw=" << ck.otw_steps
                << ", not in the requested list)\n";
            continue;
        }
        core::Dataset part;
        if (opt.split == EvalSplit::All) {
            part = ds;
        } else {
            const auto [tr, te] = core::split_ids(ds, ck.train_fraction, ck.split_seed);
            part = core::subset(ds, opt.split == EvalSplit::Test ? te : tr);
        }
        if (part.empty()) throw EmptyInputError("evaluation partition is empty for '" + path.string() + "'");

        std::vector<Class> pred, labels, truth;
        std::vector<double> scores;
        for (const auto& inst : part.instances) {
            const auto p = ck.predict(inst.series);
            pred.push_back(p.cls);
            scores.push_back(p.score);
            labels.push_back(*inst.label);
            if (inst.truth) truth.push_back(*inst.truth);
        }
        report::EvalRow row;
        row.model = checkpoint::to_string(ck.kind);
        row.otw_steps = ck.otw_steps;
        row.checkpoint = path.string();
        row.cm = metrics::confusion(pred, labels);
        row.accuracy = metrics::accuracy(row.cm);
        try {
            row.f1 = metrics::f1(row.cm, metrics::F1Mode::Standard);
        } catch (const UndefinedMetricError& e) {
            err << "warning: " << row.model << " otw=" << row.otw_steps << ": " << e.what() << "\n";
        }
        try {
            row.f1_rate_harmonic = metrics::f1(row.cm, metrics::F1Mode::RateHarmonic);
        } catch (const UndefinedMetricError&) {
        }
        try {
            row.roc = metrics::roc_curve(scores, labels);
            row.auc = metrics::auc(row.roc);
        } catch (const DegenerateLabelsError& e) {
            err << "warning: " << row.model << " otw=" << row.otw_steps << ": " << e.what() << "\n";
        }
        if (truth.size() == pred.size()) row.truth_accuracy = accuracy_of(pred, truth);
        row.history = ck.history;
        rep.rows.push_back(std::move(row));
    }
    for (int k : wanted)
        if (std::none_of(rep.rows.begin(), rep.rows.end(), [&](const auto& r) { return r.otw_steps == k; }))
            err << "warning: no checkpoint trained at otw=" << k << "\n";

    std::stable_sort(rep.rows.begin(), rep.rows.end(), [](const auto& a, const auto& b) {
        auto rank = [](const std::string& m) { return m == "lstm" ? 0 : m == "dt" ? 1 : m == "svm" ? 2 : 3; };
        return std::pair(rank(a.model), a.otw_steps) < std::pair(rank(b.model), b.otw_steps);
    });

    const auto written = report::write_all(rep, opt.out_dir);
    for (const auto& p : written) man.add_output(p);
    man.set_config({{"split", rep.split}, {"otw_steps", opt.otw_steps}});
    man.add_timing("total", clock.seconds());
    man.write(opt.out_dir / "manifest.json");

    out << "model  otw  accuracy  f1      auc\n";
    for (const auto& r : rep.rows) {
        out << std::left << std::setw(6) << r.model << ' ' << std::setw(4) << r.otw_steps << ' ' << std::fixed
            << std::setprecision(4) << std::setw(9) << r.accuracy << ' ' << std::setw(7)
            << (r.f1 ? *r.f1 : std::nan("")) << ' ' << (r.auc ? *r.auc : std::nan("")) << std::defaultfloat
            << std::right << "\n";
    }
    out << "report: " << (opt.out_dir / "report.json").string() << "\n";
    return rep;
}

AssessSummary run_assess(const AssessOptions& opt, std::ostream& out, std::ostream& err) {
    const auto ck = checkpoint::load(opt.checkpoint);
    const auto ds = io::read_dataset(opt.dataset);
    if (ds.meta.buses != ck.buses)
        throw ShapeError("checkpoint '" + opt.checkpoint.string() + "' expects L=" + std::to_string(ck.buses) +
                         " but the dataset has L=" + std::to_string(ds.meta.buses));
    if (opt.min_otw < 1) throw RangeError("min_otw must be at least 1");
    AssessSummary s;
    bool found = !opt.id.has_value();

    auto emit = [&](std::int64_t id, int steps, const lstm::Prediction& p, double latency_us, bool final) {
        json line{{"id", id},
                  {"steps", steps},
                  {"class", std::string(to_string(p.cls))},
                  {"p_stable", p.score},
                  {"latency_us", latency_us},
                  {"final", final}};
        out << line.dump() << "\n";
        ++s.lines;
    };
    using clock = std::chrono::steady_clock;
    auto micros = [](clock::duration d) { return std::chrono::duration<double, std::micro>(d).count(); };

    for (const auto& inst : ds.instances) {
        if (opt.id && inst.id != *opt.id) continue;
        found = true;
        if (inst.steps() < ck.otw_steps) {
            err << "warning: instance " << inst.id << " has " << inst.steps() << " steps, fewer than the trained otw "
                << ck.otw_steps << "; skipped\n";
            ++s.skipped;
            continue;
        }
        if (ck.kind == checkpoint::ModelKind::Lstm) {
            lstm::Stepper stepper(*ck.lstm);
            for (int k = 1; k <= ck.otw_steps; ++k) {
                const auto t0 = clock::now();
                const Series row = core::apply_normalizer(Series(inst.series.row(k - 1)), ck.norm);
                const auto p = lstm::decide(stepper.push(row.row(0).transpose()));
                const double lat = micros(clock::now() - t0);
                const bool final = k == ck.otw_steps;
                if (final || (opt.stream && k >= opt.min_otw)) emit(inst.id, k, p, lat, final);
            }
        } else {
            // Fixed-length baselines can only answer once the full window is in.
            const auto t0 = clock::now();
            const auto p = ck.predict(inst.series);
            emit(inst.id, ck.otw_steps, p, micros(clock::now() - t0), true);
        }
        ++s.assessed;
    }
    if (!found) throw RangeError("instance id " + std::to_string(*opt.id) + " not found in the dataset");
    return s;
}

}  // namespace stvs::cli
