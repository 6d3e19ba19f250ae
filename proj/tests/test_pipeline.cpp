#include <cstring>
#include <filesystem>
#include <sstream>

#include "doctest.h"

#include "json.hpp"
#include "oracles.hpp"
#include "stvs/checkpoint.hpp"
#include "stvs/commands.hpp"
#include "stvs/dataset_io.hpp"
#include "stvs/error.hpp"
#include "stvs/hash.hpp"
#include "stvs/report.hpp"
#include "stvs/svg.hpp"

using namespace stvs;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("stvs_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::uint64_t bits(double v) {
    std::uint64_t b;
    std::memcpy(&b, &v, sizeof b);
    return b;
}

void same_bits(std::span<const double> a, std::span<const double> b);

void same_bits(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    same_bits(std::span<const double>(a.data(), static_cast<std::size_t>(a.size())),
              std::span<const double>(b.data(), static_cast<std::size_t>(b.size())));
}

void same_bits(std::span<const double> a, std::span<const double> b) {
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(bits(a[k]) == bits(b[k]));
}

cli::GenerateOptions small_generate(const fs::path& out) {
    cli::GenerateOptions g;
    g.grid.samples = 200;
    g.grid.steps = 20;
    g.out = out;
    return g;
}

// Generates and labels a small dataset inside `dir`.
fs::path labeled_dataset(const fs::path& dir) {
    std::ostringstream sink;
    cli::run_generate(small_generate(dir / "raw.jsonl"), sink);
    cli::LabelOptions l;
    l.in = dir / "raw.jsonl";
    l.out = dir / "labeled.jsonl";
    cli::run_label(l, sink);
    return l.out;
}

cli::TrainOptions train_opts(const fs::path& data, checkpoint::ModelKind kind, int otw, const fs::path& out) {
    cli::TrainOptions t;
    t.dataset = data;
    t.kind = kind;
    t.otw_steps = otw;
    t.lstm.hidden_dim = 8;
    t.lstm.epochs = 3;
    t.out = out;
    return t;
}

}  // namespace

TEST_SUITE("hash") {

TEST_CASE("sha256 known answers") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    auto dir = scratch("hash");
    io::write_text(dir / "abc.txt", "abc");
    CHECK(sha256_file(dir / "abc.txt") == sha256_hex("abc"));
    CHECK_THROWS_AS(sha256_file(dir / "none"), IoError);
    fs::remove_all(dir);
}

}  // TEST_SUITE

TEST_SUITE("checkpoint") {

TEST_CASE("lstm checkpoint round trip is bit exact") {
    checkpoint::Checkpoint ck;
    ck.kind = checkpoint::ModelKind::Lstm;
    ck.otw_steps = 4;
    ck.buses = 2;
    ck.norm.min = Eigen::VectorXd::LinSpaced(6, -0.1, 0.3);
    ck.norm.max = Eigen::VectorXd::LinSpaced(6, 1.0 / 3.0, 2.0);
    ck.lstm = lstm::init_model(6, 5, 2, 3);
    ck.lstm->W_s(1, 2) = 0.1 + 0.2;
    ck.lstm->b_s[0] = -1e-310;
    ck.history = {{1, 0.5, 0.75}, {2, 1.0 / 3.0, std::nullopt}};
    ck.config = {{"hidden_dim", 5}};
    auto dir = scratch("ck_lstm");
    checkpoint::save(ck, dir / "a.json");
    auto back = checkpoint::load(dir / "a.json");
    REQUIRE(back.lstm.has_value());
    same_bits(back.norm.min, ck.norm.min);
    same_bits(back.norm.max, ck.norm.max);
    auto a = ck.lstm->blocks();
    auto b = std::as_const(*back.lstm).blocks();
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) same_bits(b[k], std::span<const double>(a[k]));
    CHECK(bits(back.history[1].loss) == bits(1.0 / 3.0));
    CHECK_FALSE(back.history[1].accuracy.has_value());
    CHECK(checkpoint::serialize(back) == checkpoint::serialize(ck));
    CHECK(io::read_text(dir / "a.json") == checkpoint::serialize(ck));
    Series raw = Series::Constant(6, 6, 0.5);
    CHECK(back.predict(raw).score == ck.predict(raw).score);
    fs::remove_all(dir);
}

TEST_CASE("baseline checkpoints round trip") {
    auto ds = oracle::random_dataset(60, 1, 3, 5);
    auto samples = baselines::flatten_all(ds, 3);
    checkpoint::Checkpoint ck;
    ck.otw_steps = 3;
    ck.buses = 1;
    ck.norm = core::fit_normalizer(ds);
    ck.kind = checkpoint::ModelKind::Cart;
    ck.cart = baselines::train_cart(samples, 4, 2);
    auto back = checkpoint::from_json(checkpoint::to_json(ck));
    REQUIRE(back.cart.has_value());
    CHECK(back.cart->nodes.size() == ck.cart->nodes.size());
    for (std::size_t k = 0; k < ck.cart->nodes.size(); ++k)
        CHECK(bits(back.cart->nodes[k].threshold) == bits(ck.cart->nodes[k].threshold));
    CHECK(checkpoint::serialize(back) == checkpoint::serialize(ck));

    checkpoint::Checkpoint sv = ck;
    sv.cart.reset();
    sv.kind = checkpoint::ModelKind::Svm;
    sv.svm = baselines::train_svm(samples, 1e-3, 5, 1);
    auto sb = checkpoint::from_json(checkpoint::to_json(sv));
    same_bits(sb.svm->weights, sv.svm->weights);
    CHECK(bits(sb.svm->bias) == bits(sv.svm->bias));
}

TEST_CASE("model kind names") {
    using checkpoint::ModelKind;
    CHECK(checkpoint::model_kind_from_string("dt") == ModelKind::Cart);
    CHECK(checkpoint::model_kind_from_string("cart") == ModelKind::Cart);
    CHECK(checkpoint::to_string(ModelKind::Cart) == "dt");
    CHECK_THROWS_AS(checkpoint::model_kind_from_string("forest"), ConfigError);
}

TEST_CASE("malformed checkpoints are rejected") {
    CHECK_THROWS_AS(checkpoint::from_json(json{{"format", "other"}}), FormatError);
    auto dir = scratch("ck_bad");
    io::write_text(dir / "x.json", "{");
    CHECK_THROWS_AS(checkpoint::load(dir / "x.json"), FormatError);
    CHECK_THROWS_AS(checkpoint::load(dir / "missing.json"), IoError);
    fs::remove_all(dir);
}

}  // TEST_SUITE

TEST_SUITE("report") {

TEST_CASE("tables, curves and charts") {
    report::EvaluationReport r;
    r.split = "test";
    r.dataset = "d.jsonl";
    for (const char* m : {"lstm", "dt", "svm"})
        for (int k : {3, 6}) {
            report::EvalRow row;
            row.model = m;
            row.otw_steps = k;
            row.cm = {5, 1, 1, 3};
            row.accuracy = 0.8;
            row.f1 = 5.0 / 6.0;
            row.auc = 0.9;
            row.roc.points = {{0, 0}, {0.25, 0.8, 0.7}, {1, 1, 0.1}};
            if (row.model == "lstm") row.history = {{1, 0.4, 0.7}, {2, 0.3, 0.8}};
            r.rows.push_back(row);
        }
    auto csv = report::table_csv(r);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
    CHECK(csv.rfind("model,otw_steps,", 0) == 0);
    auto j = report::to_json(r);
    CHECK(j["rows"].size() == 6);
    CHECK(j["rows"][0]["published_reference"]["accuracy"] == 0.9508);
    CHECK(j["roc"]["svm_otw6"][0]["threshold"] == "inf");
    auto roc = report::roc_csv(r.rows[0]);
    CHECK(roc.find("inf,0.0,0.0") != std::string::npos);
    for (const auto& svg : {report::accuracy_svg(r), report::roc_svg(r, 3), report::f1_svg(r), report::history_svg(r.rows[0])}) {
        CHECK(svg.rfind("<svg", 0) == 0);
        CHECK(svg.find("</svg>") != std::string::npos);
        CHECK(svg.find("nan") == std::string::npos);
    }
    auto dir = scratch("report");
    auto files = report::write_all(r, dir);
    for (const char* name : {"report.json", "table.csv", "accuracy_vs_otw.svg", "roc_otw3.svg", "roc_otw6.svg",
                             "f1_bars.svg", "roc_dt_otw3.csv", "history_lstm_otw6.csv", "history_lstm_otw6.svg"})
        CHECK(fs::exists(dir / name));
    fs::remove_all(dir);
}

TEST_CASE("svg text is escaped") {
    CHECK(svg::escape("a<b & \"c\">") == "a&lt;b &amp; &quot;c&quot;&gt;");
}

}  // TEST_SUITE

TEST_SUITE("cli") {

TEST_CASE("generate writes data, header and manifest") {
    auto dir = scratch("gen");
    std::ostringstream out;
    auto s = cli::run_generate(small_generate(dir / "a.jsonl"), out);
    CHECK(s.instances == 200);
    CHECK(s.stable + s.unstable == 200);
    CHECK(out.str().find("scenarios in grid: 540") != std::string::npos);
    auto header = json::parse(io::read_text(io::header_path(dir / "a.jsonl")));
    CHECK(header["L"] == 10);
    CHECK(header["d"] == 30);
    auto man = json::parse(io::read_text(cli::manifest_path(dir / "a.jsonl")));
    CHECK(man["command"] == "generate");
    CHECK(man["outputs"][0]["sha256"] == sha256_file(dir / "a.jsonl"));
    CHECK(man["seeds"]["master"] == 7);
    cli::run_generate(small_generate(dir / "b.jsonl"), out);
    CHECK(sha256_file(dir / "a.jsonl") == sha256_file(dir / "b.jsonl"));
    fs::remove_all(dir);
}

TEST_CASE("label reports seeds and overwrites") {
    auto dir = scratch("label");
    std::ostringstream out;
    cli::run_generate(small_generate(dir / "raw.jsonl"), out);
    cli::LabelOptions l;
    l.in = dir / "raw.jsonl";
    l.out = dir / "lab.jsonl";
    auto s = cli::run_label(l, out);
    CHECK(s.overwritten == 0);
    CHECK(s.seed_stable > 0);
    CHECK(s.seed_unstable > 0);
    CHECK(s.labeled_stable + s.labeled_unstable == 200);
    REQUIRE(s.truth_agreement.has_value());
    CHECK(*s.truth_agreement >= 0.95);
    std::ostringstream again;
    l.in = l.out;
    auto t = cli::run_label(l, again);
    CHECK(t.overwritten == 200);
    CHECK(again.str().find("overwrote 200 existing labels") != std::string::npos);
    for (const auto& inst : io::read_dataset(l.out).instances) CHECK(inst.label.has_value());

    cli::LabelOptions missing;
    missing.in = dir / "absent.jsonl";
    missing.out = dir / "x.jsonl";
    CHECK_THROWS_AS(cli::run_label(missing, out), IoError);
    cli::LabelOptions strict = l;
    strict.thresholds.v_stable = 1.29;
    CHECK_THROWS_AS(cli::run_label(strict, out), InsufficientSeedsError);
    fs::remove_all(dir);
}

TEST_CASE("train writes checkpoint, history and manifest") {
    auto dir = scratch("train");
    const auto data = labeled_dataset(dir);
    std::ostringstream out;
    using checkpoint::ModelKind;
    auto ck = cli::run_train(train_opts(data, ModelKind::Lstm, 6, dir / "l.json"), out);
    CHECK(ck.history.size() == 3);
    CHECK(fs::exists(dir / "l.json"));
    CHECK(fs::exists(dir / "l.json.history.csv"));
    auto man = json::parse(io::read_text(dir / "l.json.manifest.json"));
    CHECK(man["summary"]["train_size"] == 160);
    CHECK(man["summary"]["test_size"] == 40);
    CHECK(man["inputs"][0]["sha256"] == sha256_file(data));
    cli::run_train(train_opts(data, ModelKind::Lstm, 6, dir / "l2.json"), out);
    CHECK(io::read_text(dir / "l.json") == io::read_text(dir / "l2.json"));

    auto dt = cli::run_train(train_opts(data, ModelKind::Cart, 6, dir / "d.json"), out);
    CHECK(dt.history.size() == 1);
    auto hist = io::read_text(dir / "d.json.history.csv");
    CHECK(std::count(hist.begin(), hist.end(), '\n') == 2);
    auto sv = cli::run_train(train_opts(data, ModelKind::Svm, 6, dir / "s.json"), out);
    CHECK(sv.svm.has_value());
    CHECK(sv.history.size() == 1);

    CHECK_THROWS_AS(cli::run_train(train_opts(dir / "raw.jsonl", ModelKind::Cart, 6, dir / "u.json"), out),
                    MissingLabelError);
    CHECK_THROWS_AS(cli::run_train(train_opts(data, ModelKind::Cart, 99, dir / "u.json"), out), RangeError);
    fs::remove_all(dir);
}

TEST_CASE("evaluate builds one row per model and window") {
    auto dir = scratch("eval");
    const auto data = labeled_dataset(dir);
    std::ostringstream out, err;
    using checkpoint::ModelKind;
    cli::EvaluateOptions ev;
    for (auto kind : {ModelKind::Lstm, ModelKind::Cart, ModelKind::Svm})
        for (int k : {3, 6}) {
            auto path = dir / (checkpoint::to_string(kind) + std::to_string(k) + ".json");
            cli::run_train(train_opts(data, kind, k, path), out);
            ev.checkpoints.push_back(path);
        }
    ev.dataset = data;
    ev.otw_steps = {3, 6};
    ev.out_dir = dir / "report";
    auto rep = cli::run_evaluate(ev, out, err);
    CHECK(rep.rows.size() == 6);
    for (const auto& row : rep.rows) {
        CHECK(row.cm.total() == 40);
        CHECK(row.auc.has_value());
        CHECK(row.truth_accuracy.has_value());
    }
    for (const char* f : {"report.json", "table.csv", "accuracy_vs_otw.svg", "roc_otw3.svg", "f1_bars.svg", "manifest.json"})
        CHECK(fs::exists(dir / "report" / f));

    // A window outside the list is skipped with a warning.
    ev.otw_steps = {3};
    std::ostringstream warn;
    auto only3 = cli::run_evaluate(ev, out, warn);
    CHECK(only3.rows.size() == 3);
    CHECK(warn.str().find("warning: skipping") != std::string::npos);

    ev.otw_steps.clear();
    CHECK_THROWS_AS(cli::run_evaluate(ev, out, err), ConfigError);

    // Dimension mismatch names the checkpoint.
    std::ostringstream sink;
    auto g = small_generate(dir / "wide.jsonl");
    g.grid.buses = 12;
    cli::run_generate(g, sink);
    cli::LabelOptions lw;
    lw.in = lw.out = dir / "wide.jsonl";
    cli::run_label(lw, sink);
    cli::EvaluateOptions wrong = ev;
    wrong.otw_steps = {3};
    wrong.dataset = dir / "wide.jsonl";
    try {
        cli::run_evaluate(wrong, out, err);
        FAIL("expected a ShapeError");
    } catch (const ShapeError& e) {
        CHECK(std::string(e.what()).find("lstm3.json") != std::string::npos);
    }
    fs::remove_all(dir);
}

TEST_CASE("a deep tree memorizes its training split") {
    auto dir = scratch("memo");
    const auto data = labeled_dataset(dir);
    std::ostringstream out, err;
    auto t = train_opts(data, checkpoint::ModelKind::Cart, 6, dir / "deep.json");
    t.cart_max_depth = 30;
    t.cart_min_leaf = 1;
    cli::run_train(t, out);
    cli::EvaluateOptions ev;
    ev.checkpoints = {dir / "deep.json"};
    ev.dataset = data;
    ev.otw_steps = {6};
    ev.split = cli::EvalSplit::Train;
    ev.out_dir = dir / "rep";
    auto rep = cli::run_evaluate(ev, out, err);
    REQUIRE(rep.rows.size() == 1);
    CHECK(rep.rows[0].cm.total() == 160);
    CHECK(rep.rows[0].accuracy >= 0.99);
    fs::remove_all(dir);
}

TEST_CASE("assess emits one verdict line per instance or a stream") {
    auto dir = scratch("assess");
    const auto data = labeled_dataset(dir);
    std::ostringstream out, err;
    auto t = train_opts(data, checkpoint::ModelKind::Lstm, 6, dir / "l.json");
    t.lstm.epochs = 30;
    t.lstm.learning_rate = 1e-2;
    cli::run_train(t, out);

    cli::AssessOptions a;
    a.checkpoint = dir / "l.json";
    a.dataset = data;
    std::ostringstream lines;
    auto s = cli::run_assess(a, lines, err);
    CHECK(s.assessed == 200);
    CHECK(s.lines == 200);
    std::istringstream in(lines.str());
    std::string line;
    while (std::getline(in, line)) {
        auto j = json::parse(line);
        CHECK(j["final"] == true);
        CHECK(j["steps"] == 6);
        CHECK(j["latency_us"].get<double>() > 0.0);
    }

    a.stream = true;
    a.min_otw = 3;
    a.id = 5;
    std::ostringstream stream;
    auto st = cli::run_assess(a, stream, err);
    CHECK(st.lines == 4);

    // A noiseless stable instance.
    simgen::GridConfig g;
    g.steps = 20;
    g.noise_sigma = 0.0;
    core::ScenarioParams calm{0.8, 0.7, 0, 0.4, 0.1, 0.15};
    core::Dataset one;
    one.meta.buses = 10;
    one.meta.steps = 20;
    one.instances.push_back(simgen::simulate_trajectory(calm, simgen::severity_score(calm, 0.0), g, 1));
    io::write_dataset(one, dir / "calm.jsonl");
    a = {};
    a.checkpoint = dir / "l.json";
    a.dataset = dir / "calm.jsonl";
    std::ostringstream verdict;
    cli::run_assess(a, verdict, err);
    auto v = json::parse(verdict.str());
    CHECK(v["class"] == "stable");
    CHECK(v["p_stable"].get<double>() > 0.5);

    // Too short for the trained window.
    one.meta.steps = 4;
    one.instances[0] = core::window(one.instances[0], 4);
    io::write_dataset(one, dir / "short.jsonl");
    a.dataset = dir / "short.jsonl";
    std::ostringstream none, warn;
    auto sk = cli::run_assess(a, none, warn);
    CHECK(sk.skipped == 1);
    CHECK(none.str().empty());
    CHECK(warn.str().find("skipped") != std::string::npos);
    fs::remove_all(dir);
}

}  // TEST_SUITE
