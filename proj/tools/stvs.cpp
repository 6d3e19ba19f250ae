// Command-line driver: generate -> label -> train -> evaluate, plus assess.
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "stvs/commands.hpp"
#include "stvs/error.hpp"

namespace {

using namespace stvs;

// Fills options that were not given on the command line from a TOML file.
// Keys may sit at top level or under a [<subcommand>] table.
void merge_config(CLI::App* sub, const std::string& path) {
    if (path.empty()) return;
    std::vector<CLI::ConfigItem> items;
    try {
        items = CLI::ConfigTOML{}.from_file(path);
    } catch (const CLI::Error& e) {
        throw ConfigError("cannot read config '" + path + "': " + e.what());
    }
    for (const auto& item : items) {
        if (item.name == "++" || item.name == "--") continue;
        if (!item.parents.empty() && !(item.parents.size() == 1 && item.parents[0] == sub->get_name())) continue;
        if (item.name == "config") throw ConfigError("config files cannot include other configs");
        auto* opt = sub->get_option_no_throw("--" + item.name);
        if (!opt) throw ConfigError("unknown key '" + item.name + "' in " + path + " for `" + sub->get_name() + "`");
        if (opt->count() > 0) continue;
        opt->add_result(item.inputs);
        opt->run_callback();
    }
}

void require(bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Short-term voltage stability lab: synthetic data, constrained clustering, LSTM and baselines."};
    app.require_subcommand(1);
    app.set_version_flag("--version", "stvs 1.0.0");

    // generate
    cli::GenerateOptions gen;
    std::string gen_cfg, gen_out;
    auto* g = app.add_subcommand("generate", "Write a synthetic trajectory dataset (JSONL + header).");
    auto& grid = gen.grid;
    g->add_option("--config", gen_cfg, "TOML file with grid keys");
    g->add_option("--out", gen_out, "Output JSONL path");
    g->add_option("--seed", grid.seed, "Master seed");
    g->add_option("--L", grid.buses, "Bus count");
    g->add_option("--n_lines,--n-lines", grid.n_lines, "Faultable line count");
    g->add_option("--load_levels,--load-levels", grid.load_levels);
    g->add_option("--motor_fractions,--motor-fractions", grid.motor_fractions);
    g->add_option("--fault_positions,--fault-positions", grid.fault_positions);
    g->add_option("--clear_times_s,--clear-times-s", grid.clear_times_s);
    g->add_option("--fault_time_s,--fault-time-s", grid.fault_time_s);
    g->add_option("--m", grid.steps, "Steps per instance");
    g->add_option("--dt_s,--dt-s", grid.dt_s, "Sampling interval in seconds");
    g->add_option("--noise_sigma,--noise-sigma", grid.noise_sigma);
    g->add_option("--samples", grid.samples, "Instance count (0 = one per scenario)");
    g->add_option("--severity_threshold,--severity-threshold", grid.severity.threshold);
    g->add_option("--w_load,--w-load", grid.severity.w_load);
    g->add_option("--w_motor,--w-motor", grid.severity.w_motor);
    g->add_option("--w_clear,--w-clear", grid.severity.w_clear);
    g->add_option("--w_draw,--w-draw", grid.severity.w_draw);

    // label
    cli::LabelOptions lab;
    std::string lab_cfg, lab_in, lab_out;
    auto* l = app.add_subcommand("label", "Label a dataset with seeded constrained k-means.");
    l->add_option("--config", lab_cfg);
    l->add_option("--in,--dataset", lab_in, "Input dataset");
    l->add_option("--out", lab_out, "Output dataset (may equal --in)");
    l->add_option("--seed", lab.seed);
    l->add_option("--v_stable,--v-stable", lab.thresholds.v_stable);
    l->add_option("--v_unstable,--v-unstable", lab.thresholds.v_unstable);
    l->add_option("--tail_fraction,--tail-fraction", lab.thresholds.tail_fraction);
    l->add_option("--recovery_margin,--recovery-margin", lab.thresholds.recovery_margin);
    l->add_option("--max_iter,--max-iter", lab.max_iter);

    // train
    cli::TrainOptions tr;
    std::string tr_cfg, tr_data, tr_out, tr_model = "lstm", tr_loss = "l2";
    auto* t = app.add_subcommand("train", "Train lstm, dt or svm on a labeled dataset.");
    t->add_option("--config", tr_cfg);
    t->add_option("--dataset", tr_data);
    t->add_option("--model", tr_model, "lstm | dt | svm");
    t->add_option("--otw", tr.otw_steps, "Observation window in steps");
    t->add_option("--out", tr_out, "Checkpoint path");
    t->add_option("--seed", tr.seed, "Model seed");
    t->add_option("--split_seed,--split-seed", tr.split_seed);
    t->add_option("--train_fraction,--train-fraction", tr.train_fraction);
    t->add_option("--learning_rate,--learning-rate", tr.lstm.learning_rate);
    t->add_option("--dropout_rate,--dropout-rate", tr.lstm.dropout_rate);
    t->add_option("--hidden_dim,--hidden-dim", tr.lstm.hidden_dim);
    t->add_option("--batch_size,--batch-size", tr.lstm.batch_size);
    t->add_option("--epochs", tr.lstm.epochs);
    t->add_option("--beta1", tr.lstm.beta1);
    t->add_option("--beta2", tr.lstm.beta2);
    t->add_option("--epsilon", tr.lstm.epsilon);
    t->add_option("--depth", tr.lstm.depth);
    t->add_option("--loss", tr_loss, "l2 | cross_entropy");
    t->add_option("--logit_dropout,--logit-dropout", tr.lstm.logit_dropout);
    t->add_option("--max_depth,--max-depth", tr.cart_max_depth);
    t->add_option("--min_leaf,--min-leaf", tr.cart_min_leaf);
    t->add_option("--lambda", tr.svm_lambda);
    t->add_option("--svm_epochs,--svm-epochs", tr.svm_epochs);

    // evaluate
    cli::EvaluateOptions ev;
    std::string ev_cfg, ev_data, ev_out, ev_split = "test";
    std::vector<std::string> ev_ckpts;
    std::uint64_t ev_seed = 0;
    auto* e = app.add_subcommand("evaluate", "Score checkpoints and write tables, ROC data and charts.");
    e->add_option("--config", ev_cfg);
    e->add_option("--dataset", ev_data);
    e->add_option("--checkpoints,checkpoints", ev_ckpts, "Checkpoint files");
    e->add_option("--otw", ev.otw_steps, "Window lengths to report");
    e->add_option("--split", ev_split, "test | train | all");
    e->add_option("--out", ev_out, "Report directory");
    e->add_option("--seed", ev_seed, "Unused; evaluation is deterministic");

    // assess
    cli::AssessOptions as;
    std::string as_cfg, as_ckpt, as_data, as_out;
    std::int64_t as_id = -1;
    std::uint64_t as_seed = 0;
    auto* a = app.add_subcommand("assess", "Replay instances step by step through a checkpoint.");
    a->add_option("--config", as_cfg);
    a->add_option("--checkpoint", as_ckpt);
    a->add_option("--dataset", as_data);
    a->add_flag("--stream", as.stream, "Emit a verdict at every step from --min_otw on");
    a->add_option("--min_otw,--min-otw", as.min_otw);
    a->add_option("--id", as_id, "Assess only this instance");
    a->add_option("--out", as_out, "Write verdict lines here instead of stdout");
    a->add_option("--seed", as_seed, "Unused; inference is deterministic");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        return app.exit(err);
    }

    try {
        if (g->parsed()) {
            merge_config(g, gen_cfg);
            require(!gen_out.empty(), "generate needs --out");
            gen.out = gen_out;
            cli::run_generate(gen, std::cout);
        } else if (l->parsed()) {
            merge_config(l, lab_cfg);
            require(!lab_in.empty() && !lab_out.empty(), "label needs --in and --out");
            lab.in = lab_in;
            lab.out = lab_out;
            cli::run_label(lab, std::cout);
        } else if (t->parsed()) {
            merge_config(t, tr_cfg);
            require(!tr_data.empty() && !tr_out.empty(), "train needs --dataset and --out");
            tr.dataset = tr_data;
            tr.out = tr_out;
            tr.kind = checkpoint::model_kind_from_string(tr_model);
            if (tr_loss == "l2") tr.lstm.loss = lstm::LossKind::SquaredL2;
            else if (tr_loss == "cross_entropy") tr.lstm.loss = lstm::LossKind::CrossEntropy;
            else throw ConfigError("unknown loss '" + tr_loss + "' (expected l2 or cross_entropy)");
            cli::run_train(tr, std::cout);
        } else if (e->parsed()) {
            merge_config(e, ev_cfg);
            require(!ev_data.empty() && !ev_out.empty(), "evaluate needs --dataset and --out");
            require(!ev.otw_steps.empty(), "evaluate needs at least one --otw value");
            ev.dataset = ev_data;
            ev.out_dir = ev_out;
            ev.split = cli::eval_split_from_string(ev_split);
            for (const auto& c : ev_ckpts) ev.checkpoints.emplace_back(c);
            cli::run_evaluate(ev, std::cout, std::cerr);
        } else if (a->parsed()) {
            merge_config(a, as_cfg);
            require(!as_ckpt.empty() && !as_data.empty(), "assess needs --checkpoint and --dataset");
            as.checkpoint = as_ckpt;
            as.dataset = as_data;
            if (as_id >= 0) as.id = as_id;
            if (as_out.empty()) {
                cli::run_assess(as, std::cout, std::cerr);
            } else {
                std::ofstream f(as_out, std::ios::binary | std::ios::trunc);
                if (!f) throw IoError("cannot open '" + as_out + "' for writing");
                cli::run_assess(as, f, std::cerr);
            }
        }
    } catch (const stvs::Error& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 2;
    } catch (const CLI::Error& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 2;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 3;
    }
    return 0;
}
