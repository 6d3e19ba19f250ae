#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stvs/core.hpp"
#include "stvs/rng.hpp"

namespace stvs::lstm {

/// One recurrent layer. Gate matrices act on [h_{t-1}; x_t] in that order.
struct LstmLayer {
    int input_dim = 0;
    int hidden_dim = 0;
    Eigen::MatrixXd W_f, W_i, W_o, W_c;  // H x (H + input_dim)
    Eigen::VectorXd b_f, b_i, b_o, b_c;

    void resize(int in, int hidden);
};

struct LstmModel {
    int input_dim = 0;
    int hidden_dim = 0;
    std::vector<LstmLayer> layers;
    Eigen::MatrixXd W_s;  // 2 x H, row 0 = Stable
    Eigen::VectorXd b_s;  // 2

    static LstmModel zeros(int input_dim, int hidden_dim, int depth = 1);
    int depth() const { return static_cast<int>(layers.size()); }

    /// Every parameter array in a fixed order, for optimizers and checks.
    std::vector<std::span<double>> blocks();
    std::vector<std::span<const double>> blocks() const;
    std::vector<std::string> block_names() const;
    std::size_t parameter_count() const;

    void validate() const;
};

using Gradients = LstmModel;

enum class LossKind { SquaredL2, CrossEntropy };

struct TrainConfig {
    double learning_rate = 1e-4;
    double dropout_rate = 0.25;
    int hidden_dim = 256;
    int batch_size = 64;
    int epochs = 200;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 0;
    int depth = 1;
    LossKind loss = LossKind::SquaredL2;
    /// Also drop entries of the FC output, not just h_m.
    bool logit_dropout = true;

    void validate() const;
};

struct CellState {
    Eigen::VectorXd h;
    Eigen::VectorXd c;

    static CellState zeros(int hidden_dim);
};

struct GateCache {
    Eigen::VectorXd hx;  // [h_{t-1}; x_t]
    Eigen::VectorXd c_prev;
    Eigen::VectorXd f, i, o, g;  // g is the candidate cell value
    Eigen::VectorXd c, tanh_c;
};

/// Single step of layer `layer` for one sample.
std::pair<CellState, GateCache> cell_forward(const Eigen::VectorXd& x_t, const CellState& prev,
                                             const LstmModel& model, int layer = 0);

enum class Mode { Train, Infer };

/// Columns index samples. `steps[t]` is the input_dim x B matrix at time t.
using BatchSeq = std::vector<Eigen::MatrixXd>;

BatchSeq to_batch(const std::vector<const Series*>& series);

struct DropoutMasks {
    Eigen::MatrixXd hidden;  // H x B, already scaled by 1/(1-rate); empty = none
    Eigen::MatrixXd logits;  // 2 x B
};

DropoutMasks sample_masks(int hidden_dim, int batch, double rate, bool logit_dropout, Rng& rng);

struct ForwardCache {
    // [layer][t] matrices, each H x B
    struct Step {
        Eigen::MatrixXd hx, c_prev, f, i, o, g, c, tanh_c, h;
    };
    std::vector<std::vector<Step>> layers;
    Eigen::MatrixXd h_last;     // H x B before dropout
    Eigen::MatrixXd h_dropped;  // after dropout
    Eigen::MatrixXd logits_raw, logits;
    Eigen::MatrixXd probs;      // 2 x B
    DropoutMasks masks;
};

/// Batched forward pass. In Infer mode masks are ignored.
ForwardCache forward_batch(const BatchSeq& seq, const LstmModel& model, Mode mode,
                           const DropoutMasks& masks = {});

/// Probability pair for one series; Train mode draws fresh masks from rng.
Eigen::Vector2d forward(const Series& seq, const LstmModel& model, double dropout_rate, Mode mode,
                        Rng* rng = nullptr, bool logit_dropout = true);

/// Squared Euclidean distance between probability and one-hot pairs.
double loss(const Eigen::Vector2d& y_hat, const Eigen::Vector2d& y);
double cross_entropy(const Eigen::Vector2d& y_hat, const Eigen::Vector2d& y);

Eigen::Vector2d one_hot(Class c);

/// Mean loss over the batch; targets is 2 x B.
double batch_loss(const Eigen::MatrixXd& probs, const Eigen::MatrixXd& targets, LossKind kind);

/// Analytic gradient of the mean batch loss.
Gradients backward(const BatchSeq& seq, const Eigen::MatrixXd& targets, const LstmModel& model,
                   const ForwardCache& cache, LossKind kind = LossKind::SquaredL2);

struct AdamState {
    Gradients m;
    Gradients v;
    std::int64_t t = 0;

    static AdamState for_model(const LstmModel& model);
};

struct AdamConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

void adam_step(LstmModel& model, const Gradients& grads, AdamState& state, const AdamConfig& cfg);

/// Uniform(+-1/sqrt(H + input_dim)) weights, zero biases, forget bias 1.
LstmModel init_model(int input_dim, int hidden_dim, int depth, std::uint64_t seed);

struct EpochRecord {
    int epoch = 0;
    double loss = 0.0;
    std::optional<double> accuracy;  // on the eval set, when given
};

using TrainHistory = std::vector<EpochRecord>;

struct TrainResult {
    LstmModel model;
    TrainHistory history;
};

/// Both sets must be labeled, normalized and windowed to the same length.
TrainResult train(const core::Dataset& train_set, const core::Dataset& eval_set, const TrainConfig& cfg);

struct Prediction {
    Class cls = Class::Unstable;
    double score = 0.0;  // P(Stable)
};

/// Exact ties resolve to Unstable.
Prediction decide(const Eigen::Vector2d& y_hat);

Prediction predict(const LstmModel& model, const Series& normalized);
Prediction predict(const LstmModel& model, const core::TimeSeriesInstance& instance,
                   const core::NormStats& norm);

/// Replays a series one step at a time with carried state.
class Stepper {
public:
    explicit Stepper(const LstmModel& model);
    Eigen::Vector2d push(const Eigen::VectorXd& x_t);
    int steps() const { return steps_; }
    void reset();

private:
    const LstmModel* model_;
    std::vector<CellState> state_;
    int steps_ = 0;
};

}  // namespace stvs::lstm
