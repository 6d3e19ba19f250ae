#include "stvs/lstm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "stvs/error.hpp"

namespace stvs::lstm {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd sigmoid(const MatrixXd& z) {
    return (1.0 + (-z.array()).exp()).inverse().matrix();
}

MatrixXd affine(const MatrixXd& W, const VectorXd& b, const MatrixXd& x) {
    MatrixXd z = W * x;
    z.colwise() += b;
    return z;
}

MatrixXd softmax_cols(const MatrixXd& z) {
    MatrixXd p(z.rows(), z.cols());
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
        const double mx = z.col(j).maxCoeff();
        VectorXd e = (z.col(j).array() - mx).exp();
        p.col(j) = e / e.sum();
    }
    return p;
}

ForwardCache::Step layer_step(const LstmLayer& layer, const MatrixXd& h_prev, const MatrixXd& c_prev,
                              const MatrixXd& x) {
    ForwardCache::Step s;
    s.hx.resize(h_prev.rows() + x.rows(), x.cols());
    s.hx << h_prev, x;
    s.c_prev = c_prev;
    s.f = sigmoid(affine(layer.W_f, layer.b_f, s.hx));
    s.i = sigmoid(affine(layer.W_i, layer.b_i, s.hx));
    s.o = sigmoid(affine(layer.W_o, layer.b_o, s.hx));
    s.g = affine(layer.W_c, layer.b_c, s.hx).array().tanh().matrix();
    s.c = s.f.cwiseProduct(c_prev) + s.i.cwiseProduct(s.g);
    s.tanh_c = s.c.array().tanh().matrix();
    s.h = s.o.cwiseProduct(s.tanh_c);
    return s;
}

}  // namespace

void LstmLayer::resize(int in, int hidden) {
    input_dim = in;
    hidden_dim = hidden;
    for (auto* W : {&W_f, &W_i, &W_o, &W_c}) W->setZero(hidden, hidden + in);
    for (auto* b : {&b_f, &b_i, &b_o, &b_c}) b->setZero(hidden);
}

LstmModel LstmModel::zeros(int input_dim, int hidden_dim, int depth) {
    if (input_dim < 1 || hidden_dim < 1 || depth < 1)
        throw RangeError("model needs input_dim, hidden_dim and depth >= 1");
    LstmModel m;
    m.input_dim = input_dim;
    m.hidden_dim = hidden_dim;
    m.layers.resize(static_cast<std::size_t>(depth));
    for (int l = 0; l < depth; ++l)
        m.layers[static_cast<std::size_t>(l)].resize(l == 0 ? input_dim : hidden_dim, hidden_dim);
    m.W_s.setZero(2, hidden_dim);
    m.b_s.setZero(2);
    return m;
}

std::vector<std::span<double>> LstmModel::blocks() {
    std::vector<std::span<double>> out;
    auto add = [&](auto& x) { out.emplace_back(x.data(), static_cast<std::size_t>(x.size())); };
    for (auto& l : layers) {
        add(l.W_f), add(l.W_i), add(l.W_o), add(l.W_c);
        add(l.b_f), add(l.b_i), add(l.b_o), add(l.b_c);
    }
    add(W_s), add(b_s);
    return out;
}

std::vector<std::span<const double>> LstmModel::blocks() const {
    auto mut = const_cast<LstmModel*>(this)->blocks();
    return {mut.begin(), mut.end()};
}

std::vector<std::string> LstmModel::block_names() const {
    std::vector<std::string> out;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto p = "layer" + std::to_string(l) + ".";
        for (const char* n : {"W_f", "W_i", "W_o", "W_c", "b_f", "b_i", "b_o", "b_c"}) out.push_back(p + n);
    }
    out.emplace_back("W_s");
    out.emplace_back("b_s");
    return out;
}

std::size_t LstmModel::parameter_count() const {
    std::size_t n = 0;
    for (auto b : blocks()) n += b.size();
    return n;
}

void LstmModel::validate() const {
    if (layers.empty()) throw ShapeError("model has no layers");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& ly = layers[l];
        const int in = l == 0 ? input_dim : hidden_dim;
        if (ly.input_dim != in || ly.hidden_dim != hidden_dim)
            throw ShapeError("layer " + std::to_string(l) + " dimensions are inconsistent");
        for (const auto* W : {&ly.W_f, &ly.W_i, &ly.W_o, &ly.W_c})
            if (W->rows() != hidden_dim || W->cols() != hidden_dim + in)
                throw ShapeError("gate matrix shape mismatch in layer " + std::to_string(l));
        for (const auto* b : {&ly.b_f, &ly.b_i, &ly.b_o, &ly.b_c})
            if (b->size() != hidden_dim) throw ShapeError("gate bias length mismatch in layer " + std::to_string(l));
    }
    if (W_s.rows() != 2 || W_s.cols() != hidden_dim || b_s.size() != 2) throw ShapeError("head shape mismatch");
    for (auto b : blocks())
        for (double v : b)
            if (!std::isfinite(v)) throw NumericError("model has non-finite parameters");
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout_rate must lie in [0, 1)");
    if (hidden_dim < 1) throw ConfigError("hidden_dim must be positive");
    if (batch_size < 1) throw ConfigError("batch_size must be positive");
    if (epochs < 0) throw ConfigError("epochs must be non-negative");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
        throw ConfigError("adam betas must lie in [0, 1)");
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
    if (depth < 1) throw ConfigError("depth must be positive");
}

CellState CellState::zeros(int hidden_dim) {
    return {VectorXd::Zero(hidden_dim), VectorXd::Zero(hidden_dim)};
}

std::pair<CellState, GateCache> cell_forward(const VectorXd& x_t, const CellState& prev,
                                             const LstmModel& model, int layer) {
    if (layer < 0 || layer >= model.depth()) throw RangeError("layer index out of range");
    const auto& ly = model.layers[static_cast<std::size_t>(layer)];
    if (x_t.size() != ly.input_dim || prev.h.size() != ly.hidden_dim || prev.c.size() != ly.hidden_dim)
        throw ShapeError("cell_forward input sizes do not match the layer");
    const auto s = layer_step(ly, prev.h, prev.c, x_t);
    GateCache g{s.hx.col(0), prev.c, s.f.col(0), s.i.col(0), s.o.col(0), s.g.col(0), s.c.col(0), s.tanh_c.col(0)};
    CellState next{s.h.col(0), s.c.col(0)};
    if (!next.h.allFinite() || !next.c.allFinite()) throw NumericError("cell_forward produced non-finite state");
    return {std::move(next), std::move(g)};
}

BatchSeq to_batch(const std::vector<const Series*>& series) {
    if (series.empty()) throw EmptyInputError("empty batch");
    const auto m = series.front()->rows();
    const auto d = series.front()->cols();
    if (m < 1) throw EmptyInputError("empty sequence");
    BatchSeq seq(static_cast<std::size_t>(m), MatrixXd(d, static_cast<Eigen::Index>(series.size())));
    for (std::size_t b = 0; b < series.size(); ++b) {
        const auto& s = *series[b];
        if (s.rows() != m || s.cols() != d) throw ShapeError("batch members differ in shape");
        for (Eigen::Index t = 0; t < m; ++t)
            seq[static_cast<std::size_t>(t)].col(static_cast<Eigen::Index>(b)) = s.row(t).transpose();
    }
    return seq;
}

DropoutMasks sample_masks(int hidden_dim, int batch, double rate, bool logit_dropout, Rng& rng) {
    DropoutMasks masks;
    if (rate <= 0.0) return masks;
    const double keep = 1.0 / (1.0 - rate);
    auto draw = [&](Eigen::Index rows) {
        MatrixXd mk(rows, batch);
        // Column-major fill: sample by sample.
        for (Eigen::Index j = 0; j < batch; ++j)
            for (Eigen::Index r = 0; r < rows; ++r) mk(r, j) = rng.uniform() < rate ? 0.0 : keep;
        return mk;
    };
    masks.hidden = draw(hidden_dim);
    if (logit_dropout) masks.logits = draw(2);
    return masks;
}

ForwardCache forward_batch(const BatchSeq& seq, const LstmModel& model, Mode mode, const DropoutMasks& masks) {
    if (seq.empty()) throw EmptyInputError("forward needs at least one time step");
    const auto B = seq.front().cols();
    const int H = model.hidden_dim;
    ForwardCache cache;
    cache.layers.resize(model.layers.size());
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const auto& ly = model.layers[l];
        MatrixXd h = MatrixXd::Zero(H, B), c = MatrixXd::Zero(H, B);
        auto& steps = cache.layers[l];
        steps.reserve(seq.size());
        for (std::size_t t = 0; t < seq.size(); ++t) {
            const MatrixXd& x = l == 0 ? seq[t] : cache.layers[l - 1][t].h;
            if (x.rows() != ly.input_dim || x.cols() != B)
                throw ShapeError("input at step " + std::to_string(t) + " has " + std::to_string(x.rows()) +
                                 " channels, model expects " + std::to_string(ly.input_dim));
            steps.push_back(layer_step(ly, h, c, x));
            h = steps.back().h;
            c = steps.back().c;
        }
    }
    cache.h_last = cache.layers.back().back().h;
    cache.h_dropped = cache.h_last;
    if (mode == Mode::Train) {
        cache.masks = masks;
        if (masks.hidden.size() > 0) {
            if (masks.hidden.rows() != H || masks.hidden.cols() != B) throw ShapeError("hidden mask shape mismatch");
            cache.h_dropped = cache.h_last.cwiseProduct(masks.hidden);
        }
    }
    cache.logits_raw = affine(model.W_s, model.b_s, cache.h_dropped);
    cache.logits = cache.logits_raw;
    if (mode == Mode::Train && masks.logits.size() > 0) {
        if (masks.logits.rows() != 2 || masks.logits.cols() != B) throw ShapeError("logit mask shape mismatch");
        cache.logits = cache.logits_raw.cwiseProduct(masks.logits);
    }
    cache.probs = softmax_cols(cache.logits);
    if (!cache.probs.allFinite()) throw NumericError("forward produced non-finite probabilities");
    return cache;
}

Eigen::Vector2d forward(const Series& seq, const LstmModel& model, double dropout_rate, Mode mode, Rng* rng,
                        bool logit_dropout) {
    if (seq.rows() < 1) throw EmptyInputError("forward needs at least one time step");
    const auto batch = to_batch({&seq});
    DropoutMasks masks;
    if (mode == Mode::Train && dropout_rate > 0.0) {
        if (!rng) throw ConfigError("train-mode forward with dropout needs an rng");
        masks = sample_masks(model.hidden_dim, 1, dropout_rate, logit_dropout, *rng);
    }
    const auto cache = forward_batch(batch, model, mode, masks);
    return cache.probs.col(0);
}

double loss(const Eigen::Vector2d& y_hat, const Eigen::Vector2d& y) {
    return (y_hat - y).squaredNorm();
}

double cross_entropy(const Eigen::Vector2d& y_hat, const Eigen::Vector2d& y) {
    return -(y.array() * y_hat.array().max(1e-300).log()).sum();
}

Eigen::Vector2d one_hot(Class c) {
    return c == Class::Stable ? Eigen::Vector2d(1.0, 0.0) : Eigen::Vector2d(0.0, 1.0);
}

double batch_loss(const MatrixXd& probs, const MatrixXd& targets, LossKind kind) {
    if (probs.rows() != 2 || probs.cols() != targets.cols() || targets.rows() != 2)
        throw ShapeError("probability/target shapes differ");
    double total = 0.0;
    for (Eigen::Index j = 0; j < probs.cols(); ++j)
        total += kind == LossKind::SquaredL2 ? loss(probs.col(j), targets.col(j))
                                             : cross_entropy(probs.col(j), targets.col(j));
    return total / static_cast<double>(probs.cols());
}

Gradients backward(const BatchSeq& seq, const MatrixXd& targets, const LstmModel& model,
                   const ForwardCache& cache, LossKind kind) {
    if (cache.layers.size() != model.layers.size() || cache.layers.empty())
        throw InternalError("forward cache depth does not match the model");
    for (const auto& steps : cache.layers)
        if (steps.size() != seq.size()) throw InternalError("forward cache length does not match the sequence");
    const auto B = cache.probs.cols();
    if (targets.rows() != 2 || targets.cols() != B) throw InternalError("targets do not match the cached batch");

    Gradients g = LstmModel::zeros(model.input_dim, model.hidden_dim, model.depth());
    const double inv_b = 1.0 / static_cast<double>(B);
    const MatrixXd& p = cache.probs;

    MatrixXd dz(2, B);
    if (kind == LossKind::SquaredL2) {
        const MatrixXd dp = 2.0 * (p - targets) * inv_b;
        for (Eigen::Index j = 0; j < B; ++j) {
            const double dot = p.col(j).dot(dp.col(j));
            dz.col(j) = p.col(j).cwiseProduct((dp.col(j).array() - dot).matrix());
        }
    } else {
        dz = (p - targets) * inv_b;
    }
    if (cache.masks.logits.size() > 0) dz = dz.cwiseProduct(cache.masks.logits);

    g.W_s = dz * cache.h_dropped.transpose();
    g.b_s = dz.rowwise().sum();
    MatrixXd dh_last = model.W_s.transpose() * dz;
    if (cache.masks.hidden.size() > 0) dh_last = dh_last.cwiseProduct(cache.masks.hidden);

    const int H = model.hidden_dim;
    const auto T = seq.size();
    // Gradient w.r.t. each step's output h, arriving from the layer above.
    std::vector<MatrixXd> dh_above(T, MatrixXd::Zero(H, B));
    dh_above.back() = dh_last;

    for (std::size_t lr = model.layers.size(); lr-- > 0;) {
        const auto& ly = model.layers[lr];
        auto& gl = g.layers[lr];
        const auto& steps = cache.layers[lr];
        std::vector<MatrixXd> dx_below(lr > 0 ? T : 0);
        MatrixXd dh_next = MatrixXd::Zero(H, B), dc_next = MatrixXd::Zero(H, B);
        for (std::size_t t = T; t-- > 0;) {
            const auto& s = steps[t];
            const MatrixXd dh = dh_next + dh_above[t];
            const MatrixXd dc =
                dc_next + dh.cwiseProduct(s.o).cwiseProduct((1.0 - s.tanh_c.array().square()).matrix());
            const MatrixXd d_o = dh.cwiseProduct(s.tanh_c).cwiseProduct(s.o.cwiseProduct((1.0 - s.o.array()).matrix()));
            const MatrixXd d_f = dc.cwiseProduct(s.c_prev).cwiseProduct(s.f.cwiseProduct((1.0 - s.f.array()).matrix()));
            const MatrixXd d_i = dc.cwiseProduct(s.g).cwiseProduct(s.i.cwiseProduct((1.0 - s.i.array()).matrix()));
            const MatrixXd d_g = dc.cwiseProduct(s.i).cwiseProduct((1.0 - s.g.array().square()).matrix());
            gl.W_f.noalias() += d_f * s.hx.transpose();
            gl.W_i.noalias() += d_i * s.hx.transpose();
            gl.W_o.noalias() += d_o * s.hx.transpose();
            gl.W_c.noalias() += d_g * s.hx.transpose();
            gl.b_f += d_f.rowwise().sum();
            gl.b_i += d_i.rowwise().sum();
            gl.b_o += d_o.rowwise().sum();
            gl.b_c += d_g.rowwise().sum();
            MatrixXd dhx = ly.W_f.transpose() * d_f;
            dhx.noalias() += ly.W_i.transpose() * d_i;
            dhx.noalias() += ly.W_o.transpose() * d_o;
            dhx.noalias() += ly.W_c.transpose() * d_g;
            dh_next = dhx.topRows(H);
            if (lr > 0) dx_below[t] = dhx.bottomRows(ly.input_dim);
            dc_next = dc.cwiseProduct(s.f);
        }
        if (lr > 0) dh_above = std::move(dx_below);
    }
    return g;
}

AdamState AdamState::for_model(const LstmModel& model) {
    return {LstmModel::zeros(model.input_dim, model.hidden_dim, model.depth()),
            LstmModel::zeros(model.input_dim, model.hidden_dim, model.depth()), 0};
}

void adam_step(LstmModel& model, const Gradients& grads, AdamState& state, const AdamConfig& cfg) {
    state.t += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    auto params = model.blocks();
    auto g = grads.blocks();
    auto m = state.m.blocks();
    auto v = state.v.blocks();
    if (params.size() != g.size() || params.size() != m.size() || params.size() != v.size())
        throw ShapeError("adam_step layouts differ");
    for (std::size_t k = 0; k < params.size(); ++k) {
        if (params[k].size() != g[k].size() || params[k].size() != m[k].size())
            throw ShapeError("adam_step block sizes differ");
        for (std::size_t j = 0; j < params[k].size(); ++j) {
            const double gj = g[k][j];
            m[k][j] = cfg.beta1 * m[k][j] + (1.0 - cfg.beta1) * gj;
            v[k][j] = cfg.beta2 * v[k][j] + (1.0 - cfg.beta2) * gj * gj;
            const double m_hat = m[k][j] / bc1;
            const double v_hat = v[k][j] / bc2;
            params[k][j] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
        }
    }
}

LstmModel init_model(int input_dim, int hidden_dim, int depth, std::uint64_t seed) {
    LstmModel model = LstmModel::zeros(input_dim, hidden_dim, depth);
    Rng rng(seed);
    auto fill = [&](MatrixXd& W, double a) {
        for (Eigen::Index r = 0; r < W.rows(); ++r)
            for (Eigen::Index c = 0; c < W.cols(); ++c) W(r, c) = rng.uniform(-a, a);
    };
    for (auto& ly : model.layers) {
        const double a = 1.0 / std::sqrt(static_cast<double>(hidden_dim + ly.input_dim));
        fill(ly.W_f, a);
        fill(ly.W_i, a);
        fill(ly.W_o, a);
        fill(ly.W_c, a);
        ly.b_f.setOnes();
    }
    fill(model.W_s, 1.0 / std::sqrt(static_cast<double>(hidden_dim + input_dim)));
    return model;
}

namespace {

std::vector<const Series*> series_ptrs(const core::Dataset& ds, const std::vector<std::size_t>& idx) {
    std::vector<const Series*> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(&ds.instances[i].series);
    return out;
}

MatrixXd targets_for(const core::Dataset& ds, const std::vector<std::size_t>& idx) {
    MatrixXd y(2, static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) y.col(static_cast<Eigen::Index>(j)) = one_hot(*ds.instances[idx[j]].label);
    return y;
}

void require_labels(const core::Dataset& ds, const char* which) {
    for (const auto& inst : ds.instances)
        if (!inst.label)
            throw MissingLabelError(std::string(which) + " instance " + std::to_string(inst.id) + " has no label");
}

double accuracy_on(const LstmModel& model, const core::Dataset& ds, int chunk) {
    std::size_t correct = 0;
    for (std::size_t start = 0; start < ds.size(); start += static_cast<std::size_t>(chunk)) {
        std::vector<std::size_t> idx;
        for (std::size_t i = start; i < std::min(ds.size(), start + static_cast<std::size_t>(chunk)); ++i) idx.push_back(i);
        const auto cache = forward_batch(to_batch(series_ptrs(ds, idx)), model, Mode::Infer);
        for (std::size_t j = 0; j < idx.size(); ++j)
            if (decide(cache.probs.col(static_cast<Eigen::Index>(j))).cls == *ds.instances[idx[j]].label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(ds.size());
}

}  // namespace

TrainResult train(const core::Dataset& train_set, const core::Dataset& eval_set, const TrainConfig& cfg) {
    cfg.validate();
    if (train_set.empty()) throw EmptyInputError("training set is empty");
    require_labels(train_set, "training");
    require_labels(eval_set, "evaluation");
    const auto d = train_set.instances.front().channels();
    const auto m = train_set.instances.front().steps();
    for (const auto* ds : {&train_set, &eval_set})
        for (const auto& inst : ds->instances)
            if (inst.channels() != d || inst.steps() != m)
                throw ShapeError("instance " + std::to_string(inst.id) + " differs in shape from the training set");

    TrainResult result;
    result.model = init_model(static_cast<int>(d), cfg.hidden_dim, cfg.depth, cfg.seed);
    AdamState adam = AdamState::for_model(result.model);
    const AdamConfig acfg{cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon};
    Rng shuffle_rng(combine_seed(cfg.seed, 1));
    Rng dropout_rng(combine_seed(cfg.seed, 2));

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(std::span(order));
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const auto stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                               order.begin() + static_cast<std::ptrdiff_t>(stop));
            const auto seq = to_batch(series_ptrs(train_set, idx));
            const auto y = targets_for(train_set, idx);
            const auto masks = sample_masks(cfg.hidden_dim, static_cast<int>(idx.size()), cfg.dropout_rate,
                                            cfg.logit_dropout, dropout_rng);
            const auto cache = forward_batch(seq, result.model, Mode::Train, masks);
            loss_sum += batch_loss(cache.probs, y, cfg.loss) * static_cast<double>(idx.size());
            const auto grads = backward(seq, y, result.model, cache, cfg.loss);
            adam_step(result.model, grads, adam, acfg);
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.loss = loss_sum / static_cast<double>(train_set.size());
        if (!std::isfinite(rec.loss)) throw NumericError("training loss became non-finite at epoch " + std::to_string(epoch));
        if (!eval_set.empty()) rec.accuracy = accuracy_on(result.model, eval_set, 256);
        result.history.push_back(rec);
    }
    return result;
}

Prediction decide(const Eigen::Vector2d& y_hat) {
    return {y_hat[0] > y_hat[1] ? Class::Stable : Class::Unstable, y_hat[0]};
}

Prediction predict(const LstmModel& model, const Series& normalized) {
    return decide(forward(normalized, model, 0.0, Mode::Infer));
}

Prediction predict(const LstmModel& model, const core::TimeSeriesInstance& instance, const core::NormStats& norm) {
    return predict(model, core::apply_normalizer(instance.series, norm));
}

Stepper::Stepper(const LstmModel& model) : model_(&model) { reset(); }

void Stepper::reset() {
    state_.assign(model_->layers.size(), CellState::zeros(model_->hidden_dim));
    steps_ = 0;
}

Eigen::Vector2d Stepper::push(const VectorXd& x_t) {
    VectorXd x = x_t;
    for (int l = 0; l < model_->depth(); ++l) {
        auto [next, cache] = cell_forward(x, state_[static_cast<std::size_t>(l)], *model_, l);
        state_[static_cast<std::size_t>(l)] = std::move(next);
        x = state_[static_cast<std::size_t>(l)].h;
    }
    ++steps_;
    MatrixXd z = affine(model_->W_s, model_->b_s, x);
    return softmax_cols(z).col(0);
}

}  // namespace stvs::lstm
