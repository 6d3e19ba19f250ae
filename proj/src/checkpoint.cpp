#include "stvs/checkpoint.hpp"

#include "stvs/dataset_io.hpp"
#include "stvs/error.hpp"

namespace stvs::checkpoint {

using nlohmann::json;

std::string to_string(ModelKind k) {
    switch (k) {
        case ModelKind::Lstm: return "lstm";
        case ModelKind::Cart: return "dt";
        case ModelKind::Svm: return "svm";
    }
    throw InternalError("bad model kind");
}

ModelKind model_kind_from_string(const std::string& s) {
    if (s == "lstm") return ModelKind::Lstm;
    if (s == "dt" || s == "cart") return ModelKind::Cart;
    if (s == "svm") return ModelKind::Svm;
    throw ConfigError("unknown model kind '" + s + "' (expected lstm, dt or svm)");
}

json matrix_to_json(const Eigen::MatrixXd& m) {
    json data = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
    return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Eigen::MatrixXd matrix_from_json(const json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto& data = j.at("data");
    if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows * cols)
        throw FormatError("matrix data length does not match its shape");
    Eigen::MatrixXd m(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[k++].get<double>();
    return m;
}

namespace {

json vec(const Eigen::VectorXd& v) { return matrix_to_json(v); }

Eigen::VectorXd unvec(const json& j) {
    Eigen::MatrixXd m = matrix_from_json(j);
    if (m.cols() != 1) throw FormatError("expected a column vector");
    return m.col(0);
}

json lstm_to_json(const lstm::LstmModel& m) {
    json layers = json::array();
    for (const auto& l : m.layers)
        layers.push_back({{"input_dim", l.input_dim},
                          {"hidden_dim", l.hidden_dim},
                          {"W_f", matrix_to_json(l.W_f)},
                          {"W_i", matrix_to_json(l.W_i)},
                          {"W_o", matrix_to_json(l.W_o)},
                          {"W_c", matrix_to_json(l.W_c)},
                          {"b_f", vec(l.b_f)},
                          {"b_i", vec(l.b_i)},
                          {"b_o", vec(l.b_o)},
                          {"b_c", vec(l.b_c)}});
    return json{{"input_dim", m.input_dim},
                {"hidden_dim", m.hidden_dim},
                {"layers", std::move(layers)},
                {"W_s", matrix_to_json(m.W_s)},
                {"b_s", vec(m.b_s)}};
}

lstm::LstmModel lstm_from_json(const json& j) {
    lstm::LstmModel m;
    m.input_dim = j.at("input_dim").get<int>();
    m.hidden_dim = j.at("hidden_dim").get<int>();
    for (const auto& lj : j.at("layers")) {
        lstm::LstmLayer l;
        l.input_dim = lj.at("input_dim").get<int>();
        l.hidden_dim = lj.at("hidden_dim").get<int>();
        l.W_f = matrix_from_json(lj.at("W_f"));
        l.W_i = matrix_from_json(lj.at("W_i"));
        l.W_o = matrix_from_json(lj.at("W_o"));
        l.W_c = matrix_from_json(lj.at("W_c"));
        l.b_f = unvec(lj.at("b_f"));
        l.b_i = unvec(lj.at("b_i"));
        l.b_o = unvec(lj.at("b_o"));
        l.b_c = unvec(lj.at("b_c"));
        m.layers.push_back(std::move(l));
    }
    m.W_s = matrix_from_json(j.at("W_s"));
    m.b_s = unvec(j.at("b_s"));
    m.validate();
    return m;
}

json cart_to_json(const baselines::CartTree& t) {
    json nodes = json::array();
    for (const auto& n : t.nodes)
        nodes.push_back({{"feature", n.feature},
                         {"threshold", n.threshold},
                         {"left", n.left},
                         {"right", n.right},
                         {"n_stable", n.n_stable},
                         {"n_unstable", n.n_unstable},
                         {"depth", n.depth}});
    return json{{"n_features", t.n_features},
                {"max_depth", t.max_depth},
                {"min_leaf", t.min_leaf},
                {"nodes", std::move(nodes)}};
}

baselines::CartTree cart_from_json(const json& j) {
    baselines::CartTree t;
    t.n_features = j.at("n_features").get<int>();
    t.max_depth = j.at("max_depth").get<int>();
    t.min_leaf = j.at("min_leaf").get<int>();
    for (const auto& nj : j.at("nodes")) {
        baselines::CartNode n;
        n.feature = nj.at("feature").get<int>();
        n.threshold = nj.at("threshold").get<double>();
        n.left = nj.at("left").get<int>();
        n.right = nj.at("right").get<int>();
        n.n_stable = nj.at("n_stable").get<int>();
        n.n_unstable = nj.at("n_unstable").get<int>();
        n.depth = nj.at("depth").get<int>();
        t.nodes.push_back(n);
    }
    t.validate();
    return t;
}

json svm_to_json(const baselines::LinearSvm& s) {
    return json{{"weights", vec(s.weights)},
                {"bias", s.bias},
                {"lambda", s.lambda},
                {"epochs", s.epochs},
                {"seed", s.seed}};
}

baselines::LinearSvm svm_from_json(const json& j) {
    baselines::LinearSvm s;
    s.weights = unvec(j.at("weights"));
    s.bias = j.at("bias").get<double>();
    s.lambda = j.at("lambda").get<double>();
    s.epochs = j.at("epochs").get<int>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.validate();
    return s;
}

}  // namespace

void Checkpoint::validate() const {
    if (buses < 1 || otw_steps < 1) throw FormatError("checkpoint needs L >= 1 and otw_steps >= 1");
    norm.validate();
    if (norm.channels() != channels()) throw FormatError("checkpoint norm stats do not match L");
    const int present = (lstm ? 1 : 0) + (cart ? 1 : 0) + (svm ? 1 : 0);
    if (present != 1) throw FormatError("checkpoint must hold exactly one model");
    switch (kind) {
        case ModelKind::Lstm:
            if (!lstm) throw FormatError("lstm checkpoint without an lstm model");
            lstm->validate();
            if (lstm->input_dim != channels()) throw FormatError("lstm input_dim does not match 3L");
            break;
        case ModelKind::Cart:
            if (!cart) throw FormatError("dt checkpoint without a tree");
            cart->validate();
            if (cart->n_features != otw_steps * channels()) throw FormatError("tree feature count does not match otw");
            break;
        case ModelKind::Svm:
            if (!svm) throw FormatError("svm checkpoint without an svm model");
            svm->validate();
            if (svm->weights.size() != otw_steps * channels()) throw FormatError("svm weight count does not match otw");
            break;
    }
}

lstm::Prediction Checkpoint::predict(const Series& raw) const {
    if (raw.cols() != channels())
        throw ShapeError("series has " + std::to_string(raw.cols()) + " channels, checkpoint expects " +
                         std::to_string(channels()));
    if (raw.rows() < otw_steps)
        throw RangeError("series has " + std::to_string(raw.rows()) + " steps, checkpoint needs " +
                         std::to_string(otw_steps));
    const Series x = core::apply_normalizer(Series(raw.topRows(otw_steps)), norm);
    switch (kind) {
        case ModelKind::Lstm: return lstm::predict(*lstm, x);
        case ModelKind::Cart: return baselines::predict_cart(*cart, baselines::flatten_series(x, otw_steps));
        case ModelKind::Svm: return baselines::predict_svm(*svm, baselines::flatten_series(x, otw_steps));
    }
    throw InternalError("bad model kind");
}

json to_json(const Checkpoint& ck) {
    json history = json::array();
    for (const auto& r : ck.history)
        history.push_back({{"epoch", r.epoch},
                           {"loss", r.loss},
                           {"accuracy", r.accuracy ? json(*r.accuracy) : json(nullptr)}});
    json j{{"format", kCheckpointFormat},
           {"version", kCheckpointVersion},
           {"kind", to_string(ck.kind)},
           {"otw_steps", ck.otw_steps},
           {"L", ck.buses},
           {"dt_s", ck.dt_s},
           {"norm_stats", io::norm_stats_to_json(ck.norm)},
           {"split", {{"seed", ck.split_seed}, {"train_fraction", ck.train_fraction}}},
           {"config", ck.config},
           {"history", std::move(history)}};
    switch (ck.kind) {
        case ModelKind::Lstm: j["model"] = lstm_to_json(*ck.lstm); break;
        case ModelKind::Cart: j["model"] = cart_to_json(*ck.cart); break;
        case ModelKind::Svm: j["model"] = svm_to_json(*ck.svm); break;
    }
    return j;
}

Checkpoint from_json(const json& j) {
    try {
        if (j.at("format").get<std::string>() != kCheckpointFormat) throw FormatError("not a checkpoint file");
        const int version = j.at("version").get<int>();
        if (version != kCheckpointVersion)
            throw FormatError("unsupported checkpoint version " + std::to_string(version));
        Checkpoint ck;
        ck.kind = model_kind_from_string(j.at("kind").get<std::string>());
        ck.otw_steps = j.at("otw_steps").get<int>();
        ck.buses = j.at("L").get<int>();
        ck.dt_s = j.at("dt_s").get<double>();
        ck.norm = io::norm_stats_from_json(j.at("norm_stats"));
        ck.split_seed = j.at("split").at("seed").get<std::uint64_t>();
        ck.train_fraction = j.at("split").at("train_fraction").get<double>();
        ck.config = j.value("config", json::object());
        for (const auto& r : j.at("history")) {
            lstm::EpochRecord rec;
            rec.epoch = r.at("epoch").get<int>();
            rec.loss = r.at("loss").get<double>();
            if (!r.at("accuracy").is_null()) rec.accuracy = r.at("accuracy").get<double>();
            ck.history.push_back(rec);
        }
        switch (ck.kind) {
            case ModelKind::Lstm: ck.lstm = lstm_from_json(j.at("model")); break;
            case ModelKind::Cart: ck.cart = cart_from_json(j.at("model")); break;
            case ModelKind::Svm: ck.svm = svm_from_json(j.at("model")); break;
        }
        ck.validate();
        return ck;
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed checkpoint: ") + e.what());
    }
}

std::string serialize(const Checkpoint& ck) {
    return to_json(ck).dump(1) + "\n";
}

void save(const Checkpoint& ck, const std::filesystem::path& path) {
    ck.validate();
    io::write_text(path, serialize(ck));
}

Checkpoint load(const std::filesystem::path& path) {
    try {
        return from_json(json::parse(io::read_text(path)));
    } catch (const json::parse_error& e) {
        throw FormatError("cannot parse checkpoint '" + path.string() + "': " + e.what());
    } catch (const FormatError& e) {
        throw FormatError("checkpoint '" + path.string() + "': " + e.what());
    }
}

}  // namespace stvs::checkpoint
