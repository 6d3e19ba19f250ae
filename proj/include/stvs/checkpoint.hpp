#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"

#include "stvs/baselines.hpp"
#include "stvs/core.hpp"
#include "stvs/lstm.hpp"

namespace stvs::checkpoint {

inline constexpr int kCheckpointVersion = 1;
inline constexpr const char* kCheckpointFormat = "stvs-checkpoint";

enum class ModelKind { Lstm, Cart, Svm };

std::string to_string(ModelKind k);
ModelKind model_kind_from_string(const std::string& s);  // lstm, dt, cart, svm

/// Everything needed to reproduce a prediction from raw, unnormalized series.
struct Checkpoint {
    ModelKind kind = ModelKind::Lstm;
    int otw_steps = 0;
    int buses = 0;
    double dt_s = 0.01;
    core::NormStats norm;
    std::uint64_t split_seed = 0;
    double train_fraction = 0.8;
    nlohmann::json config = nlohmann::json::object();
    lstm::TrainHistory history;

    std::optional<lstm::LstmModel> lstm;
    std::optional<baselines::CartTree> cart;
    std::optional<baselines::LinearSvm> svm;

    int channels() const { return 3 * buses; }
    void validate() const;

    /// Windows to otw_steps, normalizes, then runs the stored model.
    lstm::Prediction predict(const Series& raw) const;
};

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Checkpoint& ck);
Checkpoint from_json(const nlohmann::json& j);

/// Pretty-printed JSON with a trailing newline; byte-stable for equal inputs.
std::string serialize(const Checkpoint& ck);

void save(const Checkpoint& ck, const std::filesystem::path& path);
Checkpoint load(const std::filesystem::path& path);

}  // namespace stvs::checkpoint
