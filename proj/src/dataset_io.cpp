#include "stvs/dataset_io.hpp"

#include <fstream>
#include <sstream>

#include "stvs/error.hpp"

namespace stvs::io {

using nlohmann::json;

std::filesystem::path header_path(const std::filesystem::path& data_path) {
    auto p = data_path;
    p += ".header.json";
    return p;
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << text;
    out.flush();
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

namespace {

json optional_class(const std::optional<Class>& c) {
    if (!c) return nullptr;
    return std::string(to_string(*c));
}

std::optional<Class> parse_optional_class(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw FormatError(std::string("field '") + key + "' must be a string or null");
    return class_from_string(it->get<std::string>());
}

json vector_to_json(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

Eigen::VectorXd vector_from_json(const json& a) {
    if (!a.is_array()) throw FormatError("expected a numeric array");
    Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
    return v;
}

}  // namespace

json instance_to_json(const core::TimeSeriesInstance& inst) {
    const auto& s = inst.scenario;
    json rows = json::array();
    for (Eigen::Index r = 0; r < inst.series.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < inst.series.cols(); ++c) row.push_back(inst.series(r, c));
        rows.push_back(std::move(row));
    }
    // nlohmann keeps object keys sorted, so the byte layout is stable.
    return json{
        {"id", inst.id},
        {"scenario",
         {{"load_level", s.load_level},
          {"motor_fraction", s.motor_fraction},
          {"fault_line", s.fault_line},
          {"fault_position", s.fault_position},
          {"fault_time_s", s.fault_time_s},
          {"clear_time_s", s.clear_time_s}}},
        {"label", optional_class(inst.label)},
        {"truth", optional_class(inst.truth)},
        {"series", std::move(rows)},
    };
}

core::TimeSeriesInstance instance_from_json(const json& j) {
    try {
        core::TimeSeriesInstance inst;
        inst.id = j.at("id").get<std::int64_t>();
        const auto& s = j.at("scenario");
        inst.scenario.load_level = s.at("load_level").get<double>();
        inst.scenario.motor_fraction = s.at("motor_fraction").get<double>();
        inst.scenario.fault_line = s.at("fault_line").get<int>();
        inst.scenario.fault_position = s.at("fault_position").get<double>();
        inst.scenario.fault_time_s = s.at("fault_time_s").get<double>();
        inst.scenario.clear_time_s = s.at("clear_time_s").get<double>();
        inst.label = parse_optional_class(j, "label");
        inst.truth = parse_optional_class(j, "truth");
        const auto& rows = j.at("series");
        if (!rows.is_array() || rows.empty()) throw FormatError("series must be a non-empty array");
        const auto m = static_cast<Eigen::Index>(rows.size());
        const auto d = static_cast<Eigen::Index>(rows.front().size());
        inst.series.resize(m, d);
        for (Eigen::Index r = 0; r < m; ++r) {
            const auto& row = rows[static_cast<std::size_t>(r)];
            if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != d)
                throw ShapeError("ragged series in instance " + std::to_string(inst.id));
            for (Eigen::Index c = 0; c < d; ++c) inst.series(r, c) = row[static_cast<std::size_t>(c)].get<double>();
        }
        return inst;
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed instance: ") + e.what());
    }
}

json norm_stats_to_json(const core::NormStats& s) {
    return json{{"min", vector_to_json(s.min)}, {"max", vector_to_json(s.max)}};
}

core::NormStats norm_stats_from_json(const json& j) {
    core::NormStats s;
    s.min = vector_from_json(j.at("min"));
    s.max = vector_from_json(j.at("max"));
    s.validate();
    return s;
}

json header_to_json(const core::DatasetMeta& meta) {
    json j{
        {"format", kDatasetFormatName},
        {"version", kDatasetFormatVersion},
        {"L", meta.buses},
        {"m", meta.steps},
        {"d", meta.channels()},
        {"dt_s", meta.dt_s},
        {"channel_order", "U_1..U_L,P_1..P_L,Q_1..Q_L"},
    };
    j["norm_stats"] = meta.norm_stats ? norm_stats_to_json(*meta.norm_stats) : json(nullptr);
    return j;
}

core::DatasetMeta header_from_json(const json& j) {
    try {
        if (j.at("format").get<std::string>() != kDatasetFormatName)
            throw FormatError("not a dataset header");
        const int version = j.at("version").get<int>();
        if (version != kDatasetFormatVersion)
            throw FormatError("unsupported dataset format version " + std::to_string(version));
        core::DatasetMeta meta;
        meta.buses = j.at("L").get<int>();
        meta.steps = j.at("m").get<int>();
        meta.dt_s = j.at("dt_s").get<double>();
        if (auto it = j.find("norm_stats"); it != j.end() && !it->is_null())
            meta.norm_stats = norm_stats_from_json(*it);
        return meta;
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed dataset header: ") + e.what());
    }
}

std::string to_jsonl(const core::Dataset& ds) {
    std::string out;
    for (const auto& inst : ds.instances) {
        out += instance_to_json(inst).dump();
        out += '\n';
    }
    return out;
}

void write_dataset(const core::Dataset& ds, const std::filesystem::path& path) {
    ds.validate();
    write_text(path, to_jsonl(ds));
    write_text(header_path(path), header_to_json(ds.meta).dump(2) + "\n");
}

core::Dataset read_dataset(const std::filesystem::path& path) {
    const auto hp = header_path(path);
    if (!std::filesystem::exists(path)) throw IoError("dataset file '" + path.string() + "' not found");
    if (!std::filesystem::exists(hp)) throw IoError("dataset header '" + hp.string() + "' not found");
    core::Dataset ds;
    try {
        ds.meta = header_from_json(json::parse(read_text(hp)));
    } catch (const json::parse_error& e) {
        throw FormatError("cannot parse '" + hp.string() + "': " + e.what());
    }
    std::istringstream in(read_text(path));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            ds.instances.push_back(instance_from_json(json::parse(line)));
        } catch (const json::parse_error& e) {
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        } catch (const Error& e) {
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    ds.validate();
    return ds;
}

}  // namespace stvs::io
