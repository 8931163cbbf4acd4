#pragma once

// Experiment configuration: the validated bridge between CLI/TOML inputs and
// model/problem/training objects. Every enum value is checked up front so a
// bad sweep dies before any compute starts.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qpinn/net.hpp"
#include "qpinn/pde.hpp"
#include "qpinn/train.hpp"

namespace qpinn::config {

using json = nlohmann::json;

struct ExperimentConfig {
    std::string problem = "helmholtz";
    std::string model = "dv";  // dv | cv | classical-1 | classical-2
    // DV options
    std::string embedding = "angle";
    std::string topology = "cascade";
    int qubits = 5;
    int layers = 1;
    // CV options
    std::string measurement = "quadrature";
    std::string nonlinearity = "kerr";
    std::string parameterization = "full";
    int qumodes = 2;
    int cutoff = 20;
    // training
    int epochs = 2000;
    int batch = 64;
    int runs = 3;
    uint64_t seed = 0;
    double lr = 0.0;    // 0: model-kind default
    double clip = 0.0;  // 0: model-kind default
    // outputs
    std::string out_dir = "out";
    std::string reference;  // cavity reference CSV
    int grid = 100;
    double time_slice = std::numeric_limits<double>::quiet_NaN();
    int log_every = 0;
};

/// Presets: `desk` is the quick regression scale, `paper` the full protocol.
inline void apply_preset(ExperimentConfig& cfg, const std::string& preset) {
    if (preset.empty()) return;
    if (preset == "desk") {
        cfg.epochs = 2000;
        cfg.runs = 3;
    } else if (preset == "paper") {
        cfg.epochs = 20000;
        cfg.runs = 10;
    } else {
        throw std::invalid_argument("unknown preset: " + preset + " (use desk or paper)");
    }
}

/// Throws std::invalid_argument on the first invalid field.
inline void validate(const ExperimentConfig& cfg) {
    (void)pde::problem_from_string(cfg.problem);
    const net::ModelKind kind = net::model_kind_from_string(cfg.model);
    if (kind == net::ModelKind::DvHybrid) {
        (void)dv::embedding_from_string(cfg.embedding);
        (void)dv::topology_from_string(cfg.topology);
        if (cfg.qubits < 2 || cfg.qubits > 10)
            throw std::invalid_argument("qubits must be in [2, 10]");
        if (cfg.layers < 1) throw std::invalid_argument("layers must be >= 1");
    }
    if (kind == net::ModelKind::CvHybrid) {
        (void)cv::measurement_from_string(cfg.measurement);
        (void)cv::nonlinearity_from_string(cfg.nonlinearity);
        (void)cv::parameterization_from_string(cfg.parameterization);
        if (cfg.qumodes < 1 || cfg.qumodes > 4)
            throw std::invalid_argument("qumodes must be in [1, 4]");
        if (cfg.cutoff < 2 || cfg.cutoff > 64)
            throw std::invalid_argument("cutoff must be in [2, 64]");
        if (cfg.nonlinearity == "cross-kerr" && cfg.qumodes < 2)
            throw std::invalid_argument("cross-kerr needs at least 2 qumodes");
    }
    if (cfg.epochs < 0) throw std::invalid_argument("epochs must be >= 0");
    if (cfg.batch < 1) throw std::invalid_argument("batch must be >= 1");
    if (cfg.runs < 1) throw std::invalid_argument("runs must be >= 1");
    if (cfg.lr < 0.0) throw std::invalid_argument("lr must be >= 0");
    if (cfg.clip < 0.0) throw std::invalid_argument("clip must be >= 0");
    if (cfg.grid < 2) throw std::invalid_argument("grid must be >= 2");
}

inline pde::PdeProblem make_problem(const ExperimentConfig& cfg) {
    return pde::problem_from_string(cfg.problem);
}

inline net::ModelSpec make_model_spec(const ExperimentConfig& cfg) {
    const pde::PdeProblem p = make_problem(cfg);
    net::ModelSpec spec;
    spec.kind = net::model_kind_from_string(cfg.model);
    spec.d_in = p.d_in;
    spec.d_out = p.d_out;
    if (spec.kind == net::ModelKind::DvHybrid) {
        spec.embedding = dv::embedding_from_string(cfg.embedding);
        spec.topology = dv::topology_from_string(cfg.topology);
        spec.n_qubits = cfg.qubits;
        spec.n_layers = cfg.layers;
    }
    if (spec.kind == net::ModelKind::CvHybrid) {
        spec.cv.n_qumodes = cfg.qumodes;
        spec.cv.cutoff = cfg.cutoff;
        spec.cv.n_layers = cfg.layers;
        spec.cv.measurement = cv::measurement_from_string(cfg.measurement);
        spec.cv.nonlinearity = cv::nonlinearity_from_string(cfg.nonlinearity);
        spec.cv.parameterization = cv::parameterization_from_string(cfg.parameterization);
    }
    return spec;
}

inline trainer::TrainConfig make_train_config(const ExperimentConfig& cfg) {
    trainer::TrainConfig t =
        trainer::default_train_config(net::model_kind_from_string(cfg.model));
    t.epochs = cfg.epochs;
    t.batch = cfg.batch;
    t.seed = cfg.seed;
    t.log_every = cfg.log_every;
    if (cfg.lr > 0.0) t.lr = cfg.lr;
    if (cfg.clip > 0.0) t.clip = cfg.clip;
    return t;
}

inline std::optional<double> time_slice(const ExperimentConfig& cfg) {
    if (std::isnan(cfg.time_slice)) return std::nullopt;
    return cfg.time_slice;
}

/// Round-trippable echo of the configuration (written into summary.json).
inline json to_json(const ExperimentConfig& c) {
    return json{{"problem", c.problem},
                {"model", c.model},
                {"embedding", c.embedding},
                {"topology", c.topology},
                {"qubits", c.qubits},
                {"layers", c.layers},
                {"measurement", c.measurement},
                {"nonlinearity", c.nonlinearity},
                {"parameterization", c.parameterization},
                {"qumodes", c.qumodes},
                {"cutoff", c.cutoff},
                {"epochs", c.epochs},
                {"batch", c.batch},
                {"runs", c.runs},
                {"seed", c.seed},
                {"lr", c.lr},
                {"clip", c.clip},
                {"out_dir", c.out_dir},
                {"reference", c.reference},
                {"grid", c.grid},
                {"time_slice", std::isnan(c.time_slice) ? json(nullptr) : json(c.time_slice)},
                {"log_every", c.log_every}};
}

inline ExperimentConfig from_json(const json& j) {
    ExperimentConfig c;
    c.problem = j.at("problem").get<std::string>();
    c.model = j.at("model").get<std::string>();
    c.embedding = j.at("embedding").get<std::string>();
    c.topology = j.at("topology").get<std::string>();
    c.qubits = j.at("qubits").get<int>();
    c.layers = j.at("layers").get<int>();
    c.measurement = j.at("measurement").get<std::string>();
    c.nonlinearity = j.at("nonlinearity").get<std::string>();
    c.parameterization = j.at("parameterization").get<std::string>();
    c.qumodes = j.at("qumodes").get<int>();
    c.cutoff = j.at("cutoff").get<int>();
    c.epochs = j.at("epochs").get<int>();
    c.batch = j.at("batch").get<int>();
    c.runs = j.at("runs").get<int>();
    c.seed = j.at("seed").get<uint64_t>();
    c.lr = j.at("lr").get<double>();
    c.clip = j.at("clip").get<double>();
    c.out_dir = j.at("out_dir").get<std::string>();
    c.reference = j.at("reference").get<std::string>();
    c.grid = j.at("grid").get<int>();
    c.time_slice = j.at("time_slice").is_null()
                       ? std::numeric_limits<double>::quiet_NaN()
                       : j.at("time_slice").get<double>();
    c.log_every = j.at("log_every").get<int>();
    return c;
}

}  // namespace qpinn::config
