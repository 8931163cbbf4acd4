// qpinn: hybrid quantum-classical physics-informed network benchmarks.
//
// Verbs: run (train one configuration), sweep (a configuration matrix),
// render (field maps from a checkpoint), validate-config.
// Exit codes: 0 ok, 2 configuration error, 3 aborted run, 4 missing
// reference data.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qpinn/config.hpp"
#include "qpinn/report.hpp"

namespace fs = std::filesystem;
using namespace qpinn;
using config::ExperimentConfig;

namespace {

struct MissingReference : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string resolve_out_dir(const std::string& dir) {
    const char* root = std::getenv("QPINN_OUT_ROOT");
    if (root == nullptr || *root == '\0') return dir;
    return (fs::path(root) / dir).string();
}

void add_experiment_options(CLI::App* cmd, ExperimentConfig& cfg, std::string& preset) {
    cmd->set_config("--config", "", "TOML configuration file (flags override it)");
    cmd->add_option("--problem", cfg.problem,
                    "helmholtz | cavity | wave | klein-gordon | convection-diffusion");
    cmd->add_option("--model", cfg.model, "dv | cv | classical-1 | classical-2");
    cmd->add_option("--embedding", cfg.embedding, "angle | amplitude");
    cmd->add_option("--topology", cfg.topology, "alternate | cascade | cross-mesh | layered");
    cmd->add_option("--qubits", cfg.qubits, "DV register size");
    cmd->add_option("--layers", cfg.layers, "quantum layer count");
    cmd->add_option("--measurement", cfg.measurement, "number | quadrature");
    cmd->add_option("--nonlinearity", cfg.nonlinearity, "kerr | cubic | cross-kerr");
    cmd->add_option("--parameterization", cfg.parameterization, "full | phase-free");
    cmd->add_option("--qumodes", cfg.qumodes, "CV mode count");
    cmd->add_option("--cutoff", cfg.cutoff, "Fock cutoff dimension");
    cmd->add_option("--epochs", cfg.epochs, "optimizer steps (one fresh batch each)");
    cmd->add_option("--batch", cfg.batch, "collocation batch size");
    cmd->add_option("--runs", cfg.runs, "independent seeds");
    cmd->add_option("--seed", cfg.seed, "base seed");
    cmd->add_option("--lr", cfg.lr, "learning rate (0 = model default)");
    cmd->add_option("--clip", cfg.clip, "gradient-norm cap (0 = model default)");
    cmd->add_option("--out", cfg.out_dir, "output directory");
    cmd->add_option("--reference", cfg.reference, "reference grid CSV (cavity)");
    cmd->add_option("--grid", cfg.grid, "evaluation grid resolution");
    cmd->add_option("--time-slice", cfg.time_slice, "render/evaluation time slice");
    cmd->add_option("--log-every", cfg.log_every, "progress print period (0 = silent)");
    cmd->add_option("--preset", preset, "desk (2000 epochs, 3 runs) | paper (20000, 10)");
}

void finalize_config(CLI::App* cmd, ExperimentConfig& cfg, const std::string& preset) {
    if (!preset.empty()) {
        // explicit --epochs/--runs (flag or config file) win over the preset
        ExperimentConfig tmp = cfg;
        config::apply_preset(tmp, preset);
        if (cmd->get_option("--epochs")->count() == 0) cfg.epochs = tmp.epochs;
        if (cmd->get_option("--runs")->count() == 0) cfg.runs = tmp.runs;
    }
    config::validate(cfg);
}

struct ExperimentOutcome {
    report::ResultRow row;
    std::vector<trainer::RunRecord> runs;
    int aborted_runs = 0;
};

std::optional<report::ReferenceGrid> load_reference_if_any(const ExperimentConfig& cfg) {
    if (cfg.reference.empty()) return std::nullopt;
    if (!fs::exists(cfg.reference))
        throw MissingReference("reference file not found: " + cfg.reference);
    return report::load_reference_csv(cfg.reference);
}

ExperimentOutcome run_experiment(const ExperimentConfig& cfg, const std::string& out_dir) {
    const pde::PdeProblem problem = config::make_problem(cfg);
    const net::ModelSpec spec = config::make_model_spec(cfg);
    const trainer::TrainConfig tcfg = config::make_train_config(cfg);
    const auto reference = load_reference_if_any(cfg);

    fs::create_directories(out_dir);
    std::vector<net::HybridModel> models;
    auto runs = trainer::multi_run([&] { return net::HybridModel(spec); }, problem, tcfg,
                                   cfg.runs, &models);

    ExperimentOutcome out;
    out.runs = runs;
    std::vector<double> finals, times, mems;
    std::vector<std::vector<double>> l2_by_field;
    nlohmann::json run_log = nlohmann::json::array();
    int best = -1;

    for (std::size_t i = 0; i < runs.size(); ++i) {
        const auto& rec = runs[i];
        const fs::path rdir = fs::path(out_dir) / ("run" + std::to_string(i));
        fs::create_directories(rdir);
        report::write_history_csv((rdir / "history.csv").string(), rec);
        report::save_checkpoint((rdir / "checkpoint.json").string(), models[i], problem.name);

        nlohmann::json entry;
        entry["seed"] = rec.seed;
        entry["aborted"] = rec.aborted;
        entry["abort_reason"] = rec.abort_reason;
        if (rec.aborted || rec.total_history.empty()) {
            ++out.aborted_runs;
            run_log.push_back(entry);
            continue;
        }
        finals.push_back(rec.total_history.back());
        times.push_back(rec.time_per_iter);
        mems.push_back(static_cast<double>(rec.peak_memory_bytes) / (1024.0 * 1024.0));
        entry["final_loss"] = rec.total_history.back();

        const auto l2 = report::field_errors(models[i], problem, cfg.grid,
                                             config::time_slice(cfg),
                                             reference ? &*reference : nullptr);
        if (!l2.empty()) {
            l2_by_field.resize(l2.size());
            for (std::size_t f = 0; f < l2.size(); ++f) l2_by_field[f].push_back(l2[f]);
            entry["l2"] = l2;
        }
        if (best < 0 || rec.total_history.back() < runs[best].total_history.back())
            best = static_cast<int>(i);
        run_log.push_back(entry);
    }

    // result row (every number computed from the live models above)
    report::ResultRow& row = out.row;
    row.problem = problem.name;
    row.model = net::display_name(spec);
    row.param_count = models.front().trainable_count();
    row.fields = problem.fields;
    for (const auto& per_field : l2_by_field) row.l2.push_back(trainer::mean_std(per_field));
    row.final_loss = trainer::mean_std(finals);
    row.time_per_iter = trainer::mean_std(times);
    row.peak_memory_mb = trainer::mean_std(mems);
    row.failed = finals.empty();
    if (row.failed) row.note = "all runs aborted";

    report::write_results_csv((fs::path(out_dir) / "results.csv").string(), {row});
    std::ofstream txt(fs::path(out_dir) / "results.txt");
    txt << report::format_results_text({row});

    std::vector<std::pair<std::string, std::vector<double>>> series;
    for (std::size_t i = 0; i < runs.size(); ++i)
        series.emplace_back("run" + std::to_string(i), runs[i].total_history);
    report::write_png((fs::path(out_dir) / "loss_curve.png").string(),
                      report::loss_curve_plot(series));
    if (!runs.empty() && !runs[0].term_history.empty()) {
        std::vector<std::pair<std::string, std::vector<double>>> terms;
        for (std::size_t t = 0; t < runs[0].term_history.size(); ++t)
            terms.emplace_back(runs[0].term_names[t], runs[0].term_history[t]);
        report::write_png((fs::path(out_dir) / "loss_terms.png").string(),
                          report::loss_curve_plot(terms));
    }

    if (best >= 0) {
        report::render_fields(models[best], problem, (fs::path(out_dir) / "fields").string(),
                              cfg.grid, config::time_slice(cfg),
                              reference ? &*reference : nullptr);
    }

    nlohmann::json summary;
    summary["config"] = config::to_json(cfg);
    summary["model"] = report::model_manifest(spec);
    summary["param_count"] = row.param_count;
    summary["aborted_runs"] = out.aborted_runs;
    summary["runs"] = run_log;
    if (!finals.empty()) {
        summary["final_loss"] = {{"mean", row.final_loss.mean}, {"std", row.final_loss.stddev}};
        summary["time_per_iter_s"] = {{"mean", row.time_per_iter.mean},
                                      {"std", row.time_per_iter.stddev}};
        summary["peak_memory_mb"] = {{"mean", row.peak_memory_mb.mean},
                                     {"std", row.peak_memory_mb.stddev}};
        for (std::size_t f = 0; f < row.l2.size(); ++f)
            summary["l2"][problem.fields[f]] = {{"mean", row.l2[f].mean},
                                                {"std", row.l2[f].stddev}};
    }
    std::ofstream sj(fs::path(out_dir) / "summary.json");
    sj << summary.dump(1) << '\n';
    return out;
}

int cmd_run(const ExperimentConfig& cfg) {
    const std::string out_dir = resolve_out_dir(cfg.out_dir);
    const auto outcome = run_experiment(cfg, out_dir);
    std::cout << report::format_results_text({outcome.row});
    std::cout << "artifacts written to " << out_dir << "\n";
    if (outcome.aborted_runs == static_cast<int>(outcome.runs.size())) {
        std::cerr << "error: every run aborted (" << outcome.runs.front().abort_reason << ")\n";
        return 3;
    }
    if (outcome.aborted_runs > 0) {
        std::cerr << "warning: " << outcome.aborted_runs << " run(s) aborted\n";
        return 3;
    }
    return 0;
}

int cmd_sweep(const ExperimentConfig& base, const std::vector<std::string>& embeddings,
              const std::vector<std::string>& topologies,
              const std::vector<std::string>& measurements,
              const std::vector<std::string>& nonlinearities,
              const std::vector<std::string>& parameterizations) {
    std::vector<ExperimentConfig> combos;
    const net::ModelKind kind = net::model_kind_from_string(base.model);
    if (kind == net::ModelKind::DvHybrid) {
        for (const auto& e : embeddings)
            for (const auto& t : topologies) {
                ExperimentConfig c = base;
                c.embedding = e;
                c.topology = t;
                combos.push_back(c);
            }
    } else if (kind == net::ModelKind::CvHybrid) {
        for (const auto& m : measurements)
            for (const auto& n : nonlinearities)
                for (const auto& p : parameterizations) {
                    ExperimentConfig c = base;
                    c.measurement = m;
                    c.nonlinearity = n;
                    c.parameterization = p;
                    combos.push_back(c);
                }
    } else {
        combos.push_back(base);
    }
    if (combos.empty()) throw std::invalid_argument("sweep matrix is empty");
    for (const auto& c : combos) config::validate(c);

    const std::string out_root = resolve_out_dir(base.out_dir);
    fs::create_directories(out_root);
    std::vector<report::ResultRow> rows;
    for (const auto& c : combos) {
        const std::string name = net::display_name(config::make_model_spec(c));
        std::cout << "=== " << c.problem << " / " << name << "\n";
        try {
            auto outcome = run_experiment(c, (fs::path(out_root) / name).string());
            rows.push_back(outcome.row);
        } catch (const std::exception& e) {
            report::ResultRow row;
            row.problem = c.problem;
            row.model = name;
            row.failed = true;
            row.note = e.what();
            rows.push_back(row);
            std::cerr << "row failed: " << e.what() << "\n";
        }
    }
    report::write_results_csv((fs::path(out_root) / "sweep.csv").string(), rows);
    std::ofstream txt(fs::path(out_root) / "sweep.txt");
    const std::string table = report::format_results_text(rows);
    txt << table;
    std::cout << table;
    return 0;
}

int cmd_render(const std::string& checkpoint, const ExperimentConfig& cfg) {
    auto ck = report::load_checkpoint(checkpoint);
    const pde::PdeProblem problem = pde::problem_from_string(ck.problem);
    if (ck.model.spec().d_in != problem.d_in || ck.model.spec().d_out != problem.d_out)
        throw std::invalid_argument("checkpoint dimensions do not match the problem");
    const auto reference = load_reference_if_any(cfg);
    const std::string out_dir = resolve_out_dir(cfg.out_dir);
    report::render_fields(ck.model, problem, out_dir, cfg.grid, config::time_slice(cfg),
                          reference ? &*reference : nullptr);
    const auto l2 = report::field_errors(ck.model, problem, cfg.grid, config::time_slice(cfg),
                                         reference ? &*reference : nullptr);
    for (std::size_t f = 0; f < l2.size(); ++f)
        std::cout << problem.fields[f] << " relative L2: " << l2[f] << "%\n";
    std::cout << "fields written to " << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hybrid quantum-classical physics-informed network benchmarks"};
    app.require_subcommand(1);

    ExperimentConfig cfg;
    std::string preset;

    auto* run = app.add_subcommand("run", "train one configuration and emit its report");
    add_experiment_options(run, cfg, preset);

    auto* sweep = app.add_subcommand("sweep", "train a configuration matrix");
    std::vector<std::string> embeddings = {"angle", "amplitude"};
    std::vector<std::string> topologies = {"alternate", "cascade", "cross-mesh", "layered"};
    std::vector<std::string> measurements = {"quadrature", "number"};
    std::vector<std::string> nonlinearities = {"kerr", "cubic", "cross-kerr"};
    std::vector<std::string> parameterizations = {"full", "phase-free"};
    add_experiment_options(sweep, cfg, preset);
    sweep->add_option("--embeddings", embeddings, "DV sweep axis");
    sweep->add_option("--topologies", topologies, "DV sweep axis");
    sweep->add_option("--measurements", measurements, "CV sweep axis");
    sweep->add_option("--nonlinearities", nonlinearities, "CV sweep axis");
    sweep->add_option("--parameterizations", parameterizations, "CV sweep axis");

    auto* render = app.add_subcommand("render", "field maps from a checkpoint");
    std::string checkpoint;
    render->add_option("--checkpoint", checkpoint, "checkpoint JSON")->required();
    render->add_option("--out", cfg.out_dir, "output directory");
    render->add_option("--grid", cfg.grid, "grid resolution");
    render->add_option("--time-slice", cfg.time_slice, "time slice");
    render->add_option("--reference", cfg.reference, "reference grid CSV");

    auto* validate = app.add_subcommand("validate-config", "check a configuration and echo it");
    add_experiment_options(validate, cfg, preset);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        app.exit(e);
        return 2;
    }

    try {
        if (run->parsed()) {
            finalize_config(run, cfg, preset);
            return cmd_run(cfg);
        }
        if (sweep->parsed()) {
            finalize_config(sweep, cfg, preset);
            return cmd_sweep(cfg, embeddings, topologies, measurements, nonlinearities,
                             parameterizations);
        }
        if (render->parsed()) {
            if (cfg.grid < 2) throw std::invalid_argument("grid must be >= 2");
            return cmd_render(checkpoint, cfg);
        }
        if (validate->parsed()) {
            finalize_config(validate, cfg, preset);
            std::cout << config::to_json(cfg).dump(1) << "\n";
            return 0;
        }
    } catch (const MissingReference& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::invalid_argument& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
