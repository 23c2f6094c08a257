#include <cstdio>
#include <exception>

#include "CLI11.hpp"
#include "cldflood/commands.hpp"
#include "cldflood/error.hpp"

namespace cldflood::commands {

int run_cli(int argc, char** argv) {
    CLI::App app{"Flood simulation and latent-dynamics surrogate toolkit", "cldflood"};
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed = 0;
    GlobalOptions global;
    app.add_option("--config", config_path, "run configuration file")->required();
    auto* seed_opt = app.add_option("--seed", seed, "override the base seed of the command");
    app.add_flag("--deterministic", global.deterministic, "fixed reduction layout and no wall-clock fields in outputs");
    app.add_option("--threads", global.threads, "OpenMP thread count (0 keeps the default)")->check(CLI::NonNegativeNumber);

    auto* gen = app.add_subcommand("gen-data", "generate terrain, forcing and reference trajectories");

    SimulateOptions sim;
    int sim_event = -1;
    std::string sim_hyeto;
    auto* simc = app.add_subcommand("simulate", "run the solver for one event");
    auto* sim_event_opt = simc->add_option("--event", sim_event, "event id in the dataset");
    auto* sim_hyeto_opt = simc->add_option("--hyetograph", sim_hyeto, "hyetograph CSV (t_start, t_end, rate)");
    simc->add_option("--output", sim.output, "output FLD1 file")->required();

    TrainOptions tr;
    std::string kind, train_out;
    int epochs = 0;
    auto* trc = app.add_subcommand("train", "train a surrogate on the training split");
    auto* kind_opt = trc->add_option("--kind", kind, "cldnet or ldnet (overrides model.kind)");
    auto* train_out_opt = trc->add_option("--output", train_out, "checkpoint path (overrides paths.model)");
    auto* epochs_opt = trc->add_option("--epochs", epochs, "override training.epochs");

    PredictOptions pr;
    std::string pr_model, pr_hyeto, pr_points;
    int pr_event = -1;
    auto* prc = app.add_subcommand("predict", "decode a trained surrogate at points or on the full grid");
    auto* pr_model_opt = prc->add_option("--model", pr_model, "checkpoint (overrides paths.model)");
    auto* pr_event_opt = prc->add_option("--event", pr_event, "dataset event whose forcing drives the rollout");
    auto* pr_hyeto_opt = prc->add_option("--hyetograph", pr_hyeto, "hyetograph CSV driving the rollout");
    auto* pr_points_opt = prc->add_option("--points", pr_points, "CSV of query points (x, y[, name])");
    prc->add_flag("--full-grid", pr.full_grid, "decode every active cell centre to an FLD1 file");
    prc->add_option("--output", pr.output, "output file")->required();

    EvaluateOptions ev;
    std::string ev_model, ev_pred, ev_ref, ev_out;
    auto* evc = app.add_subcommand("evaluate", "score a model on the test split, or compare two FLD1 files");
    auto* ev_model_opt = evc->add_option("--model", ev_model, "checkpoint (overrides paths.model)");
    auto* ev_pred_opt = evc->add_option("--prediction", ev_pred, "predicted FLD1 trajectory");
    auto* ev_ref_opt = evc->add_option("--reference", ev_ref, "reference FLD1 trajectory");
    auto* ev_out_opt = evc->add_option("--output", ev_out, "report directory (overrides paths.output)");

    BenchOptions bo;
    std::string bo_model, bo_out;
    int runs = 0;
    auto* bc = app.add_subcommand("bench", "time the solver against surrogate inference");
    auto* bo_model_opt = bc->add_option("--model", bo_model, "checkpoint (overrides paths.model)");
    auto* runs_opt = bc->add_option("--runs", runs, "repetitions (overrides bench.runs)");
    auto* bo_out_opt = bc->add_option("--output", bo_out, "report directory (overrides paths.output)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        if (*seed_opt) global.seed = seed;
        const RunConfig config = RunConfig::load(config_path);
        if (*gen) {
            gen_data(config, global);
        } else if (*simc) {
            if (*sim_event_opt) sim.event = sim_event;
            if (*sim_hyeto_opt) sim.hyetograph = sim_hyeto;
            simulate(config, global, sim);
        } else if (*trc) {
            if (*kind_opt) tr.kind = kind;
            if (*train_out_opt) tr.output = train_out;
            if (*epochs_opt) tr.epochs = epochs;
            train(config, global, tr);
        } else if (*prc) {
            if (*pr_model_opt) pr.model = pr_model;
            if (*pr_event_opt) pr.event = pr_event;
            if (*pr_hyeto_opt) pr.hyetograph = pr_hyeto;
            if (*pr_points_opt) pr.points = pr_points;
            predict(config, global, pr);
        } else if (*evc) {
            if (*ev_model_opt) ev.model = ev_model;
            if (*ev_pred_opt) ev.prediction = ev_pred;
            if (*ev_ref_opt) ev.reference = ev_ref;
            if (*ev_out_opt) ev.output = ev_out;
            evaluate(config, global, ev);
        } else if (*bc) {
            if (*bo_model_opt) bo.model = bo_model;
            if (*runs_opt) bo.runs = runs;
            if (*bo_out_opt) bo.output = bo_out;
            bench(config, global, bo);
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "cldflood %s: configuration error: %s\n", command.c_str(), e.what());
        return 2;
    } catch (const IoError& e) {
        std::fprintf(stderr, "cldflood %s: I/O error: %s\n", command.c_str(), e.what());
        return 3;
    } catch (const DomainError& e) {
        std::fprintf(stderr, "cldflood %s: domain error: %s\n", command.c_str(), e.what());
        return 4;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "cldflood %s: numerical error: %s\n", command.c_str(), e.what());
        return 5;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "cldflood %s: internal error: %s\n", command.c_str(), e.what());
        return 70;
    }
    return 0;
}

}  // namespace cldflood::commands
