#include "saferl/harness.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

namespace {

using namespace saferl;

struct CommonArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> epochs;
    std::optional<std::string> supervisor; // "on" | "off"
    std::optional<std::string> out_dir;
};

void add_common(CLI::App& cmd, CommonArgs& args, bool with_epochs = true) {
    cmd.add_option("--config", args.config_path, "key=value configuration file")
        ->check(CLI::ExistingFile);
    cmd.add_option("--seed", args.seed, "master seed");
    if (with_epochs) cmd.add_option("--epochs", args.epochs, "training episodes");
    cmd.add_option("--supervisor", args.supervisor, "safety supervisor on|off")
        ->check(CLI::IsMember({"on", "off"}));
    cmd.add_option("--out", args.out_dir, "output directory");
}

harness::TrainConfig resolve_config(const CommonArgs& args) {
    harness::TrainConfig config;
    if (!args.config_path.empty()) config = harness::load_config(args.config_path);
    if (args.seed) config.seed = *args.seed;
    if (args.epochs) config.epochs = *args.epochs;
    if (args.supervisor) config.supervisor.enabled = *args.supervisor == "on";
    if (args.out_dir) config.out_dir = *args.out_dir;
    return config;
}

void print_run_summary(const harness::RunSummary& run) {
    std::cout << "epochs:           " << run.episodes.size() << "\n";
    std::cout << "collision epochs: " << run.collision_epochs << "\n";
    std::cout << "vetoes:           " << run.total_vetoes << "\n";
    std::cout << "final epsilon:    " << run.final_epsilon << "\n";
    if (!run.evals.empty()) {
        const auto& last = run.evals.back();
        std::cout << "last evaluation:  mean return " << last.mean_return << " ("
                  << last.collisions << " collisions)\n";
    }
    std::cout << "artifacts:        " << run.artifacts.training_csv << "\n";
    std::cout << "                  " << run.artifacts.evaluation_csv << "\n";
    std::cout << "                  " << run.artifacts.veto_jsonl << "\n";
    std::cout << "                  " << run.artifacts.checkpoint_json << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"highway lane-change agent with a predictive safety supervisor"};
    app.require_subcommand(1);

    CommonArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "run a training session");
    add_common(*train_cmd, train_args);

    CommonArgs eval_args;
    std::string eval_checkpoint;
    int eval_episodes = 20;
    auto* eval_cmd = app.add_subcommand("eval", "greedy rollouts of a saved checkpoint");
    add_common(*eval_cmd, eval_args, /*with_epochs=*/false);
    eval_cmd->add_option("--checkpoint", eval_checkpoint, "checkpoint.json from train")
        ->required()
        ->check(CLI::ExistingFile);
    eval_cmd->add_option("--episodes", eval_episodes, "number of rollouts");

    CommonArgs compare_args;
    auto* compare_cmd =
        app.add_subcommand("compare", "train with and without the supervisor, same seed");
    add_common(*compare_cmd, compare_args);

    CommonArgs calibrate_args;
    std::string calibrate_data;
    std::string calibrate_out = "fitted_params.json";
    int calibrate_restarts = 0;
    auto* calibrate_cmd =
        app.add_subcommand("calibrate", "fit driver-model constants to labeled decisions");
    add_common(*calibrate_cmd, calibrate_args, /*with_epochs=*/false);
    calibrate_cmd->add_option("--data", calibrate_data, "decision CSV to fit")
        ->required()
        ->check(CLI::ExistingFile);
    calibrate_cmd->add_option("--json-out", calibrate_out, "fitted parameter JSON path");
    calibrate_cmd->add_option("--restarts", calibrate_restarts, "random restarts");

    CommonArgs elicit_args;
    int elicit_count = 10;
    std::string elicit_out = "elicited.csv";
    auto* elicit_cmd =
        app.add_subcommand("elicit", "collect lane-change decisions interactively");
    add_common(*elicit_cmd, elicit_args, /*with_epochs=*/false);
    elicit_cmd->add_option("--count", elicit_count, "scenarios to present");
    elicit_cmd->add_option("--data-out", elicit_out, "destination decision CSV");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train_cmd) {
            const auto config = resolve_config(train_args);
            const auto run = harness::train(config);
            print_run_summary(run);
        } else if (*eval_cmd) {
            const auto config = resolve_config(eval_args);
            const auto net = harness::load_checkpoint(eval_checkpoint);
            const auto summary = harness::evaluate_policy(
                net, config, eval_episodes, eval_args.seed.value_or(config.seed));
            std::cout << "episodes:    " << summary.returns.size() << "\n";
            std::cout << "mean return: " << summary.mean_return << "\n";
            std::cout << "std return:  " << summary.std_return << "\n";
            std::cout << "min/max:     " << summary.min_return << " / " << summary.max_return
                      << "\n";
            std::cout << "collisions:  " << summary.collisions << "\n";
        } else if (*compare_cmd) {
            const auto config = resolve_config(compare_args);
            const auto result = harness::compare(config);
            std::cout << harness::comparison_table(result);
            std::cout << "csv: " << result.csv_path << "\n";
        } else if (*calibrate_cmd) {
            calib::FitConfig fit;
            if (calibrate_args.seed) fit.seed = *calibrate_args.seed;
            if (calibrate_restarts > 0) fit.restarts = calibrate_restarts;
            const auto report = harness::calibrate(calibrate_data, fit, calibrate_out);
            std::cout << "dataset:           " << calibrate_data << "\n";
            std::cout << "training accuracy: " << report.result.accuracy << "\n";
            std::cout << "final nll:         " << report.result.nll << "\n";
            std::cout << "link temperature:  " << report.result.k << "\n";
            std::cout << "params: " << report.json_path << "\n";
        } else if (*elicit_cmd) {
            harness::elicit(elicit_count, elicit_args.seed.value_or(0), elicit_out, std::cin,
                            std::cout);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
