#include <glob.h>

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "parvi/runner.hpp"

namespace {

// Exit codes: 0 success, 2 config/validation failure, 3 numeric blow-up.
constexpr int kExitOk = 0;
constexpr int kExitInvalid = 2;
constexpr int kExitBlowUp = 3;

int run_one(const std::string& path) {
    parvi::runner::RunConfig cfg;
    try {
        cfg = parvi::runner::validate_config_file(path);
    } catch (const parvi::Error& e) {
        std::cerr << path << ": " << e.what() << "\n";
        return kExitInvalid;
    }

    parvi::runner::RunResult res;
    try {
        res = parvi::runner::run_experiment(cfg);
    } catch (const parvi::NumericBlowupError& e) {
        std::cerr << path << ": numeric blow-up: " << e.what() << "\n";
        return kExitBlowUp;
    } catch (const parvi::Error& e) {
        std::cerr << path << ": " << e.what() << "\n";
        return kExitInvalid;
    }

    if (res.status == parvi::runner::RunResult::Status::BlowUp) {
        std::cerr << path << ": numeric blow-up after " << res.completed_iterations
                  << " completed iterations: " << res.message << "\n";
        if (!cfg.out_dir.empty())
            std::cerr << "partial output written to " << cfg.out_dir << "\n";
        return kExitBlowUp;
    }

    std::cout << path << ": ok, " << res.completed_iterations << " iterations, final h "
              << res.final_h;
    if (!res.metrics.empty()) {
        for (const auto& [name, value] : res.metrics.back().values)
            std::cout << ", " << name << " " << value;
    }
    std::cout << "\n";
    return kExitOk;
}

int validate_one(const std::string& path) {
    try {
        const auto cfg = parvi::runner::validate_config_file(path);
        std::cout << parvi::runner::resolved_config_text(cfg);
        return kExitOk;
    } catch (const parvi::Error& e) {
        std::cerr << path << ": " << e.what() << "\n";
        return kExitInvalid;
    }
}

std::vector<std::string> expand_glob(const std::string& pattern) {
    glob_t g{};
    std::vector<std::string> paths;
    const int rc = glob(pattern.c_str(), 0, nullptr, &g);
    if (rc == 0)
        for (std::size_t i = 0; i < g.gl_pathc; ++i) paths.emplace_back(g.gl_pathv[i]);
    globfree(&g);
    return paths;
}

int sweep(const std::string& pattern) {
    const auto paths = expand_glob(pattern);
    if (paths.empty()) {
        std::cerr << "sweep: no configs match '" << pattern << "'\n";
        return kExitInvalid;
    }
    bool any_invalid = false;
    bool any_blowup = false;
    for (const auto& path : paths) {
        const int rc = run_one(path);
        if (rc == kExitInvalid) any_invalid = true;
        if (rc == kExitBlowUp) any_blowup = true;
    }
    if (any_invalid) return kExitInvalid;
    if (any_blowup) return kExitBlowUp;
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"particle-based variational inference experiment runner"};
    app.require_subcommand(1);

    std::string run_path;
    auto* run_cmd = app.add_subcommand("run", "execute one experiment config");
    run_cmd->add_option("config", run_path, "key=value config file")->required();

    std::string sweep_pattern;
    auto* sweep_cmd = app.add_subcommand("sweep", "execute every config matching a glob");
    sweep_cmd->add_option("pattern", sweep_pattern, "glob pattern, e.g. 'configs/*.cfg'")
        ->required();

    std::string validate_path;
    auto* validate_cmd =
        app.add_subcommand("validate", "check a config and print the resolved settings");
    validate_cmd->add_option("config", validate_path, "key=value config file")->required();

    CLI11_PARSE(app, argc, argv);

    if (run_cmd->parsed()) return run_one(run_path);
    if (sweep_cmd->parsed()) return sweep(sweep_pattern);
    return validate_one(validate_path);
}
