#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "superholonomy/report.hpp"

namespace {

struct CommonOpts {
    std::string model_file;
    std::string out_file;
    shol::RunOptions run;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--model", opts.model_file, "model file")->required();
    cmd->add_option("--out", opts.out_file, "write the JSON report here (default: stdout)");
    cmd->add_option_function<unsigned>(
        "--kmax", [&opts](unsigned v) { opts.run.kmax = v; },
        "override the covariant-derivative order bound");
    cmd->add_option_function<unsigned>(
        "--lprime", [&opts](unsigned v) { opts.run.lprime = v; },
        "override the T-dimension scan bound");
    cmd->add_option_function<std::uint64_t>(
        "--seed", [&opts](std::uint64_t v) { opts.run.seed = v; }, "sampling seed");
    cmd->add_flag("--timings", opts.run.timings,
                  "include wall-clock timings (breaks byte determinism)");
}

int emit(const CommonOpts& opts, const std::string& text, bool passed) {
    if (opts.out_file.empty()) {
        std::cout << text;
    } else {
        std::ofstream out(opts.out_file);
        if (!out.good()) {
            std::cerr << "cannot write " << opts.out_file << "\n";
            return 2;
        }
        out << text;
    }
    return passed ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"superholonomy: exact holonomy algebra computations on supermanifold models"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string command;

    auto make = [&](const std::string& name, const std::string& help,
                    const std::string& internal) {
        CLI::App* cmd = app.add_subcommand(name, help);
        add_common(cmd, opts);
        cmd->callback([&command, internal] { command = internal; });
        return cmd;
    };

    make("curvature", "curvature components of the model connection", "curvature");
    CLI::App* transport = make("transport", "parallel transport along a declared path",
                               "transport");
    std::string path_name;
    transport->add_option("--path", path_name, "path name (default: first declared)");

    make("holonomy", "holonomy algebras, dimensions and stabilization", "holonomy");
    make("compare", "coefficient vs Galaev algebra with proof mechanisms", "compare");
    make("twofold", "invariance conditions for declared vectors and submodules", "twofold");
    CLI::App* derham = make("derham-wu", "algebraic de Rham-Wu split of a metric model",
                            "derham-wu");
    std::string candidate_name;
    derham->add_option("--candidate", candidate_name, "declared submodule to split against");

    CLI::App* fppf = app.add_subcommand("fppf", "flatness and descent checks");
    fppf->require_subcommand(1);
    CLI::App* audit = fppf->add_subcommand("audit", "submersion vs freeness audit");
    add_common(audit, opts);
    audit->callback([&command] { command = "fppf-audit"; });
    CLI::App* glue = fppf->add_subcommand("glue", "descent over a declared cover");
    add_common(glue, opts);
    glue->callback([&command] { command = "fppf-glue"; });
    std::string cover_name;
    glue->add_option("--cover", cover_name, "cover name (default: first declared)");

    CLI11_PARSE(app, argc, argv);

    if (!path_name.empty()) opts.run.path_name = path_name;
    if (!candidate_name.empty()) opts.run.candidate_name = candidate_name;
    if (!cover_name.empty()) opts.run.cover_name = cover_name;

    try {
        shol::ModelFile model = shol::load_model(opts.model_file);
        shol::RunResult result = shol::run_command(model, command, opts.run);
        return emit(opts, shol::render_report(result), result.all_passed);
    } catch (const shol::error& e) {
        shol::Json err{{"error", {{"code", shol::errc_name(e.code())}, {"message", e.what()}}}};
        emit(opts, err.dump(2) + "\n", false);
        return 2;
    } catch (const std::exception& e) {
        shol::Json err{{"error", {{"code", "Internal"}, {"message", e.what()}}}};
        emit(opts, err.dump(2) + "\n", false);
        return 2;
    }
}
