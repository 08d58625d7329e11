// Command-line front end: contour grids, toy training runs, theorem
// verification suites, and hyperparameter sweeps. All outputs are CSV/JSON
// (SVG optional) plus a run manifest, and are byte-reproducible from the
// manifest's config.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bdpo/artifacts.hpp"
#include "bdpo/contour.hpp"
#include "bdpo/experiments.hpp"
#include "bdpo/losses.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOpts {
    std::uint64_t seed = 7;
    std::string out_dir = ".";
    double beta = 0.1;
    double alpha = 1.0;
    double penalty = 5.0;
    double lambda = 0.5;
    int steps = 1500;
    double lr = 0.05;
    bool line_search = false;
    bool svg = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--seed", opts.seed, "Run seed");
    cmd->add_option("--out", opts.out_dir, "Output directory");
    cmd->add_option("--beta", opts.beta, "Log-ratio temperature");
    cmd->add_option("--alpha", opts.alpha, "NLL weight (dpo-nll)");
    cmd->add_option("--penalty", opts.penalty, "Penalty weight (dpop)");
    cmd->add_option("--lambda", opts.lambda, "Mixture weight (bdpo)");
    cmd->add_option("--steps", opts.steps, "Training / descent steps");
    cmd->add_option("--lr", opts.lr, "Learning rate");
    cmd->add_flag("--line-search", opts.line_search, "Backtracking line search (plain GD)");
    cmd->add_flag("--svg", opts.svg, "Also emit SVG renderings");
    // The config file lives on the root app; unmatched subcommand flags fall
    // through so `toy --config f` works. Keys go in a [subcommand] section.
    cmd->fallthrough();
}

bdpo::LossSpec make_spec(bdpo::LossKind kind, const CommonOpts& opts) {
    bdpo::LossSpec spec{kind, opts.beta, opts.alpha, opts.penalty, opts.lambda};
    spec.validate();
    return spec;
}

json common_to_json(const CommonOpts& opts) {
    return {{"seed", opts.seed},   {"out", opts.out_dir},
            {"beta", opts.beta},   {"alpha", opts.alpha},
            {"penalty", opts.penalty}, {"lambda", opts.lambda},
            {"steps", opts.steps}, {"lr", opts.lr},
            {"line_search", opts.line_search}, {"svg", opts.svg}};
}

void finish_manifest(bdpo::RunManifest& manifest, const std::string& out_dir,
                     const std::string& name) {
    manifest.timestamp_utc = bdpo::utc_timestamp();
    const std::string path = out_dir + "/" + name;
    manifest.output_paths.push_back(path);
    bdpo::write_manifest(manifest, path);
}

std::pair<double, double> parse_ref(const std::string& text) {
    const auto comma = text.find(',');
    if (comma == std::string::npos)
        throw CLI::ValidationError("--ref", "expected rw,rl");
    return {std::stod(text.substr(0, comma)), std::stod(text.substr(comma + 1))};
}

// ---- contour ----

struct ContourOpts {
    CommonOpts common;
    int figure = 0;  // 0 = none, 1 = four-loss panel, 2 = alpha sweep
    std::string loss = "dpo";
    std::string ref = "0.4,0.1";
    double pw_min = 0.005, pw_max = 0.995;
    double pl_min = 0.005, pl_max = 0.5;
    std::size_t res_pw = 200, res_pl = 200;
    bool mask_simplex = false;
    bool pl_min_set = false;
};

int emit_grid(const bdpo::ContourGrid& grid, const std::string& out_dir,
              const std::string& stem, bool svg, bdpo::RunManifest& manifest) {
    const std::string csv_path = out_dir + "/" + stem + ".csv";
    bdpo::write_grid_csv(grid, csv_path);
    manifest.output_paths.push_back(csv_path);
    const std::string sidecar_path = out_dir + "/" + stem + ".json";
    bdpo::write_text_file(sidecar_path, bdpo::grid_sidecar(grid).dump(2) + "\n");
    manifest.output_paths.push_back(sidecar_path);
    if (svg) {
        const std::string svg_path = out_dir + "/" + stem + ".svg";
        bdpo::write_grid_svg(grid, svg_path);
        manifest.output_paths.push_back(svg_path);
    }
    return 0;
}

int run_contour(const ContourOpts& opts) {
    fs::create_directories(opts.common.out_dir);
    const auto ref = parse_ref(opts.ref);
    const std::pair<std::size_t, std::size_t> res{opts.res_pw, opts.res_pl};

    bdpo::RunManifest manifest;
    manifest.command = "contour";
    manifest.seed = opts.common.seed;
    manifest.config = common_to_json(opts.common);
    manifest.config["figure"] = opts.figure;
    manifest.config["loss"] = opts.loss;
    manifest.config["ref"] = {ref.first, ref.second};
    manifest.config["pw_range"] = {opts.pw_min, opts.pw_max};
    manifest.config["pl_range"] = {opts.pl_min, opts.pl_max};
    manifest.config["resolution"] = {opts.res_pw, opts.res_pl};
    manifest.config["mask_simplex"] = opts.mask_simplex;

    if (opts.figure == 1) {
        const bdpo::LossKind kinds[] = {bdpo::LossKind::Dpo, bdpo::LossKind::Dpop,
                                        bdpo::LossKind::DpoNll, bdpo::LossKind::Bdpo};
        for (bdpo::LossKind kind : kinds) {
            const bdpo::LossSpec spec = make_spec(kind, opts.common);
            const double pl_lo = kind == bdpo::LossKind::Bdpo && opts.pl_min_set
                                     ? opts.pl_min
                                     : std::max(opts.pl_min, 0.005);
            const auto grid = bdpo::evaluate_grid(spec, ref, {opts.pw_min, opts.pw_max},
                                                  {pl_lo, opts.pl_max}, res,
                                                  opts.mask_simplex);
            emit_grid(grid, opts.common.out_dir, "figure1_" + bdpo::to_string(kind),
                      opts.common.svg, manifest);
        }
    } else if (opts.figure == 2) {
        const std::vector<double> alphas{0.01, 0.1, 1.0, 10.0};
        const auto grids = bdpo::alpha_sweep(ref, alphas, opts.common.beta,
                                             {opts.pw_min, opts.pw_max},
                                             {std::max(opts.pl_min, 0.005), 0.25}, res,
                                             opts.mask_simplex);
        for (std::size_t i = 0; i < grids.size(); ++i) {
            char label[16];
            std::snprintf(label, sizeof(label), "%g", alphas[i]);
            emit_grid(grids[i], opts.common.out_dir,
                      std::string("figure2_alpha_") + label, opts.common.svg,
                      manifest);
        }
    } else {
        const bdpo::LossSpec spec =
            make_spec(bdpo::loss_kind_from_string(opts.loss), opts.common);
        const auto grid = bdpo::evaluate_grid(spec, ref, {opts.pw_min, opts.pw_max},
                                              {opts.pl_min, opts.pl_max}, res,
                                              opts.mask_simplex);
        emit_grid(grid, opts.common.out_dir, "contour_" + bdpo::to_string(spec.kind),
                  opts.common.svg, manifest);
    }
    finish_manifest(manifest, opts.common.out_dir, "contour_manifest.json");
    return 0;
}

// ---- toy ----

struct ToyOpts {
    CommonOpts common;
    std::string losses = "dpo,dpop,dpo-nll,bdpo";
    std::string optimizer = "adam";
    int trace_every = 10;
    std::string task_mode = "main";
};

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const std::string part = text.substr(
            start, comma == std::string::npos ? std::string::npos : comma - start);
        if (!part.empty()) parts.push_back(part);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return parts;
}

bdpo::TrainingConfig make_training_config(const bdpo::LossSpec& spec,
                                          const ToyOpts& opts) {
    bdpo::TrainingConfig config;
    config.loss_spec = spec;
    config.steps = opts.common.steps;
    config.learning_rate = opts.common.lr;
    config.optimizer = opts.optimizer == "adam" ? bdpo::Optimizer::Adam
                                                : bdpo::Optimizer::PlainGd;
    // Line search implies plain gradient descent.
    if (opts.common.line_search) config.optimizer = bdpo::Optimizer::PlainGd;
    config.line_search = opts.common.line_search;
    config.seed = opts.common.seed;
    config.trace_every = opts.trace_every;
    return config;
}

int run_toy(const ToyOpts& opts) {
    fs::create_directories(opts.common.out_dir);
    const auto loss_names = split_list(opts.losses);
    if (loss_names.empty()) throw CLI::ValidationError("--losses", "empty loss list");
    const bdpo::TaskMode mode = opts.task_mode == "appendix-b1"
                                    ? bdpo::TaskMode::AppendixB1
                                    : bdpo::TaskMode::MainText;
    const bdpo::ToyTask task = bdpo::generate_toy_task(opts.common.seed, mode);

    bdpo::RunManifest manifest;
    manifest.command = "toy";
    manifest.seed = opts.common.seed;
    manifest.config = common_to_json(opts.common);
    manifest.config["losses"] = loss_names;
    manifest.config["optimizer"] = opts.optimizer;
    manifest.config["trace_every"] = opts.trace_every;
    manifest.config["task_mode"] = opts.task_mode;

    std::string summary =
        "loss,prompt,response,role,p_ref,p_final\n";
    for (const auto& name : loss_names) {
        const bdpo::LossSpec spec =
            make_spec(bdpo::loss_kind_from_string(name), opts.common);
        const bdpo::TrainingConfig config = make_training_config(spec, opts);
        const bdpo::TrainingTrace trace = bdpo::train_toy(task, config);
        const std::string path =
            opts.common.out_dir + "/toy_" + bdpo::to_string(spec.kind) + ".csv";
        bdpo::write_trace_csv(trace, path);
        manifest.output_paths.push_back(path);

        // Final full distribution per prompt, with roles marked.
        for (std::size_t prompt = 0; prompt < task.num_prompts; ++prompt) {
            std::vector<std::string> roles(task.num_responses, "ood");
            for (const auto& pair : task.pairs) {
                if (pair.prompt != prompt) continue;
                roles[pair.chosen] = "chosen";
                roles[pair.rejected] = "rejected";
            }
            for (std::size_t response = 0; response < task.num_responses; ++response) {
                summary += bdpo::to_string(spec.kind) + ',' + std::to_string(prompt) +
                           ',' + std::to_string(response) + ',' + roles[response] + ',' +
                           bdpo::format_double(trace.ref_probs[prompt][response]) + ',' +
                           bdpo::format_double(trace.final_probs[prompt][response]) + '\n';
            }
        }
    }
    const std::string summary_path = opts.common.out_dir + "/toy_summary.csv";
    bdpo::write_text_file(summary_path, summary);
    manifest.output_paths.push_back(summary_path);
    finish_manifest(manifest, opts.common.out_dir, "toy_manifest.json");
    return 0;
}

// ---- verify ----

struct VerifyOpts {
    CommonOpts common;
    std::string suite = "all";
    int seeds = 20;
    int samples = 1000;
};

int run_verify(const VerifyOpts& opts) {
    fs::create_directories(opts.common.out_dir);
    json report = json::object();
    bool all_pass = true;

    bdpo::RunManifest manifest;
    manifest.command = "verify";
    manifest.seed = opts.common.seed;
    manifest.config = common_to_json(opts.common);
    manifest.config["suite"] = opts.suite;
    manifest.config["seeds"] = opts.seeds;
    manifest.config["samples"] = opts.samples;

    const bool all = opts.suite == "all";
    if (all || opts.suite == "gradients") {
        const auto r = bdpo::verify_gradients(opts.samples, opts.common.seed);
        report["gradients"] = bdpo::gradient_report_to_json(r);
        all_pass = all_pass && r.pass;
    }
    if (all || opts.suite == "theorem1") {
        const auto r = bdpo::verify_theorem1(opts.seeds, opts.common.seed,
                                             opts.common.beta, opts.common.lambda);
        report["theorem1"] = bdpo::theorem1_report_to_json(r);
        all_pass = all_pass && r.pass;
    }
    if (all || opts.suite == "theorem2") {
        json runs = json::array();
        bool pass = true;
        for (int i = 0; i < opts.seeds; ++i) {
            const std::uint64_t seed = opts.common.seed + static_cast<std::uint64_t>(i);
            const auto task = bdpo::generate_toy_task(seed);
            bdpo::TrainingConfig config;
            config.loss_spec = bdpo::LossSpec::bdpo(opts.common.beta, opts.common.lambda);
            config.steps = 400;
            config.learning_rate = 1.0;
            config.optimizer = bdpo::Optimizer::PlainGd;
            config.line_search = true;
            config.seed = seed;
            config.trace_every = 1;
            const auto r = bdpo::verify_theorem2(task, config.loss_spec, config);
            runs.push_back(bdpo::theorem2_report_to_json(r));
            pass = pass && r.pass;
        }
        report["theorem2"] = {{"runs", runs}, {"pass", pass}};
        all_pass = all_pass && pass;
    }
    if (all || opts.suite == "corollary1") {
        const std::vector<double> ref{0.4, 0.1, 0.25, 0.25};
        const auto r = bdpo::verify_corollary1(
            ref, bdpo::LossSpec::bdpo(1.0, opts.common.lambda), bdpo::LossSpec::dpo(1.0));
        report["corollary1"] = bdpo::corollary1_report_to_json(r);
        all_pass = all_pass && r.pass;
    }
    if (report.empty())
        throw CLI::ValidationError("suite",
                                   "expected theorem1|theorem2|corollary1|gradients|all");

    report["pass"] = all_pass;
    const std::string path = opts.common.out_dir + "/verify_" + opts.suite + ".json";
    bdpo::write_text_file(path, report.dump(2) + "\n");
    manifest.output_paths.push_back(path);
    finish_manifest(manifest, opts.common.out_dir, "verify_manifest.json");

    for (auto& [key, value] : report.items()) {
        if (key == "pass") continue;
        std::cout << key << ": " << (value["pass"].get<bool>() ? "pass" : "FAIL") << '\n';
    }
    return all_pass ? 0 : 1;
}

// ---- sweep ----

struct SweepOpts {
    CommonOpts common;
    std::vector<double> lambdas;
    std::string optimizer = "adam";
    int trace_every = 10;
};

int run_sweep(const SweepOpts& opts) {
    if (opts.lambdas.empty())
        throw CLI::ValidationError("--lambdas", "empty parameter list");
    fs::create_directories(opts.common.out_dir);
    const bdpo::ToyTask task = bdpo::generate_toy_task(opts.common.seed);

    bdpo::RunManifest manifest;
    manifest.command = "sweep";
    manifest.seed = opts.common.seed;
    manifest.config = common_to_json(opts.common);
    manifest.config["lambdas"] = opts.lambdas;
    manifest.config["optimizer"] = opts.optimizer;
    manifest.config["trace_every"] = opts.trace_every;

    std::string combined =
        "lambda,step,prompt,p_chosen,p_rejected,log_p_chosen,log_p_rejected,"
        "kl_to_ref,nll_chosen,in_dist_log_mass,loss\n";
    for (double lambda : opts.lambdas) {
        bdpo::TrainingConfig config;
        config.loss_spec = bdpo::LossSpec::bdpo(opts.common.beta, lambda);
        config.steps = opts.common.steps;
        config.learning_rate = opts.common.lr;
        config.optimizer = opts.optimizer == "adam" ? bdpo::Optimizer::Adam
                                                    : bdpo::Optimizer::PlainGd;
        config.line_search = opts.common.line_search;
        config.seed = opts.common.seed;
        config.trace_every = opts.trace_every;
        const bdpo::TrainingTrace trace = bdpo::train_toy(task, config);
        for (const auto& row : trace.rows) {
            combined += bdpo::format_double(lambda) + ',' + std::to_string(row.step) +
                        ',' + std::to_string(row.prompt) + ',' +
                        bdpo::format_double(row.p_chosen) + ',' +
                        bdpo::format_double(row.p_rejected) + ',' +
                        bdpo::format_double(row.log_p_chosen) + ',' +
                        bdpo::format_double(row.log_p_rejected) + ',' +
                        bdpo::format_double(row.kl_to_ref) + ',' +
                        bdpo::format_double(row.nll_chosen) + ',' +
                        bdpo::format_double(row.in_dist_log_mass) + ',' +
                        bdpo::format_double(row.loss) + '\n';
        }
    }
    const std::string path = opts.common.out_dir + "/sweep_lambda.csv";
    bdpo::write_text_file(path, combined);
    manifest.output_paths.push_back(path);
    finish_manifest(manifest, opts.common.out_dir, "sweep_manifest.json");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Preference-optimization loss laboratory (DPO / DPOP / DPO+NLL / BDPO)"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Config file; keys in a [subcommand] section, flags win");

    ContourOpts contour_opts;
    CLI::App* contour = app.add_subcommand("contour", "Evaluate a loss-landscape grid");
    add_common(contour, contour_opts.common);
    contour->add_option("--figure", contour_opts.figure,
                        "Preset: 1 = four-loss panel, 2 = alpha sweep")
        ->check(CLI::IsMember({1, 2}));
    contour->add_option("--loss", contour_opts.loss, "Loss kind");
    contour->add_option("--ref", contour_opts.ref, "Reference point rw,rl");
    contour->add_option("--pw-min", contour_opts.pw_min);
    contour->add_option("--pw-max", contour_opts.pw_max);
    auto* plmin = contour->add_option("--pl-min", contour_opts.pl_min);
    contour->add_option("--pl-max", contour_opts.pl_max);
    contour->add_option("--res-pw", contour_opts.res_pw);
    contour->add_option("--res-pl", contour_opts.res_pl);
    contour->add_flag("--mask-simplex", contour_opts.mask_simplex);

    ToyOpts toy_opts;
    CLI::App* toy = app.add_subcommand("toy", "Train the toy task with each loss");
    add_common(toy, toy_opts.common);
    toy->add_option("--losses", toy_opts.losses, "Comma-separated loss kinds");
    toy->add_option("--loss", toy_opts.losses, "Single loss kind");
    toy->add_option("--optimizer", toy_opts.optimizer)->check(CLI::IsMember({"adam", "gd"}));
    toy->add_option("--trace-every", toy_opts.trace_every);
    toy->add_option("--task-mode", toy_opts.task_mode)
        ->check(CLI::IsMember({"main", "appendix-b1"}));

    VerifyOpts verify_opts;
    CLI::App* verify = app.add_subcommand("verify", "Run numerical verification suites");
    add_common(verify, verify_opts.common);
    verify->add_option("suite", verify_opts.suite, "theorem1|theorem2|corollary1|gradients|all")
        ->check(CLI::IsMember({"theorem1", "theorem2", "corollary1", "gradients", "all"}));
    verify->add_option("--seeds", verify_opts.seeds);
    verify->add_option("--samples", verify_opts.samples);

    SweepOpts sweep_opts;
    CLI::App* sweep = app.add_subcommand("sweep", "Toy runs over a lambda list");
    add_common(sweep, sweep_opts.common);
    sweep->add_option("--lambdas", sweep_opts.lambdas, "Comma-separated lambda values")
        ->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : 2;
    }

    try {
        contour_opts.pl_min_set = plmin->count() > 0;
        if (contour->parsed()) return run_contour(contour_opts);
        if (toy->parsed()) return run_toy(toy_opts);
        if (verify->parsed()) return run_verify(verify_opts);
        if (sweep->parsed()) return run_sweep(sweep_opts);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
