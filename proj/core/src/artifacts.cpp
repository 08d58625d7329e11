#include "bdpo/artifacts.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace bdpo {

std::string format_double(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

void write_text_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << contents;
}

void write_trace_csv(const TrainingTrace& trace, const std::string& path) {
    std::string body =
        "step,prompt,p_chosen,p_rejected,log_p_chosen,log_p_rejected,"
        "kl_to_ref,nll_chosen,in_dist_log_mass,loss\n";
    for (const TraceRow& row : trace.rows) {
        body += std::to_string(row.step) + ',' + std::to_string(row.prompt) + ',' +
                format_double(row.p_chosen) + ',' + format_double(row.p_rejected) + ',' +
                format_double(row.log_p_chosen) + ',' + format_double(row.log_p_rejected) + ',' +
                format_double(row.kl_to_ref) + ',' + format_double(row.nll_chosen) + ',' +
                format_double(row.in_dist_log_mass) + ',' + format_double(row.loss) + '\n';
    }
    write_text_file(path, body);
}

void write_grid_csv(const ContourGrid& grid, const std::string& path) {
    std::string body = "pw,pl,loss\n";
    for (std::size_t i = 0; i < grid.pl_axis.size(); ++i) {
        for (std::size_t j = 0; j < grid.pw_axis.size(); ++j) {
            if (grid.masked(i, j)) continue;
            body += format_double(grid.pw_axis[j]) + ',' +
                    format_double(grid.pl_axis[i]) + ',' +
                    format_double(grid.value(i, j)) + '\n';
        }
    }
    write_text_file(path, body);
}

nlohmann::json loss_spec_to_json(const LossSpec& spec) {
    return {{"kind", to_string(spec.kind)},
            {"beta", spec.beta},
            {"alpha", spec.alpha},
            {"penalty", spec.penalty},
            {"mixture", spec.mixture}};
}

LossSpec loss_spec_from_json(const nlohmann::json& doc) {
    LossSpec spec;
    spec.kind = loss_kind_from_string(doc.at("kind"));
    spec.beta = doc.value("beta", 0.1);
    spec.alpha = doc.value("alpha", 1.0);
    spec.penalty = doc.value("penalty", 5.0);
    spec.mixture = doc.value("mixture", 0.5);
    spec.validate();
    return spec;
}

nlohmann::json grid_sidecar(const ContourGrid& grid) {
    return {{"spec", loss_spec_to_json(grid.spec)},
            {"ref", {grid.r_w, grid.r_l}},
            {"pw_axis", grid.pw_axis},
            {"pl_axis", grid.pl_axis},
            {"mask_simplex", grid.mask_simplex}};
}

void write_grid_svg(const ContourGrid& grid, const std::string& path) {
    const std::size_t nx = grid.pw_axis.size();
    const std::size_t ny = grid.pl_axis.size();
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < grid.values.size(); ++k) {
        if (grid.mask[k]) continue;
        lo = std::min(lo, grid.values[k]);
        hi = std::max(hi, grid.values[k]);
    }
    // Log-spaced normalization; DPO-family losses diverge near p_l = 0.
    const double log_lo = std::log(std::max(lo, 1e-12));
    const double log_hi = std::log(std::max(hi, lo + 1e-12));
    const int cell = 4;
    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                      std::to_string(nx * cell) + "\" height=\"" +
                      std::to_string(ny * cell) + "\">\n";
    for (std::size_t i = 0; i < ny; ++i) {
        for (std::size_t j = 0; j < nx; ++j) {
            if (grid.masked(i, j)) continue;
            const double t =
                (std::log(std::max(grid.value(i, j), 1e-12)) - log_lo) /
                std::max(log_hi - log_lo, 1e-12);
            // Bright = low loss.
            const int shade = static_cast<int>(255.0 * (1.0 - t));
            svg += "<rect x=\"" + std::to_string(j * cell) + "\" y=\"" +
                   std::to_string((ny - 1 - i) * cell) + "\" width=\"4\" height=\"4\" fill=\"rgb(" +
                   std::to_string(shade) + ',' + std::to_string(shade) + ",160)\"/>\n";
        }
    }
    svg += "<text x=\"4\" y=\"14\" font-size=\"12\">" + to_string(grid.spec.kind) +
           " loss range [" + format_double(lo) + ", " + format_double(hi) + "]</text>\n";
    svg += "</svg>\n";
    write_text_file(path, svg);
}

nlohmann::json theorem1_report_to_json(const Theorem1Report& report) {
    nlohmann::json seeds = nlohmann::json::array();
    for (const auto& s : report.seeds) {
        seeds.push_back({{"seed", s.seed},
                         {"reference", s.reference},
                         {"bdpo_p_chosen", s.bdpo_p_chosen},
                         {"bdpo_p_rejected", s.bdpo_p_rejected},
                         {"dpo_p_chosen", s.dpo_p_chosen},
                         {"dpo_p_rejected", s.dpo_p_rejected},
                         {"bdpo_converged", s.bdpo_converged},
                         {"dpo_rejected_small", s.dpo_rejected_small}});
    }
    return {{"property", "theorem1"},
            {"seeds", seeds},
            {"dpo_chosen_below_threshold", report.dpo_chosen_below_threshold},
            {"pass", report.pass}};
}

nlohmann::json theorem2_report_to_json(const Theorem2Report& report) {
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& s : report.steps)
        steps.push_back({{"step", s.step},
                         {"loss", s.loss},
                         {"min_margin", s.min_margin},
                         {"bound_held", s.bound_held}});
    return {{"property", "theorem2"},
            {"bounds", report.bounds},
            {"steps", steps},
            {"monotone", report.monotone},
            {"bound_held", report.bound_held},
            {"line_search_failed", report.line_search_failed},
            {"pass", report.pass}};
}

nlohmann::json corollary1_report_to_json(const Corollary1Report& report) {
    return {{"property", "corollary1"},
            {"bdpo_minimizer", report.bdpo_minimizer},
            {"forward_dpo_loss", report.forward_dpo_loss},
            {"counter_dpo_loss", report.counter_dpo_loss},
            {"counter_bdpo_loss", report.counter_bdpo_loss},
            {"bdpo_grid_min", report.bdpo_grid_min},
            {"forward_pass", report.forward_pass},
            {"counter_pass", report.counter_pass},
            {"pass", report.pass}};
}

nlohmann::json gradient_report_to_json(const GradientCheckReport& report) {
    nlohmann::json losses = nlohmann::json::array();
    for (const auto& entry : report.losses)
        losses.push_back({{"loss", to_string(entry.kind)},
                          {"max_rel_err", entry.max_rel_err},
                          {"pass", entry.pass}});
    return {{"property", "gradients"}, {"losses", losses}, {"pass", report.pass}};
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&t, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

void write_manifest(const RunManifest& manifest, const std::string& path) {
    nlohmann::json doc{{"command", manifest.command},
                       {"config", manifest.config},
                       {"seed", manifest.seed},
                       {"output_paths", manifest.output_paths},
                       {"tool_version", manifest.tool_version},
                       {"timestamp", manifest.timestamp_utc}};
    write_text_file(path, doc.dump(2) + "\n");
}

}  // namespace bdpo
