// fadesim: run, sweep, validate and trace link scenarios.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fade/harness.hpp"

namespace fs = std::filesystem;
using namespace fade;

namespace {

struct Globals {
    std::optional<std::uint64_t> seed;
    std::string duration;
    std::string out_dir = ".";
};

void apply(const Globals& g, Scenario& s) {
    if (g.seed) s.seed = *g.seed;
    if (!g.duration.empty()) s.duration = parse_duration(g.duration);
    s.validate();
}

Scenario load(const Globals& g, const std::string& path) {
    Scenario s = load_scenario(path);
    apply(g, s);
    return s;
}

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

void write_report(const Globals& g, const RunReport& r, const std::string& stem) {
    const fs::path dir(g.out_dir);
    write_file(dir / (stem + ".report.json"), to_json(r).dump(2) + "\n");
    write_file(dir / (stem + ".summary.csv"), summary_header() + "\n" + summary_row(r, stem) + "\n");
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != ' ') {
            cur += c;
        }
    }
    if (!cur.empty() || !out.empty()) out.push_back(cur);
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulator for the 0xFADE acquisition link"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--seed", g.seed, "Override the scenario seed");
    app.add_option("--duration", g.duration, "Override the virtual duration (e.g. 10s)");
    app.add_option("--out-dir", g.out_dir, "Directory for reports")->capture_default_str();

    std::string scenario_path;
    auto* run_cmd = app.add_subcommand("run", "Run one scenario and write its report");
    run_cmd->add_option("scenario", scenario_path)->required()->check(CLI::ExistingFile);

    std::string param, values_text;
    unsigned jobs = 0;
    auto* sweep_cmd = app.add_subcommand("sweep", "Run a scenario once per parameter value");
    sweep_cmd->add_option("scenario", scenario_path)->required()->check(CLI::ExistingFile);
    sweep_cmd->add_option("--param", param, "Dotted field path, e.g. senders.0.link.loss_prob")->required();
    sweep_cmd->add_option("--values", values_text, "Comma-separated values")->required();
    sweep_cmd->add_option("--jobs", jobs, "Parallel runs (0 = one per core)");

    auto* validate_cmd = app.add_subcommand("validate", "Check a scenario file");
    validate_cmd->add_option("scenario", scenario_path)->required()->check(CLI::ExistingFile);

    std::string trace_out;
    auto* trace_cmd = app.add_subcommand("trace", "Run a scenario and write the frame trace");
    trace_cmd->add_option("scenario", scenario_path)->required()->check(CLI::ExistingFile);
    trace_cmd->add_option("--out", trace_out, "Trace file")->required();

    for (auto* sub : {run_cmd, sweep_cmd, validate_cmd, trace_cmd}) sub->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        const std::string stem = fs::path(scenario_path).stem().string();
        if (*validate_cmd) {
            const Scenario s = load(g, scenario_path);
            std::cout << scenario_path << ": ok (" << s.senders.size() << " sender(s))\n";
            return 0;
        }
        if (*run_cmd) {
            const RunReport r = run(load(g, scenario_path));
            write_report(g, r, stem);
            std::cout << report_text(r);
            return r.integrity ? 0 : 1;
        }
        if (*trace_cmd) {
            const Scenario s = load(g, scenario_path);
            const fs::path out_path(trace_out);
            if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
            std::ofstream trace(out_path, std::ios::binary);
            if (!trace) throw std::runtime_error("cannot write " + trace_out);
            RunOptions opts;
            opts.trace = &trace;
            const RunReport r = run(s, opts);
            write_report(g, r, stem);
            std::cout << report_text(r);
            return r.integrity ? 0 : 1;
        }
        if (*sweep_cmd) {
            const YAML::Node base = load_scenario_yaml(scenario_path);
            const SweepResult res = sweep(base, param, split_list(values_text), [&](Scenario& s) { apply(g, s); }, jobs);
            std::string table = summary_header() + "\n";
            for (std::size_t i = 0; i < res.reports.size(); ++i) {
                const std::string label = param + "=" + res.values[i];
                const fs::path dir(g.out_dir);
                write_file(dir / (stem + "." + std::to_string(i) + ".report.json"),
                           to_json(res.reports[i]).dump(2) + "\n");
                table += summary_row(res.reports[i], label) + "\n";
                std::cout << label << ": " << report_text(res.reports[i]);
            }
            write_file(fs::path(g.out_dir) / (stem + ".sweep.csv"), table);
            return res.all_pass() ? 0 : 1;
        }
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
