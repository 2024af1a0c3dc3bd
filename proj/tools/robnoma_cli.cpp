#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include <robnoma/beamforming/builder.hpp>
#include <robnoma/config.hpp>
#include <robnoma/experiment.hpp>

namespace fs = std::filesystem;
using namespace robnoma;

namespace {

struct Common {
    std::string config;
    std::string out = ".";
    std::string modes;
    int seeds = 0;
    int threads = 0;
    long trials = 0;
    long samples = 0;
    bool no_timing = false;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("-c,--config", c.config, "INI configuration file");
    app->add_option("-o,--out", c.out, "output directory");
    app->add_option("-m,--modes", c.modes, "comma-separated modes, e.g. Perfect,Bernstein:q_max=1");
    app->add_option("-s,--seeds", c.seeds, "seeds per point");
    app->add_option("-j,--threads", c.threads, "worker threads");
    app->add_option("--trials", c.trials, "Monte Carlo trials");
    app->add_option("--samples", c.samples, "boundary samples");
    app->add_flag("--no-timing", c.no_timing, "write wall_ms as 0");
}

ExperimentConfig load(const Common& c) {
    ExperimentConfig cfg;
    if (!c.config.empty()) {
        std::ifstream is(c.config);
        if (!is) throw ParameterError("cannot open config " + c.config);
        cfg = load_config(is);
    }
    if (!c.modes.empty()) cfg.modes = split_list(c.modes);
    if (c.seeds > 0) cfg.seeds = c.seeds;
    if (c.threads > 0) cfg.threads = c.threads;
    if (c.trials > 0) cfg.trials = c.trials;
    if (c.samples > 0) cfg.samples = c.samples;
    if (c.no_timing) cfg.timing = false;
    cfg.validate();
    return cfg;
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw ParameterError("cannot write " + p.string());
    os << text;
}

std::string sweep_csv(const SweepResult& r) {
    std::ostringstream os;
    write_sweep_csv(os, r.rows);
    return os.str();
}

void write_sweep_artifacts(const fs::path& dir, const ExperimentConfig& cfg, const SweepResult& r) {
    const std::string csv = sweep_csv(r);
    write_file(dir / "sweep.csv", csv);
    std::ostringstream miss;
    write_missing_csv(miss, r.missing);
    write_file(dir / "missing.csv", miss.str());
    std::istringstream back(csv);
    write_file(dir / "sweep.svg", svg_from_csv(back, cfg.variable.empty() ? "point" : cfg.variable));
    if (!r.violations.empty()) {
        std::ostringstream v;
        for (auto& s : r.violations) v << s << '\n';
        write_file(dir / "violations.txt", v.str());
    }
}

int report_violations(const SweepResult& r) {
    for (auto& s : r.violations) std::cerr << "violation: " << s << '\n';
    for (auto& m : r.missing)
        std::cerr << "missing: " << m.mode << ' ' << format_double(m.sweep_value) << ' ' << m.seed << ": " << m.reason << '\n';
    return r.violations.empty() ? 0 : 1;
}

int cmd_sweep(const Common& c) {
    const ExperimentConfig cfg = load(c);
    fs::create_directories(c.out);
    const SweepResult r = run_sweep(cfg);
    write_sweep_artifacts(c.out, cfg, r);
    std::cout << "rows " << r.rows.size() << ", missing " << r.missing.size() << ", violations " << r.violations.size()
              << '\n';
    return report_violations(r);
}

int cmd_compare(const Common& c) {
    const ExperimentConfig cfg = load(c);
    const CompareReport rep = compare_modes(cfg);
    fs::create_directories(c.out);
    write_sweep_artifacts(c.out, cfg, rep.sweep);
    std::ostringstream os;
    write_compare_csv(os, rep.pairs);
    write_file(fs::path(c.out) / "compare.csv", os.str());
    const std::string text = ranking_text(rep, cfg);
    write_file(fs::path(c.out) / "ranking.txt", text);
    std::cout << text;
    return report_violations(rep.sweep);
}

int cmd_verify(const Common& c) {
    const ExperimentConfig cfg = load(c);
    const VerifyReport rep = verify_runs(cfg);
    fs::create_directories(c.out);
    std::ostringstream os;
    write_verify_csv(os, rep.rows);
    write_file(fs::path(c.out) / "verify.csv", os.str());
    std::ostringstream txt;
    txt.precision(6);
    std::map<std::pair<std::string, std::string>, std::pair<int, int>> tally;
    std::map<std::pair<std::string, std::string>, double> worst;
    for (auto& r : rep.rows) {
        auto& t = tally[{r.mode, r.check}];
        ++t.first;
        t.second += !r.pass;
        auto key = std::make_pair(r.mode, r.check);
        const bool margin = r.check == "stress";
        auto it = worst.find(key);
        if (it == worst.end()) worst[key] = r.bound;
        else it->second = margin ? std::min(it->second, r.bound) : std::max(it->second, r.bound);
    }
    for (auto& [k, t] : tally)
        txt << k.first << ' ' << k.second << ": " << t.first << " checks, " << t.second << " failed, worst "
            << (k.second == "stress" ? "margin " : "bound ") << worst[k] << '\n';
    for (auto& m : rep.missing) txt << "missing " << m.mode << " seed " << m.seed << ": " << m.reason << '\n';
    for (auto& r : rep.rows)
        if (!r.pass)
            txt << "FAIL " << r.mode << " seed " << r.seed << ' ' << r.check << ' ' << r.label << " value "
                << format_double(r.value) << " bound " << format_double(r.bound) << '\n';
    write_file(fs::path(c.out) / "verify_report.txt", txt.str());
    std::cout << txt.str();
    return rep.failures == 0 ? 0 : 1;
}

struct SolveArgs {
    std::string mode = "Bernstein";
    int seed = 1;
    double value = 0.0;
    std::string trace, program, channels_in, channels_out, rounds, sca_trace;
};

int cmd_solve_one(const Common& c, const SolveArgs& a) {
    ExperimentConfig cfg = load(c);
    const ModeVariant var = parse_variant(a.mode);
    const double x = cfg.variable.empty() ? 0.0 : a.value;
    const NetworkScenario sc = scenario_at(cfg, var, x);
    const std::uint64_t seed = instance_seed(cfg.base_seed, a.seed);
    ChannelSet ch;
    if (!a.channels_in.empty()) {
        std::ifstream is(a.channels_in);
        if (!is) throw ParameterError("cannot open " + a.channels_in);
        ch = read_channels(is);
        ch.uncertainty = scenario_uncertainty(sc);
    } else {
        ch = generate_channels(sc, seed);
    }
    if (!a.channels_out.empty()) {
        std::ofstream os(a.channels_out);
        write_channels(os, ch);
    }
    OrchestratorOptions o = cfg.orchestrator;
    o.seed = seed;
    o.matching.trace = !a.trace.empty();
    const RunResult r = alternate(sc, ch, var.mode, o);
    if (!a.trace.empty()) {
        std::ofstream os(a.trace);
        for (auto& rec : r.history.rounds) {
            os << "round " << rec.round << '\n';
            for (auto& line : rec.trace) os << line << '\n';
            os << "beamforming sum_rate " << format_double(rec.sum_rate) << " best " << format_double(rec.best_sum_rate)
               << " sca_outer " << rec.sca_outer << " feasible " << rec.feasible << " reused " << rec.reused << '\n';
        }
    }
    if (!a.rounds.empty()) {
        std::ofstream os(a.rounds);
        write_rounds_csv(os, r.history);
    }
    if (!a.sca_trace.empty()) {
        std::ofstream os(a.sca_trace);
        write_sca_trace_csv(os, r.sol);
    }
    if (!a.program.empty() && r.feasible && r.model.num_users() > 0) {
        const BuiltProgram B = build_program(r.model, to_blocks(r.model.sched, r.sol.W));
        std::ofstream os(a.program);
        os << B.prog.dump();
    }
    std::cout.precision(8);
    std::cout << "mode " << var.label << " seed " << a.seed << '\n';
    std::cout << "feasible " << r.feasible << " sum_rate " << r.sum_rate << " nominal " << r.nominal_sum_rate << " rounds "
              << r.history.rounds.size() << '\n';
    for (int k = 0; k < sc.K; ++k) {
        const int n = r.feasible ? r.asg.subcarrier_of(k) : -1;
        std::cout << "user " << k << " subcarrier " << n << " nodes";
        if (r.feasible)
            for (int node : r.asg.nodes_of(k)) std::cout << ' ' << node;
        if (n >= 0) std::cout << " rate " << rate(outer_products(r.sol.w), r.asg, ch, k, n, sc.sigma2);
        std::cout << '\n';
    }
    for (int d : r.dropped) std::cout << "dropped " << d << '\n';
    if (!r.feasible) return 1;
    const auto viol = audit_solution(r.asg, r.sol, sc, ch);
    for (auto& v : viol) std::cerr << "violation: " << v.kind << ' ' << v.message << '\n';
    return viol.empty() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Robust NOMA CoMP resource allocation experiments"};
    app.require_subcommand(1);
    Common common;
    SolveArgs solve;
    auto* sweep = app.add_subcommand("sweep", "run a parameter sweep, write CSV and SVG");
    auto* compare = app.add_subcommand("compare", "paired comparison of modes with sign tests");
    auto* verify = app.add_subcommand("verify", "certify solutions by audit, Monte Carlo and stress tests");
    auto* one = app.add_subcommand("solve-one", "solve a single instance");
    for (auto* s : {sweep, compare, verify, one}) add_common(s, common);
    one->add_option("--mode", solve.mode, "mode or variant");
    one->add_option("--seed", solve.seed, "seed index");
    one->add_option("--value", solve.value, "sweep value when the config names a variable");
    one->add_option("--trace", solve.trace, "write the matching and round log");
    one->add_option("--program", solve.program, "write the final conic program");
    one->add_option("--rounds", solve.rounds, "write the per-round summary CSV");
    one->add_option("--sca-trace", solve.sca_trace, "write the SCA objective trace CSV");
    one->add_option("--channels-in", solve.channels_in, "read channel estimates");
    one->add_option("--channels-out", solve.channels_out, "write channel estimates");
    CLI11_PARSE(app, argc, argv);
    try {
        if (sweep->parsed()) return cmd_sweep(common);
        if (compare->parsed()) return cmd_compare(common);
        if (verify->parsed()) return cmd_verify(common);
        return cmd_solve_one(common, solve);
    } catch (const robnoma::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
