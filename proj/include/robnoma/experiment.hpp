#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <functional>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "channels.hpp"
#include "errors.hpp"
#include "orchestrator.hpp"
#include "rng.hpp"
#include "scenario.hpp"
#include "verifier.hpp"

namespace robnoma {

// Runs fn(i) for i in [0, count) on a fixed set of worker threads.
inline void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
    threads = std::max(1, std::min<int>(threads, static_cast<int>(std::max<std::size_t>(count, 1))));
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&, t] {
            (void)t;
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    if (!failed.exchange(true)) failure = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

// Shortest round-trip decimal form.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

inline std::vector<std::string> split_list(const std::string& s, char sep = ',') {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) {
        const auto b = cur.find_first_not_of(" \t");
        const auto e = cur.find_last_not_of(" \t");
        if (b != std::string::npos) out.push_back(cur.substr(b, e - b + 1));
    }
    return out;
}

inline double parse_double(const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw ParameterError("not a number: " + s);
    }
    if (used != s.size()) throw ParameterError("not a number: " + s);
    return v;
}

inline int as_count(double v, const std::string& name) {
    require_parameter(std::isfinite(v) && v == std::floor(v), name + " must be an integer");
    return static_cast<int>(v);
}

// Sets one named scenario parameter. Powers ending in _dbm are converted to watts.
inline void apply_parameter(NetworkScenario& sc, const std::string& name, double v) {
    if (name == "F") sc.F = as_count(v, name);
    else if (name == "T_f") sc.T_f = as_count(v, name);
    else if (name == "T_m") sc.T_m = as_count(v, name);
    else if (name == "N") sc.N = as_count(v, name);
    else if (name == "K") sc.K = as_count(v, name);
    else if (name == "F_max") sc.F_max = as_count(v, name);
    else if (name == "N_hat_a") sc.N_hat_a = as_count(v, name);
    else if (name == "q_max") sc.q_max = as_count(v, name);
    else if (name == "P_max") sc.P_max = v;
    else if (name == "P_max_dbm") sc.P_max = dbm_to_watt(v);
    else if (name == "P_MBS") sc.P_MBS = v;
    else if (name == "P_MBS_dbm") sc.P_MBS = dbm_to_watt(v);
    else if (name == "sigma2") sc.sigma2 = v;
    else if (name == "sigma2_dbm") sc.sigma2 = dbm_to_watt(v);
    else if (name == "R_k") sc.R_k = v;
    else if (name == "eps_M") sc.eps_M = v;
    else if (name == "alpha") sc.alpha = v;
    else if (name == "beta") sc.beta = v;
    else if (name == "zeta") sc.zeta = v;
    else if (name == "kappa") sc.kappa = v;
    else if (name == "eta") sc.eta = v;
    else if (name == "eta_alpha") sc.eta = sc.alpha = v;
    else if (name == "Upsilon") sc.Upsilon_CS = sc.Upsilon_CA = v;
    else if (name == "Upsilon_CS") sc.Upsilon_CS = v;
    else if (name == "Upsilon_CA") sc.Upsilon_CA = v;
    else if (name == "c_MF") sc.c_MF = v;
    else if (name == "c_i") sc.c_i = v;
    else if (name == "eps_stop") sc.eps_stop = v;
    else if (name == "eps_c") sc.eps_c = v;
    else if (name == "var_h_F") sc.var_h_F = v;
    else if (name == "var_h_FM") sc.var_h_FM = v;
    else if (name == "var_h_MF") sc.var_h_MF = v;
    else if (name == "var_e") sc.var_e_F = sc.var_e_FM = sc.var_e_MF = v;
    else if (name == "var_e_F") sc.var_e_F = v;
    else if (name == "var_e_FM") sc.var_e_FM = v;
    else if (name == "var_e_MF") sc.var_e_MF = v;
    else throw ParameterError("unknown parameter: " + name);
}

// A mode with optional scenario overrides, written "Bernstein" or "Bernstein:q_max=1:K=4".
struct ModeVariant {
    std::string label;
    RobustMode mode = RobustMode::Perfect;
    std::vector<std::pair<std::string, double>> overrides;
};

inline ModeVariant parse_variant(const std::string& text) {
    const auto parts = split_list(text, ':');
    require_parameter(!parts.empty(), "empty mode entry");
    ModeVariant v;
    v.label = text;
    v.mode = parse_mode(parts[0]);
    for (std::size_t i = 1; i < parts.size(); ++i) {
        const auto eq = parts[i].find('=');
        require_parameter(eq != std::string::npos, "override must read name=value: " + parts[i]);
        v.overrides.emplace_back(parts[i].substr(0, eq), parse_double(parts[i].substr(eq + 1)));
    }
    return v;
}

struct ExperimentConfig {
    NetworkScenario base;
    std::string variable;        // empty: a single point at the base scenario
    std::vector<double> values;
    std::vector<std::string> modes{"Perfect", "Bernstein", "WorstCase"};
    int seeds = 20;
    std::uint64_t base_seed = 1;
    int threads = 1;
    bool timing = true;          // false writes wall_ms as 0
    OrchestratorOptions orchestrator;
    long trials = 10000;         // verify: Monte Carlo trials
    long samples = 10000;        // verify: boundary samples
    double margin_tol = 1e-8;    // verify: worst-case margin floor

    std::vector<double> points() const { return variable.empty() ? std::vector<double>{0.0} : values; }

    void validate() const {
        require_parameter(!modes.empty(), "mode list is empty");
        require_parameter(seeds >= 1, "seeds must be positive");
        require_parameter(threads >= 1, "threads must be positive");
        require_parameter(variable.empty() || !values.empty(), "sweep variable has no values");
        for (auto& m : modes) parse_variant(m);
        if (!variable.empty()) {
            NetworkScenario probe = base;
            apply_parameter(probe, variable, values.front());
        }
    }
};

// Channel and solver seed of seed index s (1-based), shared by every mode and sweep point.
inline std::uint64_t instance_seed(std::uint64_t base_seed, int s) {
    return derive_seed(base_seed, {static_cast<std::uint64_t>(s)});
}

struct SweepRow {
    std::string mode;
    double sweep_value = 0.0;
    int seed = 0;
    double sum_rate = 0.0;
    int rounds = 0;
    double wall_ms = 0.0;
};

struct MissingRow {
    std::string mode;
    double sweep_value = 0.0;
    int seed = 0;
    std::string reason;
};

struct RunOutput {
    NetworkScenario scenario;
    ChannelSet channels;
    RunResult result;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::vector<MissingRow> missing;
    std::vector<std::string> violations;  // audit findings, "mode value seed kind:index"
};

inline NetworkScenario scenario_at(const ExperimentConfig& cfg, const ModeVariant& v, double value) {
    NetworkScenario sc = cfg.base;
    if (!cfg.variable.empty()) apply_parameter(sc, cfg.variable, value);
    for (auto& [k, x] : v.overrides) apply_parameter(sc, k, x);
    sc.validate();
    return sc;
}

// One orchestrator run of a variant at a sweep value and seed index.
inline RunOutput run_instance(const ExperimentConfig& cfg, const ModeVariant& v, double value, int s) {
    RunOutput out;
    out.scenario = scenario_at(cfg, v, value);
    const std::uint64_t seed = instance_seed(cfg.base_seed, s);
    out.channels = generate_channels(out.scenario, seed);
    OrchestratorOptions o = cfg.orchestrator;
    o.seed = seed;
    out.result = alternate(out.scenario, out.channels, v.mode, o);
    return out;
}

inline SweepResult run_sweep(const ExperimentConfig& cfg) {
    cfg.validate();
    std::vector<ModeVariant> variants;
    for (auto& m : cfg.modes) variants.push_back(parse_variant(m));
    const auto pts = cfg.points();
    struct Task {
        std::size_t v, p;
        int s;
    };
    std::vector<Task> tasks;
    for (std::size_t p = 0; p < pts.size(); ++p)
        for (std::size_t v = 0; v < variants.size(); ++v)
            for (int s = 1; s <= cfg.seeds; ++s) tasks.push_back({v, p, s});
    struct Slot {
        bool ok = false;
        SweepRow row;
        MissingRow miss;
        std::vector<std::string> violations;
    };
    std::vector<Slot> slots(tasks.size());
    parallel_for(tasks.size(), cfg.threads, [&](std::size_t i) {
        const Task& t = tasks[i];
        const ModeVariant& var = variants[t.v];
        Slot& slot = slots[i];
        slot.miss = {var.label, pts[t.p], t.s, ""};
        const auto t0 = std::chrono::steady_clock::now();
        try {
            RunOutput r = run_instance(cfg, var, pts[t.p], t.s);
            if (!r.result.feasible) {
                slot.miss.reason = r.result.history.diagnostics.empty() ? "infeasible" : r.result.history.diagnostics.back();
                return;
            }
            slot.ok = true;
            slot.row = {var.label, pts[t.p], t.s, r.result.sum_rate, static_cast<int>(r.result.history.rounds.size()),
                        cfg.timing ? detail::wall_ms_since(t0) : 0.0};
            for (auto& f : audit_solution(r.result.asg, r.result.sol, r.scenario, r.channels))
                slot.violations.push_back(var.label + " " + format_double(pts[t.p]) + " " + std::to_string(t.s) + " " +
                                          f.kind + ":" + std::to_string(f.index));
        } catch (const Error& e) {
            slot.miss.reason = e.what();
        }
    });
    SweepResult out;
    for (auto& s : slots) {
        if (s.ok) out.rows.push_back(s.row);
        else out.missing.push_back(s.miss);
        out.violations.insert(out.violations.end(), s.violations.begin(), s.violations.end());
    }
    auto key = [](const auto& r) { return std::make_tuple(r.mode, r.sweep_value, r.seed); };
    std::sort(out.rows.begin(), out.rows.end(), [&](auto& a, auto& b) { return key(a) < key(b); });
    std::sort(out.missing.begin(), out.missing.end(), [&](auto& a, auto& b) { return key(a) < key(b); });
    std::sort(out.violations.begin(), out.violations.end());
    return out;
}

inline const char* kSweepHeader = "mode,sweep_value,seed,sum_rate,rounds,wall_ms";

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
    os << kSweepHeader << '\n';
    for (auto& r : rows)
        os << r.mode << ',' << format_double(r.sweep_value) << ',' << r.seed << ',' << format_double(r.sum_rate) << ','
           << r.rounds << ',' << format_double(r.wall_ms) << '\n';
}

inline void write_missing_csv(std::ostream& os, const std::vector<MissingRow>& rows) {
    os << "mode,sweep_value,seed,reason\n";
    for (auto& r : rows) {
        std::string reason = r.reason;
        std::replace(reason.begin(), reason.end(), ',', ';');
        std::replace(reason.begin(), reason.end(), '\n', ' ');
        os << r.mode << ',' << format_double(r.sweep_value) << ',' << r.seed << ',' << reason << '\n';
    }
}

inline std::vector<SweepRow> read_sweep_csv(std::istream& is) {
    std::string line;
    require_structure(static_cast<bool>(std::getline(is, line)) && line == kSweepHeader, "bad sweep CSV header");
    std::vector<SweepRow> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto f = split_list(line);
        require_structure(f.size() == 6, "bad sweep CSV row: " + line);
        rows.push_back({f[0], parse_double(f[1]), as_count(parse_double(f[2]), "seed"), parse_double(f[3]),
                        as_count(parse_double(f[4]), "rounds"), parse_double(f[5])});
    }
    return rows;
}

struct MeanCurve {
    std::string mode;
    std::vector<double> x, y;
    std::vector<int> count;
};

// Per-mode mean sum rate at each sweep value, modes in first-seen order.
inline std::vector<MeanCurve> mean_curves(const std::vector<SweepRow>& rows) {
    std::vector<MeanCurve> curves;
    std::map<std::string, std::map<double, std::pair<double, int>>> acc;
    for (auto& r : rows) {
        if (acc.find(r.mode) == acc.end()) curves.push_back({r.mode, {}, {}, {}});
        auto& a = acc[r.mode][r.sweep_value];
        a.first += r.sum_rate;
        ++a.second;
    }
    for (auto& c : curves)
        for (auto& [x, a] : acc[c.mode]) {
            c.x.push_back(x);
            c.y.push_back(a.first / a.second);
            c.count.push_back(a.second);
        }
    return curves;
}

namespace detail {

inline std::string svg_escape(const std::string& s) {
    std::string o;
    for (char c : s) {
        if (c == '<') o += "&lt;";
        else if (c == '>') o += "&gt;";
        else if (c == '&') o += "&amp;";
        else if (c == '"') o += "&quot;";
        else o += c;
    }
    return o;
}

inline std::string px(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

}  // namespace detail

// Line plot of the mean curves. Every marker carries its exact plotted value in data attributes.
inline std::string render_svg(const std::vector<MeanCurve>& curves, const std::string& xlabel,
                              const std::string& ylabel = "mean sum rate (bit/s/Hz)") {
    const double W = 640, H = 420, L = 70, R = 170, T = 30, B = 60;
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (auto& c : curves)
        for (std::size_t i = 0; i < c.x.size(); ++i) {
            x0 = std::min(x0, c.x[i]);
            x1 = std::max(x1, c.x[i]);
            y0 = std::min(y0, c.y[i]);
            y1 = std::max(y1, c.y[i]);
        }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 == x0) x0 -= 0.5, x1 += 0.5;
    y0 = std::min(y0, 0.0);
    if (y1 <= y0) y1 = y0 + 1;
    y1 += 0.05 * (y1 - y0);
    auto sx = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
    auto sy = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
       << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double xv = x0 + (x1 - x0) * i / 4.0, yv = y0 + (y1 - y0) * i / 4.0;
        os << "<line x1=\"" << detail::px(sx(xv)) << "\" y1=\"" << H - B << "\" x2=\"" << detail::px(sx(xv)) << "\" y2=\""
           << H - B + 5 << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << detail::px(sx(xv)) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">"
           << detail::svg_escape(format_double(std::round(xv * 1e4) / 1e4)) << "</text>\n";
        os << "<line x1=\"" << L - 5 << "\" y1=\"" << detail::px(sy(yv)) << "\" x2=\"" << L << "\" y2=\"" << detail::px(sy(yv))
           << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << L - 8 << "\" y=\"" << detail::px(sy(yv) + 4) << "\" text-anchor=\"end\">"
           << detail::svg_escape(format_double(std::round(yv * 100) / 100)) << "</text>\n";
    }
    os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">" << detail::svg_escape(xlabel)
       << "</text>\n";
    os << "<text x=\"18\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " << (T + H - B) / 2
       << ")\">" << detail::svg_escape(ylabel) << "</text>\n";
    for (std::size_t c = 0; c < curves.size(); ++c) {
        const char* col = colors[c % 8];
        const auto& cv = curves[c];
        os << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < cv.x.size(); ++i) os << (i ? " " : "") << detail::px(sx(cv.x[i])) << ',' << detail::px(sy(cv.y[i]));
        os << "\"/>\n";
        for (std::size_t i = 0; i < cv.x.size(); ++i)
            os << "<circle cx=\"" << detail::px(sx(cv.x[i])) << "\" cy=\"" << detail::px(sy(cv.y[i])) << "\" r=\"3\" fill=\"" << col
               << "\" data-mode=\"" << detail::svg_escape(cv.mode) << "\" data-x=\"" << format_double(cv.x[i]) << "\" data-y=\""
               << format_double(cv.y[i]) << "\" data-n=\"" << cv.count[i] << "\"/>\n";
        const double ly = T + 10 + 20.0 * c;
        os << "<line x1=\"" << W - R + 15 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 40 << "\" y2=\"" << ly << "\" stroke=\"" << col
           << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << W - R + 46 << "\" y=\"" << ly + 4 << "\">" << detail::svg_escape(cv.mode) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

inline std::string svg_from_csv(std::istream& is, const std::string& xlabel) {
    return render_svg(mean_curves(read_sweep_csv(is)), xlabel);
}

// One-sided sign test: probability of at least `wins` successes in wins + losses fair trials.
inline double sign_test_p(int wins, int losses) {
    const int n = wins + losses;
    if (n == 0) return 1.0;
    double p = 0.0;
    for (int i = wins; i <= n; ++i)
        p += std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) - n * std::log(2.0));
    return std::min(1.0, p);
}

struct PairComparison {
    double sweep_value = 0.0;
    std::string mode_a, mode_b;
    int n = 0;
    double mean_a = 0.0, mean_b = 0.0;
    int wins = 0, losses = 0, ties = 0;  // a against b per paired seed
    double p_value = 1.0;                // sign test for a > b
};

struct CompareReport {
    SweepResult sweep;
    std::vector<PairComparison> pairs;
};

inline std::vector<PairComparison> paired_comparisons(const std::vector<SweepRow>& rows,
                                                      const std::vector<std::string>& modes,
                                                      const std::vector<double>& points, double tie_tol = 1e-9) {
    std::map<std::tuple<std::string, double, int>, double> val;
    for (auto& r : rows) val[{r.mode, r.sweep_value, r.seed}] = r.sum_rate;
    std::set<int> seeds;
    for (auto& r : rows) seeds.insert(r.seed);
    std::vector<PairComparison> out;
    for (double x : points)
        for (std::size_t i = 0; i < modes.size(); ++i)
            for (std::size_t j = i + 1; j < modes.size(); ++j) {
                PairComparison c;
                c.sweep_value = x;
                c.mode_a = modes[i];
                c.mode_b = modes[j];
                for (int s : seeds) {
                    auto a = val.find({modes[i], x, s}), b = val.find({modes[j], x, s});
                    if (a == val.end() || b == val.end()) continue;
                    ++c.n;
                    c.mean_a += a->second;
                    c.mean_b += b->second;
                    const double d = a->second - b->second;
                    if (std::abs(d) <= tie_tol * (1.0 + std::abs(b->second))) ++c.ties;
                    else if (d > 0) ++c.wins;
                    else ++c.losses;
                }
                if (c.n > 0) {
                    c.mean_a /= c.n;
                    c.mean_b /= c.n;
                }
                c.p_value = sign_test_p(c.wins, c.losses);
                out.push_back(c);
            }
    return out;
}

inline CompareReport compare_modes(const ExperimentConfig& cfg) {
    require_parameter(cfg.modes.size() >= 2, "compare needs at least two modes");
    CompareReport rep;
    rep.sweep = run_sweep(cfg);
    rep.pairs = paired_comparisons(rep.sweep.rows, cfg.modes, cfg.points());
    return rep;
}

inline void write_compare_csv(std::ostream& os, const std::vector<PairComparison>& pairs) {
    os << "sweep_value,mode_a,mode_b,n,mean_a,mean_b,mean_diff,wins,losses,ties,p_value\n";
    for (auto& c : pairs)
        os << format_double(c.sweep_value) << ',' << c.mode_a << ',' << c.mode_b << ',' << c.n << ',' << format_double(c.mean_a)
           << ',' << format_double(c.mean_b) << ',' << format_double(c.mean_a - c.mean_b) << ',' << c.wins << ','
           << c.losses << ',' << c.ties << ',' << format_double(c.p_value) << '\n';
}

// Text ranking: modes ordered by mean per sweep point, then each pair's sign test.
inline std::string ranking_text(const CompareReport& rep, const ExperimentConfig& cfg) {
    std::ostringstream os;
    os.precision(6);
    const auto curves = mean_curves(rep.sweep.rows);
    for (double x : cfg.points()) {
        std::vector<std::pair<double, std::string>> order;
        for (auto& c : curves)
            for (std::size_t i = 0; i < c.x.size(); ++i)
                if (c.x[i] == x) order.emplace_back(c.y[i], c.mode);
        std::stable_sort(order.begin(), order.end(), [](auto& a, auto& b) { return a.first > b.first; });
        os << (cfg.variable.empty() ? std::string("point") : cfg.variable + " = " + format_double(x)) << ':';
        for (std::size_t i = 0; i < order.size(); ++i) os << (i ? " > " : " ") << order[i].second << ' ' << order[i].first;
        os << '\n';
        for (auto& p : rep.pairs)
            if (p.sweep_value == x)
                os << "  " << p.mode_a << " vs " << p.mode_b << ": diff " << p.mean_a - p.mean_b << ", wins " << p.wins
                   << ", losses " << p.losses << ", ties " << p.ties << ", p " << p.p_value << '\n';
    }
    return os.str();
}

// Per-round summary: one row per phase (cs, ca, beamforming).
inline void write_rounds_csv(std::ostream& os, const RunHistory& h) {
    os << "round,phase,sum_rate,proposals,solver_iters,wall_ms\n";
    for (auto& r : h.rounds) {
        os << r.round << ",cs,," << r.cs_proposals << ",0,\n";
        os << r.round << ",ca,," << r.ca_proposals << ",0,\n";
        os << r.round << ",beamforming," << format_double(r.sum_rate) << ",0," << r.solver_iterations << ','
           << format_double(r.wall_ms) << '\n';
    }
}

// SCA objective trace of a solution: iteration 0 is the start point.
inline void write_sca_trace_csv(std::ostream& os, const BeamformingSolution& sol) {
    os << "iteration,objective,max_residual\n";
    for (std::size_t i = 0; i < sol.objective_trace.size(); ++i) {
        os << i << ',' << format_double(sol.objective_trace[i]) << ',';
        if (i > 0 && i - 1 < sol.residual_trace.size()) os << format_double(sol.residual_trace[i - 1]);
        os << '\n';
    }
}

struct VerifyRow {
    std::string mode;
    int seed = 0;
    std::string check;   // audit, rate_outage, sic_joint, sic_independent, mue_outage, stress
    std::string label;
    double value = 0.0;  // estimate or margin
    double bound = 0.0;  // Wilson upper bound, or the value again for margins
    double threshold = 0.0;
    bool pass = true;
};

struct VerifyReport {
    std::vector<VerifyRow> rows;
    std::vector<MissingRow> missing;
    int failures = 0;
};

// Certifies orchestrator outputs at the base scenario: structural audit for every mode,
// Monte Carlo outage for Bernstein, boundary stress for WorstCase.
inline VerifyReport verify_runs(const ExperimentConfig& cfg) {
    cfg.validate();
    std::vector<ModeVariant> variants;
    for (auto& m : cfg.modes) variants.push_back(parse_variant(m));
    const double x = cfg.points().front();
    struct Slot {
        std::vector<VerifyRow> rows;
        bool missing = false;
        MissingRow miss;
    };
    std::vector<Slot> slots(variants.size() * cfg.seeds);
    parallel_for(slots.size(), cfg.threads, [&](std::size_t i) {
        const ModeVariant& var = variants[i / cfg.seeds];
        const int s = static_cast<int>(i % cfg.seeds) + 1;
        Slot& slot = slots[i];
        RunOutput r;
        try {
            r = run_instance(cfg, var, x, s);
        } catch (const Error& e) {
            slot.missing = true;
            slot.miss = {var.label, x, s, e.what()};
            return;
        }
        if (!r.result.feasible) {
            slot.missing = true;
            slot.miss = {var.label, x, s, "infeasible"};
            return;
        }
        const auto& sc = r.scenario;
        const auto& res = r.result;
        auto add = [&](std::string check, std::string label, double v, double bound, double thr, bool pass) {
            slot.rows.push_back({var.label, s, std::move(check), std::move(label), v, bound, thr, pass});
        };
        const auto viol = audit_solution(res.asg, res.sol, sc, r.channels);
        if (viol.empty()) add("audit", "clean", 0, 0, 0, true);
        for (auto& v : viol) add("audit", v.kind + ":" + std::to_string(v.index), 1, 1, 0, false);
        if (var.mode == RobustMode::Bernstein) {
            McOptions mo;
            mo.trials = cfg.trials;
            mo.seed = derive_seed(instance_seed(cfg.base_seed, s), {0x6d63ULL});
            const auto ro = mc_outage_rate(res.asg, res.sol, r.channels, sc, mo);
            const auto io = mc_outage_interference(res.asg, res.sol, r.channels, sc, mo);
            for (auto& e : ro.rate) add("rate_outage", e.label, e.p, e.ci.hi, sc.beta, e.ci.hi < sc.beta);
            for (auto& e : ro.sic_joint) add("sic_joint", e.label, e.p, e.ci.hi, sc.beta, e.p <= sc.beta);
            for (auto& e : ro.sic_independent) add("sic_independent", e.label, e.p, e.ci.hi, sc.beta, e.p <= sc.beta);
            // unused subcarriers carry no load
            for (auto& e : io.interference)
                if (e.nominal_margin < 1.0) add("mue_outage", e.label, e.p, e.ci.hi, sc.alpha, e.ci.hi < sc.alpha);
        }
        if (var.mode == RobustMode::WorstCase) {
            StressOptions so;
            so.samples = cfg.samples;
            so.seed = derive_seed(instance_seed(cfg.base_seed, s), {0x7374ULL});
            const auto st = worstcase_stress(res.asg, res.sol, r.channels, sc, so);
            for (auto& m : st.margins) add("stress", m.label, m.worst, m.worst, -cfg.margin_tol, m.worst >= -cfg.margin_tol);
        }
    });
    VerifyReport rep;
    for (auto& s : slots) {
        if (s.missing) rep.missing.push_back(s.miss);
        for (auto& r : s.rows) {
            rep.failures += !r.pass;
            rep.rows.push_back(r);
        }
    }
    return rep;
}

inline void write_verify_csv(std::ostream& os, const std::vector<VerifyRow>& rows) {
    os << "mode,seed,check,label,value,bound,threshold,pass\n";
    for (auto& r : rows)
        os << r.mode << ',' << r.seed << ',' << r.check << ',' << r.label << ',' << format_double(r.value) << ','
           << format_double(r.bound) << ',' << format_double(r.threshold) << ',' << (r.pass ? 1 : 0) << '\n';
}

}  // namespace robnoma
