#include <atomic>
#include <map>
#include <regex>
#include <sstream>
#include <stdexcept>

#include <gtest/gtest.h>

#include <robnoma/config.hpp>
#include <robnoma/experiment.hpp>

using namespace robnoma;

namespace {

ExperimentConfig small_config() {
    ExperimentConfig cfg;
    cfg.base.F = 2;
    cfg.base.T_f = 2;
    cfg.base.N = 2;
    cfg.base.K = 3;
    cfg.seeds = 3;
    cfg.timing = false;
    cfg.orchestrator.max_rounds = 3;
    return cfg;
}

std::string csv(const SweepResult& r) {
    std::ostringstream os;
    write_sweep_csv(os, r.rows);
    return os.str();
}

}  // namespace

TEST(Sweep, SinglePointSingleSeedGivesOneRow) {
    ExperimentConfig cfg = small_config();
    cfg.modes = {"Perfect"};
    cfg.seeds = 1;
    const SweepResult r = run_sweep(cfg);
    EXPECT_EQ(r.rows.size() + r.missing.size(), 1u);
    EXPECT_TRUE(r.violations.empty());
    if (!r.rows.empty()) {
        EXPECT_EQ(r.rows[0].seed, 1);
        EXPECT_EQ(r.rows[0].wall_ms, 0.0);
        EXPECT_GT(r.rows[0].sum_rate, 0.0);
    }
}

TEST(Sweep, EmptyModeListIsRejected) {
    ExperimentConfig cfg = small_config();
    cfg.modes.clear();
    EXPECT_THROW(run_sweep(cfg), ParameterError);
    cfg.modes = {"Robust"};
    EXPECT_THROW(run_sweep(cfg), ParameterError);
    cfg.modes = {"Perfect"};
    cfg.variable = "no_such_field";
    cfg.values = {1.0};
    EXPECT_THROW(run_sweep(cfg), ParameterError);
}

TEST(Sweep, OutputDoesNotDependOnThreadCount) {
    ExperimentConfig cfg = small_config();
    cfg.variable = "eps_M";
    cfg.values = {0.1, 0.3};
    cfg.threads = 1;
    const std::string one = csv(run_sweep(cfg));
    cfg.threads = 3;
    const std::string three = csv(run_sweep(cfg));
    EXPECT_EQ(one, three);
    EXPECT_EQ(one.substr(0, one.find('\n')), kSweepHeader);
}

TEST(Sweep, VariantOverridesApply) {
    const ModeVariant v = parse_variant("Bernstein:q_max=1:K=4");
    EXPECT_EQ(v.mode, RobustMode::Bernstein);
    EXPECT_EQ(v.label, "Bernstein:q_max=1:K=4");
    ExperimentConfig cfg = small_config();
    const NetworkScenario sc = scenario_at(cfg, v, 0.0);
    EXPECT_EQ(sc.q_max, 1);
    EXPECT_EQ(sc.K, 4);
    EXPECT_THROW(parse_variant("Bernstein:q_max"), ParameterError);
    EXPECT_THROW(parse_variant("Exact"), ParameterError);
}

TEST(Sweep, SeedsAreSharedAcrossModesAndPoints) {
    EXPECT_EQ(instance_seed(7, 3), derive_seed(7, {3}));
    EXPECT_NE(instance_seed(7, 3), instance_seed(7, 4));
    EXPECT_NE(instance_seed(7, 3), instance_seed(8, 3));
}

TEST(SweepCsv, RoundTrips) {
    std::vector<SweepRow> rows{{"Perfect", 0.1, 1, 3.25, 2, 0.0}, {"WorstCase", 0.3, 2, 1.125, 4, 12.5}};
    std::ostringstream os;
    write_sweep_csv(os, rows);
    std::istringstream is(os.str());
    const auto back = read_sweep_csv(is);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[1].mode, "WorstCase");
    EXPECT_EQ(back[1].sweep_value, 0.3);
    EXPECT_EQ(back[1].sum_rate, 1.125);
    EXPECT_EQ(back[1].rounds, 4);
    std::istringstream bad("mode,x\n");
    EXPECT_THROW(read_sweep_csv(bad), StructuralError);
}

TEST(Svg, MarkersCarryTheCsvMeans) {
    const std::string text =
        "mode,sweep_value,seed,sum_rate,rounds,wall_ms\n"
        "Perfect,0.1,1,2,1,0\nPerfect,0.1,2,4,1,0\nPerfect,0.2,1,5,1,0\n"
        "Bernstein,0.1,1,1,1,0\nBernstein,0.2,1,1.5,1,0\nBernstein,0.2,2,2.5,1,0\n";
    std::istringstream is(text);
    const std::string svg = svg_from_csv(is, "eps_M");
    std::map<std::pair<std::string, double>, std::pair<double, int>> want{
        {{"Perfect", 0.1}, {3.0, 2}}, {{"Perfect", 0.2}, {5.0, 1}}, {{"Bernstein", 0.1}, {1.0, 1}}, {{"Bernstein", 0.2}, {2.0, 2}}};
    const std::regex marker("data-mode=\"([^\"]+)\" data-x=\"([^\"]+)\" data-y=\"([^\"]+)\" data-n=\"(\\d+)\"");
    int seen = 0;
    for (auto it = std::sregex_iterator(svg.begin(), svg.end(), marker); it != std::sregex_iterator(); ++it) {
        const auto& m = *it;
        const auto w = want.at({m[1].str(), std::stod(m[2].str())});
        EXPECT_DOUBLE_EQ(std::stod(m[3].str()), w.first);
        EXPECT_EQ(std::stoi(m[4].str()), w.second);
        ++seen;
    }
    EXPECT_EQ(seen, 4);
    EXPECT_NE(svg.find("<svg"), std::string::npos);
    EXPECT_NE(svg.find("eps_M"), std::string::npos);
}

TEST(SignTest, BinomialTailValues) {
    EXPECT_DOUBLE_EQ(sign_test_p(0, 0), 1.0);
    EXPECT_NEAR(sign_test_p(5, 0), 1.0 / 32, 1e-12);
    EXPECT_NEAR(sign_test_p(10, 0), 1.0 / 1024, 1e-12);
    EXPECT_NEAR(sign_test_p(3, 2), 0.5, 1e-12);
    EXPECT_NEAR(sign_test_p(8, 2), 56.0 / 1024, 1e-12);
    EXPECT_NEAR(sign_test_p(0, 4), 1.0, 1e-12);
}

TEST(Compare, IdenticalModesTie) {
    std::vector<SweepRow> rows;
    for (int s = 1; s <= 5; ++s) {
        rows.push_back({"A", 0.0, s, 1.0 * s, 1, 0});
        rows.push_back({"B", 0.0, s, 1.0 * s, 1, 0});
        rows.push_back({"C", 0.0, s, 0.5 * s, 1, 0});
    }
    const auto pairs = paired_comparisons(rows, {"A", "B", "C"}, {0.0});
    ASSERT_EQ(pairs.size(), 3u);
    EXPECT_EQ(pairs[0].ties, 5);
    EXPECT_EQ(pairs[0].mean_a - pairs[0].mean_b, 0.0);
    EXPECT_EQ(pairs[0].p_value, 1.0);
    EXPECT_EQ(pairs[1].wins, 5);
    EXPECT_NEAR(pairs[1].p_value, 1.0 / 32, 1e-12);
    EXPECT_NEAR(pairs[1].mean_a, 3.0, 1e-12);
}

TEST(Compare, NeedsTwoModes) {
    ExperimentConfig cfg = small_config();
    cfg.modes = {"Perfect"};
    EXPECT_THROW(compare_modes(cfg), ParameterError);
}

TEST(Config, ParsesAllSections) {
    std::istringstream is(
        "[scenario]\nK = 4\nP_max_dbm = 30\nseed = 9\n"
        "[sweep]\nvariable = eps_M\nvalues = 0.1, 0.2\nmodes = Perfect,Bernstein:q_max=1\nseeds = 5\n"
        "[run]\nthreads = 2\nmax_rounds = 7\neps_c = 0.01\ntiming = false\n"
        "[verify]\ntrials = 2000\nsamples = 300\n");
    const ExperimentConfig cfg = load_config(is);
    EXPECT_EQ(cfg.base.K, 4);
    EXPECT_NEAR(cfg.base.P_max, 1.0, 1e-12);
    EXPECT_EQ(cfg.base_seed, 9u);
    EXPECT_EQ(cfg.variable, "eps_M");
    EXPECT_EQ(cfg.values, (std::vector<double>{0.1, 0.2}));
    EXPECT_EQ(cfg.modes, (std::vector<std::string>{"Perfect", "Bernstein:q_max=1"}));
    EXPECT_EQ(cfg.seeds, 5);
    EXPECT_EQ(cfg.threads, 2);
    EXPECT_EQ(cfg.orchestrator.max_rounds, 7);
    EXPECT_EQ(cfg.orchestrator.eps_c, 0.01);
    EXPECT_FALSE(cfg.timing);
    EXPECT_EQ(cfg.trials, 2000);
    EXPECT_EQ(cfg.samples, 300);
}

TEST(Config, UnknownNamesAreErrors) {
    std::istringstream a("[scenario]\nbogus = 1\n");
    EXPECT_THROW(load_config(a), ParameterError);
    std::istringstream b("[extra]\nx = 1\n");
    EXPECT_THROW(load_config(b), ParameterError);
    std::istringstream c("[run]\nspeed = 1\n");
    EXPECT_THROW(load_config(c), ParameterError);
    std::istringstream d("[scenario]\nK = many\n");
    EXPECT_THROW(load_config(d), ParameterError);
}

TEST(Parameters, UnitsAndCounts) {
    NetworkScenario sc;
    apply_parameter(sc, "P_max_dbm", 40);
    EXPECT_NEAR(sc.P_max, 10.0, 1e-12);
    apply_parameter(sc, "eta_alpha", 0.1);
    EXPECT_EQ(sc.eta, 0.1);
    EXPECT_EQ(sc.alpha, 0.1);
    EXPECT_THROW(apply_parameter(sc, "K", 2.5), ParameterError);
    EXPECT_THROW(apply_parameter(sc, "nope", 1), ParameterError);
    EXPECT_EQ(split_list(" a, b ,c"), (std::vector<std::string>{"a", "b", "c"}));
    EXPECT_THROW(parse_double("1.5x"), ParameterError);
    EXPECT_EQ(parse_double(format_double(0.1 + 0.2)), 0.1 + 0.2);
}

TEST(ParallelFor, VisitsEveryIndexOnceAndPropagatesErrors) {
    std::vector<std::atomic<int>> hits(101);
    parallel_for(hits.size(), 4, [&](std::size_t i) { ++hits[i]; });
    for (auto& h : hits) EXPECT_EQ(h.load(), 1);
    EXPECT_THROW(parallel_for(20, 3,
                              [](std::size_t i) {
                                  if (i == 13) throw std::runtime_error("boom");
                              }),
                 std::runtime_error);
}

TEST(RunCsv, RoundAndTraceSchemas) {
    RunHistory h;
    RoundRecord r;
    r.round = 1;
    r.sum_rate = 2.5;
    r.best_sum_rate = 2.5;
    r.feasible = true;
    h.rounds.push_back(r);
    std::ostringstream os;
    write_rounds_csv(os, h);
    const std::string text = os.str();
    EXPECT_EQ(text,
              "round,phase,sum_rate,proposals,solver_iters,wall_ms\n1,cs,,0,0,\n1,ca,,0,0,\n1,beamforming,2.5,0,0,0\n");
    BeamformingSolution sol(1, 1, 1);
    sol.objective_trace = {1.0, 1.5};
    sol.residual_trace = {1e-7, 1e-8};
    std::ostringstream ts;
    write_sca_trace_csv(ts, sol);
    EXPECT_EQ(ts.str(), "iteration,objective,max_residual\n0,1,\n1,1.5,1e-07\n");
}
