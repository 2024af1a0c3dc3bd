#pragma once

#include <istream>
#include <optional>
#include <set>
#include <string>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "errors.hpp"
#include "experiment.hpp"

namespace robnoma {

// INI layout:
//   [scenario]  any apply_parameter name = value, and seed
//   [sweep]     variable, values (comma list), modes (comma list), seeds, base_seed
//   [run]       threads, max_rounds, eps_c, timing
//   [verify]    trials, samples, margin_tol
inline ExperimentConfig load_config(std::istream& is) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ParameterError(std::string("config: ") + e.what());
    }
    ExperimentConfig cfg;
    static const std::set<std::string> sections{"scenario", "sweep", "run", "verify"};
    for (auto& [name, sec] : tree) {
        require_parameter(sections.count(name) == 1, "config: unknown section [" + name + "]");
        (void)sec;
    }
    if (auto sc = tree.get_child_optional("scenario"))
        for (auto& [key, node] : *sc) {
            if (key == "seed") cfg.base_seed = std::stoull(node.data());
            else apply_parameter(cfg.base, key, parse_double(node.data()));
        }
    auto get = [&](const std::string& path) -> std::optional<std::string> {
        if (auto v = tree.get_optional<std::string>(path)) return *v;
        return std::nullopt;
    };
    auto check_keys = [&](const std::string& section, const std::set<std::string>& keys) {
        if (auto s = tree.get_child_optional(section))
            for (auto& [key, node] : *s) {
                (void)node;
                require_parameter(keys.count(key) == 1, "config: unknown key " + section + "." + key);
            }
    };
    check_keys("sweep", {"variable", "values", "modes", "seeds", "base_seed"});
    check_keys("run", {"threads", "max_rounds", "eps_c", "timing"});
    check_keys("verify", {"trials", "samples", "margin_tol"});
    if (auto v = get("sweep.variable")) cfg.variable = *v;
    if (auto v = get("sweep.values")) {
        cfg.values.clear();
        for (auto& x : split_list(*v)) cfg.values.push_back(parse_double(x));
    }
    if (auto v = get("sweep.modes")) cfg.modes = split_list(*v);
    if (auto v = get("sweep.seeds")) cfg.seeds = as_count(parse_double(*v), "seeds");
    if (auto v = get("sweep.base_seed")) cfg.base_seed = std::stoull(*v);
    if (auto v = get("run.threads")) cfg.threads = as_count(parse_double(*v), "threads");
    if (auto v = get("run.max_rounds")) cfg.orchestrator.max_rounds = as_count(parse_double(*v), "max_rounds");
    if (auto v = get("run.eps_c")) cfg.orchestrator.eps_c = parse_double(*v);
    if (auto v = get("run.timing")) cfg.timing = *v == "true" || *v == "1" || *v == "yes";
    if (auto v = get("verify.trials")) cfg.trials = static_cast<long>(parse_double(*v));
    if (auto v = get("verify.samples")) cfg.samples = static_cast<long>(parse_double(*v));
    if (auto v = get("verify.margin_tol")) cfg.margin_tol = parse_double(*v);
    return cfg;
}

}  // namespace robnoma
