#include <CLI11.hpp>
#include <json.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "netdef/adversary.hpp"
#include "netdef/harness.hpp"

using namespace netdef;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const std::string& path, const std::string& text) {
    if (auto dir = std::filesystem::path(path).parent_path(); !dir.empty())
        std::filesystem::create_directories(dir);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

ExperimentConfig load_config(const std::string& path, uint64_t* seed_override, int* runs_override,
                             const std::string& out_override) {
    ExperimentConfig cfg = parse_experiment_config(slurp(path));
    if (seed_override) cfg.base_seed = *seed_override;
    if (runs_override) cfg.runs = *runs_override;
    if (!out_override.empty()) cfg.out_dir = out_override;
    return cfg;
}

void print_summary(const MetricsSummary& s) {
    std::cout << summary_json(s);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adversarial-RL network defence testbed"};
    app.require_subcommand(1);

    std::string config_path, out_path;
    std::optional<uint64_t> seed;
    std::optional<int> runs;

    auto add_common = [&](CLI::App* sub, bool need_config = true) {
        auto* opt = sub->add_option("--config", config_path, "experiment config file (JSON)");
        if (need_config) opt->required();
        sub->add_option("--seed", seed, "override base seed");
        sub->add_option("--runs", runs, "override run count");
        sub->add_option("--out", out_path, "output file or directory");
    };

    // gen-topology
    auto* gen = app.add_subcommand("gen-topology", "generate a seeded topology file");
    GeneratorSpec gspec;
    gen->add_option("--nodes", gspec.node_count, "node count")->required();
    gen->add_option("--links", gspec.link_count, "link count")->required();
    gen->add_option("--critical", gspec.critical_count, "critical node count");
    gen->add_option("--migration", gspec.migration_count, "migration target count");
    gen->add_option("--compromised", gspec.initial_compromised_count, "initially compromised count");
    gen->add_option("--observable", gspec.observable_fraction, "attacker-observable node fraction");
    gen->add_option("--seed", gspec.seed, "generator seed");
    gen->add_option("--out", out_path, "output file")->required();

    auto* train = app.add_subcommand("train", "train one agent, write checkpoint and curve");
    add_common(train);

    auto* derive = app.add_subcommand("derive-candidates", "derive FP/FN candidate node lists");
    add_common(derive);

    auto* attack_eval = app.add_subcommand("attack-eval", "run attacked trainings and report");
    add_common(attack_eval);

    auto* defend_eval = app.add_subcommand("defend-eval", "run defended trainings and report");
    add_common(defend_eval);

    auto* brute = app.add_subcommand("brute-force", "exhaustive optimum on the deterministic game");
    add_common(brute);
    int depth = -1;
    brute->add_option("--depth", depth, "search depth (defaults to config value)");

    auto* report = app.add_subcommand("report", "regenerate summary.json from runs.csv");
    std::string report_dir;
    report->add_option("--in", report_dir, "results directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            Topology t = generate_topology(gspec);
            spit(out_path, save_topology(t));
            std::cout << "wrote " << out_path << " (" << t.node_count() << " nodes, "
                      << t.link_count() << " links, " << t.observable_nodes.size()
                      << " observable)\n";
        } else if (train->parsed()) {
            ExperimentConfig cfg = load_config(config_path, seed ? &*seed : nullptr, nullptr,
                                               out_path);
            if (cfg.out_dir.empty()) throw std::runtime_error("train: --out or out_dir required");
            TrainResult tr = run_single_training(cfg, cfg.base_seed);
            std::filesystem::create_directories(cfg.out_dir);
            spit(cfg.out_dir + "/checkpoint.json", save_model(tr.best_model));
            spit(cfg.out_dir + "/final_checkpoint.json", save_model(tr.final_model));
            spit(cfg.out_dir + "/curve.csv", curve_csv(tr.curve));
            std::cout << "best eval: return " << tr.best_eval.episode_return << ", preserved "
                      << tr.best_eval.preserved << ", critical "
                      << (tr.best_eval.critical_compromised ? "compromised" : "safe") << "\n";
        } else if (derive->parsed()) {
            ExperimentConfig cfg = load_config(config_path, seed ? &*seed : nullptr, nullptr, "");
            if (!cfg.attack || !cfg.attack->derive)
                throw std::runtime_error("derive-candidates: config needs an attack.derive block");
            Topology topo = experiment_topology(cfg);
            SurrogateView view;
            bool live = cfg.attack->surrogate == AttackBlock::Surrogate::WhiteBox;
            SurrogateResult sr;
            if (!live) {
                TrainConfig tc = cfg.train;
                tc.seed = cfg.base_seed * 31 + 7;
                sr = train_surrogate(topo, cfg.env, cfg.ddqn, tc);
                view = sr.view;
                view.model = &sr.model;
            }
            auto [fp, fn] = derive_candidates(topo, cfg.env, cfg.ddqn, view, live,
                                              cfg.attack->derive->episodes,
                                              cfg.attack->derive->top_fp,
                                              cfg.attack->derive->top_fn, cfg.base_seed);
            nlohmann::json j;
            j["l_fp"] = fp;
            j["l_fn"] = fn;
            std::string text = j.dump(2) + "\n";
            if (!out_path.empty()) spit(out_path, text);
            std::cout << text;
        } else if (attack_eval->parsed() || defend_eval->parsed()) {
            ExperimentConfig cfg = load_config(config_path, seed ? &*seed : nullptr,
                                               runs ? &*runs : nullptr, out_path);
            if (attack_eval->parsed() && !cfg.attack)
                throw std::runtime_error("attack-eval: config has no attack block");
            if (defend_eval->parsed() && !cfg.defence)
                throw std::runtime_error("defend-eval: config has no defence block");
            ExperimentOutput out = run_experiment(cfg);
            print_summary(out.summary);
        } else if (brute->parsed()) {
            ExperimentConfig cfg = load_config(config_path, nullptr, nullptr, "");
            Topology topo = experiment_topology(cfg);
            auto res = brute_force_optimum(topo, cfg.env,
                                           depth > 0 ? depth : cfg.brute_force_depth);
            std::cout << "preserved " << res.preserved << "\n";
            for (const Action& a : res.actions) std::cout << "  " << to_string(a) << "\n";
        } else if (report->parsed()) {
            auto runs_parsed = read_runs_csv(slurp(report_dir + "/runs.csv"));
            auto old = nlohmann::json::parse(slurp(report_dir + "/summary.json"));
            int baseline = old.at("baseline_preserved").get<int>();
            MetricsSummary s = summarize(runs_parsed, baseline);
            write_report(report_dir, runs_parsed, s);
            print_summary(s);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
