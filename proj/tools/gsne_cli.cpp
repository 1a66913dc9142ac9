#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gsne/config.hpp"
#include "gsne/csv.hpp"
#include "gsne/dataprep.hpp"
#include "gsne/errors.hpp"
#include "gsne/eval.hpp"
#include "gsne/objective.hpp"
#include "gsne/trainer.hpp"

namespace {

using namespace gsne;

struct common_opts {
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, common_opts& c) {
    cmd->add_option("--config", c.config_path, "Config file of key = value lines");
    cmd->add_option("--set", c.overrides,
                    "Override a single config key as key=value (repeatable)");
    cmd->add_option("--seed", c.seed, "Random seed (overrides the config value)");
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

run_config resolve_config(const common_opts& c) {
    run_config cfg;
    if (!c.config_path.empty()) load_config_file(c.config_path, cfg);
    for (const auto& kv : c.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            throw config_error("--set expects key=value, got '" + kv + "'");
        }
        apply_config_entry(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)), cfg);
    }
    if (c.seed) cfg.seed = *c.seed;
    cfg.validate();
    return cfg;
}

std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> out;
    size_t at = 0;
    while (at <= csv.size()) {
        const auto comma = csv.find(',', at);
        const std::string item =
            trim(csv.substr(at, comma == std::string::npos ? comma : comma - at));
        if (!item.empty()) out.push_back(item);
        if (comma == std::string::npos) break;
        at = comma + 1;
    }
    return out;
}

dataset_bundle dataset_from_dir(const std::string& data_dir, const run_config& cfg) {
    return build_dataset(ingest(data_dir), cfg);
}

std::string checkpoint_path(const std::string& ckpt) {
    if (std::filesystem::is_directory(ckpt)) return ckpt + "/checkpoint.bin";
    return ckpt;
}

int cmd_gen_synth(const common_opts& common, const std::string& out_dir,
                  const std::optional<int>& houses, const std::optional<int>& regions,
                  const std::optional<int>& schools, const std::optional<int>& stations) {
    run_config cfg = resolve_config(common);
    if (houses) cfg.synth_houses = *houses;
    if (regions) cfg.synth_regions = *regions;
    if (schools) cfg.synth_schools = *schools;
    if (stations) cfg.synth_stations = *stations;
    cfg.validate();
    gen_synthetic_city(make_synth_config(cfg), out_dir);
    std::printf("wrote synthetic city (%d houses, %d regions, %d schools, %d stations) to %s\n",
                cfg.synth_houses, cfg.synth_regions, cfg.synth_schools, cfg.synth_stations,
                out_dir.c_str());
    return 0;
}

int cmd_build_graph(const common_opts& common, const std::string& data_dir,
                    const std::string& out_path) {
    const run_config cfg = resolve_config(common);
    const dataset_bundle ds = dataset_from_dir(data_dir, cfg);
    save_dataset(ds, out_path);
    std::printf("wrote dataset bundle: %d nodes, %lld edges, %zu test houses -> %s\n",
                ds.graph.total_nodes(), static_cast<long long>(ds.graph.total_edges()),
                ds.test_ids.size(), out_path.c_str());
    return 0;
}

int cmd_train(const common_opts& common, const std::string& graph_path,
              const std::string& out_dir, const std::optional<long long>& iters,
              const std::optional<std::string>& proximity, bool resume) {
    run_config cfg = resolve_config(common);
    if (iters) cfg.iterations = *iters;
    if (proximity) cfg.proximity = *proximity;
    cfg.validate();

    const dataset_bundle ds = load_dataset(graph_path);
    std::filesystem::create_directories(out_dir);
    const std::string ckpt = out_dir + "/checkpoint.bin";

    train_state state =
        resume ? load_checkpoint(ckpt) : init_training(ds.graph, make_train_config(cfg));
    state.cfg.iterations = cfg.iterations; // stored target reflects this run
    train(state, ds.graph, cfg.iterations, out_dir);
    save_checkpoint(state, ckpt);
    write_loss_history(state, ds.graph, out_dir + "/loss_first.csv",
                       out_dir + "/loss_second.csv");
    std::printf("trained to iteration %lld; checkpoint at %s\n",
                static_cast<long long>(state.iteration), ckpt.c_str());
    return 0;
}

int cmd_export(const common_opts& common, const std::string& ckpt,
               const std::string& graph_path, const std::string& out_path) {
    resolve_config(common); // honors --config/--set/--seed validation
    const dataset_bundle ds = load_dataset(graph_path);
    const train_state state = load_checkpoint(checkpoint_path(ckpt));
    export_embeddings(state, ds.graph, &ds.test_attrs, &ds.test_ids, out_path);
    std::printf("exported embeddings for %d nodes plus %zu test houses -> %s\n",
                ds.graph.total_nodes(), ds.test_ids.size(), out_path.c_str());
    return 0;
}

int cmd_eval(const common_opts& common, const std::string& data_dir,
             const std::string& emb_path, const std::string& regressors_csv,
             const std::string& sets_csv, const std::string& report_dir, bool bootstrap) {
    const run_config cfg = resolve_config(common);
    const dataset_bundle ds = dataset_from_dir(data_dir, cfg);
    const embedding_table table = load_embeddings(emb_path);
    const house_embeddings emb = join_embeddings(table, ds, cfg.embed_dim);
    const feature_bundle fb = make_feature_bundle(ds, emb, cfg.embed_use_variance);
    const eval_config ec = make_eval_config(cfg);

    std::vector<std::string> sets = split_list(sets_csv);
    if (sets.empty()) {
        if (emb.has_second()) {
            sets = {"raw", "raw+gsne_1st", "raw+gsne_2nd", "raw+gsne_both", "gsne_only"};
        } else {
            sets = {"raw", "raw+gsne_1st", "gsne_only"};
        }
    }
    const std::vector<std::string> regressors = split_list(regressors_csv);
    if (regressors.empty()) throw config_error("--regressors must name at least one model");

    eval_report rep;
    rep.rows = evaluate(fb, sets, regressors, ec);
    if (bootstrap) {
        std::vector<std::string> ci_sets{"raw"};
        if (emb.has_second()) {
            ci_sets.push_back("raw+gsne_both");
        } else {
            ci_sets.push_back("raw+gsne_1st");
        }
        for (const auto& set : ci_sets) {
            rep.cis.push_back(bootstrap_ci(fb, set, "gbt", ec, cfg.bootstrap_replicates,
                                           cfg.bootstrap_level, cfg.train_fraction,
                                           cfg.seed));
        }
    }
    write_report(rep, report_dir);
    std::fputs(render_report_text(rep).c_str(), stdout);
    std::printf("report files written to %s\n", report_dir.c_str());
    return 0;
}

int cmd_ablate(const common_opts& common, const std::string& data_dir,
               const std::string& report_dir, const std::optional<long long>& iters) {
    run_config cfg = resolve_config(common);
    if (iters) cfg.iterations = *iters;
    cfg.validate();
    const dataset_bundle ds = dataset_from_dir(data_dir, cfg);

    eval_report rep;
    rep.ablation = poi_ablation(ds, cfg);
    write_report(rep, report_dir);
    std::fputs(render_report_text(rep).c_str(), stdout);
    std::printf("report files written to %s\n", report_dir.c_str());
    return 0;
}

int cmd_gradcheck(const common_opts& common, double step) {
    const run_config cfg = resolve_config(common);
    const gradcheck_report rep = run_gradient_check(cfg.seed, step);
    std::printf("max relative error %.3e over %d parameters\n", rep.max_rel_err,
                rep.params_checked);
    if (!(rep.max_rel_err < 1e-4)) {
        throw numeric_error("gradient check failed: max relative error " +
                            std::to_string(rep.max_rel_err) + " is not below 1e-4");
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Geo-spatial Gaussian node embeddings for house price prediction"};
    app.require_subcommand(1);

    common_opts common;

    auto* gen = app.add_subcommand("gen-synth", "Generate a synthetic city dataset");
    std::string gen_out;
    std::optional<int> gen_houses, gen_regions, gen_schools, gen_stations;
    gen->add_option("--out", gen_out, "Output directory")->required();
    gen->add_option("--houses", gen_houses, "House count (default from config)");
    gen->add_option("--regions", gen_regions, "Region count (default from config)");
    gen->add_option("--schools", gen_schools, "School count (default from config)");
    gen->add_option("--stations", gen_stations, "Station count (default from config)");
    add_common(gen, common);

    auto* build = app.add_subcommand("build-graph",
                                     "Ingest CSV tables and build the dataset bundle");
    std::string build_data, build_out;
    build->add_option("--data", build_data, "Data directory with schema.json and CSVs")
        ->required();
    build->add_option("--out", build_out, "Output bundle path (e.g. graph.bin)")->required();
    add_common(build, common);

    auto* train_cmd = app.add_subcommand("train", "Train gaussian embeddings on a bundle");
    std::string train_graph, train_out;
    std::optional<long long> train_iters;
    std::optional<std::string> train_prox;
    bool train_resume = false;
    train_cmd->add_option("--graph", train_graph, "Dataset bundle from build-graph")
        ->required();
    train_cmd->add_option("--out", train_out, "Checkpoint/report directory")->required();
    train_cmd->add_option("--iters", train_iters, "Target iteration count");
    train_cmd->add_option("--proximity", train_prox, "first | second | both");
    train_cmd->add_flag("--resume", train_resume, "Continue from the checkpoint in --out");
    add_common(train_cmd, common);

    auto* exp = app.add_subcommand("export", "Export embeddings for all nodes + test houses");
    std::string exp_ckpt, exp_graph, exp_out;
    exp->add_option("--ckpt", exp_ckpt, "Checkpoint file or its directory")->required();
    exp->add_option("--graph", exp_graph, "Dataset bundle from build-graph")->required();
    exp->add_option("--out", exp_out, "Output CSV path")->required();
    add_common(exp, common);

    auto* eval_cmd = app.add_subcommand("eval", "Evaluate regressors on raw vs embeddings");
    std::string eval_data, eval_emb, eval_report_dir;
    std::string eval_regressors = "ridge,krr,gbt";
    std::string eval_sets;
    bool eval_bootstrap = false;
    eval_cmd->add_option("--data", eval_data, "Data directory")->required();
    eval_cmd->add_option("--emb", eval_emb, "Embedding CSV from export")->required();
    eval_cmd->add_option("--regressors", eval_regressors, "Comma list: ridge,krr,gbt")
        ->capture_default_str();
    eval_cmd->add_option("--sets", eval_sets,
                         "Comma list of feature sets (default: all available)");
    eval_cmd->add_option("--report", eval_report_dir, "Report output directory")->required();
    eval_cmd->add_flag("--bootstrap", eval_bootstrap,
                       "Also compute bootstrap confidence intervals (gbt)");
    add_common(eval_cmd, common);

    auto* ablate = app.add_subcommand("ablate", "Retrain per POI edge set and compare");
    std::string ablate_data, ablate_report;
    std::optional<long long> ablate_iters;
    ablate->add_option("--data", ablate_data, "Data directory")->required();
    ablate->add_option("--report", ablate_report, "Report output directory")->required();
    ablate->add_option("--iters", ablate_iters, "Training iterations per ablation run");
    add_common(ablate, common);

    auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient verification");
    bool grad_toy = false;
    double grad_step = 1e-4;
    grad->add_flag("--toy", grad_toy, "Run the toy-graph check (the only mode)");
    grad->add_option("--step", grad_step, "Central difference step")->capture_default_str();
    add_common(grad, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "ERROR 1: %s\n", e.what());
        return 1;
    }

    try {
        if (gen->parsed()) {
            return cmd_gen_synth(common, gen_out, gen_houses, gen_regions, gen_schools,
                                 gen_stations);
        }
        if (build->parsed()) return cmd_build_graph(common, build_data, build_out);
        if (train_cmd->parsed()) {
            return cmd_train(common, train_graph, train_out, train_iters, train_prox,
                             train_resume);
        }
        if (exp->parsed()) return cmd_export(common, exp_ckpt, exp_graph, exp_out);
        if (eval_cmd->parsed()) {
            return cmd_eval(common, eval_data, eval_emb, eval_regressors, eval_sets,
                            eval_report_dir, eval_bootstrap);
        }
        if (ablate->parsed()) return cmd_ablate(common, ablate_data, ablate_report,
                                                ablate_iters);
        if (grad->parsed()) return cmd_gradcheck(common, grad_step);
        std::fprintf(stderr, "ERROR 1: no subcommand selected\n");
        return 1;
    } catch (const gsne_error& e) {
        std::fprintf(stderr, "ERROR %d: %s\n", static_cast<int>(e.cls()), e.what());
        return static_cast<int>(e.cls());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "ERROR 3: internal failure: %s\n", e.what());
        return 3;
    }
}
