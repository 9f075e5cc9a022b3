// jrnet: multimodal affect decoding via joint recurrence networks.
//
// Subcommands cover the pipeline stages (synth -> run/featurize/facefit/
// recur/metrics/train/report). Exit codes: 0 success, 1 config or usage
// error, 2..9 one code per failed stage.

#include "jrnet/pipeline.hpp"
#include "jrnet/study.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <map>

namespace {

int stage_exit_code(const std::string& stage) {
    static const std::map<std::string, int> codes = {
        {"ingest", 2}, {"filter", 3},  {"facefit", 4}, {"featurize", 5},
        {"recur", 6},  {"metrics", 7}, {"train", 8},   {"report", 9},
    };
    auto it = codes.find(stage);
    return it == codes.end() ? 1 : it->second;
}

jrnet::Config load_raw_config(const std::string& path) {
    if (path.empty()) return jrnet::Config();
    return jrnet::Config::parse_file(path);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"multimodal affect decoding via joint recurrence networks"};
    app.require_subcommand(1);

    std::string config_path;
    long seed_override = -1;
    int jobs = 1;
    app.add_option("--config", config_path, "pipeline config file (key = value lines)");
    app.add_option("--seed", seed_override, "override the config seed");
    app.add_option("--jobs", jobs, "worker threads (reserved; stages currently run serially)");

    std::string data_root, out_dir;

    auto* synth = app.add_subcommand("synth", "generate a synthetic study with ground truth");
    synth->add_option("--out", data_root, "output data directory")->required();

    auto* run = app.add_subcommand("run", "full pipeline: filter .. report");
    run->add_option("--data", data_root, "study or session directory")->required();
    run->add_option("--out", out_dir, "artifact directory")->required();

    auto add_stage_cmd = [&](const char* name, const char* desc, bool needs_data) {
        auto* cmd = app.add_subcommand(name, desc);
        if (needs_data) cmd->add_option("--data", data_root, "study or session directory")->required();
        cmd->add_option("--out", out_dir, "artifact directory")->required();
        return cmd;
    };
    auto* filter_cmd = add_stage_cmd("filter", "signal-specific preprocessing", true);
    auto* facefit_cmd = add_stage_cmd("facefit", "landmark fitting: pose + expression features", true);
    auto* featurize_cmd = add_stage_cmd("featurize", "aligned windowed feature extraction", true);
    auto* recur_cmd = add_stage_cmd("recur", "recurrence plots and joint recurrence plots", false);
    auto* metrics_cmd = add_stage_cmd("metrics", "recurrence-network metric vectors", true);
    auto* train_cmd = add_stage_cmd("train", "fit fusion models on the full dataset", false);
    auto* report_cmd = add_stage_cmd("report", "leave-one-subject-out result tables", false);

    CLI11_PARSE(app, argc, argv);

    try {
        jrnet::Config raw = load_raw_config(config_path);
        if (seed_override >= 0) raw.set_int("seed", seed_override);
        jrnet::PipelineConfig config = jrnet::PipelineConfig::from_config(raw);
        (void)jobs;

        if (synth->parsed()) {
            jrnet::StudyParams params = jrnet::study_params_from_config(raw);
            jrnet::write_study(data_root, params, config.seed);
            std::printf("wrote synthetic study (%d subjects) to %s\n", params.subjects,
                        data_root.c_str());
            return 0;
        }
        if (run->parsed()) {
            jrnet::run_pipeline(config, data_root, out_dir);
            std::printf("pipeline artifacts in %s\n", out_dir.c_str());
            return 0;
        }
        if (filter_cmd->parsed()) jrnet::stage_filter(config, data_root, out_dir);
        if (facefit_cmd->parsed()) jrnet::stage_facefit(config, data_root, out_dir);
        if (featurize_cmd->parsed()) jrnet::stage_featurize(config, data_root, out_dir);
        if (recur_cmd->parsed()) jrnet::stage_recur(config, out_dir);
        if (metrics_cmd->parsed()) jrnet::stage_metrics(config, data_root, out_dir);
        if (train_cmd->parsed()) jrnet::stage_train(config, out_dir);
        if (report_cmd->parsed()) jrnet::stage_report(config, out_dir);
        return 0;
    } catch (const jrnet::StageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return stage_exit_code(e.stage);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
