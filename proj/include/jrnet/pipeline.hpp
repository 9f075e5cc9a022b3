#pragma once

#include "jrnet/config.hpp"
#include "jrnet/face.hpp"
#include "jrnet/filters.hpp"
#include "jrnet/infer.hpp"
#include "jrnet/ingest.hpp"
#include "jrnet/netmetrics.hpp"
#include "jrnet/physio.hpp"
#include "jrnet/recurrence.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace jrnet {

/// Fully validated pipeline parameters. Unknown config keys are rejected;
/// the canonical serialization (and its hash) goes into every output.
struct PipelineConfig {
    std::uint64_t seed = 1234;

    // filters (the ECG bandpass comes from an imported SOS file or the
    // bundled elliptic coefficients when unset)
    std::string ecg_sos_file;
    double eda_cutoff_hz = 1.0;
    int eda_order = 2;
    double resp_cutoff_hz = 20.0;
    int resp_order = 4;

    WindowPlan window_plan;

    // embedding / recurrence
    int embed_m = 3;
    int embed_tau = 1;
    double recurrence_rate_target = 0.10;
    bool standardize = true;

    NodeMetricsOptions net;

    // inference
    double svm_c = 1.0;
    double svr_c = 1.0;
    double svr_epsilon = 0.05;
    long permutations = 10000;
    bool baseline_correction = true;

    // face fitting
    FitOptions fit;
    double residual_reject_factor = 3.0;
    double gap_fill_max_s = 0.5;
    std::string face_model_file;

    static PipelineConfig from_config(const Config& raw);
    Config to_config() const;
    std::string hash() const { return to_config().hash(); }

    BiquadCascade ecg_filter(double sample_rate_hz) const;
    BiquadCascade eda_filter(double sample_rate_hz) const;
    BiquadCascade resp_filter(double sample_rate_hz) const;
    ShapeModel shape_model() const;
};

/// The bundled ECG bandpass (elliptic 5-45 Hz at 1000 Hz); also shipped as
/// data/elliptic_ecg_5_45_fs1000.sos.
BiquadCascade builtin_ecg_bandpass();

/// Errors thrown by pipeline stages, tagged for CLI exit codes.
struct StageError : std::runtime_error {
    std::string stage;
    StageError(std::string stage_name, const std::string& what)
        : std::runtime_error(stage_name + ": " + what), stage(std::move(stage_name)) {}
};

// --------------------------------------------------------------------------
// per-trial processing shared by the disk pipeline and in-memory studies

/// Per-frame pose + face features for a landmark trace: fit, reject frames
/// whose residual exceeds reject_factor x the trace median, gap-fill up to
/// gap_fill_max_s by linear interpolation, NaN out longer gaps.
struct LandmarkFitTrace {
    SignalTrace face_feats;  // 6 channels
    SignalTrace head_feats;  // 6 channels
    std::vector<double> residuals_px;
    std::size_t rejected_frames = 0;
};
LandmarkFitTrace fit_landmark_trace(const SignalTrace& landmarks, const ShapeModel& model,
                                    const PipelineConfig& config);

struct TrialMetrics {
    NetworkMetricVector fusion;
    std::map<Modality, NetworkMetricVector> single;
};

/// filter -> facefit -> windowize for one set of traces.
WindowedTrial process_traces(const std::map<Modality, SignalTrace>& physio,
                             const SignalTrace& landmarks, const ShapeModel& model,
                             const PipelineConfig& config);
WindowedTrial process_traces(const std::map<Modality, SignalTrace>& physio,
                             const SignalTrace& landmarks, const ShapeModel& model,
                             const PipelineConfig& config, const WindowPlan& plan);

/// Resting recordings are short; they only need enough windows for the
/// embedding to leave a usable network.
WindowPlan resting_window_plan(const PipelineConfig& config);

/// windows -> per-modality recurrence plots -> joint plot -> metric vectors.
TrialMetrics metrics_from_windows(const WindowedTrial& windows, const PipelineConfig& config);

struct TrialResult {
    std::string subject_id, trial_id;
    Valence valence = Valence::positive;
    double rating_target = 0.0;
    TrialMetrics metrics;
    std::optional<TrialMetrics> resting;
};

/// Full in-memory evaluation of one session (all trials + shared resting).
std::vector<TrialResult> evaluate_session(const Session& session, const PipelineConfig& config);

/// Feature sets reported in the result tables.
enum class FeatureSet { ecg, eda, resp, face, head, facial, physio, fusion };
std::string to_string(FeatureSet set);

std::vector<LabeledExample> make_examples(const std::vector<TrialResult>& results, FeatureSet set,
                                          bool baseline_correct);

// --------------------------------------------------------------------------
// disk pipeline

/// Runs ingest -> filter -> facefit -> featurize -> recur -> metrics ->
/// report with per-stage caching keyed by config + upstream hashes.
/// Returns the artifact directory. Deterministic given the config seed.
std::filesystem::path run_pipeline(const PipelineConfig& config,
                                   const std::filesystem::path& data_root,
                                   const std::filesystem::path& out_dir);

/// Individual stages (used by the CLI subcommands); each consults its
/// cache marker and recomputes only when inputs or config changed.
void stage_filter(const PipelineConfig&, const std::filesystem::path& data_root,
                  const std::filesystem::path& out_dir);
void stage_facefit(const PipelineConfig&, const std::filesystem::path& data_root,
                   const std::filesystem::path& out_dir);
void stage_featurize(const PipelineConfig&, const std::filesystem::path& data_root,
                     const std::filesystem::path& out_dir);
void stage_recur(const PipelineConfig&, const std::filesystem::path& out_dir);
void stage_metrics(const PipelineConfig&, const std::filesystem::path& data_root,
                   const std::filesystem::path& out_dir);
void stage_train(const PipelineConfig&, const std::filesystem::path& out_dir);
void stage_report(const PipelineConfig&, const std::filesystem::path& out_dir);

/// Portable graymap export: black = recurrent, row 0 = time 0.
void emit_rp_image(const BinaryMatrix& matrix, const std::filesystem::path& path);

/// Sparse upper-triangle index list with a metadata header.
void write_rp_sparse(const BinaryMatrix& matrix, const std::filesystem::path& path,
                     const Config& meta);
BinaryMatrix read_rp_sparse(const std::filesystem::path& path);

} // namespace jrnet
