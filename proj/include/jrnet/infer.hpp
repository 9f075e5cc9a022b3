#pragma once

#include "jrnet/netmetrics.hpp"
#include "jrnet/signal.hpp"
#include "jrnet/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace jrnet {

struct LabeledExample {
    std::vector<double> features;
    Valence label = Valence::positive; // classification target
    double target = 0.0;               // regression target in [0, 1]
    std::string subject_id;
    std::string trial_id;
};

/// Per-feature standardization fitted on training data only.
struct FeatureScaler {
    std::vector<double> means;
    std::vector<double> sds;

    static FeatureScaler fit(const std::vector<LabeledExample>& train);
    std::vector<double> apply(const std::vector<double>& x) const;
};

struct SvmModel {
    std::vector<double> weights;
    double bias = 0.0;
    double C = 1.0;
    std::vector<int> support_indices;
    double duality_gap = 0.0;
    double kkt_residual = 0.0;

    double decision(const std::vector<double>& x) const;
    Valence predict(const std::vector<double>& x) const;
    /// 0.5 |w|^2 + C sum hinge  (bias included in w).
    double primal_objective(const std::vector<LabeledExample>& examples) const;
};

/// Soft-margin linear SVM trained by dual coordinate descent; the bias is
/// carried as an augmented constant feature.
SvmModel train_svm(const std::vector<LabeledExample>& examples, double C,
                   std::uint64_t seed = 0x5eed);

struct SvrModel {
    std::vector<double> weights;
    double bias = 0.0;
    double C = 1.0;
    double epsilon_tube = 0.0;
    double duality_gap = 0.0;

    double predict(const std::vector<double>& x) const;
    double primal_objective(const std::vector<LabeledExample>& examples) const;
};

/// Linear epsilon-insensitive SVR with an L2 penalty, trained by dual
/// coordinate descent over beta = alpha - alpha*.
SvrModel train_svr(const std::vector<LabeledExample>& examples, double C, double epsilon,
                   std::uint64_t seed = 0x5eed);

/// Elementwise trial - resting difference; pass-through (flagged) when no
/// resting metrics exist. Throws if the pipeline config hashes differ.
std::vector<double> baseline_correct(const NetworkMetricVector& trial_metrics,
                                     const std::optional<NetworkMetricVector>& resting_metrics,
                                     const std::string& trial_config_hash,
                                     const std::string& resting_config_hash);

/// Per-subject min-max normalization of all rating samples in the session,
/// then the median of the trial's normalized samples.
double prepare_rating_target(const SignalTrace& rating_trace,
                             const std::vector<const SignalTrace*>& session_ratings);

struct ClassMetrics {
    double accuracy = 0.0, f1 = 0.0, precision = 0.0, recall = 0.0;
    long tp = 0, fp = 0, tn = 0, fn = 0;
};

struct RegMetrics {
    double rmse = 0.0, mae = 0.0;
};

ClassMetrics classification_metrics(const std::vector<Valence>& truth,
                                    const std::vector<Valence>& predicted);
RegMetrics regression_metrics(const std::vector<double>& truth,
                              const std::vector<double>& predicted);

enum class Task { classify, regress };

struct CvOptions {
    double svm_c = 1.0;
    double svr_c = 1.0;
    double svr_epsilon = 0.05;
    long permutations = 10000;
    std::uint64_t seed = 1234;
};

struct CvReport {
    Task task = Task::classify;
    std::size_t n_folds = 0;
    std::vector<ClassMetrics> fold_class;  // per fold (classification)
    std::vector<RegMetrics> fold_reg;      // per fold (regression)
    ClassMetrics pooled_class;             // pooled over folds
    RegMetrics pooled_reg;
    double p_value = 1.0;                  // vs. the permutation null
    std::string config_hash;
    std::vector<Valence> truth_labels, predicted_labels;
    std::vector<double> truth_targets, predicted_targets;
};

/// Leave-one-subject-out cross-validation. Standardization and model
/// fitting happen inside each training fold only; metrics are pooled over
/// folds; the p-value comes from permuting the pooled truth labels.
CvReport loso_cv(const std::vector<LabeledExample>& dataset, Task task, const CvOptions& options);

/// Chance-level reference: uniform label draws (classification) or draws
/// from the training fold's normal fit (regression), averaged over many
/// repetitions but reported in the same schema.
CvReport random_baselines(const std::vector<LabeledExample>& dataset, Task task,
                          const CvOptions& options);

} // namespace jrnet
