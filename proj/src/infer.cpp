#include "jrnet/infer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

namespace jrnet {

namespace {

std::vector<double> augmented(const std::vector<double>& x) {
    std::vector<double> out = x;
    out.push_back(1.0); // bias feature
    return out;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

} // namespace

FeatureScaler FeatureScaler::fit(const std::vector<LabeledExample>& train) {
    if (train.empty()) throw std::runtime_error("cannot fit scaler on empty training set");
    const std::size_t d = train[0].features.size();
    FeatureScaler scaler;
    scaler.means.assign(d, 0.0);
    scaler.sds.assign(d, 0.0);
    for (const auto& ex : train)
        for (std::size_t i = 0; i < d; ++i) scaler.means[i] += ex.features[i];
    for (double& m : scaler.means) m /= train.size();
    for (const auto& ex : train)
        for (std::size_t i = 0; i < d; ++i) {
            double c = ex.features[i] - scaler.means[i];
            scaler.sds[i] += c * c;
        }
    for (double& s : scaler.sds) {
        s = std::sqrt(s / train.size());
        if (s < 1e-12) s = 1.0; // constant feature passes through at 0
    }
    return scaler;
}

std::vector<double> FeatureScaler::apply(const std::vector<double>& x) const {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - means[i]) / sds[i];
    return out;
}

// ---------------------------------------------------------------------------
// linear SVM, dual coordinate descent

double SvmModel::decision(const std::vector<double>& x) const {
    return dot(weights, x) + bias;
}

Valence SvmModel::predict(const std::vector<double>& x) const {
    return decision(x) >= 0.0 ? Valence::positive : Valence::negative;
}

double SvmModel::primal_objective(const std::vector<LabeledExample>& examples) const {
    double reg = 0.5 * (dot(weights, weights) + bias * bias);
    double loss = 0.0;
    for (const auto& ex : examples) {
        double y = ex.label == Valence::positive ? 1.0 : -1.0;
        loss += std::max(0.0, 1.0 - y * decision(ex.features));
    }
    return reg + C * loss;
}

SvmModel train_svm(const std::vector<LabeledExample>& examples, double C, std::uint64_t seed) {
    std::size_t pos = 0, neg = 0;
    for (const auto& ex : examples) (ex.label == Valence::positive ? pos : neg)++;
    if (pos < 2 || neg < 2) throw std::runtime_error("svm needs at least 2 examples per class");
    if (C <= 0) throw std::runtime_error("C must be positive");

    const std::size_t n = examples.size();
    std::vector<std::vector<double>> x(n);
    std::vector<double> y(n), qii(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = augmented(examples[i].features);
        y[i] = examples[i].label == Valence::positive ? 1.0 : -1.0;
        qii[i] = dot(x[i], x[i]);
    }

    const std::size_t dim = x[0].size();
    std::vector<double> w(dim, 0.0), alpha(n, 0.0);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);

    SvmModel model;
    model.C = C;

    auto objectives = [&]() {
        model.bias = w.back();
        model.weights.assign(w.begin(), w.end() - 1);
        double dual = std::accumulate(alpha.begin(), alpha.end(), 0.0) - 0.5 * dot(w, w);
        double primal = model.primal_objective(examples);
        model.duality_gap = primal - dual;
        return std::abs(model.duality_gap) <= 1e-9 * std::max(1.0, std::abs(primal));
    };

    const int max_epochs = 100000;
    double max_violation = 0.0;
    for (int epoch = 0; epoch < max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        max_violation = 0.0;
        for (std::size_t i : order) {
            double g = y[i] * dot(w, x[i]) - 1.0;
            double pg = g;
            if (alpha[i] <= 0.0) pg = std::min(g, 0.0);
            if (alpha[i] >= C) pg = std::max(g, 0.0);
            max_violation = std::max(max_violation, std::abs(pg));
            if (std::abs(pg) > 1e-14) {
                double next = std::clamp(alpha[i] - g / qii[i], 0.0, C);
                double delta = next - alpha[i];
                if (delta != 0.0) {
                    alpha[i] = next;
                    for (std::size_t k = 0; k < dim; ++k) w[k] += delta * y[i] * x[i][k];
                }
            }
        }
        if (max_violation < 1e-12) break;
        if (epoch % 32 == 31 && objectives()) break;
    }

    model.kkt_residual = max_violation;
    for (std::size_t i = 0; i < n; ++i)
        if (alpha[i] > 0) model.support_indices.push_back(static_cast<int>(i));
    objectives();
    return model;
}

// ---------------------------------------------------------------------------
// linear epsilon-SVR, dual coordinate descent over beta = alpha - alpha*

double SvrModel::predict(const std::vector<double>& x) const {
    return dot(weights, x) + bias;
}

double SvrModel::primal_objective(const std::vector<LabeledExample>& examples) const {
    double reg = 0.5 * (dot(weights, weights) + bias * bias);
    double loss = 0.0;
    for (const auto& ex : examples)
        loss += std::max(0.0, std::abs(predict(ex.features) - ex.target) - epsilon_tube);
    return reg + C * loss;
}

SvrModel train_svr(const std::vector<LabeledExample>& examples, double C, double epsilon,
                   std::uint64_t seed) {
    if (examples.size() < 3) throw std::runtime_error("svr needs at least 3 examples");
    if (C <= 0) throw std::runtime_error("C must be positive");
    if (epsilon < 0) throw std::runtime_error("epsilon must be non-negative");

    const std::size_t n = examples.size();
    std::vector<std::vector<double>> x(n);
    std::vector<double> y(n), qii(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = augmented(examples[i].features);
        y[i] = examples[i].target;
        qii[i] = dot(x[i], x[i]);
    }

    const std::size_t dim = x[0].size();
    std::vector<double> w(dim, 0.0), beta(n, 0.0);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);

    SvrModel model;
    model.C = C;
    model.epsilon_tube = epsilon;

    auto objectives = [&]() {
        model.bias = w.back();
        model.weights.assign(w.begin(), w.end() - 1);
        double dual = -0.5 * dot(w, w);
        for (std::size_t i = 0; i < n; ++i) dual += y[i] * beta[i] - epsilon * std::abs(beta[i]);
        double primal = model.primal_objective(examples);
        model.duality_gap = primal - dual;
        return std::abs(model.duality_gap) <= 1e-9 * std::max(1.0, std::abs(primal));
    };

    const int max_epochs = 100000;
    for (int epoch = 0; epoch < max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double max_step = 0.0;
        for (std::size_t i : order) {
            if (qii[i] <= 0) continue;
            double g = dot(w, x[i]) - y[i]; // gradient of the smooth part
            // exact minimization of 0.5 qii z^2 + (g - qii beta_i) z + eps |z|
            double u = qii[i] * beta[i] - g;
            double unclipped = 0.0;
            if (u > epsilon)
                unclipped = (u - epsilon) / qii[i];
            else if (u < -epsilon)
                unclipped = (u + epsilon) / qii[i];
            double next = std::clamp(unclipped, -C, C);
            double delta = next - beta[i];
            if (delta != 0.0) {
                beta[i] = next;
                for (std::size_t k = 0; k < dim; ++k) w[k] += delta * x[i][k];
                max_step = std::max(max_step, std::abs(delta) * std::sqrt(qii[i]));
            }
        }
        if (epoch % 32 == 31 && objectives()) break;
        if (max_step < 1e-14) break;
    }
    objectives();
    return model;
}

// ---------------------------------------------------------------------------

std::vector<double> baseline_correct(const NetworkMetricVector& trial_metrics,
                                     const std::optional<NetworkMetricVector>& resting_metrics,
                                     const std::string& trial_config_hash,
                                     const std::string& resting_config_hash) {
    std::vector<double> out(trial_metrics.values.begin(), trial_metrics.values.end());
    if (!resting_metrics) return out;
    if (trial_config_hash != resting_config_hash)
        throw std::runtime_error("baseline correction config mismatch");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= resting_metrics->values[i];
    return out;
}

double prepare_rating_target(const SignalTrace& rating_trace,
                             const std::vector<const SignalTrace*>& session_ratings) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const SignalTrace* t : session_ratings)
        for (double v : t->channel(0)) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    if (!(hi > lo)) throw std::runtime_error("flat rating across session");

    std::vector<double> norm = rating_trace.channel(0);
    for (double& v : norm) v = (v - lo) / (hi - lo);
    std::sort(norm.begin(), norm.end());
    const std::size_t n = norm.size();
    if (n == 0) throw std::runtime_error("empty rating trace");
    return n % 2 == 1 ? norm[n / 2] : 0.5 * (norm[n / 2 - 1] + norm[n / 2]);
}

ClassMetrics classification_metrics(const std::vector<Valence>& truth,
                                    const std::vector<Valence>& predicted) {
    ClassMetrics m;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        bool t = truth[i] == Valence::positive;
        bool p = predicted[i] == Valence::positive;
        if (t && p) ++m.tp;
        if (!t && p) ++m.fp;
        if (!t && !p) ++m.tn;
        if (t && !p) ++m.fn;
    }
    double total = static_cast<double>(truth.size());
    m.accuracy = total > 0 ? (m.tp + m.tn) / total : 0.0;
    m.precision = (m.tp + m.fp) > 0 ? static_cast<double>(m.tp) / (m.tp + m.fp) : 0.0;
    m.recall = (m.tp + m.fn) > 0 ? static_cast<double>(m.tp) / (m.tp + m.fn) : 0.0;
    m.f1 = (m.precision + m.recall) > 0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                                        : 0.0;
    return m;
}

RegMetrics regression_metrics(const std::vector<double>& truth,
                              const std::vector<double>& predicted) {
    RegMetrics m;
    if (truth.empty()) return m;
    double se = 0.0, ae = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        double e = predicted[i] - truth[i];
        se += e * e;
        ae += std::abs(e);
    }
    m.rmse = std::sqrt(se / truth.size());
    m.mae = ae / truth.size();
    return m;
}

namespace {

std::vector<std::string> subject_folds(const std::vector<LabeledExample>& dataset) {
    std::set<std::string> subjects;
    for (const auto& ex : dataset) {
        if (ex.subject_id.empty()) throw std::runtime_error("example without subject id");
        subjects.insert(ex.subject_id);
    }
    if (subjects.size() < 2) throw std::runtime_error("loso cv needs at least 2 subjects");
    return {subjects.begin(), subjects.end()};
}

double permutation_p_accuracy(const std::vector<Valence>& truth,
                              const std::vector<Valence>& predicted, long permutations,
                              std::mt19937_64& rng) {
    double observed = classification_metrics(truth, predicted).accuracy;
    std::vector<Valence> shuffled = truth;
    long exceed = 0;
    for (long p = 0; p < permutations; ++p) {
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        if (classification_metrics(shuffled, predicted).accuracy >= observed - 1e-15) ++exceed;
    }
    return (1.0 + exceed) / (1.0 + permutations);
}

double permutation_p_rmse(const std::vector<double>& truth, const std::vector<double>& predicted,
                          long permutations, std::mt19937_64& rng) {
    double observed = regression_metrics(truth, predicted).rmse;
    std::vector<double> shuffled = truth;
    long better = 0;
    for (long p = 0; p < permutations; ++p) {
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        if (regression_metrics(shuffled, predicted).rmse <= observed + 1e-15) ++better;
    }
    return (1.0 + better) / (1.0 + permutations);
}

} // namespace

CvReport loso_cv(const std::vector<LabeledExample>& dataset, Task task, const CvOptions& opt) {
    auto subjects = subject_folds(dataset);

    CvReport report;
    report.task = task;
    report.n_folds = subjects.size();

    for (const std::string& held_out : subjects) {
        std::vector<LabeledExample> train, test;
        for (const auto& ex : dataset)
            (ex.subject_id == held_out ? test : train).push_back(ex);
        if (test.empty()) throw std::runtime_error("subject with no trials: " + held_out);

        FeatureScaler scaler = FeatureScaler::fit(train);
        std::vector<LabeledExample> train_std = train;
        for (auto& ex : train_std) ex.features = scaler.apply(ex.features);

        if (task == Task::classify) {
            SvmModel model = train_svm(train_std, opt.svm_c, opt.seed);
            std::vector<Valence> truth, pred;
            for (const auto& ex : test) {
                truth.push_back(ex.label);
                pred.push_back(model.predict(scaler.apply(ex.features)));
            }
            report.fold_class.push_back(classification_metrics(truth, pred));
            report.truth_labels.insert(report.truth_labels.end(), truth.begin(), truth.end());
            report.predicted_labels.insert(report.predicted_labels.end(), pred.begin(), pred.end());
        } else {
            SvrModel model = train_svr(train_std, opt.svr_c, opt.svr_epsilon, opt.seed);
            std::vector<double> truth, pred;
            for (const auto& ex : test) {
                truth.push_back(ex.target);
                pred.push_back(model.predict(scaler.apply(ex.features)));
            }
            report.fold_reg.push_back(regression_metrics(truth, pred));
            report.truth_targets.insert(report.truth_targets.end(), truth.begin(), truth.end());
            report.predicted_targets.insert(report.predicted_targets.end(), pred.begin(), pred.end());
        }
    }

    std::mt19937_64 rng(opt.seed ^ 0x9e3779b97f4a7c15ull);
    if (task == Task::classify) {
        report.pooled_class = classification_metrics(report.truth_labels, report.predicted_labels);
        report.p_value =
            permutation_p_accuracy(report.truth_labels, report.predicted_labels, opt.permutations, rng);
    } else {
        report.pooled_reg = regression_metrics(report.truth_targets, report.predicted_targets);
        report.p_value =
            permutation_p_rmse(report.truth_targets, report.predicted_targets, opt.permutations, rng);
    }
    return report;
}

CvReport random_baselines(const std::vector<LabeledExample>& dataset, Task task,
                          const CvOptions& opt) {
    auto subjects = subject_folds(dataset);

    CvReport report;
    report.task = task;
    report.n_folds = subjects.size();
    std::mt19937_64 rng(opt.seed ^ 0xc2b2ae3d27d4eb4full);

    const long draws = std::max<long>(1, opt.permutations);
    if (task == Task::classify) {
        // expected metrics of a uniform guesser, averaged over many draws
        std::vector<Valence> truth;
        for (const auto& ex : dataset) truth.push_back(ex.label);
        long tp = 0, fp = 0, tn = 0, fn = 0;
        double acc_sum = 0.0;
        std::vector<Valence> pred(truth.size());
        std::vector<Valence> representative;
        for (long d = 0; d < draws; ++d) {
            for (auto& p : pred)
                p = (rng() & 1) ? Valence::positive : Valence::negative;
            if (d == 0) representative = pred;
            ClassMetrics m = classification_metrics(truth, pred);
            acc_sum += m.accuracy;
            tp += m.tp;
            fp += m.fp;
            tn += m.tn;
            fn += m.fn;
        }
        ClassMetrics m;
        m.tp = tp;
        m.fp = fp;
        m.tn = tn;
        m.fn = fn;
        m.accuracy = acc_sum / draws;
        m.precision = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
        m.recall = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
        m.f1 = (m.precision + m.recall) > 0
                   ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                   : 0.0;
        report.pooled_class = m;
        report.truth_labels = truth;
        report.predicted_labels = representative;
        report.p_value = permutation_p_accuracy(truth, representative, opt.permutations, rng);
    } else {
        // per fold: predictions drawn from a normal fit of the training targets
        std::vector<double> truth_all;
        double se = 0.0, ae = 0.0;
        long count = 0;
        std::vector<double> representative;
        for (const std::string& held_out : subjects) {
            std::vector<double> train_y, test_y;
            for (const auto& ex : dataset)
                (ex.subject_id == held_out ? test_y : train_y).push_back(ex.target);
            double mu = std::accumulate(train_y.begin(), train_y.end(), 0.0) /
                        std::max<std::size_t>(1, train_y.size());
            double var = 0.0;
            for (double v : train_y) var += (v - mu) * (v - mu);
            double sd = train_y.size() > 1 ? std::sqrt(var / train_y.size()) : 0.0;
            std::normal_distribution<double> dist(mu, std::max(sd, 1e-12));
            for (double y : test_y) {
                truth_all.push_back(y);
                double first = 0.0;
                for (long d = 0; d < draws; ++d) {
                    double yhat = dist(rng);
                    if (d == 0) first = yhat;
                    se += (yhat - y) * (yhat - y);
                    ae += std::abs(yhat - y);
                    ++count;
                }
                representative.push_back(first);
            }
        }
        report.pooled_reg.rmse = std::sqrt(se / std::max<long>(1, count));
        report.pooled_reg.mae = ae / std::max<long>(1, count);
        report.truth_targets = truth_all;
        report.predicted_targets = representative;
        report.p_value = permutation_p_rmse(truth_all, representative, opt.permutations, rng);
    }
    return report;
}

} // namespace jrnet
