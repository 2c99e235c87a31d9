#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "abkd/divergence.hpp"
#include "abkd/error.hpp"
#include "abkd/gradient.hpp"
#include "abkd/nn.hpp"
#include "abkd/prob.hpp"
#include "abkd/rng.hpp"

namespace abkd {

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

struct DatasetSpec {
    std::size_t n_classes = 10;
    std::size_t n_features = 20;
    std::size_t n_train = 2000;
    std::size_t n_test = 1000;
    double cluster_spread = 1.0;
    std::uint64_t seed = 0;
};

struct Sample {
    std::vector<double> x;
    std::size_t label = 0;
};

struct Dataset {
    std::vector<Sample> samples;
    std::size_t n_features = 0;
    std::size_t n_classes = 0;
};

// Gaussian blobs: one mean per class on a sphere of fixed radius 3, isotropic
// per-sample noise with stddev cluster_spread. Class counts balanced within
// one sample; train/test stratified per class. Deterministic by seed.
inline std::pair<Dataset, Dataset> make_blobs(const DatasetSpec& spec) {
    if (spec.n_features < 1) throw ConfigError("dataset needs at least 1 feature");
    if (spec.n_classes < 2) throw ConfigError("dataset needs at least 2 classes");
    if (!(spec.cluster_spread > 0.0)) throw ConfigError("cluster_spread must be positive");
    constexpr double kSphereRadius = 3.0;

    Rng rng(spec.seed);
    std::vector<std::vector<double>> means(spec.n_classes);
    for (auto& mean : means) {
        mean.resize(spec.n_features);
        double norm2 = 0.0;
        for (auto& v : mean) {
            v = rng.normal();
            norm2 += v * v;
        }
        const double scale = kSphereRadius / std::sqrt(std::max(norm2, 1e-300));
        for (auto& v : mean) v *= scale;
    }

    auto per_class = [&](std::size_t total, std::size_t c) {
        return total / spec.n_classes + (c < total % spec.n_classes ? 1 : 0);
    };

    Dataset train{{}, spec.n_features, spec.n_classes};
    Dataset test{{}, spec.n_features, spec.n_classes};
    for (std::size_t c = 0; c < spec.n_classes; ++c) {
        const std::size_t n_tr = per_class(spec.n_train, c);
        const std::size_t n_te = per_class(spec.n_test, c);
        for (std::size_t i = 0; i < n_tr + n_te; ++i) {
            Sample s;
            s.label = c;
            s.x.resize(spec.n_features);
            for (std::size_t d = 0; d < spec.n_features; ++d) {
                s.x[d] = means[c][d] + spec.cluster_spread * rng.normal();
            }
            (i < n_tr ? train : test).samples.push_back(std::move(s));
        }
    }
    return {std::move(train), std::move(test)};
}

// ---------------------------------------------------------------------------
// Training configuration and reports
// ---------------------------------------------------------------------------

struct TrainConfig {
    double alpha = 0.5;
    double beta = 0.5;
    double lambda = 1.0; // KD loss weight; 0 degenerates to plain SFT
    bool use_ce = true;
    double eta = 0.05;
    double temperature = 1.0;
    std::size_t epochs = 50;
    std::size_t batch_size = 64;
    std::uint64_t seed = 0;
    MlpSpec teacher_spec{{20, 64, 64, 10}, Activation::ReLU, 0};
    MlpSpec student_spec{{20, 16, 10}, Activation::ReLU, 0};
    DivergenceSpec divergence = DivergenceSpec::alpha_beta(0.5, 0.5);
    double momentum = 0.0;     // optional, off by default
    double weight_decay = 0.0; // optional, off by default

    void validate() const {
        if (epochs < 1) throw ConfigError("epochs must be >= 1");
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (lambda < 0.0) throw ConfigError("lambda must be non-negative");
        if (!(eta > 0.0)) throw ConfigError("eta must be positive");
        if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
        teacher_spec.validate();
        student_spec.validate();
    }

    // The divergence actually trained with: parametric families pick up the
    // config-level (alpha, beta).
    DivergenceSpec effective_divergence() const {
        DivergenceSpec d = divergence;
        if (d.family == Family::AlphaBeta || d.family == Family::AlphaDiv ||
            d.family == Family::BetaDiv) {
            d.alpha = alpha;
            d.beta = beta;
        }
        return d;
    }

    std::string canonical_string() const {
        std::ostringstream os;
        os.precision(17);
        os << "family=" << to_string(divergence.family) << ";alpha=" << alpha
           << ";beta=" << beta << ";wf=" << divergence.wsd_forward_weight
           << ";wr=" << divergence.wsd_reverse_weight << ";lambda=" << lambda
           << ";use_ce=" << use_ce << ";eta=" << eta << ";T=" << temperature
           << ";epochs=" << epochs << ";batch=" << batch_size << ";seed=" << seed
           << ";momentum=" << momentum << ";decay=" << weight_decay << ";teacher=";
        for (auto s : teacher_spec.layer_sizes) os << s << ",";
        os << to_string(teacher_spec.activation) << "," << teacher_spec.init_seed << ";student=";
        for (auto s : student_spec.layer_sizes) os << s << ",";
        os << to_string(student_spec.activation) << "," << student_spec.init_seed;
        return os.str();
    }

    std::uint64_t config_hash() const {
        // FNV-1a over the canonical string.
        std::uint64_t h = 14695981039346656037ULL;
        for (unsigned char c : canonical_string()) {
            h ^= c;
            h *= 1099511628211ULL;
        }
        return h;
    }
};

struct EpochStats {
    std::size_t epoch = 0;
    double loss = 0.0;
    double ce = 0.0;
    double kd = 0.0;
    double test_accuracy = 0.0;
    double mean_entropy = 0.0;
};

struct RunReport {
    std::vector<EpochStats> epochs;
    double final_accuracy = 0.0;
    double final_entropy = 0.0;
    double wall_time_ms = 0.0;
    std::uint64_t config_hash = 0;
    TrainConfig config;
};

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

// Argmax accuracy (ties broken toward the lowest class index) and mean output
// entropy at the given softmax temperature.
inline std::pair<double, double> evaluate(const MlpParams& params, const Dataset& test,
                                          double temperature = 1.0) {
    if (test.samples.empty()) throw ConfigError("evaluate needs a non-empty test set");
    std::size_t correct = 0;
    double entropy_sum = 0.0;
    for (const auto& s : test.samples) {
        const Logits logits = forward(params, s.x);
        std::size_t best = 0;
        for (std::size_t k = 1; k < logits.size(); ++k) {
            if (logits.values[k] > logits.values[best]) best = k;
        }
        if (best == s.label) ++correct;
        entropy_sum += shannon_entropy(softmax(logits, temperature));
    }
    return {static_cast<double>(correct) / static_cast<double>(test.samples.size()),
            entropy_sum / static_cast<double>(test.samples.size())};
}

// ---------------------------------------------------------------------------
// Training loops
// ---------------------------------------------------------------------------

// Trained parameters plus the per-epoch record behind them.
struct TrainOutcome {
    MlpParams params;
    RunReport report;
};

namespace detail {

// Shared batch SGD loop. When `teacher` is null (or lambda == 0) the KD
// gradient is skipped entirely, which keeps the lambda = 0 trajectory
// bit-identical to plain CE training.
inline TrainOutcome run_training(const MlpParams* teacher, const Dataset& train,
                                 const Dataset& test, const MlpSpec& student_spec,
                                 const TrainConfig& config) {
    config.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const DivergenceSpec div = config.effective_divergence();

    MlpSpec spec = student_spec;
    spec.init_seed = config.seed;
    MlpParams params = init(spec);
    MlpGrads velocity = zero_grads(params); // used only when momentum > 0

    Rng rng = Rng::derive(config.seed, 0xabcdULL);
    std::vector<std::size_t> order(train.samples.size());
    std::iota(order.begin(), order.end(), 0);

    RunReport report;
    report.config = config;
    report.config_hash = config.config_hash();

    const std::size_t n = train.samples.size();
    if (n == 0) throw ConfigError("empty training set");
    const bool kd_active = teacher != nullptr && config.lambda > 0.0;
    const bool kd_report = teacher != nullptr;

    // The teacher is frozen, so its per-sample distributions are constants of
    // the run; compute them once.
    std::vector<Simplex> teacher_probs;
    if (kd_report) {
        teacher_probs.reserve(n);
        for (const auto& s : train.samples) {
            teacher_probs.push_back(softmax(forward(*teacher, s.x), config.temperature));
        }
    }

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        rng.shuffle(order);
        double ce_sum = 0.0;
        double kd_sum = 0.0;

        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t stop = std::min(n, start + config.batch_size);
            MlpGrads batch_grads = zero_grads(params);
            const double inv = 1.0 / static_cast<double>(stop - start);

            for (std::size_t bi = start; bi < stop; ++bi) {
                const Sample& s = train.samples[order[bi]];
                const Logits student_logits = forward(params, s.x);
                const Simplex q = softmax(student_logits, config.temperature);

                std::vector<double> dl(q.size(), 0.0);
                double ce = 0.0;
                if (config.use_ce) {
                    ce = -std::log(q[s.label]);
                    for (std::size_t k = 0; k < q.size(); ++k) {
                        dl[k] = q[k] - (k == s.label ? 1.0 : 0.0);
                    }
                }
                double kd = 0.0;
                if (kd_report) {
                    const Simplex& p = teacher_probs[order[bi]];
                    try {
                        kd = evaluate(div, p, q);
                        if (kd_active) {
                            const auto kd_grad = grad_logits(div, p, q);
                            const double scale = config.lambda / config.temperature;
                            for (std::size_t k = 0; k < q.size(); ++k) dl[k] += scale * kd_grad[k];
                        }
                    } catch (const OverflowError& e) {
                        std::ostringstream os;
                        os << "kd overflow at epoch " << epoch << " batch " << start / config.batch_size
                           << " alpha=" << div.alpha << " beta=" << div.beta << " max_logit="
                           << *std::max_element(student_logits.values.begin(),
                                                student_logits.values.end())
                           << ": " << e.what();
                        throw TrainingError(os.str());
                    }
                }
                ce_sum += ce;
                kd_sum += kd;

                MlpGrads g = backward(params, s.x, dl);
                g.scale(inv);
                batch_grads.accumulate(g);
            }

            if (config.weight_decay > 0.0) {
                for (std::size_t l = 0; l < params.layers.size(); ++l) {
                    for (std::size_t j = 0; j < params.layers[l].weights.size(); ++j) {
                        batch_grads.layers[l].weights[j] +=
                            config.weight_decay * params.layers[l].weights[j];
                    }
                }
            }
            if (config.momentum > 0.0) {
                for (std::size_t l = 0; l < params.layers.size(); ++l) {
                    auto& v = velocity.layers[l];
                    const auto& g = batch_grads.layers[l];
                    for (std::size_t j = 0; j < v.weights.size(); ++j) {
                        v.weights[j] = config.momentum * v.weights[j] + g.weights[j];
                    }
                    for (std::size_t j = 0; j < v.bias.size(); ++j) {
                        v.bias[j] = config.momentum * v.bias[j] + g.bias[j];
                    }
                }
                sgd_update(params, velocity, config.eta);
            } else {
                sgd_update(params, batch_grads, config.eta);
            }
        }

        EpochStats st;
        st.epoch = epoch;
        st.ce = ce_sum / static_cast<double>(n);
        st.kd = kd_sum / static_cast<double>(n);
        st.loss = st.ce + config.lambda * st.kd;
        if (!std::isfinite(st.loss)) {
            throw TrainingError("non-finite loss at epoch " + std::to_string(epoch));
        }
        std::tie(st.test_accuracy, st.mean_entropy) = evaluate(params, test, config.temperature);
        report.epochs.push_back(st);
    }

    report.final_accuracy = report.epochs.back().test_accuracy;
    report.final_entropy = report.epochs.back().mean_entropy;
    report.wall_time_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return TrainOutcome{std::move(params), std::move(report)};
}

} // namespace detail

// CE-only training of the teacher network.
inline TrainOutcome train_teacher(const Dataset& train, const Dataset& test, const MlpSpec& spec,
                                  const TrainConfig& base) {
    TrainConfig cfg = base;
    cfg.lambda = 0.0;
    cfg.use_ce = true;
    return detail::run_training(nullptr, train, test, spec, cfg);
}

// KD training of the student against a frozen teacher. The student should be
// smaller than the teacher; that is logged by callers, not enforced.
inline TrainOutcome distill_student_full(const MlpParams& teacher, const Dataset& train,
                                         const Dataset& test, const TrainConfig& config) {
    return detail::run_training(&teacher, train, test, config.student_spec, config);
}

inline RunReport distill_student(const MlpParams& teacher, const Dataset& train,
                                 const Dataset& test, const TrainConfig& config) {
    return distill_student_full(teacher, train, test, config).report;
}

// ---------------------------------------------------------------------------
// Sweep
// ---------------------------------------------------------------------------

struct SweepPoint {
    double alpha = 0.0;
    double beta = 0.0;
    std::uint64_t seed = 0;
    double final_accuracy = 0.0;
    double final_entropy = 0.0;
    std::string error; // empty on success
    RunReport report;
};

struct SweepSummary {
    double alpha = 0.0;
    double beta = 0.0;
    double mean_accuracy = 0.0;
    double stddev_accuracy = 0.0;
    double mean_entropy = 0.0;
    double stddev_entropy = 0.0;
    std::size_t n_ok = 0;
};

struct SweepResult {
    std::vector<SweepPoint> points;     // grid-major, then seed
    std::vector<SweepSummary> summary;  // one per grid point
};

inline unsigned effective_worker_count(unsigned requested) {
    if (const char* env = std::getenv("ABKD_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<unsigned>(v);
    }
    if (requested >= 1) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

// One run per (grid point x seed). Child run failures are recorded in the
// affected points (accuracy/entropy become NaN) and the sweep continues.
// Runs execute on a worker pool; results merge in grid order regardless of
// completion order, so the output is independent of scheduling.
inline SweepResult sweep(const std::vector<std::pair<double, double>>& grid,
                         const TrainConfig& base, std::size_t n_seeds, const Dataset& train,
                         const Dataset& test, unsigned workers = 0) {
    if (grid.empty()) throw ConfigError("sweep needs a non-empty grid");
    if (n_seeds == 0) throw ConfigError("sweep needs at least one seed");
    workers = effective_worker_count(workers);

    // One teacher per seed, shared across every grid point for that seed.
    std::vector<MlpParams> teachers(n_seeds);
    std::vector<std::string> teacher_errors(n_seeds);
    {
        std::vector<std::thread> pool;
        std::atomic<std::size_t> next{0};
        auto work = [&] {
            for (;;) {
                const std::size_t s = next.fetch_add(1);
                if (s >= n_seeds) return;
                TrainConfig tcfg = base;
                tcfg.seed = base.seed + s;
                try {
                    teachers[s] = train_teacher(train, test, base.teacher_spec, tcfg).params;
                } catch (const std::exception& e) {
                    teacher_errors[s] = std::string("teacher training failed: ") + e.what();
                }
            }
        };
        const unsigned n_workers = std::min<unsigned>(workers, static_cast<unsigned>(n_seeds));
        for (unsigned w = 0; w < n_workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }

    SweepResult result;
    result.points.resize(grid.size() * n_seeds);

    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    const std::size_t total = result.points.size();
    auto work = [&] {
        for (;;) {
            const std::size_t task = next.fetch_add(1);
            if (task >= total) return;
            const std::size_t gi = task / n_seeds;
            const std::size_t si = task % n_seeds;
            SweepPoint& pt = result.points[task];
            pt.alpha = grid[gi].first;
            pt.beta = grid[gi].second;
            pt.seed = base.seed + si;
            TrainConfig cfg = base;
            cfg.alpha = pt.alpha;
            cfg.beta = pt.beta;
            cfg.seed = pt.seed;
            try {
                if (!teacher_errors[si].empty()) throw ConfigError(teacher_errors[si]);
                pt.report = distill_student(teachers[si], train, test, cfg);
                pt.final_accuracy = pt.report.final_accuracy;
                pt.final_entropy = pt.report.final_entropy;
            } catch (const std::exception& e) {
                pt.error = e.what();
                pt.final_accuracy = std::numeric_limits<double>::quiet_NaN();
                pt.final_entropy = std::numeric_limits<double>::quiet_NaN();
            }
        }
    };
    const unsigned n_workers = std::min<unsigned>(workers, static_cast<unsigned>(total));
    for (unsigned w = 0; w < n_workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();

    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
        SweepSummary s;
        s.alpha = grid[gi].first;
        s.beta = grid[gi].second;
        std::vector<double> accs;
        std::vector<double> ents;
        for (std::size_t si = 0; si < n_seeds; ++si) {
            const auto& pt = result.points[gi * n_seeds + si];
            if (pt.error.empty()) {
                accs.push_back(pt.final_accuracy);
                ents.push_back(pt.final_entropy);
            }
        }
        s.n_ok = accs.size();
        auto mean_of = [](const std::vector<double>& v) {
            return v.empty() ? std::numeric_limits<double>::quiet_NaN()
                             : std::accumulate(v.begin(), v.end(), 0.0) /
                                   static_cast<double>(v.size());
        };
        auto stddev_of = [&](const std::vector<double>& v, double m) {
            if (v.size() < 2) return 0.0;
            double acc = 0.0;
            for (double x : v) acc += (x - m) * (x - m);
            return std::sqrt(acc / static_cast<double>(v.size() - 1));
        };
        s.mean_accuracy = mean_of(accs);
        s.stddev_accuracy = stddev_of(accs, s.mean_accuracy);
        s.mean_entropy = mean_of(ents);
        s.stddev_entropy = stddev_of(ents, s.mean_entropy);
        result.summary.push_back(s);
    }
    return result;
}

} // namespace abkd
