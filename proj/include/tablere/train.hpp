#pragma once

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include "tablere/dataset.hpp"
#include "tablere/embedding.hpp"
#include "tablere/metrics.hpp"
#include "tablere/model.hpp"
#include "tablere/optimizer.hpp"

namespace tablere {

struct TrainConfig {
    ModelSpec spec;
    int epochs = 40;
    std::size_t batch_size = 16;
    OptimizerConfig optimizer;
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};

    void validate() const {
        spec.validate();
        if (epochs < 1) {
            throw ConfigError("train config: epochs must be >= 1");
        }
        if (batch_size < 1) {
            throw ConfigError("train config: batch size must be >= 1");
        }
        if (seeds.empty()) {
            throw ConfigError("train config: at least one seed is required");
        }
        for (std::size_t i = 0; i < seeds.size(); ++i) {
            for (std::size_t j = i + 1; j < seeds.size(); ++j) {
                if (seeds[i] == seeds[j]) {
                    throw ConfigError("train config: duplicate seed " +
                                      std::to_string(seeds[i]));
                }
            }
        }
    }
};

struct EpochLog {
    double train_loss = 0.0;
    double val_accuracy = 0.0;
};

struct SeedRun {
    std::uint64_t seed = 0;
    bool failed = false;
    std::string error;
    Metrics test;
    Metrics validation;
    std::vector<EpochLog> curve;
};

/// Argmax over softmax outputs of the pure forward pass.
inline int predict(const Model& model, const Tensor& x) {
    const Tensor probs = softmax(model.forward_eval(x));
    std::size_t best = 0;
    for (std::size_t j = 1; j < probs.size(); ++j) {
        if (probs[j] > probs[best]) {
            best = j;
        }
    }
    return static_cast<int>(best);
}

/// Evaluates one split partition. Classes absent from the partition get
/// per-class F1 of 0 and are flagged in the returned metrics.
inline Metrics evaluate(const Model& model, const Corpus& corpus,
                        const std::vector<std::uint64_t>& ids, const EmbeddingSource& source) {
    if (ids.empty()) {
        throw UsageError("evaluate: empty partition");
    }
    const auto index = make_id_index(corpus);
    ConfusionMatrix confusion = make_confusion(static_cast<std::size_t>(model.spec.classes));
    for (const std::uint64_t id : ids) {
        const auto it = index.find(id);
        if (it == index.end()) {
            throw DataError("evaluate: sample id " + std::to_string(id) + " not in corpus");
        }
        const EmbeddedSample sample = source.embed_sample(corpus.samples[it->second]);
        if (sample.label < 0 || sample.label >= model.spec.classes) {
            throw DataError("evaluate: sample " + std::to_string(id) + " has label " +
                            std::to_string(sample.label) + " outside the model's " +
                            std::to_string(model.spec.classes) + " classes");
        }
        const int pred = predict(model, sample.matrix);
        confusion[static_cast<std::size_t>(pred)][static_cast<std::size_t>(sample.label)]++;
    }
    Metrics m = metrics_from_confusion(confusion);
    if (std::abs(m.micro_f1 - m.accuracy) > 1e-12) {
        throw NumericError("evaluate: micro-F1 deviates from accuracy, metrics are inconsistent");
    }
    return m;
}

struct TrainedRun {
    Model model;
    SeedRun run;
    SplitPlan plan;
};

/// Trains one seed: deterministic split, mini-batch updates for the
/// configured number of epochs, per-epoch train loss and validation accuracy,
/// final metrics on validation and test partitions. Dropout is active only
/// in training forward passes.
inline TrainedRun train(const TrainConfig& config, const Corpus& corpus,
                        const EmbeddingSource& source, std::uint64_t seed,
                        const SplitPlan* plan_override = nullptr) {
    config.validate();
    if (corpus.samples.empty()) {
        throw UsageError("train: corpus is empty");
    }
    if (source.dim != static_cast<std::size_t>(config.spec.embed_dim)) {
        throw DataError("train: embedding dim " + std::to_string(source.dim) +
                        " does not match model embed_dim " +
                        std::to_string(config.spec.embed_dim));
    }

    TrainedRun out;
    out.plan = plan_override ? *plan_override : split(corpus.ids(), seed);
    if (out.plan.train.empty()) {
        throw UsageError("train: training partition is empty");
    }
    out.run.seed = seed;

    const auto index = make_id_index(corpus);
    out.model = Model::build(config.spec, seed);
    out.model.ensure_grads();
    OptimizerT<float> optimizer(config.optimizer, out.model.parameters());
    Rng dropout_rng(mix_seed(seed, 0xd409u));

    Tape tape;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        double loss_sum = 0.0;
        std::size_t seen = 0;
        const auto epoch_batches =
            batches(out.plan.train, config.batch_size, seed, static_cast<std::uint64_t>(epoch));
        for (std::size_t b = 0; b < epoch_batches.size(); ++b) {
            const auto& batch = epoch_batches[b];
            tape.reset();
            out.model.zero_grads();
            std::vector<Tensor*> logits;
            std::vector<int> labels;
            logits.reserve(batch.size());
            labels.reserve(batch.size());
            for (const std::uint64_t id : batch) {
                EmbeddedSample sample = source.embed_sample(corpus.samples.at(index.at(id)));
                Tensor* x = tape.leaf(std::move(sample.matrix));
                logits.push_back(out.model.forward(tape, x, RunMode::train, dropout_rng));
                labels.push_back(sample.label);
            }
            Tensor* loss = sparse_ce_loss(tape, logits, labels);
            const double batch_loss = static_cast<double>(loss->data[0]);
            if (!std::isfinite(batch_loss)) {
                throw NumericError("train: loss is not finite at epoch " +
                                   std::to_string(epoch) + ", batch " + std::to_string(b) +
                                   " (seed " + std::to_string(seed) + ")");
            }
            tape.backward(loss);
            optimizer.step();
            loss_sum += batch_loss * static_cast<double>(batch.size());
            seen += batch.size();
        }
        EpochLog log;
        log.train_loss = loss_sum / static_cast<double>(seen);
        log.val_accuracy =
            out.plan.validation.empty()
                ? 0.0
                : evaluate(out.model, corpus, out.plan.validation, source).accuracy;
        out.run.curve.push_back(log);
    }

    if (!out.plan.validation.empty()) {
        out.run.validation = evaluate(out.model, corpus, out.plan.validation, source);
    }
    if (!out.plan.test.empty()) {
        out.run.test = evaluate(out.model, corpus, out.plan.test, source);
    }
    return out;
}

struct RunReport {
    std::vector<SeedRun> runs;
    double avg_accuracy = 0.0;
    double avg_macro_f1 = 0.0;
    double avg_micro_f1 = 0.0;
    double avg_weighted_f1 = 0.0;
    std::size_t completed = 0;
    std::size_t best_run_index = 0; // by test accuracy, earlier seed on ties
    bool any_failed = false;
};

namespace detail {

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.15g", v);
    return buf;
}

inline unsigned worker_threads(std::size_t jobs) {
    unsigned n = 0;
    if (const char* env = std::getenv("TABLERE_THREADS")) {
        n = static_cast<unsigned>(std::strtoul(env, nullptr, 10));
    }
    if (n == 0) {
        n = std::thread::hardware_concurrency();
        if (n == 0) {
            n = 1;
        }
    }
    return static_cast<unsigned>(std::min<std::size_t>(n, jobs));
}

} // namespace detail

inline void write_metrics_csv(const std::string& path, const RunReport& report) {
    std::ofstream out(path);
    if (!out) {
        throw DataError("metrics: cannot write '" + path + "'");
    }
    out << "seed,status,accuracy,macro_f1,micro_f1,weighted_f1\n";
    for (const SeedRun& run : report.runs) {
        if (run.failed) {
            out << run.seed << ",failed,,,,\n";
        } else {
            out << run.seed << ",ok," << detail::format_double(run.test.accuracy) << ','
                << detail::format_double(run.test.macro_f1) << ','
                << detail::format_double(run.test.micro_f1) << ','
                << detail::format_double(run.test.weighted_f1) << '\n';
        }
    }
    out << "average,ok," << detail::format_double(report.avg_accuracy) << ','
        << detail::format_double(report.avg_macro_f1) << ','
        << detail::format_double(report.avg_micro_f1) << ','
        << detail::format_double(report.avg_weighted_f1) << '\n';
}

inline void write_loss_curve_csv(const std::string& path, const RunReport& report) {
    std::ofstream out(path);
    if (!out) {
        throw DataError("loss curve: cannot write '" + path + "'");
    }
    out << "seed,epoch,train_loss,val_accuracy\n";
    for (const SeedRun& run : report.runs) {
        for (std::size_t e = 0; e < run.curve.size(); ++e) {
            out << run.seed << ',' << e << ',' << detail::format_double(run.curve[e].train_loss)
                << ',' << detail::format_double(run.curve[e].val_accuracy) << '\n';
        }
    }
}

/// Trains every seed (in parallel up to TABLERE_THREADS workers; runs are
/// fully independent), averages metrics over completed runs, and writes the
/// per-run artifacts when out_dir is nonempty: metrics.csv, loss_curve.csv,
/// confusion.csv/.pgm for the best run, and models/seed_<n>.tbmd.
inline RunReport multi_seed(const TrainConfig& config, const Corpus& corpus,
                            const EmbeddingSource& source, const std::string& out_dir = "") {
    config.validate();
    namespace fs = std::filesystem;
    if (!out_dir.empty()) {
        fs::create_directories(fs::path(out_dir) / "models");
    }

    RunReport report;
    report.runs.assign(config.seeds.size(), SeedRun{});

    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < config.seeds.size(); i = next.fetch_add(1)) {
            const std::uint64_t seed = config.seeds[i];
            try {
                TrainedRun trained = train(config, corpus, source, seed);
                if (!out_dir.empty()) {
                    const fs::path model_path =
                        fs::path(out_dir) / "models" / ("seed_" + std::to_string(seed) + ".tbmd");
                    save_model(trained.model, model_path.string());
                }
                report.runs[i] = std::move(trained.run);
            } catch (const std::exception& e) {
                report.runs[i].seed = seed;
                report.runs[i].failed = true;
                report.runs[i].error = e.what();
            }
        }
    };

    const unsigned n_workers = detail::worker_threads(config.seeds.size());
    if (n_workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_workers);
        for (unsigned w = 0; w < n_workers; ++w) {
            pool.emplace_back(worker);
        }
        for (std::thread& t : pool) {
            t.join();
        }
    }

    bool have_best = false;
    for (std::size_t i = 0; i < report.runs.size(); ++i) {
        const SeedRun& run = report.runs[i];
        if (run.failed) {
            report.any_failed = true;
            continue;
        }
        report.avg_accuracy += run.test.accuracy;
        report.avg_macro_f1 += run.test.macro_f1;
        report.avg_micro_f1 += run.test.micro_f1;
        report.avg_weighted_f1 += run.test.weighted_f1;
        ++report.completed;
        if (!have_best || run.test.accuracy > report.runs[report.best_run_index].test.accuracy) {
            report.best_run_index = i;
            have_best = true;
        }
    }
    if (report.completed > 0) {
        const auto n = static_cast<double>(report.completed);
        report.avg_accuracy /= n;
        report.avg_macro_f1 /= n;
        report.avg_micro_f1 /= n;
        report.avg_weighted_f1 /= n;
    }

    if (!out_dir.empty()) {
        write_metrics_csv((fs::path(out_dir) / "metrics.csv").string(), report);
        write_loss_curve_csv((fs::path(out_dir) / "loss_curve.csv").string(), report);
        if (report.completed > 0) {
            const Metrics& best = report.runs[report.best_run_index].test;
            write_confusion_csv((fs::path(out_dir) / "confusion.csv").string(), best.confusion);
            write_confusion_pgm((fs::path(out_dir) / "confusion.pgm").string(), best.confusion);
        }
    }
    return report;
}

} // namespace tablere
