// tablere: relation extraction on tabular data - command line driver.
//
// Subcommands: ingest, embed-import, synth, train, eval, params, gradcheck.
// Exit codes: 0 success, 2 usage/config, 3 data/format, 4 numeric failure.

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tablere/tablere.hpp"

namespace fs = std::filesystem;
using namespace tablere;

namespace {

std::string with_commas(std::size_t n) {
    std::string raw = std::to_string(n);
    std::string out;
    int digits = 0;
    for (auto it = raw.rbegin(); it != raw.rend(); ++it) {
        if (digits && digits % 3 == 0) {
            out.push_back(',');
        }
        out.push_back(*it);
        ++digits;
    }
    return {out.rbegin(), out.rend()};
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::string cur;
    for (const char c : text + ",") {
        if (c == ',') {
            if (!cur.empty()) {
                seeds.push_back(std::stoull(cur));
                cur.clear();
            }
        } else if (c >= '0' && c <= '9') {
            cur.push_back(c);
        } else {
            throw ConfigError("invalid seed list '" + text + "'");
        }
    }
    if (seeds.empty()) {
        throw ConfigError("seed list is empty");
    }
    return seeds;
}

std::string default_labels_path(const std::string& corpus_path) {
    return (fs::path(corpus_path).parent_path() / "labels.txt").string();
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

struct IngestArgs {
    std::string data_dir;
    std::string vocab;
    std::string out;
};

int cmd_ingest(const IngestArgs& args) {
    const Vocab vocab = Vocab::load(args.vocab);
    const Corpus corpus = build_corpus(args.data_dir, vocab);
    fs::create_directories(args.out);
    write_corpus_cache((fs::path(args.out) / "corpus.tsv").string(), corpus.samples);
    corpus.labels.save((fs::path(args.out) / "labels.txt").string());
    write_stats_csv((fs::path(args.out) / "stats.csv").string(), corpus);
    std::cout << "ingested " << corpus.table_count << " tables, " << corpus.samples.size()
              << " samples, " << corpus.labels.size() << " relations, " << corpus.warnings
              << " warnings\n";
    std::cout << "wrote " << args.out << "/corpus.tsv, labels.txt, stats.csv\n";
    return 0;
}

// ---------------------------------------------------------------------------
// embed-import
// ---------------------------------------------------------------------------

struct EmbedImportArgs {
    std::string file;
    int expect_dim = 0;
};

int cmd_embed_import(const EmbedImportArgs& args) {
    const EmbeddingStore store = EmbeddingStore::load(args.file);
    if (args.expect_dim > 0 && store.dim() != static_cast<std::size_t>(args.expect_dim)) {
        throw DataError("embedding file dim " + std::to_string(store.dim()) +
                        " does not match expected " + std::to_string(args.expect_dim));
    }
    std::size_t min_len = kMaxTokens;
    std::size_t max_len = 0;
    std::size_t values = 0;
    for (const EmbeddingRecordView& r : store.records()) {
        min_len = std::min<std::size_t>(min_len, r.length);
        max_len = std::max<std::size_t>(max_len, r.length);
        values += static_cast<std::size_t>(r.length) * store.dim();
    }
    std::cout << "valid TBRE file: " << store.count() << " records, dim " << store.dim() << "\n";
    if (store.count() > 0) {
        std::cout << "stored lengths " << min_len << ".." << max_len << ", " << values
                  << " float32 values\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// synth: synthetic corpus + table-lookup embeddings, end-to-end demo input
// ---------------------------------------------------------------------------

struct SynthArgs {
    std::string out;
    std::size_t classes = 29;
    std::size_t per_class = 10;
    std::size_t dim = 32;
    std::uint64_t seed = 1;
    std::uint64_t embed_seed = 99;
};

int cmd_synth(const SynthArgs& args) {
    SyntheticSpec spec;
    spec.classes = args.classes;
    spec.per_class = args.per_class;
    spec.seed = args.seed;
    const Corpus corpus = make_synthetic_corpus(spec);
    const TableLookupProvider table(synthetic_vocab_size(args.classes), args.dim,
                                    args.embed_seed);

    fs::create_directories(args.out);
    write_corpus_cache((fs::path(args.out) / "corpus.tsv").string(), corpus.samples);
    corpus.labels.save((fs::path(args.out) / "labels.txt").string());
    write_stats_csv((fs::path(args.out) / "stats.csv").string(), corpus);

    std::vector<std::pair<std::uint64_t, Tensor>> records;
    records.reserve(corpus.samples.size());
    for (const EncodedSample& s : corpus.samples) {
        const Tensor full = table.embed(s);
        Tensor trimmed({static_cast<std::size_t>(s.true_length), args.dim});
        std::copy(full.data.begin(),
                  full.data.begin() +
                      static_cast<std::ptrdiff_t>(trimmed.size()),
                  trimmed.data.begin());
        records.emplace_back(s.sample_id, std::move(trimmed));
    }
    write_embedding_file((fs::path(args.out) / "embeddings.tbre").string(), args.dim, records);

    std::cout << "synthetic corpus: " << corpus.samples.size() << " samples, " << args.classes
              << " classes, embedding dim " << args.dim << "\n";
    std::cout << "wrote " << args.out << "/corpus.tsv, labels.txt, stats.csv, embeddings.tbre\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string preset;
    std::string corpus;
    std::string embeddings;
    std::string labels;
    std::string out;
    std::string seeds = "1,2,3,4,5";
    std::string optimizer;
    int epochs = 40;
    int batch_size = 16;
    double lr = 0.0;
    int embed_dim = 0;
};

OptimizerConfig preset_optimizer(ModelKind kind) {
    OptimizerConfig opt;
    if (kind == ModelKind::baseline) {
        opt.kind = OptimizerKind::rmsprop;
        opt.learning_rate = 1e-3;
    } else {
        opt.kind = OptimizerKind::adam;
        opt.learning_rate = 2e-5;
    }
    return opt;
}

int cmd_train(const TrainArgs& args) {
    const ModelKind kind = model_kind_from(args.preset);
    ModelSpec spec = ModelSpec::preset(kind);
    if (args.embed_dim > 0) {
        spec.embed_dim = args.embed_dim;
    }

    const std::string labels_path =
        args.labels.empty() ? default_labels_path(args.corpus) : args.labels;
    const LabelMap labels = LabelMap::load(labels_path);
    Corpus corpus;
    corpus.samples = read_corpus_cache(args.corpus);
    corpus.labels = labels;
    spec.classes = static_cast<int>(labels.size());

    const EmbeddingStore store = EmbeddingStore::load(args.embeddings);
    if (store.dim() != static_cast<std::size_t>(spec.embed_dim)) {
        throw DataError("embedding dim " + std::to_string(store.dim()) +
                        " does not match preset embed_dim " + std::to_string(spec.embed_dim) +
                        " (override with --embed-dim)");
    }

    TrainConfig config;
    config.spec = spec;
    config.epochs = args.epochs;
    config.batch_size = static_cast<std::size_t>(args.batch_size);
    config.optimizer = preset_optimizer(kind);
    if (!args.optimizer.empty()) {
        config.optimizer.kind = optimizer_kind_from(args.optimizer);
    }
    if (args.lr > 0.0) {
        config.optimizer.learning_rate = args.lr;
    }
    config.seeds = parse_seed_list(args.seeds);
    config.validate();

    fs::create_directories(args.out);
    RunManifest manifest;
    manifest.config = {
        {"preset", to_string(kind)},
        {"max_len", spec.max_len},
        {"embed_dim", spec.embed_dim},
        {"filters", spec.filters},
        {"kernel", spec.kernel},
        {"units", spec.units},
        {"classes", spec.classes},
        {"dropout", spec.dropout},
        {"epochs", config.epochs},
        {"batch_size", config.batch_size},
        {"optimizer", to_string(config.optimizer.kind)},
        {"learning_rate", config.optimizer.learning_rate},
        {"seeds", config.seeds},
        {"corpus", args.corpus},
        {"embeddings", args.embeddings},
        {"labels", labels_path},
        {"out", args.out},
    };
    manifest.input_digests[args.corpus] = file_digest(args.corpus);
    manifest.input_digests[args.embeddings] = file_digest(args.embeddings);
    manifest.input_digests[labels_path] = file_digest(labels_path);
    manifest.artifacts = {"metrics.csv", "loss_curve.csv", "confusion.csv", "confusion.pgm",
                          "models/"};
    manifest.write((fs::path(args.out) / "manifest.json").string());

    const EmbeddingSource source =
        EmbeddingSource::from_store(store, static_cast<std::size_t>(spec.max_len));
    const RunReport report = multi_seed(config, corpus, source, args.out);

    for (const SeedRun& run : report.runs) {
        if (run.failed) {
            std::cout << "seed " << run.seed << ": FAILED (" << run.error << ")\n";
        } else {
            std::printf("seed %" PRIu64 ": test accuracy %.4f macro-F1 %.4f micro-F1 %.4f "
                        "weighted-F1 %.4f\n",
                        run.seed, run.test.accuracy, run.test.macro_f1, run.test.micro_f1,
                        run.test.weighted_f1);
        }
    }
    std::printf("average over %zu seed(s): accuracy %.4f macro-F1 %.4f micro-F1 %.4f "
                "weighted-F1 %.4f\n",
                report.completed, report.avg_accuracy, report.avg_macro_f1, report.avg_micro_f1,
                report.avg_weighted_f1);
    std::cout << "artifacts in " << args.out << "\n";
    return report.any_failed ? 4 : 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string model;
    std::string corpus;
    std::string embeddings;
    std::string labels;
    std::string out;
    std::string split_name = "test";
    std::uint64_t seed = 1;
    std::size_t top = 10;
};

int cmd_eval(const EvalArgs& args) {
    Model model = load_model(args.model);

    const std::string labels_path =
        args.labels.empty() ? default_labels_path(args.corpus) : args.labels;
    const LabelMap labels = LabelMap::load(labels_path);
    if (labels.size() != static_cast<std::size_t>(model.spec.classes)) {
        throw DataError("corpus has " + std::to_string(labels.size()) +
                        " classes but the model expects " +
                        std::to_string(model.spec.classes));
    }
    Corpus corpus;
    corpus.samples = read_corpus_cache(args.corpus);
    corpus.labels = labels;

    const EmbeddingStore store = EmbeddingStore::load(args.embeddings);
    if (store.dim() != static_cast<std::size_t>(model.spec.embed_dim)) {
        throw DataError("embedding dim " + std::to_string(store.dim()) +
                        " does not match the model's " + std::to_string(model.spec.embed_dim));
    }
    const EmbeddingSource source =
        EmbeddingSource::from_store(store, static_cast<std::size_t>(model.spec.max_len));

    const SplitPlan plan = split(corpus.ids(), args.seed);
    const std::vector<std::uint64_t>* partition = &plan.test;
    if (args.split_name == "validation") {
        partition = &plan.validation;
    } else if (args.split_name == "train") {
        partition = &plan.train;
    } else if (args.split_name != "test") {
        throw ConfigError("unknown split '" + args.split_name +
                          "' (expected train, validation or test)");
    }

    const Metrics metrics = evaluate(model, corpus, *partition, source);

    fs::create_directories(args.out);
    RunReport report;
    SeedRun run;
    run.seed = args.seed;
    run.test = metrics;
    report.runs = {run};
    report.completed = 1;
    report.avg_accuracy = metrics.accuracy;
    report.avg_macro_f1 = metrics.macro_f1;
    report.avg_micro_f1 = metrics.micro_f1;
    report.avg_weighted_f1 = metrics.weighted_f1;
    write_metrics_csv((fs::path(args.out) / "metrics.csv").string(), report);
    write_confusion_csv((fs::path(args.out) / "confusion.csv").string(), metrics.confusion);
    write_confusion_pgm((fs::path(args.out) / "confusion.pgm").string(), metrics.confusion);

    const auto difficult = difficult_relations(metrics.confusion, args.top);
    {
        std::ofstream d((fs::path(args.out) / "difficult.csv").string());
        d << "predicted,true,rate\n";
        for (const DifficultPair& p : difficult) {
            d << labels.name(static_cast<int>(p.predicted)) << ','
              << labels.name(static_cast<int>(p.true_label)) << ','
              << detail::format_double(p.rate) << '\n';
        }
    }

    std::printf("%s split (%zu samples): accuracy %.4f macro-F1 %.4f micro-F1 %.4f "
                "weighted-F1 %.4f\n",
                args.split_name.c_str(), partition->size(), metrics.accuracy, metrics.macro_f1,
                metrics.micro_f1, metrics.weighted_f1);
    if (difficult.empty()) {
        std::cout << "no off-diagonal confusion\n";
    } else {
        std::cout << "most confused (predicted <- true):\n";
        for (const DifficultPair& p : difficult) {
            std::printf("  %s <- %s : %.3f\n", labels.name(static_cast<int>(p.predicted)).c_str(),
                        labels.name(static_cast<int>(p.true_label)).c_str(), p.rate);
        }
    }
    std::cout << "reports in " << args.out << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// params
// ---------------------------------------------------------------------------

int cmd_params(const std::string& preset) {
    const ModelSpec spec = ModelSpec::preset(model_kind_from(preset));
    const ParamCountBreakdown breakdown = param_count_breakdown(spec);
    std::cout << "preset: " << to_string(spec.kind) << "\n";
    for (const auto& [name, count] : breakdown.layers) {
        std::printf("  %-14s %12s\n", name.c_str(), with_commas(count).c_str());
    }
    std::printf("  %-14s %12s\n", "total", with_commas(breakdown.total).c_str());
    std::cout << "total=" << breakdown.total << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------

struct GradCheckArgs {
    std::string preset = "cnn-bilstm";
    double tolerance = 1e-4;
    int instances = 5;
    bool inject_fault = false;
};

int cmd_gradcheck(const GradCheckArgs& args) {
    const ModelSpec spec = ModelSpec::preset(model_kind_from(args.preset));
    using DTensor = TensorT<double>;
    using DTape = TapeT<double>;

    struct Check {
        std::string name;
        std::function<GradCheckReport(std::uint64_t, double, double)> run;
    };
    std::vector<Check> checks;

    if (spec.has_conv()) {
        checks.push_back({"conv1d_same", [](std::uint64_t seed, double tol, double fault) {
                              Rng rng(seed);
                              DTensor x({8, 3});
                              fill_uniform(x, rng);
                              ConvParamsT<double> p;
                              p.filters = DTensor({2, 5, 3});
                              p.bias = DTensor({2});
                              fill_uniform(p.filters, rng);
                              fill_uniform(p.bias, rng);
                              return check_gradients(
                                  "conv1d_same",
                                  [&](DTape& t) {
                                      return sum_squares(t, conv1d_same(t, t.external(&x), p));
                                  },
                                  {&p.filters, &p.bias, &x}, tol, 1e-5, fault);
                          }});
        checks.push_back({"relu", [](std::uint64_t seed, double tol, double fault) {
                              Rng rng(seed);
                              DTensor x({6, 4});
                              fill_uniform_away_from_zero(x, rng);
                              return check_gradients(
                                  "relu",
                                  [&](DTape& t) { return sum_squares(t, relu(t, t.external(&x))); },
                                  {&x}, tol, 1e-5, fault);
                          }});
        checks.push_back({"maxpool1d", [](std::uint64_t seed, double tol, double fault) {
                              Rng rng(seed);
                              DTensor x({8, 3});
                              fill_uniform(x, rng);
                              for (std::size_t t = 0; t < 4; ++t) {
                                  for (std::size_t c = 0; c < 3; ++c) {
                                      if (std::abs(x.at(2 * t, c) - x.at(2 * t + 1, c)) < 1e-3) {
                                          x.at(2 * t, c) += 0.01;
                                      }
                                  }
                              }
                              return check_gradients(
                                  "maxpool1d",
                                  [&](DTape& t) {
                                      return sum_squares(t, maxpool1d(t, t.external(&x)));
                                  },
                                  {&x}, tol, 1e-5, fault);
                          }});
    }

    const auto lstm_check = [](Direction dir) {
        return [dir](std::uint64_t seed, double tol, double fault) {
            Rng rng(seed);
            DTensor x({6, 3});
            fill_uniform(x, rng);
            LstmParamsT<double> p = random_lstm_params(4, 3, rng);
            std::vector<DTensor*> params{&x};
            for (std::size_t g = 0; g < 4; ++g) {
                params.push_back(&p.w_in[g]);
                params.push_back(&p.w_rec[g]);
                params.push_back(&p.bias[g]);
            }
            return check_gradients(
                "lstm_layer",
                [&](DTape& t) { return sum_squares(t, lstm_layer(t, t.external(&x), p, dir)); },
                params, tol, 1e-5, fault);
        };
    };
    checks.push_back({"lstm_forward", lstm_check(Direction::forward)});
    if (spec.bidirectional()) {
        checks.push_back({"lstm_backward", lstm_check(Direction::backward)});
        checks.push_back({"bilstm_concat", [](std::uint64_t seed, double tol, double fault) {
                              Rng rng(seed);
                              DTensor x({5, 3});
                              fill_uniform(x, rng);
                              LstmParamsT<double> f = random_lstm_params(3, 3, rng);
                              LstmParamsT<double> b = random_lstm_params(3, 3, rng);
                              std::vector<DTensor*> params{&x};
                              for (auto* p : {&f, &b}) {
                                  for (std::size_t g = 0; g < 4; ++g) {
                                      params.push_back(&p->w_in[g]);
                                      params.push_back(&p->w_rec[g]);
                                      params.push_back(&p->bias[g]);
                                  }
                              }
                              return check_gradients(
                                  "bilstm",
                                  [&](DTape& t) {
                                      return sum_squares(t, bilstm(t, t.external(&x), f, b));
                                  },
                                  params, tol, 1e-5, fault);
                          }});
    }
    checks.push_back({"dense", [](std::uint64_t seed, double tol, double fault) {
                          Rng rng(seed);
                          DTensor x({10});
                          DTensor w({10, 7});
                          DTensor b({7});
                          fill_uniform(x, rng);
                          fill_uniform(w, rng);
                          fill_uniform(b, rng);
                          return check_gradients(
                              "dense",
                              [&](DTape& t) {
                                  return sum_squares(t, dense(t, t.external(&x), w, b));
                              },
                              {&w, &b, &x}, tol, 1e-5, fault);
                      }});
    checks.push_back({"softmax_ce", [](std::uint64_t seed, double tol, double fault) {
                          Rng rng(seed);
                          std::vector<DTensor> logits(3, DTensor({5}));
                          std::vector<int> labels;
                          std::vector<DTensor*> params;
                          for (auto& l : logits) {
                              fill_uniform(l, rng);
                              labels.push_back(static_cast<int>(rng.below(5)));
                              params.push_back(&l);
                          }
                          return check_gradients(
                              "softmax_ce",
                              [&](DTape& t) {
                                  std::vector<DTensor*> nodes;
                                  for (auto& l : logits) {
                                      nodes.push_back(t.external(&l));
                                  }
                                  return sparse_ce_loss(t, nodes, labels);
                              },
                              params, tol, 1e-5, fault);
                      }});

    bool all_pass = true;
    for (const Check& check : checks) {
        double worst = 0.0;
        bool pass = true;
        for (int i = 0; i < args.instances; ++i) {
            const double fault = (args.inject_fault && &check == &checks.front()) ? 0.05 : 0.0;
            const GradCheckReport r =
                check.run(1000 + static_cast<std::uint64_t>(i), args.tolerance, fault);
            worst = std::max(worst, r.max_rel_err);
            pass = pass && r.pass;
        }
        std::printf("[%s] %-14s max rel err %.3e (tolerance %.1e, %d instances)\n",
                    pass ? "PASS" : "FAIL", check.name.c_str(), worst, args.tolerance,
                    args.instances);
        all_pass = all_pass && pass;
    }
    if (!all_pass) {
        std::cout << "gradient check FAILED\n";
        return 4;
    }
    std::cout << "all layers pass\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"relation extraction on tabular data"};
    app.require_subcommand(1);

    IngestArgs ingest_args;
    CLI::App* ingest_cmd =
        app.add_subcommand("ingest", "encode per-relation JSON tables into a corpus cache");
    ingest_cmd->add_option("--data-dir", ingest_args.data_dir, "directory of per-relation JSON")
        ->required();
    ingest_cmd->add_option("--vocab", ingest_args.vocab, "wordpiece vocabulary file")->required();
    ingest_cmd->add_option("--out", ingest_args.out, "output directory")->required();

    EmbedImportArgs embed_args;
    CLI::App* embed_cmd =
        app.add_subcommand("embed-import", "validate and summarize a TBRE embedding file");
    embed_cmd->add_option("--file", embed_args.file, "TBRE file")->required();
    embed_cmd->add_option("--expect-dim", embed_args.expect_dim, "require this dimension");

    SynthArgs synth_args;
    CLI::App* synth_cmd = app.add_subcommand(
        "synth", "generate a synthetic corpus plus table-lookup embeddings");
    synth_cmd->add_option("--out", synth_args.out, "output directory")->required();
    synth_cmd->add_option("--classes", synth_args.classes, "relation classes");
    synth_cmd->add_option("--per-class", synth_args.per_class, "samples per class");
    synth_cmd->add_option("--dim", synth_args.dim, "embedding dimension");
    synth_cmd->add_option("--seed", synth_args.seed, "corpus seed");
    synth_cmd->add_option("--embed-seed", synth_args.embed_seed, "embedding table seed");

    TrainArgs train_args;
    std::string config_path;
    CLI::App* train_cmd = app.add_subcommand("train", "train one preset over multiple seeds");
    auto* opt_preset = train_cmd->add_option("--preset", train_args.preset,
                                             "baseline|cnn-lstm|cnn-bilstm|bilstm-only");
    auto* opt_corpus = train_cmd->add_option("--corpus", train_args.corpus, "corpus cache (tsv)");
    auto* opt_embed =
        train_cmd->add_option("--embeddings", train_args.embeddings, "TBRE embedding file");
    auto* opt_labels = train_cmd->add_option("--labels", train_args.labels,
                                             "label map (default: labels.txt next to corpus)");
    auto* opt_out = train_cmd->add_option("--out", train_args.out, "output directory");
    auto* opt_seeds =
        train_cmd->add_option("--seeds", train_args.seeds, "comma-separated seed list");
    auto* opt_epochs = train_cmd->add_option("--epochs", train_args.epochs, "training epochs");
    auto* opt_batch =
        train_cmd->add_option("--batch-size", train_args.batch_size, "mini-batch size");
    auto* opt_optim =
        train_cmd->add_option("--optimizer", train_args.optimizer, "adam|rmsprop override");
    auto* opt_lr = train_cmd->add_option("--lr", train_args.lr, "learning rate override");
    auto* opt_dim = train_cmd->add_option("--embed-dim", train_args.embed_dim,
                                          "embedding dim override (e.g. reduced test setups)");
    train_cmd->add_option("--config", config_path, "JSON config file; flags take precedence");

    EvalArgs eval_args;
    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a saved model on a split");
    eval_cmd->add_option("--model", eval_args.model, "model file (tbmd)")->required();
    eval_cmd->add_option("--corpus", eval_args.corpus, "corpus cache (tsv)")->required();
    eval_cmd->add_option("--embeddings", eval_args.embeddings, "TBRE embedding file")->required();
    eval_cmd->add_option("--labels", eval_args.labels, "label map file");
    eval_cmd->add_option("--split", eval_args.split_name, "train|validation|test");
    eval_cmd->add_option("--seed", eval_args.seed, "split seed (must match training)");
    eval_cmd->add_option("--out", eval_args.out, "output directory")->required();
    eval_cmd->add_option("--top", eval_args.top, "difficult relations to list");

    std::string params_preset;
    CLI::App* params_cmd =
        app.add_subcommand("params", "print the trainable parameter count of a preset");
    params_cmd->add_option("--preset", params_preset, "preset name")->required();

    GradCheckArgs grad_args;
    CLI::App* grad_cmd = app.add_subcommand(
        "gradcheck", "verify analytic gradients against central finite differences");
    grad_cmd->add_option("--preset", grad_args.preset, "layer stack to check");
    grad_cmd->add_option("--tolerance", grad_args.tolerance, "max relative error");
    grad_cmd->add_option("--instances", grad_args.instances, "random instances per layer");
    grad_cmd->add_flag("--inject-gradient-fault", grad_args.inject_fault,
                       "corrupt one analytic gradient (failure-path fixture)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (ingest_cmd->parsed()) {
            return cmd_ingest(ingest_args);
        }
        if (embed_cmd->parsed()) {
            return cmd_embed_import(embed_args);
        }
        if (synth_cmd->parsed()) {
            return cmd_synth(synth_args);
        }
        if (train_cmd->parsed()) {
            if (!config_path.empty()) {
                std::ifstream cfg(config_path);
                if (!cfg) {
                    throw ConfigError("cannot open config file '" + config_path + "'");
                }
                nlohmann::json j;
                try {
                    j = nlohmann::json::parse(cfg);
                } catch (const nlohmann::json::parse_error& e) {
                    throw ConfigError(std::string("config file is not valid JSON: ") + e.what());
                }
                const auto fill_str = [&j](const CLI::Option* opt, const char* key,
                                           std::string& dst) {
                    if (opt->count() == 0 && j.contains(key)) {
                        dst = j.at(key).get<std::string>();
                    }
                };
                fill_str(opt_preset, "preset", train_args.preset);
                fill_str(opt_corpus, "corpus", train_args.corpus);
                fill_str(opt_embed, "embeddings", train_args.embeddings);
                fill_str(opt_labels, "labels", train_args.labels);
                fill_str(opt_out, "out", train_args.out);
                fill_str(opt_optim, "optimizer", train_args.optimizer);
                if (opt_seeds->count() == 0 && j.contains("seeds")) {
                    std::string seeds;
                    for (const auto& s : j.at("seeds")) {
                        seeds += (seeds.empty() ? "" : ",") + std::to_string(s.get<std::uint64_t>());
                    }
                    train_args.seeds = seeds;
                }
                if (opt_epochs->count() == 0 && j.contains("epochs")) {
                    train_args.epochs = j.at("epochs").get<int>();
                }
                if (opt_batch->count() == 0 && j.contains("batch_size")) {
                    train_args.batch_size = j.at("batch_size").get<int>();
                }
                if (opt_lr->count() == 0 && j.contains("lr")) {
                    train_args.lr = j.at("lr").get<double>();
                }
                if (opt_dim->count() == 0 && j.contains("embed_dim")) {
                    train_args.embed_dim = j.at("embed_dim").get<int>();
                }
            }
            if (train_args.preset.empty() || train_args.corpus.empty() ||
                train_args.embeddings.empty() || train_args.out.empty()) {
                throw ConfigError("train requires --preset, --corpus, --embeddings and --out "
                                  "(via flags or --config)");
            }
            return cmd_train(train_args);
        }
        if (eval_cmd->parsed()) {
            return cmd_eval(eval_args);
        }
        if (params_cmd->parsed()) {
            return cmd_params(params_preset);
        }
        if (grad_cmd->parsed()) {
            return cmd_gradcheck(grad_args);
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const ShapeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
