#include <cstdlib>
#include <sys/wait.h>

#include "support.hpp"

namespace {

const std::string kCli = TABLERE_CLI_PATH;

int run(const std::string& args, const std::string& capture_to = "") {
    std::string cmd = kCli + " " + args;
    if (!capture_to.empty()) {
        cmd += " > " + capture_to + " 2>&1";
    } else {
        cmd += " > /dev/null 2>&1";
    }
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -2;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> csv_lines(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        lines.push_back(line);
    }
    return lines;
}

} // namespace

TEST_CASE("cli params prints the reference parameter counts") {
    test_support::TempDir dir("cli_params");
    const std::string out = dir.str("out.txt");
    CHECK(run("params --preset baseline", out) == 0);
    CHECK(slurp(out).find("total=4559") != std::string::npos);
    CHECK(run("params --preset cnn-lstm", out) == 0);
    CHECK(slurp(out).find("total=40581") != std::string::npos);
    CHECK(run("params --preset cnn-bilstm", out) == 0);
    CHECK(slurp(out).find("total=50405") != std::string::npos);
    CHECK(run("params --preset bilstm-only", out) == 0);
    CHECK(slurp(out).find("total=86877") != std::string::npos);
}

TEST_CASE("cli rejects an unknown preset with exit 2") {
    CHECK(run("params --preset resnet") == 2);
    CHECK(run("train --preset resnet --corpus x --embeddings y --out z") == 2);
}

TEST_CASE("cli ingest reports missing inputs as exit 2") {
    test_support::TempDir dir("cli_ingest");
    std::filesystem::create_directories(dir.str("empty"));
    std::ofstream(dir.str("vocab.txt")) << "[PAD]\n[UNK]\nplay\n";

    // empty data directory
    CHECK(run("ingest --data-dir " + dir.str("empty") + " --vocab " + dir.str("vocab.txt") +
              " --out " + dir.str("out")) == 2);
    // missing vocab file
    CHECK(run("ingest --data-dir " + dir.str("empty") + " --vocab " + dir.str("nope.txt") +
              " --out " + dir.str("out")) == 2);
}

TEST_CASE("cli ingest writes a cache and counts malformed records in stats") {
    test_support::TempDir dir("cli_ingest2");
    std::filesystem::create_directories(dir.str("data"));
    std::ofstream(dir.str("vocab.txt"))
        << "[PAD]\n[UNK]\nalice\nbob\nfilm\na\nb\ndirector\ncast\n";
    std::ofstream(dir.str("data/director-film.json")) << R"([
      {"table_id":"t","article_title":"Film A","section_title":"Cast",
       "caption":null,"headers":["Director","Film"],
       "rows":[["Alice","Film A"],["Bob","Film B"]],
       "subject_column":0,"object_column":1,"relation":"director-film"},
      {"table_id":"bad1","article_title":"x","section_title":"",
       "headers":["h"],"rows":[["v"]],"subject_column":-1,"object_column":9,
       "relation":"director-film"},
      {"table_id":"bad2","article_title":"x","section_title":"",
       "headers":"not-an-array","rows":[],"subject_column":-1,"object_column":0,
       "relation":"director-film"},
      {"table_id":"bad3","article_title":"x","section_title":"",
       "headers":["h"],"rows":[["v"]],"subject_column":5,"object_column":0,
       "relation":"director-film"}
    ])";

    const std::string out = dir.str("log.txt");
    CHECK(run("ingest --data-dir " + dir.str("data") + " --vocab " + dir.str("vocab.txt") +
              " --out " + dir.str("out"),
              out) == 0);

    const auto cache = csv_lines(dir.str("out/corpus.tsv"));
    CHECK(cache.size() == 2); // two valid rows encoded

    const std::string stats = slurp(dir.str("out/stats.csv"));
    CHECK(stats.find("__warnings,3") != std::string::npos);
    CHECK(stats.find("director-film,2") != std::string::npos);
    CHECK(slurp(dir.str("out/labels.txt")) == "director-film\n");
}

TEST_CASE("cli end to end: synth, embed-import, train, eval") {
    test_support::TempDir dir("cli_e2e");
    const std::string data = dir.str("data");
    CHECK(run("synth --out " + data + " --classes 4 --per-class 6 --dim 8 --seed 3") == 0);
    CHECK(std::filesystem::exists(data + "/corpus.tsv"));
    CHECK(std::filesystem::exists(data + "/labels.txt"));
    CHECK(std::filesystem::exists(data + "/embeddings.tbre"));

    const std::string imp = dir.str("import.txt");
    CHECK(run("embed-import --file " + data + "/embeddings.tbre --expect-dim 8", imp) == 0);
    CHECK(slurp(imp).find("valid TBRE file: 24 records, dim 8") != std::string::npos);
    CHECK(run("embed-import --file " + data + "/embeddings.tbre --expect-dim 16") == 3);

    // dim mismatch against the preset is exit 3 without --embed-dim
    const std::string run_dir = dir.str("run");
    CHECK(run("train --preset cnn-bilstm --corpus " + data + "/corpus.tsv --embeddings " + data +
              "/embeddings.tbre --out " + run_dir + " --seeds 1 --epochs 2") == 3);

    CHECK(run("train --preset cnn-bilstm --corpus " + data + "/corpus.tsv --embeddings " + data +
              "/embeddings.tbre --out " + run_dir +
              " --seeds 1 --epochs 2 --embed-dim 8 --lr 0.001") == 0);
    CHECK(std::filesystem::exists(run_dir + "/manifest.json"));
    CHECK(std::filesystem::exists(run_dir + "/models/seed_1.tbmd"));
    const auto metrics = csv_lines(run_dir + "/metrics.csv");
    REQUIRE(metrics.size() == 3); // header + seed row + average
    CHECK(metrics[1].rfind("1,ok,", 0) == 0);
    CHECK(metrics[2].rfind("average,ok,", 0) == 0);

    // eval on the saved model reproduces the training-time test row exactly
    const std::string eval_dir = dir.str("eval");
    CHECK(run("eval --model " + run_dir + "/models/seed_1.tbmd --corpus " + data +
              "/corpus.tsv --embeddings " + data + "/embeddings.tbre --split test --seed 1 "
              "--out " + eval_dir) == 0);
    const auto eval_metrics = csv_lines(eval_dir + "/metrics.csv");
    REQUIRE(eval_metrics.size() == 3);
    // strip the seed column; metric fields must match bit for bit
    const std::string train_row = metrics[1].substr(metrics[1].find(",ok,"));
    const std::string eval_row = eval_metrics[1].substr(eval_metrics[1].find(",ok,"));
    CHECK(train_row == eval_row);

    // validation split gives a distinct report target
    const std::string eval_val = dir.str("eval_val");
    CHECK(run("eval --model " + run_dir + "/models/seed_1.tbmd --corpus " + data +
              "/corpus.tsv --embeddings " + data + "/embeddings.tbre --split validation "
              "--seed 1 --out " + eval_val) == 0);
    CHECK(std::filesystem::exists(eval_val + "/metrics.csv"));
    CHECK(std::filesystem::exists(eval_val + "/difficult.csv"));
    CHECK(run("eval --model " + run_dir + "/models/seed_1.tbmd --corpus " + data +
              "/corpus.tsv --embeddings " + data + "/embeddings.tbre --split nope --seed 1 "
              "--out " + eval_val) == 2);
}

TEST_CASE("cli train accepts a JSON config file with flag precedence") {
    test_support::TempDir dir("cli_cfg");
    const std::string data = dir.str("data");
    CHECK(run("synth --out " + data + " --classes 3 --per-class 5 --dim 8 --seed 4") == 0);
    std::ofstream(dir.str("cfg.json")) << R"({
      "preset": "cnn-lstm",
      "corpus": ")" << data << R"(/corpus.tsv",
      "embeddings": ")" << data << R"(/embeddings.tbre",
      "out": ")" << dir.str("run_cfg") << R"(",
      "seeds": [1],
      "epochs": 1,
      "embed_dim": 8,
      "lr": 0.001
    })";
    CHECK(run("train --config " + dir.str("cfg.json")) == 0);
    CHECK(std::filesystem::exists(dir.str("run_cfg") + "/models/seed_1.tbmd"));

    // flag overrides the config file value
    CHECK(run("train --config " + dir.str("cfg.json") + " --out " + dir.str("run_flag") +
              " --seeds 2") == 0);
    CHECK(std::filesystem::exists(dir.str("run_flag") + "/models/seed_2.tbmd"));
}

TEST_CASE("cli gradcheck passes normally and fails under an injected fault") {
    test_support::TempDir dir("cli_grad");
    const std::string out = dir.str("grad.txt");
    CHECK(run("gradcheck --preset cnn-bilstm --instances 1", out) == 0);
    const std::string text = slurp(out);
    CHECK(text.find("conv1d_same") != std::string::npos);
    CHECK(text.find("lstm_backward") != std::string::npos);
    CHECK(text.find("all layers pass") != std::string::npos);

    // corrupted analytic gradient: nonzero exit naming the faulty layer
    CHECK(run("gradcheck --preset cnn-bilstm --instances 1 --inject-gradient-fault", out) == 4);
    CHECK(slurp(out).find("[FAIL] conv1d_same") != std::string::npos);

    // an absurd tolerance demonstrates the discretization floor
    CHECK(run("gradcheck --preset baseline --instances 1 --tolerance 1e-12", out) == 4);
}
