#include "support.hpp"

using namespace tablere;

namespace {

const char* kFigureTable = R"([
  {
    "table_id": "t1",
    "article_title": "Nishan-e-Haider",
    "section_title": "Recipients",
    "caption": "Recipients",
    "headers": ["Name of the recipient", "Year"],
    "rows": [["Raja Muhammad Sarwar", "1948"],
             ["Tufail Mohammad", "1958"],
             ["Raja Aziz Bhatti", "1965"]],
    "subject_column": -1,
    "object_column": 0,
    "relation": "award-nominee"
  }
])";

std::string write_file(const test_support::TempDir& dir, const std::string& name,
                       const std::string& content) {
    const std::string path = dir.str(name);
    std::ofstream(path) << content;
    return path;
}

} // namespace

TEST_CASE("label map is lexicographic and bijective") {
    const LabelMap m = LabelMap::from_names({"director-film", "award-nominee", "none"});
    CHECK(m.size() == 3);
    CHECK(m.index("award-nominee") == 0);
    CHECK(m.index("director-film") == 1);
    CHECK(m.index("none") == 2);
    CHECK(m.name(2) == "none");
    CHECK(m.index("absent") == -1);

    test_support::TempDir dir("labels");
    const std::string path = dir.str("labels.txt");
    m.save(path);
    const LabelMap loaded = LabelMap::load(path);
    CHECK(loaded.names() == m.names());
}

TEST_CASE("ingest: empty array yields zero records") {
    test_support::TempDir dir("ingest");
    const std::string path = write_file(dir, "none.json", "[]");
    const LabelMap labels = LabelMap::from_names({"none"});
    const IngestResult r = ingest(path, labels);
    CHECK(r.records.empty());
    CHECK(r.skipped == 0);
}

TEST_CASE("ingest: record with out-of-range object column is skipped with one warning") {
    test_support::TempDir dir("ingest");
    const std::string path = write_file(dir, "r.json", R"([
      {"table_id":"a","article_title":"A","section_title":"","headers":["h"],
       "rows":[["x"]],"subject_column":-1,"object_column":3,"relation":"none"},
      {"table_id":"b","article_title":"B","section_title":"","headers":["h"],
       "rows":[["y"]],"subject_column":-1,"object_column":0,"relation":"none"}
    ])");
    const LabelMap labels = LabelMap::from_names({"none"});
    const IngestResult r = ingest(path, labels);
    CHECK(r.records.size() == 1);
    CHECK(r.skipped == 1);
}

TEST_CASE("ingest: the figure table gets the article-subject sentinel") {
    test_support::TempDir dir("ingest");
    const std::string path = write_file(dir, "award-nominee.json", kFigureTable);
    const LabelMap labels = LabelMap::from_names({"award-nominee"});
    const IngestResult r = ingest(path, labels);
    REQUIRE(r.records.size() == 1);
    const TableRecord& rec = r.records[0];
    CHECK(rec.subject_column == kArticleSubject);
    CHECK(rec.article_title == "Nishan-e-Haider");
    CHECK(rec.relation == "award-nominee");
    CHECK(rec.headers[0] == "Name of the recipient");
}

TEST_CASE("ingest: unknown relation is fatal, bad JSON reports a position") {
    test_support::TempDir dir("ingest");
    const LabelMap labels = LabelMap::from_names({"none"});
    const std::string unknown = write_file(dir, "u.json", R"([
      {"table_id":"a","article_title":"A","section_title":"","headers":["h"],
       "rows":[["x"]],"subject_column":-1,"object_column":0,"relation":"mystery"}
    ])");
    CHECK_THROWS_AS(ingest(unknown, labels), DataError);

    const std::string broken = write_file(dir, "b.json", "{ not json ]");
    CHECK_THROWS_AS(ingest(broken, labels), FormatError);
}

TEST_CASE("extract_pairs: one sample per row, sentinel subject uses the article title") {
    test_support::TempDir dir("extract");
    const std::string path = write_file(dir, "award-nominee.json", kFigureTable);
    const LabelMap labels = LabelMap::from_names({"award-nominee"});
    const TableRecord rec = ingest(path, labels).records[0];

    const std::vector<RawSample> samples = extract_pairs(rec, labels);
    REQUIRE(samples.size() == 3);
    for (const RawSample& s : samples) {
        CHECK(s.subject == "Nishan-e-Haider");
        CHECK(s.label == 0);
    }
    CHECK(samples[0].object == "Raja Muhammad Sarwar");
    // context order: object column header first (sentinel subject), then the
    // remaining headers, caption, section title
    REQUIRE(samples[0].context.size() == 4);
    CHECK(samples[0].context[0] == "Name of the recipient");
    CHECK(samples[0].context[1] == "Year");
    CHECK(samples[0].context[2] == "Recipients");
    CHECK(samples[0].context[3] == "Recipients");
}

TEST_CASE("extract_pairs: rows with empty subject or object cells are dropped") {
    TableRecord rec;
    rec.table_id = "t";
    rec.article_title = "Art";
    rec.headers = {"a", "b"};
    rec.rows = {{"s1", "o1"}, {"", "o2"}, {"s3", "  "}};
    rec.subject_column = 0;
    rec.object_column = 1;
    rec.relation = "none";
    const LabelMap labels = LabelMap::from_names({"none"});
    std::size_t skipped = 0;
    const auto samples = extract_pairs(rec, labels, &skipped);
    CHECK(samples.size() == 1);
    CHECK(skipped == 2);
    CHECK(samples[0].subject == "s1");
    CHECK(samples[0].object == "o1");
}

TEST_CASE("split: 100 samples cut 40/40/20, deterministic per seed") {
    std::vector<std::uint64_t> ids(100);
    for (std::size_t i = 0; i < 100; ++i) {
        ids[i] = i;
    }
    const SplitPlan a = split(ids, 7);
    CHECK(a.train.size() == 40);
    CHECK(a.validation.size() == 40);
    CHECK(a.test.size() == 20);

    const SplitPlan b = split(ids, 7);
    CHECK(a.train == b.train);
    CHECK(a.validation == b.validation);
    CHECK(a.test == b.test);
}

TEST_CASE("split partitions are disjoint and cover the corpus") {
    std::vector<std::uint64_t> ids(103);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        ids[i] = 1000 + i;
    }
    const SplitPlan plan = split(ids, 3);
    std::vector<std::uint64_t> all;
    all.insert(all.end(), plan.train.begin(), plan.train.end());
    all.insert(all.end(), plan.validation.begin(), plan.validation.end());
    all.insert(all.end(), plan.test.begin(), plan.test.end());
    CHECK(all.size() == ids.size());
    std::sort(all.begin(), all.end());
    auto sorted = ids;
    std::sort(sorted.begin(), sorted.end());
    CHECK(all == sorted); // no duplicates, full coverage

    // sizes within one sample of the exact fractions
    CHECK(std::abs(static_cast<double>(plan.train.size()) - 0.4 * 103.0) <= 1.0);
    CHECK(std::abs(static_cast<double>(plan.validation.size()) - 0.4 * 103.0) <= 1.0);
    CHECK(std::abs(static_cast<double>(plan.test.size()) - 0.2 * 103.0) <= 1.0);
}

TEST_CASE("split: different seeds give different train sets") {
    std::vector<std::uint64_t> ids(1000);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        ids[i] = i;
    }
    const SplitPlan s1 = split(ids, 1);
    const SplitPlan s2 = split(ids, 2);
    CHECK(s1.train != s2.train);
}

TEST_CASE("batches: 33 ids make batches of 16, 16, 1") {
    std::vector<std::uint64_t> ids(33);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        ids[i] = i;
    }
    const auto b = batches(ids, 16, 5, 0);
    REQUIRE(b.size() == 3);
    CHECK(b[0].size() == 16);
    CHECK(b[1].size() == 16);
    CHECK(b[2].size() == 1);

    // same multiset, reshuffled per epoch, deterministic per (seed, epoch)
    const auto b1 = batches(ids, 16, 5, 1);
    CHECK(batches(ids, 16, 5, 1) == b1);
    std::vector<std::uint64_t> flat0;
    std::vector<std::uint64_t> flat1;
    for (const auto& batch : b) {
        flat0.insert(flat0.end(), batch.begin(), batch.end());
    }
    for (const auto& batch : b1) {
        flat1.insert(flat1.end(), batch.begin(), batch.end());
    }
    CHECK(flat0 != flat1);
    std::sort(flat0.begin(), flat0.end());
    std::sort(flat1.begin(), flat1.end());
    CHECK(flat0 == flat1);
}

TEST_CASE("build_corpus encodes every row across files in name order") {
    test_support::TempDir dir("corpus");
    write_file(dir, "award-nominee.json", kFigureTable);
    write_file(dir, "director-film.json", R"([
      {"table_id":"t2","article_title":"Some Film","section_title":"Cast",
       "caption":null,"headers":["Director","Film"],
       "rows":[["Alice","Film A"],["Bob","Film B"]],
       "subject_column":0,"object_column":1,"relation":"director-film"}
    ])");

    const Corpus corpus = build_corpus(dir.str(), test_support::test_vocab());
    CHECK(corpus.labels.size() == 2);
    CHECK(corpus.samples.size() == 5); // 3 + 2
    CHECK(corpus.table_count == 2);
    // ids assigned sequentially in file-name order: award-nominee first
    CHECK(corpus.samples[0].sample_id == 0);
    CHECK(corpus.samples[0].label == corpus.labels.index("award-nominee"));
    CHECK(corpus.samples[4].label == corpus.labels.index("director-film"));

    const CorpusStats stats = corpus_stats(corpus);
    CHECK(stats.label_counts[0] == 3);
    CHECK(stats.label_counts[1] == 2);
    CHECK(stats.sample_count == 5);
    CHECK(stats.long_tail_fraction == 1.0); // both classes under 500
}

TEST_CASE("corpus_stats counts sum to the corpus size and respect the threshold") {
    SyntheticSpec spec;
    spec.classes = 4;
    spec.per_class = 6;
    const Corpus corpus = make_synthetic_corpus(spec);
    const CorpusStats stats = corpus_stats(corpus);
    std::size_t total = 0;
    for (const std::size_t c : stats.label_counts) {
        total += c;
    }
    CHECK(total == corpus.samples.size());
    CHECK(stats.long_tail_fraction == 1.0);
}

TEST_CASE("uniform corpus with 500 samples per class has no long-tail labels") {
    SyntheticSpec spec;
    spec.classes = 2;
    spec.per_class = 500;
    const Corpus corpus = make_synthetic_corpus(spec);
    const CorpusStats stats = corpus_stats(corpus);
    CHECK(stats.label_counts == std::vector<std::size_t>{500, 500});
    CHECK(stats.long_tail_fraction == 0.0);
}

TEST_CASE("stats csv carries labels plus reserved totals rows") {
    test_support::TempDir dir("stats");
    SyntheticSpec spec;
    spec.classes = 3;
    spec.per_class = 2;
    const Corpus corpus = make_synthetic_corpus(spec);
    const std::string path = dir.str("stats.csv");
    write_stats_csv(path, corpus);

    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "label,count");
    std::getline(in, line);
    CHECK(line == "rel-00,2");
    int reserved = 0;
    while (std::getline(in, line)) {
        reserved += line.rfind("__", 0) == 0;
    }
    CHECK(reserved == 4);
}
