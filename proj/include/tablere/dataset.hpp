#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "tablere/errors.hpp"
#include "tablere/rng.hpp"
#include "tablere/tokenizer.hpp"

namespace tablere {

/// subject_column value meaning "the article title is the subject entity".
inline constexpr int kArticleSubject = -1;

inline constexpr std::size_t kLongTailThreshold = 500;

/// One ingested table.
struct TableRecord {
    std::string table_id;
    std::string article_title;
    std::string section_title;
    std::optional<std::string> caption;
    std::vector<std::string> headers;
    std::vector<std::vector<std::string>> rows;
    int subject_column = kArticleSubject;
    int object_column = 0;
    std::string relation;
};

/// Bijective relation-name <-> index map; indices follow the lexicographic
/// order of names so they are stable across processes.
class LabelMap {
public:
    LabelMap() = default;

    static LabelMap from_names(std::vector<std::string> names) {
        std::sort(names.begin(), names.end());
        names.erase(std::unique(names.begin(), names.end()), names.end());
        LabelMap m;
        m.names_ = std::move(names);
        for (std::size_t i = 0; i < m.names_.size(); ++i) {
            m.index_.emplace(m.names_[i], static_cast<int>(i));
        }
        return m;
    }

    int index(const std::string& name) const {
        const auto it = index_.find(name);
        return it == index_.end() ? -1 : it->second;
    }

    const std::string& name(int idx) const { return names_.at(static_cast<std::size_t>(idx)); }
    std::size_t size() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }

    void save(const std::string& path) const {
        std::ofstream out(path);
        if (!out) {
            throw DataError("label map: cannot write '" + path + "'");
        }
        for (const std::string& n : names_) {
            out << n << '\n';
        }
    }

    static LabelMap load(const std::string& path) {
        std::ifstream in(path);
        if (!in) {
            throw DataError("label map: cannot open '" + path + "'");
        }
        std::vector<std::string> names;
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') {
                line.pop_back();
            }
            if (!line.empty()) {
                names.push_back(line);
            }
        }
        if (names.empty()) {
            throw DataError("label map: '" + path + "' is empty");
        }
        return from_names(std::move(names));
    }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, int> index_;
};

struct IngestResult {
    std::vector<TableRecord> records;
    std::size_t skipped = 0; // malformed records, counted not fatal
};

namespace detail {

inline bool record_from_json(const nlohmann::json& j, TableRecord& out) {
    if (!j.is_object()) {
        return false;
    }
    const auto str = [&j](const char* key, std::string& dst, bool required) {
        const auto it = j.find(key);
        if (it == j.end() || it->is_null()) {
            return !required;
        }
        if (!it->is_string()) {
            return false;
        }
        dst = it->get<std::string>();
        return true;
    };
    if (!str("table_id", out.table_id, true) || !str("article_title", out.article_title, true) ||
        !str("section_title", out.section_title, true) || !str("relation", out.relation, true)) {
        return false;
    }
    if (const auto it = j.find("caption"); it != j.end() && !it->is_null()) {
        if (!it->is_string()) {
            return false;
        }
        out.caption = it->get<std::string>();
    }
    const auto headers = j.find("headers");
    if (headers == j.end() || !headers->is_array()) {
        return false;
    }
    for (const auto& h : *headers) {
        if (!h.is_string()) {
            return false;
        }
        out.headers.push_back(h.get<std::string>());
    }
    const auto rows = j.find("rows");
    if (rows == j.end() || !rows->is_array()) {
        return false;
    }
    for (const auto& row : *rows) {
        if (!row.is_array()) {
            return false;
        }
        std::vector<std::string> cells;
        for (const auto& cell : row) {
            if (!cell.is_string()) {
                return false;
            }
            cells.push_back(cell.get<std::string>());
        }
        out.rows.push_back(std::move(cells));
    }
    const auto intval = [&j](const char* key, int& dst) {
        const auto it = j.find(key);
        if (it == j.end() || !it->is_number_integer()) {
            return false;
        }
        dst = it->get<int>();
        return true;
    };
    if (!intval("subject_column", out.subject_column) ||
        !intval("object_column", out.object_column)) {
        return false;
    }
    return true;
}

inline bool column_indices_valid(const TableRecord& r) {
    const int width = static_cast<int>(r.headers.size());
    if (r.object_column < 0 || r.object_column >= width) {
        return false;
    }
    if (r.subject_column != kArticleSubject &&
        (r.subject_column < 0 || r.subject_column >= width)) {
        return false;
    }
    for (const auto& row : r.rows) {
        const int rw = static_cast<int>(row.size());
        if (r.object_column >= rw) {
            return false;
        }
        if (r.subject_column != kArticleSubject && r.subject_column >= rw) {
            return false;
        }
    }
    return true;
}

inline bool blank(const std::string& s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

} // namespace detail

/// Parses one per-relation JSON file (an array of record objects).
/// Malformed records are skipped and counted; an unknown relation name is
/// fatal; a file that is not JSON at all is fatal with the parse position.
inline IngestResult ingest(const std::string& path, const LabelMap& known_labels) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("ingest: cannot open '" + path + "'");
    }
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError("ingest: '" + path + "' is not valid JSON: " + e.what());
    }
    if (!doc.is_array()) {
        throw FormatError("ingest: '" + path + "' must contain a JSON array of records");
    }
    IngestResult result;
    for (const auto& item : doc) {
        TableRecord r;
        if (!detail::record_from_json(item, r) || !detail::column_indices_valid(r)) {
            ++result.skipped;
            continue;
        }
        if (known_labels.index(r.relation) < 0) {
            throw DataError("ingest: '" + path + "' contains unknown relation '" + r.relation +
                            "'");
        }
        result.records.push_back(std::move(r));
    }
    return result;
}

/// Raw (pre-tokenization) sample: entity pair plus context fields in the
/// order they are concatenated for encoding.
struct RawSample {
    std::string subject;
    std::string object;
    std::vector<std::string> context;
    int label = -1;
};

/// One sample per table row. Subject text is the cell at subject_column, or
/// the article title under the sentinel. Context is column headers (subject
/// column first, then object column, then the rest), caption, section title.
/// Rows with an empty subject or object cell are skipped and counted.
inline std::vector<RawSample> extract_pairs(const TableRecord& record, const LabelMap& labels,
                                            std::size_t* skipped_rows = nullptr) {
    std::vector<std::string> context;
    const int width = static_cast<int>(record.headers.size());
    if (record.subject_column != kArticleSubject) {
        context.push_back(record.headers[static_cast<std::size_t>(record.subject_column)]);
    }
    context.push_back(record.headers[static_cast<std::size_t>(record.object_column)]);
    for (int h = 0; h < width; ++h) {
        if (h != record.subject_column && h != record.object_column) {
            context.push_back(record.headers[static_cast<std::size_t>(h)]);
        }
    }
    if (record.caption && !detail::blank(*record.caption)) {
        context.push_back(*record.caption);
    }
    if (!detail::blank(record.section_title)) {
        context.push_back(record.section_title);
    }

    const int label = labels.index(record.relation);
    std::vector<RawSample> samples;
    for (const auto& row : record.rows) {
        const std::string& subject =
            record.subject_column == kArticleSubject
                ? record.article_title
                : row[static_cast<std::size_t>(record.subject_column)];
        const std::string& object = row[static_cast<std::size_t>(record.object_column)];
        if (detail::blank(subject) || detail::blank(object)) {
            if (skipped_rows) {
                ++*skipped_rows;
            }
            continue;
        }
        RawSample s;
        s.subject = subject;
        s.object = object;
        s.context = context;
        s.label = label;
        samples.push_back(std::move(s));
    }
    return samples;
}

/// Labeled, encoded corpus plus its label map.
struct Corpus {
    std::vector<EncodedSample> samples;
    LabelMap labels;
    std::size_t warnings = 0;     // skipped records + skipped rows + empty encodes
    std::size_t table_count = 0;  // ingested tables

    std::vector<std::uint64_t> ids() const {
        std::vector<std::uint64_t> out;
        out.reserve(samples.size());
        for (const EncodedSample& s : samples) {
            out.push_back(s.sample_id);
        }
        return out;
    }
};

inline std::unordered_map<std::uint64_t, std::size_t> make_id_index(const Corpus& corpus) {
    std::unordered_map<std::uint64_t, std::size_t> index;
    index.reserve(corpus.samples.size());
    for (std::size_t i = 0; i < corpus.samples.size(); ++i) {
        index.emplace(corpus.samples[i].sample_id, i);
    }
    return index;
}

/// Ingests every *.json file in a directory (file stem = relation name),
/// extracts entity pairs and encodes them. Files are processed in name order
/// so sample-id assignment is deterministic.
inline Corpus build_corpus(const std::string& data_dir, const Vocab& vocab,
                           int max_len = kMaxTokens) {
    namespace fs = std::filesystem;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(data_dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") {
            files.push_back(entry.path());
        }
    }
    if (files.empty()) {
        throw ConfigError("no relation files found in '" + data_dir + "'");
    }
    std::sort(files.begin(), files.end());

    std::vector<std::string> names;
    for (const fs::path& f : files) {
        names.push_back(f.stem().string());
    }
    Corpus corpus;
    corpus.labels = LabelMap::from_names(names);

    std::uint64_t next_id = 0;
    for (const fs::path& f : files) {
        const IngestResult ingested = ingest(f.string(), corpus.labels);
        corpus.warnings += ingested.skipped;
        corpus.table_count += ingested.records.size();
        for (const TableRecord& record : ingested.records) {
            std::size_t skipped_rows = 0;
            for (const RawSample& raw : extract_pairs(record, corpus.labels, &skipped_rows)) {
                std::vector<std::string> fields;
                fields.push_back(raw.subject);
                fields.push_back(raw.object);
                fields.insert(fields.end(), raw.context.begin(), raw.context.end());
                EncodedSample sample = encode(fields, vocab, max_len);
                sample.label = raw.label;
                sample.sample_id = next_id++;
                if (sample.true_length == 0) {
                    ++corpus.warnings; // all-empty fields, emitted as all-pad
                }
                corpus.samples.push_back(std::move(sample));
            }
            corpus.warnings += skipped_rows;
        }
    }
    return corpus;
}

// ---------------------------------------------------------------------------
// Splits and batching
// ---------------------------------------------------------------------------

/// Deterministic 40/40/20 split: shuffle keyed solely by the seed, then a
/// contiguous cut. Partition sizes are within one sample of the exact
/// fractions.
struct SplitPlan {
    std::uint64_t seed = 0;
    std::vector<std::uint64_t> train;
    std::vector<std::uint64_t> validation;
    std::vector<std::uint64_t> test;
};

inline SplitPlan split(const std::vector<std::uint64_t>& ids, std::uint64_t seed) {
    if (ids.empty()) {
        throw UsageError("split: corpus is empty");
    }
    std::vector<std::uint64_t> shuffled = ids;
    Rng rng(seed);
    rng.shuffle(shuffled);

    const double n = static_cast<double>(shuffled.size());
    const std::size_t n_train = static_cast<std::size_t>(std::llround(0.4 * n));
    const std::size_t n_val = static_cast<std::size_t>(std::llround(0.4 * n));

    SplitPlan plan;
    plan.seed = seed;
    plan.train.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_train));
    plan.validation.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(n_train),
                           shuffled.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    plan.test.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(n_train + n_val),
                     shuffled.end());
    return plan;
}

/// Per-epoch reshuffle keyed by (seed, epoch); the final partial batch is
/// kept.
inline std::vector<std::vector<std::uint64_t>> batches(const std::vector<std::uint64_t>& ids,
                                                       std::size_t batch_size,
                                                       std::uint64_t seed, std::uint64_t epoch) {
    std::vector<std::uint64_t> shuffled = ids;
    Rng rng(mix_seed(seed, epoch));
    rng.shuffle(shuffled);
    std::vector<std::vector<std::uint64_t>> out;
    for (std::size_t start = 0; start < shuffled.size(); start += batch_size) {
        const std::size_t end = std::min(shuffled.size(), start + batch_size);
        out.emplace_back(shuffled.begin() + static_cast<std::ptrdiff_t>(start),
                         shuffled.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Corpus statistics
// ---------------------------------------------------------------------------

struct CorpusStats {
    std::vector<std::size_t> label_counts; // indexed by label
    double long_tail_fraction = 0.0;       // labels with count < 500
    std::size_t table_count = 0;
    std::size_t sample_count = 0;
    std::size_t warnings = 0;
};

inline CorpusStats corpus_stats(const Corpus& corpus) {
    CorpusStats stats;
    stats.label_counts.assign(corpus.labels.size(), 0);
    for (const EncodedSample& s : corpus.samples) {
        stats.label_counts.at(static_cast<std::size_t>(s.label))++;
    }
    std::size_t long_tail = 0;
    for (const std::size_t c : stats.label_counts) {
        if (c < kLongTailThreshold) {
            ++long_tail;
        }
    }
    stats.long_tail_fraction =
        corpus.labels.size() == 0
            ? 0.0
            : static_cast<double>(long_tail) / static_cast<double>(corpus.labels.size());
    stats.table_count = corpus.table_count;
    stats.sample_count = corpus.samples.size();
    stats.warnings = corpus.warnings;
    return stats;
}

/// stats CSV: one `label,count` row per relation plus reserved `__` rows for
/// totals.
inline void write_stats_csv(const std::string& path, const Corpus& corpus) {
    const CorpusStats stats = corpus_stats(corpus);
    std::ofstream out(path);
    if (!out) {
        throw DataError("stats: cannot write '" + path + "'");
    }
    out << "label,count\n";
    for (std::size_t i = 0; i < corpus.labels.size(); ++i) {
        out << corpus.labels.name(static_cast<int>(i)) << ',' << stats.label_counts[i] << '\n';
    }
    out << "__tables," << stats.table_count << '\n';
    out << "__samples," << stats.sample_count << '\n';
    out << "__warnings," << stats.warnings << '\n';
    out << "__long_tail_fraction," << stats.long_tail_fraction << '\n';
}

} // namespace tablere
