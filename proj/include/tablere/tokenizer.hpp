#pragma once

#include <array>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tablere/errors.hpp"

namespace tablere {

inline constexpr int kMaxTokens = 80;
inline constexpr const char* kPadToken = "[PAD]";
inline constexpr const char* kUnkToken = "[UNK]";
inline constexpr const char* kContinuationPrefix = "##";

/// Immutable WordPiece vocabulary. File format: UTF-8 text, one token per
/// line, line number = id. Line 0 must be the pad token.
class Vocab {
public:
    static Vocab from_tokens(std::vector<std::string> tokens) {
        if (tokens.empty()) {
            throw ConfigError("vocab: empty token list");
        }
        Vocab v;
        v.tokens_ = std::move(tokens);
        v.index_.reserve(v.tokens_.size());
        for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
            if (!v.index_.emplace(v.tokens_[i], static_cast<int>(i)).second) {
                throw ConfigError("vocab: duplicate token '" + v.tokens_[i] + "'");
            }
        }
        if (v.tokens_[0] != kPadToken) {
            throw ConfigError(std::string("vocab: line 0 must be the pad token ") + kPadToken);
        }
        const auto unk = v.index_.find(kUnkToken);
        if (unk == v.index_.end()) {
            throw ConfigError(std::string("vocab: missing unknown token ") + kUnkToken);
        }
        v.unk_id_ = unk->second;
        return v;
    }

    static Vocab load(const std::string& path) {
        std::ifstream in(path);
        if (!in) {
            throw ConfigError("vocab: cannot open '" + path + "'");
        }
        std::vector<std::string> tokens;
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') {
                line.pop_back();
            }
            tokens.push_back(line);
        }
        while (!tokens.empty() && tokens.back().empty()) {
            tokens.pop_back();
        }
        if (tokens.empty()) {
            throw ConfigError("vocab: file '" + path + "' is empty");
        }
        return from_tokens(std::move(tokens));
    }

    /// Token id, or -1 when absent.
    int id(std::string_view token) const {
        const auto it = index_.find(std::string(token));
        return it == index_.end() ? -1 : it->second;
    }

    const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
    std::size_t size() const { return tokens_.size(); }
    int pad_id() const { return 0; }
    int unk_id() const { return unk_id_; }

private:
    Vocab() = default;
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
    int unk_id_ = 1;
};

/// Fixed-length token-id sequence plus label and sample id.
struct EncodedSample {
    std::vector<int> token_ids; // exactly max_len entries, pad-filled
    int true_length = 0;
    int label = -1;
    std::uint64_t sample_id = 0;
};

namespace detail {

// Marker tokens deleted whole before the character sweep, compared
// case-insensitively.
inline const std::array<std::string_view, 10>& separator_markers() {
    static const std::array<std::string_view, 10> markers = {
        "<sep>", "[sep]", "<cls>", "[cls]", "<pad>",
        "[pad]", "<unk>", "[unk]", "<mask>", "[mask]"};
    return markers;
}

inline char ascii_lower(char c) {
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

inline bool ascii_alnum(char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

inline bool marker_at(const std::string& s, std::size_t pos, std::string_view marker) {
    if (pos + marker.size() > s.size()) {
        return false;
    }
    for (std::size_t i = 0; i < marker.size(); ++i) {
        if (ascii_lower(s[pos + i]) != marker[i]) {
            return false;
        }
    }
    return true;
}

} // namespace detail

/// Lowercases, deletes separator markers whole, and replaces every remaining
/// non-alphanumeric character by a space; runs of spaces collapse. Bytes
/// outside ASCII count as non-alphanumeric.
inline std::string clean_text(const std::string& raw) {
    std::string out;
    out.reserve(raw.size());
    std::size_t i = 0;
    while (i < raw.size()) {
        bool skipped = false;
        for (const std::string_view marker : detail::separator_markers()) {
            if (detail::marker_at(raw, i, marker)) {
                i += marker.size();
                skipped = true;
                break;
            }
        }
        if (skipped) {
            continue; // marker deleted whole, contributes nothing
        }
        const char c = raw[i++];
        if (detail::ascii_alnum(c)) {
            out.push_back(detail::ascii_lower(c));
        } else if (!out.empty() && out.back() != ' ') {
            out.push_back(' ');
        }
    }
    while (!out.empty() && out.back() == ' ') {
        out.pop_back();
    }
    return out;
}

/// Greedy longest-match-first WordPiece over pre-cleaned text. Words with no
/// full decomposition collapse to the single unknown id.
inline std::vector<int> wordpiece(const std::string& text, const Vocab& vocab) {
    if (vocab.size() == 0) {
        throw ConfigError("wordpiece: empty vocabulary");
    }
    std::vector<int> ids;
    std::istringstream words(text);
    std::string word;
    std::vector<int> pieces;
    while (words >> word) {
        pieces.clear();
        bool ok = true;
        std::size_t start = 0;
        while (start < word.size()) {
            int found = -1;
            std::size_t end = word.size();
            for (; end > start; --end) {
                std::string candidate = word.substr(start, end - start);
                if (start > 0) {
                    candidate = kContinuationPrefix + candidate;
                }
                const int id = vocab.id(candidate);
                if (id >= 0) {
                    found = id;
                    break;
                }
            }
            if (found < 0) {
                ok = false;
                break;
            }
            pieces.push_back(found);
            start = end;
        }
        if (ok) {
            ids.insert(ids.end(), pieces.begin(), pieces.end());
        } else {
            ids.push_back(vocab.unk_id());
        }
    }
    return ids;
}

/// Cleans and joins the ordered fields, tokenizes, truncates to max_len and
/// right-pads with the pad id. Label and sample id are left for the caller.
inline EncodedSample encode(const std::vector<std::string>& fields, const Vocab& vocab,
                            int max_len = kMaxTokens) {
    std::string joined;
    for (const std::string& field : fields) {
        const std::string cleaned = clean_text(field);
        if (cleaned.empty()) {
            continue;
        }
        if (!joined.empty()) {
            joined.push_back(' ');
        }
        joined += cleaned;
    }
    std::vector<int> ids = wordpiece(joined, vocab);
    EncodedSample sample;
    if (ids.size() > static_cast<std::size_t>(max_len)) {
        ids.resize(static_cast<std::size_t>(max_len));
    }
    sample.true_length = static_cast<int>(ids.size());
    ids.resize(static_cast<std::size_t>(max_len), vocab.pad_id());
    sample.token_ids = std::move(ids);
    return sample;
}

// ---------------------------------------------------------------------------
// Encoded-corpus cache: one record per line, tab-separated
//   sample_id <TAB> label <TAB> true_length <TAB> space-separated ids
// ---------------------------------------------------------------------------

inline void write_corpus_cache(std::ostream& os, const std::vector<EncodedSample>& samples) {
    for (const EncodedSample& s : samples) {
        os << s.sample_id << '\t' << s.label << '\t' << s.true_length << '\t';
        for (std::size_t i = 0; i < s.token_ids.size(); ++i) {
            if (i) {
                os << ' ';
            }
            os << s.token_ids[i];
        }
        os << '\n';
    }
}

inline void write_corpus_cache(const std::string& path, const std::vector<EncodedSample>& samples) {
    std::ofstream out(path);
    if (!out) {
        throw DataError("corpus cache: cannot write '" + path + "'");
    }
    write_corpus_cache(out, samples);
}

inline std::vector<EncodedSample> read_corpus_cache(std::istream& is) {
    std::vector<EncodedSample> samples;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        std::istringstream ls(line);
        EncodedSample s;
        long long label = 0;
        long long true_length = 0;
        if (!(ls >> s.sample_id >> label >> true_length)) {
            throw FormatError("corpus cache: malformed record at line " + std::to_string(lineno));
        }
        s.label = static_cast<int>(label);
        s.true_length = static_cast<int>(true_length);
        int id = 0;
        while (ls >> id) {
            s.token_ids.push_back(id);
        }
        if (s.token_ids.empty() ||
            s.true_length > static_cast<int>(s.token_ids.size()) || s.true_length < 0) {
            throw FormatError("corpus cache: inconsistent lengths at line " +
                              std::to_string(lineno));
        }
        samples.push_back(std::move(s));
    }
    return samples;
}

inline std::vector<EncodedSample> read_corpus_cache(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("corpus cache: cannot open '" + path + "'");
    }
    return read_corpus_cache(in);
}

} // namespace tablere
