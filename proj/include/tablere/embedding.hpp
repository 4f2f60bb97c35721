#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tablere/binio.hpp"
#include "tablere/errors.hpp"
#include "tablere/rng.hpp"
#include "tablere/tensor.hpp"
#include "tablere/tokenizer.hpp"

namespace tablere {

/// Per-sample token-embedding matrix (max_len x dim) plus label.
struct EmbeddedSample {
    Tensor matrix;
    int label = -1;
    std::uint64_t sample_id = 0;
};

// ---------------------------------------------------------------------------
// TBRE embedding import file (bit-exact layout, little endian):
//   magic "TBRE" | u8 version 0x01 | u32 record count | u16 dim
//   per record: u64 sample_id | u16 stored length L | L*dim f32 values
// Rows beyond the stored length are zero at lookup time.
// ---------------------------------------------------------------------------

inline constexpr char kEmbeddingMagic[4] = {'T', 'B', 'R', 'E'};
inline constexpr std::uint8_t kEmbeddingVersion = 0x01;

struct EmbeddingRecordView {
    std::uint64_t sample_id;
    std::uint16_t length;
};

/// Random-access index over a TBRE file, fully loaded into memory.
class EmbeddingStore {
public:
    static EmbeddingStore load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) {
            throw FormatError("embedding file: cannot open '" + path + "'");
        }
        const std::string what = "embedding file '" + path + "'";
        std::uint64_t off = 0;

        char magic[4];
        for (char& m : magic) {
            m = static_cast<char>(binio::get_u8(in, what, off));
            ++off;
        }
        if (std::memcmp(magic, kEmbeddingMagic, 4) != 0) {
            throw FormatError(what + ": bad magic");
        }
        const std::uint8_t version = binio::get_u8(in, what, off);
        off += 1;
        if (version != kEmbeddingVersion) {
            throw FormatError(what + ": unsupported version " + std::to_string(version));
        }
        const std::uint32_t count = binio::get_u32(in, what, off);
        off += 4;
        const std::uint16_t dim = binio::get_u16(in, what, off);
        off += 2;
        if (dim == 0) {
            throw FormatError(what + ": zero embedding dimension");
        }

        EmbeddingStore store;
        store.dim_ = dim;
        for (std::uint32_t r = 0; r < count; ++r) {
            const std::uint64_t id = binio::get_u64(in, what, off);
            off += 8;
            const std::uint16_t len = binio::get_u16(in, what, off);
            off += 2;
            if (len > kMaxTokens) {
                throw FormatError(what + ": record " + std::to_string(id) + " stored length " +
                                  std::to_string(len) + " exceeds " +
                                  std::to_string(kMaxTokens));
            }
            const std::size_t start = store.values_.size();
            for (std::size_t i = 0; i < static_cast<std::size_t>(len) * dim; ++i) {
                store.values_.push_back(binio::get_f32(in, what, off));
                off += 4;
            }
            if (!store.index_.emplace(id, Entry{start, len}).second) {
                throw FormatError(what + ": duplicate sample id " + std::to_string(id));
            }
            store.order_.push_back({id, len});
        }
        if (in.peek() != std::char_traits<char>::eof()) {
            throw FormatError(what + ": trailing bytes after last record at offset " +
                              std::to_string(off));
        }
        return store;
    }

    std::size_t dim() const { return dim_; }
    std::size_t count() const { return index_.size(); }
    bool contains(std::uint64_t sample_id) const { return index_.count(sample_id) != 0; }
    const std::vector<EmbeddingRecordView>& records() const { return order_; }

    /// Returns a max_len x dim matrix; rows past the stored length are zero.
    Tensor lookup(std::uint64_t sample_id, std::size_t max_len = kMaxTokens) const {
        const auto it = index_.find(sample_id);
        if (it == index_.end()) {
            throw DataError("embedding lookup: unknown sample id " + std::to_string(sample_id));
        }
        const Entry& e = it->second;
        Tensor m({max_len, dim_});
        const std::size_t rows = std::min<std::size_t>(e.length, max_len);
        std::copy(values_.begin() + static_cast<std::ptrdiff_t>(e.start),
                  values_.begin() + static_cast<std::ptrdiff_t>(e.start + rows * dim_),
                  m.data.begin());
        return m;
    }

private:
    struct Entry {
        std::size_t start;
        std::uint16_t length;
    };
    std::size_t dim_ = 0;
    std::vector<float> values_;
    std::unordered_map<std::uint64_t, Entry> index_;
    std::vector<EmbeddingRecordView> order_;
};

/// Writes a TBRE file. Each record's tensor must be rows x dim with
/// rows <= 80.
inline void write_embedding_file(const std::string& path, std::size_t dim,
                                 const std::vector<std::pair<std::uint64_t, Tensor>>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("embedding file: cannot write '" + path + "'");
    }
    out.write(kEmbeddingMagic, 4);
    binio::put_u8(out, kEmbeddingVersion);
    binio::put_u32(out, static_cast<std::uint32_t>(records.size()));
    binio::put_u16(out, static_cast<std::uint16_t>(dim));
    for (const auto& [id, tensor] : records) {
        if (tensor.rank() != 2 || tensor.shape[1] != dim) {
            throw ShapeError("embedding file: record " + std::to_string(id) +
                             " is not rows x dim");
        }
        const std::size_t rows = tensor.shape[0];
        if (rows > kMaxTokens) {
            throw ShapeError("embedding file: record " + std::to_string(id) + " has " +
                             std::to_string(rows) + " rows, limit is " +
                             std::to_string(kMaxTokens));
        }
        binio::put_u64(out, id);
        binio::put_u16(out, static_cast<std::uint16_t>(rows));
        for (const float v : tensor.data) {
            binio::put_f32(out, v);
        }
    }
    if (!out) {
        throw DataError("embedding file: write failed for '" + path + "'");
    }
}

// ---------------------------------------------------------------------------
// Seeded lookup-table provider: a deterministic per-token-id vector table,
// used as a desk-scale stand-in for frozen contextual embeddings. The pad
// row (id 0) is all zeros.
// ---------------------------------------------------------------------------

class TableLookupProvider {
public:
    TableLookupProvider(std::size_t vocab_size, std::size_t dim, std::uint64_t seed)
        : vocab_size_(vocab_size), dim_(dim), table_(vocab_size * dim) {
        Rng rng(seed);
        for (float& v : table_) {
            v = static_cast<float>(rng.uniform(-1.0, 1.0));
        }
        std::fill(table_.begin(), table_.begin() + static_cast<std::ptrdiff_t>(dim_), 0.0f);
    }

    std::size_t dim() const { return dim_; }
    std::size_t vocab_size() const { return vocab_size_; }

    const float* row(int token_id) const {
        if (token_id < 0 || static_cast<std::size_t>(token_id) >= vocab_size_) {
            throw DataError("embedding table: token id " + std::to_string(token_id) +
                            " outside vocabulary of size " + std::to_string(vocab_size_));
        }
        return &table_[static_cast<std::size_t>(token_id) * dim_];
    }

    Tensor embed(const EncodedSample& sample) const {
        Tensor m({sample.token_ids.size(), dim_});
        for (std::size_t t = 0; t < sample.token_ids.size(); ++t) {
            const float* src = row(sample.token_ids[t]);
            std::copy(src, src + dim_, &m.data[t * dim_]);
        }
        return m;
    }

private:
    std::size_t vocab_size_;
    std::size_t dim_;
    std::vector<float> table_;
};

/// Uniform per-sample embedding source used by training and evaluation.
struct EmbeddingSource {
    std::size_t dim = 0;
    std::function<Tensor(const EncodedSample&)> embed;

    EmbeddedSample embed_sample(const EncodedSample& s) const {
        return {embed(s), s.label, s.sample_id};
    }

    static EmbeddingSource from_store(const EmbeddingStore& store, std::size_t max_len) {
        EmbeddingSource src;
        src.dim = store.dim();
        src.embed = [&store, max_len](const EncodedSample& s) {
            return store.lookup(s.sample_id, max_len);
        };
        return src;
    }

    static EmbeddingSource from_table(const TableLookupProvider& table) {
        EmbeddingSource src;
        src.dim = table.dim();
        src.embed = [&table](const EncodedSample& s) { return table.embed(s); };
        return src;
    }
};

} // namespace tablere
