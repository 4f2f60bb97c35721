#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tablere/dataset.hpp"
#include "tablere/rng.hpp"
#include "tablere/tokenizer.hpp"

namespace tablere {

/// Synthetic corpus with class-correlated token patterns, for demos and
/// verification runs. Token ids: 0 pad, 1 unknown, 2..19 shared noise, then
/// a band of 8 ids per class. Every sample opens with its class band in
/// order (mirroring entity-first field order); later positions mix band and
/// noise tokens and lengths vary, so draws differ but classes stay separable
/// through any deterministic per-token embedding.
struct SyntheticSpec {
    std::size_t classes = 29;
    std::size_t per_class = 10;
    std::uint64_t seed = 1;
    std::uint64_t first_sample_id = 0;
    int max_len = kMaxTokens;
};

inline std::size_t synthetic_vocab_size(std::size_t classes) {
    return 20 + 8 * classes;
}

inline Corpus make_synthetic_corpus(const SyntheticSpec& spec) {
    Rng rng(mix_seed(spec.seed, 0x5a17u));
    Corpus corpus;
    std::vector<std::string> names;
    names.reserve(spec.classes);
    for (std::size_t k = 0; k < spec.classes; ++k) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "rel-%02u", static_cast<unsigned>(k));
        names.emplace_back(buf);
    }
    corpus.labels = LabelMap::from_names(std::move(names));

    std::uint64_t next_id = spec.first_sample_id;
    for (std::size_t k = 0; k < spec.classes; ++k) {
        const int band_start = static_cast<int>(20 + 8 * k);
        for (std::size_t s = 0; s < spec.per_class; ++s) {
            EncodedSample sample;
            sample.sample_id = next_id++;
            sample.label = static_cast<int>(k);
            const int length = 40 + static_cast<int>(rng.below(9));
            sample.true_length = std::min(length, spec.max_len);
            sample.token_ids.assign(static_cast<std::size_t>(spec.max_len), 0);
            for (int t = 0; t < sample.true_length; ++t) {
                if (t < 16) {
                    sample.token_ids[static_cast<std::size_t>(t)] = band_start + t % 8;
                } else if (rng.below(10) < 8) {
                    sample.token_ids[static_cast<std::size_t>(t)] =
                        band_start + static_cast<int>(rng.below(8));
                } else {
                    sample.token_ids[static_cast<std::size_t>(t)] =
                        2 + static_cast<int>(rng.below(18));
                }
            }
            corpus.samples.push_back(std::move(sample));
        }
    }
    corpus.table_count = corpus.samples.size();
    return corpus;
}

} // namespace tablere
