#include "support.hpp"

using namespace tablere;

namespace {

std::vector<std::pair<std::uint64_t, Tensor>> random_records(std::size_t count, std::size_t dim,
                                                             std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::pair<std::uint64_t, Tensor>> records;
    for (std::size_t r = 0; r < count; ++r) {
        const std::size_t rows = 1 + rng.below(kMaxTokens);
        Tensor t({rows, dim});
        for (float& v : t.data) {
            v = static_cast<float>(rng.uniform(-2, 2));
        }
        records.emplace_back(100 + r * 7, std::move(t));
    }
    return records;
}

} // namespace

TEST_CASE("embedding file with zero records loads to an empty index") {
    test_support::TempDir dir("tbre");
    const std::string path = dir.str("empty.tbre");
    write_embedding_file(path, 16, {});
    const EmbeddingStore store = EmbeddingStore::load(path);
    CHECK(store.count() == 0);
    CHECK(store.dim() == 16);
    CHECK(!store.contains(1));
    CHECK_THROWS_AS(store.lookup(1), DataError);
}

TEST_CASE("lookup pads rows beyond the stored length with zeros") {
    test_support::TempDir dir("tbre");
    const std::string path = dir.str("short.tbre");
    Tensor stored({5, 4});
    for (std::size_t i = 0; i < stored.size(); ++i) {
        stored[i] = static_cast<float>(i) + 1.0f;
    }
    write_embedding_file(path, 4, {{42, stored}});

    const EmbeddingStore store = EmbeddingStore::load(path);
    const Tensor m = store.lookup(42);
    REQUIRE(m.shape == std::vector<std::size_t>{80, 4});
    for (std::size_t t = 0; t < 5; ++t) {
        for (std::size_t c = 0; c < 4; ++c) {
            CHECK(m.at(t, c) == stored.at(t, c));
        }
    }
    for (std::size_t t = 5; t < 80; ++t) {
        for (std::size_t c = 0; c < 4; ++c) {
            CHECK(m.at(t, c) == 0.0f);
        }
    }
}

TEST_CASE("embedding file round-trips random matrices bit-identically") {
    test_support::TempDir dir("tbre");
    const std::string path = dir.str("roundtrip.tbre");
    const auto records = random_records(12, 8, 77);
    write_embedding_file(path, 8, records);
    const EmbeddingStore store = EmbeddingStore::load(path);
    REQUIRE(store.count() == records.size());
    for (const auto& [id, original] : records) {
        const Tensor loaded = store.lookup(id);
        const std::size_t rows = original.shape[0];
        for (std::size_t t = 0; t < rows; ++t) {
            for (std::size_t c = 0; c < 8; ++c) {
                CHECK(loaded.at(t, c) == original.at(t, c));
            }
        }
    }
}

TEST_CASE("embedding file detects corruption of its envelope") {
    test_support::TempDir dir("tbre");
    const std::string path = dir.str("bad.tbre");
    write_embedding_file(path, 4, random_records(2, 4, 5));

    auto bytes = test_support::read_file_bytes(path);

    SECTION("bad magic") {
        auto broken = bytes;
        broken[0] = 'X';
        const std::string bad = dir.str("magic.tbre");
        std::ofstream(bad, std::ios::binary)
            .write(reinterpret_cast<const char*>(broken.data()),
                   static_cast<std::streamsize>(broken.size()));
        CHECK_THROWS_WITH(EmbeddingStore::load(bad),
                          Catch::Matchers::ContainsSubstring("magic"));
    }
    SECTION("bad version") {
        auto broken = bytes;
        broken[4] = 0x02;
        const std::string bad = dir.str("version.tbre");
        std::ofstream(bad, std::ios::binary)
            .write(reinterpret_cast<const char*>(broken.data()),
                   static_cast<std::streamsize>(broken.size()));
        CHECK_THROWS_WITH(EmbeddingStore::load(bad),
                          Catch::Matchers::ContainsSubstring("version"));
    }
    SECTION("truncated record reports a byte offset") {
        auto broken = bytes;
        broken.resize(broken.size() - 3);
        const std::string bad = dir.str("trunc.tbre");
        std::ofstream(bad, std::ios::binary)
            .write(reinterpret_cast<const char*>(broken.data()),
                   static_cast<std::streamsize>(broken.size()));
        CHECK_THROWS_WITH(EmbeddingStore::load(bad),
                          Catch::Matchers::ContainsSubstring("byte offset"));
    }
}

TEST_CASE("embedding file rejects duplicate sample ids") {
    test_support::TempDir dir("tbre");
    const std::string path = dir.str("dup.tbre");
    Tensor t({2, 3});
    write_embedding_file(path, 3, {{9, t}, {9, t}});
    CHECK_THROWS_WITH(EmbeddingStore::load(path),
                      Catch::Matchers::ContainsSubstring("duplicate"));
}

TEST_CASE("table provider: pad id is always the zero vector") {
    const TableLookupProvider table(50, 8, 4);
    const float* pad = table.row(0);
    for (std::size_t c = 0; c < 8; ++c) {
        CHECK(pad[c] == 0.0f);
    }
}

TEST_CASE("table provider is deterministic per seed and id") {
    const TableLookupProvider a(50, 8, 4);
    const TableLookupProvider b(50, 8, 4);
    for (int id = 0; id < 50; ++id) {
        for (std::size_t c = 0; c < 8; ++c) {
            CHECK(a.row(id)[c] == b.row(id)[c]);
        }
    }
}

TEST_CASE("table provider: two seeds produce different tables") {
    const TableLookupProvider a(10, 8, 1);
    const TableLookupProvider b(10, 8, 2);
    bool any_differ = false;
    for (int id = 0; id < 10 && !any_differ; ++id) {
        for (std::size_t c = 0; c < 8; ++c) {
            if (a.row(id)[c] != b.row(id)[c]) {
                any_differ = true;
                break;
            }
        }
    }
    CHECK(any_differ);
}

TEST_CASE("table provider embeds an encoded sample row by row") {
    const TableLookupProvider table(30, 6, 9);
    EncodedSample s;
    s.token_ids = {5, 7, 0, 0};
    s.true_length = 2;
    const Tensor m = table.embed(s);
    REQUIRE(m.shape == std::vector<std::size_t>{4, 6});
    for (std::size_t c = 0; c < 6; ++c) {
        CHECK(m.at(0, c) == table.row(5)[c]);
        CHECK(m.at(1, c) == table.row(7)[c]);
        CHECK(m.at(2, c) == 0.0f); // pad rows stay zero
        CHECK(m.at(3, c) == 0.0f);
    }

    EncodedSample bad;
    bad.token_ids = {31};
    CHECK_THROWS_AS(table.embed(bad), DataError);
}
