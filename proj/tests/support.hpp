#pragma once

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "tablere/tablere.hpp"

namespace test_support {

template <typename T>
tablere::TensorT<T> tensor2(std::size_t rows, std::size_t cols, std::vector<T> values) {
    return tablere::TensorT<T>::from({rows, cols}, std::move(values));
}

template <typename T>
tablere::TensorT<T> tensor1(std::vector<T> values) {
    const std::size_t n = values.size();
    return tablere::TensorT<T>::from({n}, std::move(values));
}

/// Unique scratch directory, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("tablere_test_" + tag + "_" + std::to_string(++counter) + "_" +
                 std::to_string(static_cast<unsigned>(::getpid())));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::string str(const std::string& child = "") const {
        return child.empty() ? path_.string() : (path_ / child).string();
    }

private:
    std::filesystem::path path_;
};

/// Crafted 20-token vocabulary for tokenizer oracles.
inline tablere::Vocab test_vocab() {
    return tablere::Vocab::from_tokens({
        "[PAD]", "[UNK]", "play", "##ing", "##ed", "table", "##s", "nishan", "e", "haider",
        "raja", "muhammad", "sarwar", "name", "of", "the", "recipient", "1", "##0", "award",
    });
}

inline std::vector<unsigned char> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    return bytes;
}

} // namespace test_support
