#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "tablere/autograd.hpp"
#include "tablere/binio.hpp"
#include "tablere/errors.hpp"
#include "tablere/ops.hpp"
#include "tablere/rng.hpp"

namespace tablere {

enum class ModelKind : std::uint8_t { baseline = 0, cnn_lstm = 1, cnn_bilstm = 2, bilstm_only = 3 };

inline const char* to_string(ModelKind k) {
    switch (k) {
    case ModelKind::baseline:
        return "baseline";
    case ModelKind::cnn_lstm:
        return "cnn-lstm";
    case ModelKind::cnn_bilstm:
        return "cnn-bilstm";
    case ModelKind::bilstm_only:
        return "bilstm-only";
    }
    return "?";
}

inline ModelKind model_kind_from(const std::string& s) {
    if (s == "baseline") {
        return ModelKind::baseline;
    }
    if (s == "cnn-lstm") {
        return ModelKind::cnn_lstm;
    }
    if (s == "cnn-bilstm") {
        return ModelKind::cnn_bilstm;
    }
    if (s == "bilstm-only") {
        return ModelKind::bilstm_only;
    }
    throw ConfigError("unknown preset '" + s +
                      "' (expected baseline, cnn-lstm, cnn-bilstm or bilstm-only)");
}

/// Architecture selector plus hyperparameters. Presets carry the reference
/// configurations; embed_dim/classes/max_len may be overridden for reduced
/// setups.
struct ModelSpec {
    ModelKind kind = ModelKind::cnn_bilstm;
    int max_len = 80;
    int embed_dim = 768;
    int filters = 8;
    int kernel = 5;
    int units = 8;
    int classes = 29;
    float dropout = 0.2f;

    static ModelSpec preset(ModelKind kind) {
        ModelSpec s;
        s.kind = kind;
        if (kind == ModelKind::baseline) {
            s.max_len = 50;
            s.filters = 0;
            s.kernel = 0;
            s.units = 1;
            s.dropout = 0.0f;
        } else if (kind == ModelKind::bilstm_only) {
            s.filters = 0;
            s.kernel = 0;
        }
        return s;
    }

    bool has_conv() const { return kind == ModelKind::cnn_lstm || kind == ModelKind::cnn_bilstm; }
    bool bidirectional() const {
        return kind == ModelKind::cnn_bilstm || kind == ModelKind::bilstm_only;
    }

    int lstm_input_dim() const { return has_conv() ? filters : embed_dim; }
    int sequence_after_pool() const { return has_conv() ? max_len / 2 : max_len; }
    int recurrent_width() const { return bidirectional() ? 2 * units : units; }
    int flatten_dim() const { return sequence_after_pool() * recurrent_width(); }

    void validate() const {
        if (max_len < 1 || embed_dim < 1 || units < 1 || classes < 2) {
            throw ConfigError("model spec: dimensions must be positive and classes >= 2");
        }
        if (dropout < 0.0f || dropout >= 1.0f) {
            throw ConfigError("model spec: dropout must be in [0, 1)");
        }
        if (has_conv()) {
            if (filters < 1 || kernel < 1) {
                throw ConfigError("model spec: convolutional presets need filters and kernel");
            }
            if (max_len % 2 != 0) {
                throw ConfigError("model spec: max_len must be even for the pooling layer");
            }
        } else if (filters != 0 || kernel != 0) {
            throw ConfigError("model spec: non-convolutional presets must not carry filters");
        }
        if (kind == ModelKind::baseline && (units != 1 || dropout != 0.0f)) {
            throw ConfigError("model spec: baseline is fixed to 1 unit and no dropout");
        }
    }
};

/// Closed-form trainable-parameter count for a spec.
inline std::size_t param_count(const ModelSpec& spec) {
    const auto f = static_cast<std::size_t>(spec.filters);
    const auto k = static_cast<std::size_t>(spec.kernel);
    const auto d = static_cast<std::size_t>(spec.embed_dim);
    const auto u = static_cast<std::size_t>(spec.units);
    const auto c = static_cast<std::size_t>(spec.classes);

    std::size_t total = 0;
    if (spec.has_conv()) {
        total += ConvParamsT<float>::count(f, k, d);
    }
    const auto lstm_in = static_cast<std::size_t>(spec.lstm_input_dim());
    total += LstmParamsT<float>::count(u, lstm_in) * (spec.bidirectional() ? 2 : 1);
    const auto flat = static_cast<std::size_t>(spec.flatten_dim());
    total += flat * c + c;
    return total;
}

struct ParamCountBreakdown {
    std::vector<std::pair<std::string, std::size_t>> layers;
    std::size_t total = 0;
};

inline ParamCountBreakdown param_count_breakdown(const ModelSpec& spec) {
    ParamCountBreakdown b;
    if (spec.has_conv()) {
        b.layers.emplace_back("conv1d",
                              ConvParamsT<float>::count(static_cast<std::size_t>(spec.filters),
                                                        static_cast<std::size_t>(spec.kernel),
                                                        static_cast<std::size_t>(spec.embed_dim)));
    }
    const std::size_t per_dir =
        LstmParamsT<float>::count(static_cast<std::size_t>(spec.units),
                                  static_cast<std::size_t>(spec.lstm_input_dim()));
    if (spec.bidirectional()) {
        b.layers.emplace_back("lstm_forward", per_dir);
        b.layers.emplace_back("lstm_backward", per_dir);
    } else {
        b.layers.emplace_back("lstm", per_dir);
    }
    const auto flat = static_cast<std::size_t>(spec.flatten_dim());
    const auto c = static_cast<std::size_t>(spec.classes);
    b.layers.emplace_back("dense", flat * c + c);
    for (const auto& [name, count] : b.layers) {
        b.total += count;
    }
    return b;
}

namespace detail {

template <typename T>
inline void fill_glorot_uniform(TensorT<T>& t, std::size_t fan_in, std::size_t fan_out,
                                Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (T& v : t.data) {
        v = static_cast<T>(rng.uniform(-limit, limit));
    }
}

template <typename T>
inline void fill_recurrent_uniform(TensorT<T>& t, std::size_t units, Rng& rng) {
    const double limit = 1.0 / std::sqrt(static_cast<double>(units));
    for (T& v : t.data) {
        v = static_cast<T>(rng.uniform(-limit, limit));
    }
}

} // namespace detail

/// A built architecture: the layer stack of one preset with named parameter
/// tensors. Forward comes in a taped flavor (training) and a pure flavor
/// (inference); the taped graph applies dropout only in train mode.
template <typename T>
struct ModelT {
    ModelSpec spec;
    ConvParamsT<T> conv;       // engaged when spec.has_conv()
    LstmParamsT<T> lstm_fwd;
    LstmParamsT<T> lstm_bwd;   // engaged when spec.bidirectional()
    TensorT<T> dense_w;
    TensorT<T> dense_b;

    static ModelT build(const ModelSpec& spec, std::uint64_t seed) {
        spec.validate();
        ModelT m;
        m.spec = spec;
        Rng rng(mix_seed(seed, 0x7ab1e0000ULL));
        const auto u = static_cast<std::size_t>(spec.units);

        if (spec.has_conv()) {
            const auto f = static_cast<std::size_t>(spec.filters);
            const auto k = static_cast<std::size_t>(spec.kernel);
            const auto d = static_cast<std::size_t>(spec.embed_dim);
            m.conv.filters = TensorT<T>({f, k, d});
            m.conv.bias = TensorT<T>({f});
            detail::fill_glorot_uniform(m.conv.filters, k * d, k * f, rng);
        }

        const auto init_lstm = [&](LstmParamsT<T>& p) {
            const auto in_dim = static_cast<std::size_t>(spec.lstm_input_dim());
            for (std::size_t g = 0; g < 4; ++g) {
                p.w_in[g] = TensorT<T>({u, in_dim});
                p.w_rec[g] = TensorT<T>({u, u});
                p.bias[g] = TensorT<T>({u});
                detail::fill_glorot_uniform(p.w_in[g], in_dim, u, rng);
                detail::fill_recurrent_uniform(p.w_rec[g], u, rng);
            }
            // forget-gate bias starts at one
            std::fill(p.bias[gate::forget].data.begin(), p.bias[gate::forget].data.end(), T(1));
        };
        init_lstm(m.lstm_fwd);
        if (spec.bidirectional()) {
            init_lstm(m.lstm_bwd);
        }

        const auto flat = static_cast<std::size_t>(spec.flatten_dim());
        const auto c = static_cast<std::size_t>(spec.classes);
        m.dense_w = TensorT<T>({flat, c});
        m.dense_b = TensorT<T>({c});
        detail::fill_glorot_uniform(m.dense_w, flat, c, rng);
        return m;
    }

    std::vector<std::pair<std::string, TensorT<T>*>> named_parameters() {
        std::vector<std::pair<std::string, TensorT<T>*>> out;
        if (spec.has_conv()) {
            out.emplace_back("conv.filters", &conv.filters);
            out.emplace_back("conv.bias", &conv.bias);
        }
        const auto add_lstm = [&out](const std::string& prefix, LstmParamsT<T>& p) {
            for (std::size_t g = 0; g < 4; ++g) {
                out.emplace_back(prefix + ".w_in." + gate::names[g], &p.w_in[g]);
                out.emplace_back(prefix + ".w_rec." + gate::names[g], &p.w_rec[g]);
                out.emplace_back(prefix + ".bias." + gate::names[g], &p.bias[g]);
            }
        };
        add_lstm("lstm_fwd", lstm_fwd);
        if (spec.bidirectional()) {
            add_lstm("lstm_bwd", lstm_bwd);
        }
        out.emplace_back("dense.w", &dense_w);
        out.emplace_back("dense.b", &dense_b);
        return out;
    }

    std::vector<TensorT<T>*> parameters() {
        std::vector<TensorT<T>*> out;
        for (auto& [name, t] : named_parameters()) {
            out.push_back(t);
        }
        return out;
    }

    std::size_t parameter_elements() {
        std::size_t n = 0;
        for (TensorT<T>* t : parameters()) {
            n += t->size();
        }
        return n;
    }

    void ensure_grads() {
        for (TensorT<T>* t : parameters()) {
            t->ensure_grad();
        }
    }

    void zero_grads() {
        for (TensorT<T>* t : parameters()) {
            t->zero_grad();
        }
    }

    void check_input(const TensorT<T>& x) const {
        const std::vector<std::size_t> expect{static_cast<std::size_t>(spec.max_len),
                                              static_cast<std::size_t>(spec.embed_dim)};
        if (x.shape != expect) {
            throw ShapeError("model forward: input " + x.shape_str() + " does not match spec " +
                             std::to_string(spec.max_len) + "x" + std::to_string(spec.embed_dim));
        }
    }

    /// Taped forward for one sample; returns the logits node (softmax lives
    /// in the loss and at explicit inference).
    TensorT<T>* forward(TapeT<T>& tape, TensorT<T>* x, RunMode mode, Rng& dropout_rng) {
        check_input(*x);
        TensorT<T>* h = x;
        if (spec.has_conv()) {
            h = conv1d_same(tape, h, conv);
            h = relu(tape, h);
            h = maxpool1d(tape, h);
        }
        if (spec.bidirectional()) {
            h = bilstm(tape, h, lstm_fwd, lstm_bwd);
        } else {
            h = lstm_layer(tape, h, lstm_fwd, Direction::forward);
        }
        if (spec.dropout > 0.0f) {
            h = dropout(tape, h, spec.dropout, mode, dropout_rng);
        }
        h = flatten(tape, h);
        return dense(tape, h, dense_w, dense_b);
    }

    /// Pure inference forward (eval mode, dropout is the identity).
    TensorT<T> forward_eval(const TensorT<T>& x) const {
        check_input(x);
        TensorT<T> h;
        if (spec.has_conv()) {
            h = maxpool1d(relu(conv1d_same(x, conv)));
        }
        const TensorT<T>& seq = spec.has_conv() ? h : x;
        TensorT<T> r = spec.bidirectional() ? bilstm(seq, lstm_fwd, lstm_bwd)
                                            : lstm_layer(seq, lstm_fwd, Direction::forward);
        TensorT<T> flat = TensorT<T>::from({r.size()}, r.data);
        return dense(flat, dense_w, dense_b);
    }
};

using Model = ModelT<float>;

// ---------------------------------------------------------------------------
// TBMD model file (little endian):
//   magic "TBMD" | u8 version 0x01 | payload | u32 CRC-32(payload)
// payload:
//   u8 kind | u32 max_len | u32 embed_dim | u32 filters | u32 kernel
//   | u32 units | u32 classes | f32 dropout | u32 tensor count
//   per tensor: u16 name length | name | u8 rank | u32 dims[rank] | f32 data
// ---------------------------------------------------------------------------

inline constexpr char kModelMagic[4] = {'T', 'B', 'M', 'D'};
inline constexpr std::uint8_t kModelVersion = 0x01;

inline void save_model(Model& model, const std::string& path) {
    std::ostringstream payload(std::ios::binary);
    binio::put_u8(payload, static_cast<std::uint8_t>(model.spec.kind));
    binio::put_u32(payload, static_cast<std::uint32_t>(model.spec.max_len));
    binio::put_u32(payload, static_cast<std::uint32_t>(model.spec.embed_dim));
    binio::put_u32(payload, static_cast<std::uint32_t>(model.spec.filters));
    binio::put_u32(payload, static_cast<std::uint32_t>(model.spec.kernel));
    binio::put_u32(payload, static_cast<std::uint32_t>(model.spec.units));
    binio::put_u32(payload, static_cast<std::uint32_t>(model.spec.classes));
    binio::put_f32(payload, model.spec.dropout);

    const auto named = model.named_parameters();
    binio::put_u32(payload, static_cast<std::uint32_t>(named.size()));
    for (const auto& [name, tensor] : named) {
        binio::put_u16(payload, static_cast<std::uint16_t>(name.size()));
        payload.write(name.data(), static_cast<std::streamsize>(name.size()));
        binio::put_u8(payload, static_cast<std::uint8_t>(tensor->rank()));
        for (const std::size_t d : tensor->shape) {
            binio::put_u32(payload, static_cast<std::uint32_t>(d));
        }
        for (const float v : tensor->data) {
            binio::put_f32(payload, v);
        }
    }

    const std::string bytes = payload.str();
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("model file: cannot write '" + path + "'");
    }
    out.write(kModelMagic, 4);
    binio::put_u8(out, kModelVersion);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    binio::put_u32(out, binio::Crc32::of(bytes.data(), bytes.size()));
    if (!out) {
        throw DataError("model file: write failed for '" + path + "'");
    }
}

inline Model load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError("model file: cannot open '" + path + "'");
    }
    std::ostringstream buf(std::ios::binary);
    buf << in.rdbuf();
    const std::string bytes = buf.str();
    const std::string what = "model file '" + path + "'";
    if (bytes.size() < 9 || std::memcmp(bytes.data(), kModelMagic, 4) != 0) {
        throw FormatError(what + ": bad magic");
    }
    if (static_cast<std::uint8_t>(bytes[4]) != kModelVersion) {
        throw FormatError(what + ": unsupported version");
    }
    const std::size_t payload_len = bytes.size() - 9;
    const std::uint32_t stored_crc =
        static_cast<std::uint8_t>(bytes[bytes.size() - 4]) |
        (static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes[bytes.size() - 3])) << 8) |
        (static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes[bytes.size() - 2])) << 16) |
        (static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes[bytes.size() - 1])) << 24);
    if (binio::Crc32::of(bytes.data() + 5, payload_len) != stored_crc) {
        throw FormatError(what + ": checksum mismatch, payload corrupted");
    }

    std::istringstream is(bytes.substr(5, payload_len), std::ios::binary);
    std::uint64_t off = 5;
    const auto u8 = [&] { const auto v = binio::get_u8(is, what, off); off += 1; return v; };
    const auto u16 = [&] { const auto v = binio::get_u16(is, what, off); off += 2; return v; };
    const auto u32 = [&] { const auto v = binio::get_u32(is, what, off); off += 4; return v; };
    const auto f32 = [&] { const auto v = binio::get_f32(is, what, off); off += 4; return v; };

    ModelSpec spec;
    const std::uint8_t kind = u8();
    if (kind > static_cast<std::uint8_t>(ModelKind::bilstm_only)) {
        throw FormatError(what + ": unknown model kind " + std::to_string(kind));
    }
    spec.kind = static_cast<ModelKind>(kind);
    spec.max_len = static_cast<int>(u32());
    spec.embed_dim = static_cast<int>(u32());
    spec.filters = static_cast<int>(u32());
    spec.kernel = static_cast<int>(u32());
    spec.units = static_cast<int>(u32());
    spec.classes = static_cast<int>(u32());
    spec.dropout = f32();
    spec.validate();

    Model model = Model::build(spec, 0);
    auto named = model.named_parameters();
    const std::uint32_t tensor_count = u32();
    if (tensor_count != named.size()) {
        throw FormatError(what + ": expected " + std::to_string(named.size()) +
                          " parameter tensors, found " + std::to_string(tensor_count));
    }
    for (auto& [name, tensor] : named) {
        const std::uint16_t name_len = u16();
        std::string stored(name_len, '\0');
        is.read(stored.data(), name_len);
        if (!is) {
            binio::fail_truncated(what, off);
        }
        off += name_len;
        if (stored != name) {
            throw FormatError(what + ": parameter '" + stored + "' does not match expected '" +
                              name + "'");
        }
        const std::uint8_t rank = u8();
        std::vector<std::size_t> dims;
        for (std::uint8_t d = 0; d < rank; ++d) {
            dims.push_back(u32());
        }
        if (dims != tensor->shape) {
            throw FormatError(what + ": parameter '" + name + "' has unexpected shape");
        }
        for (float& v : tensor->data) {
            v = f32();
        }
    }
    return model;
}

} // namespace tablere
