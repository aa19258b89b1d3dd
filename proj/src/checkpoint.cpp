#include "remkit/checkpoint.hpp"

#include "remkit/error.hpp"
#include "remkit/io.hpp"

#include <bit>
#include <cstring>
#include <map>

namespace remkit {

namespace {

constexpr std::uint32_t kEndianMarker = 0x01020304u;
constexpr std::uint32_t kSwappedMarker = 0x04030201u;

class Writer {
public:
    void bytes(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
    template <class T>
    void uint(T v) {
        for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    void f32(double v) { uint(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
    void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
    std::string take() { return std::move(out_); }

private:
    std::string out_;
};

class Reader {
public:
    explicit Reader(const std::string& s) : s_(s) {}
    template <class T>
    T uint() {
        need(sizeof(T));
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i)
            v |= static_cast<T>(static_cast<unsigned char>(s_[pos_ + i])) << (8 * i);
        pos_ += sizeof(T);
        return v;
    }
    double f32() { return static_cast<double>(std::bit_cast<float>(uint<std::uint32_t>())); }
    double f64() { return std::bit_cast<double>(uint<std::uint64_t>()); }
    std::string raw(std::size_t n) {
        need(n);
        std::string out = s_.substr(pos_, n);
        pos_ += n;
        return out;
    }
    std::size_t pos() const { return pos_; }
    bool done() const { return pos_ == s_.size(); }

private:
    void need(std::size_t n) const {
        if (pos_ + n > s_.size())
            throw FormatError("checkpoint truncated at byte " + std::to_string(pos_) + " (need " + std::to_string(n) +
                              " more)");
    }
    const std::string& s_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ck) {
    const PartitionedNetwork& net = ck.net;
    if (net.layers().empty()) throw std::invalid_argument("cannot save an empty network");
    Writer w;
    w.bytes("RMCK", 4);
    w.uint(kCheckpointVersion);
    w.uint(kEndianMarker);
    w.uint(ck.master_seed);
    w.f64(net.capacity_fraction());
    w.uint(static_cast<std::uint32_t>(net.input_dim()));
    w.uint(static_cast<std::uint32_t>(net.num_classes()));
    w.uint(static_cast<std::uint32_t>(net.hidden_count()));
    const auto gen = net.gen_widths();
    const auto mem = net.mem_widths();
    for (std::size_t i = 0; i < net.hidden_count(); ++i) {
        w.uint(static_cast<std::uint32_t>(gen[i]));
        w.uint(static_cast<std::uint32_t>(mem[i]));
    }
    for (const auto& layer : net.layers())
        layer.visit([&](const Matrix& m, bool) {
            for (Eigen::Index r = 0; r < m.rows(); ++r)
                for (Eigen::Index c = 0; c < m.cols(); ++c) w.f32(m(r, c));
        });
    w.uint(static_cast<std::uint8_t>(ck.masks.has_value()));
    if (ck.masks) {
        const MaskTable& t = *ck.masks;
        w.f64(t.density());
        w.uint(static_cast<std::uint8_t>(t.provenance()));
        w.uint(static_cast<std::uint32_t>(t.mem_shape().size()));
        for (int u : t.mem_shape()) w.uint(static_cast<std::uint32_t>(u));
        w.uint(static_cast<std::uint64_t>(t.entries().size()));
        for (const auto& [id, m] : t.entries()) {
            w.uint(static_cast<std::uint64_t>(id));
            for (const auto& layer : m.layers) w.bytes(layer.data(), layer.size());
        }
    }
    return w.take();
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
    Reader r(bytes);
    if (r.raw(4) != "RMCK") throw FormatError("not a checkpoint: bad magic at byte 0");
    const auto version = r.uint<std::uint32_t>();
    if (version != kCheckpointVersion)
        throw FormatError("unsupported checkpoint version " + std::to_string(version) + " at byte 4");
    const auto marker = r.uint<std::uint32_t>();
    if (marker == kSwappedMarker) throw FormatError("checkpoint endianness marker is byte-swapped; refusing to load");
    if (marker != kEndianMarker) throw FormatError("bad endianness marker at byte 8");

    Checkpoint ck;
    ck.master_seed = r.uint<std::uint64_t>();
    const double capacity = r.f64();
    const auto input_dim = static_cast<int>(r.uint<std::uint32_t>());
    const auto classes = static_cast<int>(r.uint<std::uint32_t>());
    const auto hidden = r.uint<std::uint32_t>();
    if (hidden > 1024) throw FormatError("implausible hidden layer count at byte " + std::to_string(r.pos() - 4));
    std::vector<int> gen(hidden), mem(hidden);
    for (std::uint32_t i = 0; i < hidden; ++i) {
        gen[i] = static_cast<int>(r.uint<std::uint32_t>());
        mem[i] = static_cast<int>(r.uint<std::uint32_t>());
    }
    std::vector<DenseLayer> layers;
    int in_g = input_dim, in_m = 0;
    for (std::uint32_t i = 0; i <= hidden; ++i) {
        const int out_g = i < hidden ? gen[i] : classes;
        const int out_m = i < hidden ? mem[i] : 0;
        DenseLayer l = DenseLayer::zeros(in_g, in_m, out_g, out_m);
        l.visit([&](Matrix& m, bool) {
            for (Eigen::Index a = 0; a < m.rows(); ++a)
                for (Eigen::Index b = 0; b < m.cols(); ++b) m(a, b) = r.f32();
        });
        layers.push_back(std::move(l));
        in_g = out_g;
        in_m = out_m;
    }
    try {
        ck.net = PartitionedNetwork(std::move(layers), capacity);
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("invalid checkpoint topology: ") + e.what());
    }
    if (r.uint<std::uint8_t>() != 0) {
        const double density = r.f64();
        const auto prov = r.uint<std::uint8_t>();
        if (prov > static_cast<std::uint8_t>(MaskProvenance::ideal))
            throw FormatError("bad mask provenance at byte " + std::to_string(r.pos() - 1));
        const auto nl = r.uint<std::uint32_t>();
        if (nl > 1024) throw FormatError("implausible mask layer count at byte " + std::to_string(r.pos() - 4));
        std::vector<int> shape(nl);
        for (auto& u : shape) u = static_cast<int>(r.uint<std::uint32_t>());
        const auto n = r.uint<std::uint64_t>();
        std::map<std::int64_t, Mask> entries;
        for (std::uint64_t k = 0; k < n; ++k) {
            const auto id = static_cast<std::int64_t>(r.uint<std::uint64_t>());
            Mask m;
            for (int u : shape) {
                const std::string raw = r.raw(static_cast<std::size_t>(u));
                for (char c : raw)
                    if (c != 0 && c != 1) throw FormatError("mask bit is not 0/1 near byte " + std::to_string(r.pos()));
                m.layers.emplace_back(raw.begin(), raw.end());
            }
            entries.emplace(id, std::move(m));
        }
        try {
            ck.masks.emplace(density, std::move(shape), static_cast<MaskProvenance>(prov), std::move(entries));
        } catch (const std::invalid_argument& e) {
            throw FormatError(std::string("invalid mask table: ") + e.what());
        }
    }
    if (!r.done()) throw FormatError("trailing bytes after checkpoint at byte " + std::to_string(r.pos()));
    return ck;
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) { write_file_atomic(path, serialize_checkpoint(ck)); }

Checkpoint load_checkpoint(const std::string& path) { return deserialize_checkpoint(read_file(path)); }

PartitionedNetwork round_to_storage(const PartitionedNetwork& net) {
    PartitionedNetwork out = net;
    for (auto& layer : out.layers())
        layer.visit([](Matrix& m, bool) { m = m.cast<float>().cast<double>(); });
    return out;
}

}  // namespace remkit
