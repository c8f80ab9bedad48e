#include "mhm/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace mhm {

namespace {

constexpr char kMagic[4] = {'M', 'H', 'M', '1'};

template <typename T>
void put_le(std::string& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

class Reader {
public:
    explicit Reader(const std::string& bytes) : bytes_(bytes) {}

    bool done() const { return pos_ == bytes_.size(); }

    template <typename T>
    T get(const char* what) {
        need(sizeof(T), what);
        unsigned char raw[sizeof(T)];
        std::memcpy(raw, bytes_.data() + pos_, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
        pos_ += sizeof(T);
        T value;
        std::memcpy(&value, raw, sizeof(T));
        return value;
    }

    std::string take(std::size_t n, const char* what) {
        need(n, what);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

private:
    void need(std::size_t n, const char* what) {
        if (bytes_.size() - pos_ < n) {
            throw CheckpointError(std::string("checkpoint truncated while reading ") + what + " at byte " +
                                  std::to_string(pos_));
        }
    }

    const std::string& bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const NamedTensors& tensors) {
    std::string out(kMagic, sizeof(kMagic));
    for (const auto& [name, t] : tensors) {
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
        for (auto e : t.shape()) put_le<std::uint64_t>(out, e);
        for (double v : t.data()) put_le<double>(out, v);
    }
    return out;
}

void save_checkpoint(const std::filesystem::path& path, const NamedTensors& tensors) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw CheckpointError("cannot open " + path.string() + " for writing");
    const auto bytes = encode_checkpoint(tensors);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw CheckpointError("write failed for " + path.string());
}

NamedTensors decode_checkpoint(const std::string& bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw CheckpointError("bad checkpoint magic (expected MHM1)");
    }
    Reader in(bytes);
    in.take(4, "magic");
    NamedTensors out;
    while (!in.done()) {
        const auto name_len = in.get<std::uint32_t>("name length");
        std::string name = in.take(name_len, "name");
        const auto rank = in.get<std::uint32_t>("rank");
        Shape shape(rank);
        for (auto& e : shape) e = static_cast<std::size_t>(in.get<std::uint64_t>("extent"));
        for (auto e : shape) {
            if (e == 0) throw CheckpointError("tensor '" + name + "' has a zero extent");
        }
        std::vector<double> data(shape_numel(shape));
        for (auto& v : data) v = in.get<double>("data");
        out.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
    }
    return out;
}

NamedTensors load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CheckpointError("cannot open " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return decode_checkpoint(ss.str());
}

void assign_from(const NamedTensors& source, const NamedTensors& destination) {
    if (source.size() != destination.size()) {
        throw CheckpointError("checkpoint has " + std::to_string(source.size()) + " tensors, expected " +
                              std::to_string(destination.size()));
    }
    for (std::size_t i = 0; i < source.size(); ++i) {
        const auto& [sname, st] = source[i];
        auto [dname, dt] = destination[i];
        if (sname != dname) throw CheckpointError("checkpoint tensor '" + sname + "' where '" + dname + "' expected");
        if (st.shape() != dt.shape()) {
            throw CheckpointError("checkpoint tensor '" + sname + "' has shape " + shape_str(st.shape()) +
                                  ", expected " + shape_str(dt.shape()));
        }
        std::copy(st.data().begin(), st.data().end(), dt.data().begin());
    }
}

}  // namespace mhm
