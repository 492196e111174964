#include "stegodetect/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace stegodetect {

namespace {

constexpr char kMagic[8] = {'T', 'S', 'R', 'N', 'N', 'C', 'K', '1'};

void put_u32(std::string& buf, std::uint32_t v) {
    buf.push_back(static_cast<char>(v & 0xFF));
    buf.push_back(static_cast<char>((v >> 8) & 0xFF));
    buf.push_back(static_cast<char>((v >> 16) & 0xFF));
    buf.push_back(static_cast<char>((v >> 24) & 0xFF));
}

void put_f32_payload(std::string& buf, const std::vector<float>& values) {
    static_assert(sizeof(float) == 4);
    const std::size_t offset = buf.size();
    buf.resize(offset + values.size() * 4);
    if constexpr (std::endian::native == std::endian::little) {
        std::memcpy(buf.data() + offset, values.data(), values.size() * 4);
    } else {
        for (std::size_t i = 0; i < values.size(); ++i) {
            std::uint32_t u;
            std::memcpy(&u, &values[i], 4);
            buf[offset + i * 4 + 0] = static_cast<char>(u & 0xFF);
            buf[offset + i * 4 + 1] = static_cast<char>((u >> 8) & 0xFF);
            buf[offset + i * 4 + 2] = static_cast<char>((u >> 16) & 0xFF);
            buf[offset + i * 4 + 3] = static_cast<char>((u >> 24) & 0xFF);
        }
    }
}

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;
    std::string context;

    void need(std::size_t n) {
        if (pos + n > buf.size())
            throw DataError("checkpoint: unexpected end of file while reading " + context);
    }
    std::uint32_t u32() {
        need(4);
        const auto* p = reinterpret_cast<const unsigned char*>(buf.data() + pos);
        pos += 4;
        return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
               (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
    void f32_into(float* dst, std::size_t count) {
        need(count * 4);
        if constexpr (std::endian::native == std::endian::little) {
            std::memcpy(dst, buf.data() + pos, count * 4);
        } else {
            for (std::size_t i = 0; i < count; ++i) {
                const auto* p = reinterpret_cast<const unsigned char*>(buf.data() + pos + i * 4);
                std::uint32_t u = static_cast<std::uint32_t>(p[0]) |
                                  (static_cast<std::uint32_t>(p[1]) << 8) |
                                  (static_cast<std::uint32_t>(p[2]) << 16) |
                                  (static_cast<std::uint32_t>(p[3]) << 24);
                std::memcpy(&dst[i], &u, 4);
            }
        }
        pos += count * 4;
    }
};

nlohmann::json config_to_json(const ModelConfig& c) {
    return {
        {"embedding_dim", c.embedding_dim},
        {"num_layers", c.num_layers},
        {"units_per_layer", c.units_per_layer},
        {"bidirectional", c.bidirectional},
        {"fused_dim", c.fused_dim},
        {"num_classes", c.num_classes},
        {"dropout_rate", c.dropout_rate},
        {"threshold", c.threshold},
        {"vocab_size", c.vocab_size},
    };
}

ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.embedding_dim = j.at("embedding_dim").get<std::size_t>();
    c.num_layers = j.at("num_layers").get<std::size_t>();
    c.units_per_layer = j.at("units_per_layer").get<std::size_t>();
    c.bidirectional = j.at("bidirectional").get<bool>();
    c.fused_dim = j.at("fused_dim").get<std::size_t>();
    c.num_classes = j.at("num_classes").get<std::size_t>();
    c.dropout_rate = j.at("dropout_rate").get<double>();
    c.threshold = j.at("threshold").get<double>();
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    return c;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::string buf;
    buf.append(kMagic, sizeof(kMagic));

    nlohmann::json meta;
    meta["config"] = config_to_json(ckpt.params.config);
    meta["vocab"] = ckpt.vocab.words();
    const std::string meta_str = meta.dump();
    put_u32(buf, static_cast<std::uint32_t>(meta_str.size()));
    buf += meta_str;

    for_each_tensor(ckpt.params, [&](const std::string& name, const Mat<float>& m, TensorKind) {
        put_u32(buf, static_cast<std::uint32_t>(name.size()));
        buf += name;
        put_u32(buf, 2);
        put_u32(buf, static_cast<std::uint32_t>(m.rows));
        put_u32(buf, static_cast<std::uint32_t>(m.cols));
        put_f32_payload(buf, m.data);
    });

    const auto crc = static_cast<std::uint32_t>(
        crc32(0, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(buf.size())));
    put_u32(buf, crc);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint: " + path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (!in.good() && !in.eof()) throw IoError("checkpoint read failed: " + path);

    if (buf.size() < sizeof(kMagic) + 4) throw DataError("checkpoint: file too short: " + path);

    // checksum first: nothing is trusted before it validates
    std::uint32_t stored;
    {
        const auto* p = reinterpret_cast<const unsigned char*>(buf.data() + buf.size() - 4);
        stored = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                 (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
    }
    const auto computed = static_cast<std::uint32_t>(crc32(
        0, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(buf.size() - 4)));
    if (stored != computed)
        throw DataError("checkpoint: checksum mismatch (corrupt or truncated): " + path);

    if (std::memcmp(buf.data(), kMagic, 7) != 0)
        throw DataError("checkpoint: bad magic (not a checkpoint file): " + path);
    if (buf[7] != kMagic[7])
        throw DataError(std::string("checkpoint: unsupported format version '") + buf[7] +
                        "': " + path);

    Reader r{buf};
    r.pos = sizeof(kMagic);
    r.context = "metadata";
    const std::uint32_t meta_len = r.u32();
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(r.bytes(meta_len));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("checkpoint: malformed metadata: ") + e.what());
    }

    Checkpoint ckpt;
    try {
        ckpt.config = config_from_json(meta.at("config"));
        ckpt.vocab = Vocabulary::from_words(meta.at("vocab").get<std::vector<std::string>>());
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("checkpoint: incomplete metadata: ") + e.what());
    }
    if (ckpt.vocab.size() != ckpt.config.vocab_size)
        throw DataError("checkpoint: vocabulary size " + std::to_string(ckpt.vocab.size()) +
                        " disagrees with config vocab_size " +
                        std::to_string(ckpt.config.vocab_size));

    ckpt.params = allocate_params<float>(ckpt.config);
    for_each_tensor(ckpt.params, [&](const std::string& name, Mat<float>& m, TensorKind) {
        r.context = "tensor " + name;
        const std::uint32_t name_len = r.u32();
        if (name_len > 4096)
            throw DataError("checkpoint: tensor record out of place while reading " + name +
                            " (tensor count mismatch?)");
        const std::string stored_name = r.bytes(name_len);
        if (stored_name != name)
            throw ShapeError("checkpoint: expected tensor " + name + ", found " + stored_name);
        const std::uint32_t ndims = r.u32();
        if (ndims != 2) throw ShapeError("checkpoint: tensor " + name + " has rank " +
                                         std::to_string(ndims) + ", expected 2");
        const std::uint32_t rows = r.u32();
        const std::uint32_t cols = r.u32();
        if (rows != m.rows || cols != m.cols)
            throw ShapeError("checkpoint: tensor " + name + " is " + std::to_string(rows) + "x" +
                             std::to_string(cols) + ", config implies " + m.shape_str());
        r.f32_into(m.data.data(), m.size());
    });
    if (r.pos != buf.size() - 4)
        throw DataError("checkpoint: trailing bytes after tensor records (tensor count mismatch)");
    return ckpt;
}

}  // namespace stegodetect
