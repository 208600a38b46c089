#include "fat/checkpoint.hpp"

#include <fstream>
#include <iterator>

namespace fat {

namespace io {

Bytes read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("write failed for " + path.string());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

}  // namespace io

namespace {

constexpr std::size_t kMagicLen = sizeof(kCheckpointMagic) - 1;

}  // namespace

io::Bytes encode_checkpoint(const Checkpoint& ckpt) {
    const auto& cfg = ckpt.model.config;
    if (!ckpt.channel_names.empty() && static_cast<std::int64_t>(ckpt.channel_names.size()) != cfg.channels) {
        throw std::invalid_argument("channel_names size does not match config channels");
    }
    const nlohmann::json header = {{"config", cfg}, {"channel_names", ckpt.channel_names}};
    const auto text = header.dump();

    io::Bytes out(kCheckpointMagic, kCheckpointMagic + kMagicLen);
    io::put_le<std::uint64_t>(out, text.size());
    out.insert(out.end(), text.begin(), text.end());
    for (const auto& p : ckpt.model.parameters()) {
        for (float v : p.tensor.data()) io::put_le(out, v);
    }
    for (auto buf : ckpt.model.buffers()) {
        for (float v : buf) io::put_le(out, v);
    }
    return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kMagicLen || std::memcmp(bytes.data(), kCheckpointMagic, kMagicLen) != 0) {
        throw FormatError("not a FATCKPT1 checkpoint (bad magic)");
    }
    std::size_t pos = kMagicLen;
    const auto len = io::get_le<std::uint64_t>(bytes, pos);
    pos += 8;
    if (len > bytes.size() - pos) throw FormatError("checkpoint header length exceeds file size");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + pos, bytes.begin() + pos + len);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint header is not valid JSON: ") + e.what());
    }
    pos += len;

    Checkpoint ckpt;
    FatConfig cfg;
    try {
        cfg = header.at("config").get<FatConfig>();
        ckpt.channel_names = header.value("channel_names", std::vector<std::string>{});
        cfg.validate();
    } catch (const std::exception& e) {
        throw FormatError(std::string("invalid checkpoint config: ") + e.what());
    }
    if (!ckpt.channel_names.empty() && static_cast<std::int64_t>(ckpt.channel_names.size()) != cfg.channels) {
        throw FormatError("checkpoint channel_names size does not match config");
    }

    ckpt.model = build_model<float>(cfg);
    for (auto& p : ckpt.model.parameters()) {
        for (auto& v : p.tensor.mutable_data()) {
            v = io::get_le<float>(bytes, pos);
            pos += 4;
        }
    }
    for (auto buf : ckpt.model.buffers()) {
        for (auto& v : buf) {
            v = io::get_le<float>(bytes, pos);
            pos += 4;
        }
    }
    if (pos != bytes.size()) throw FormatError("trailing bytes after checkpoint payload");
    return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    io::write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(io::read_file(path)); }

}  // namespace fat
