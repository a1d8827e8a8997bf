#include "injector/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "injector/errors.hpp"

namespace injector {

namespace {
constexpr char kMagic[8] = {'I', 'N', 'J', 'C', 'K', 'P', 'T', '\0'};

template <typename T>
void write_pod(std::ofstream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& path) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw ParseError("truncated checkpoint '" + path + "'");
    return value;
}
}  // namespace

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, const Tensor*>>& tensors) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write checkpoint '" + path + "'");
    out.write(kMagic, sizeof(kMagic));
    write_pod<uint32_t>(out, kCheckpointVersion);
    write_pod<uint32_t>(out, static_cast<uint32_t>(tensors.size()));
    for (const auto& [name, tensor] : tensors) {
        write_pod<uint32_t>(out, static_cast<uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_pod<uint8_t>(out, 0);  // f32
        write_pod<uint32_t>(out, static_cast<uint32_t>(tensor->ndim()));
        for (int64_t e : tensor->shape()) write_pod<int64_t>(out, e);
        for (int64_t i = 0; i < tensor->numel(); ++i) {
            write_pod<float>(out, static_cast<float>((*tensor)[i]));
        }
    }
    if (!out) throw ParseError("failed writing checkpoint '" + path + "'");
}

std::map<std::string, Tensor> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open checkpoint '" + path + "'");
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw ParseError("'" + path + "' is not a checkpoint file");
    }
    const auto version = read_pod<uint32_t>(in, path);
    if (version != kCheckpointVersion) {
        throw ParseError("checkpoint version " + std::to_string(version) + " unsupported");
    }
    const auto count = read_pod<uint32_t>(in, path);
    std::map<std::string, Tensor> tensors;
    for (uint32_t t = 0; t < count; ++t) {
        const auto name_len = read_pod<uint32_t>(in, path);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (!in) throw ParseError("truncated checkpoint '" + path + "'");
        const auto dtype = read_pod<uint8_t>(in, path);
        if (dtype != 0) throw ParseError("unsupported dtype in '" + path + "'");
        const auto ndim = read_pod<uint32_t>(in, path);
        Shape shape(ndim);
        for (uint32_t d = 0; d < ndim; ++d) shape[d] = read_pod<int64_t>(in, path);
        Tensor tensor(shape);
        for (int64_t i = 0; i < tensor.numel(); ++i) {
            tensor[i] = static_cast<double>(read_pod<float>(in, path));
        }
        tensors.emplace(std::move(name), std::move(tensor));
    }
    return tensors;
}

}  // namespace injector
