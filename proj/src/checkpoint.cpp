#include "rgan/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rgan/common.hpp"

namespace rgan {

namespace {

using nlohmann::json;

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

uint32_t take_u32(const std::string& in, size_t& pos, const char* what) {
    if (pos + 4 > in.size())
        throw DataError(std::string("checkpoint: truncated reading ") + what);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v |= static_cast<uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    pos += 4;
    return v;
}

}  // namespace

void Checkpoint::add(const std::string& name, Tensor t) {
    RGAN_REQUIRE(find(name) == nullptr, "checkpoint: duplicate array " + name);
    arrays.emplace_back(name, std::move(t));
}

const Tensor* Checkpoint::find(const std::string& name) const {
    for (const auto& [n, t] : arrays)
        if (n == name) return &t;
    return nullptr;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    std::string out;
    out += "RGAN";
    put_u32(out, ck.version);
    put_u32(out, static_cast<uint32_t>(ck.arrays.size()));
    for (const auto& [name, tensor] : ck.arrays) {
        put_u32(out, static_cast<uint32_t>(name.size()));
        out += name;
        put_u32(out, static_cast<uint32_t>(tensor.rank()));
        for (int d = 0; d < tensor.rank(); ++d)
            put_u32(out, static_cast<uint32_t>(tensor.dim(d)));
        for (int64_t i = 0; i < tensor.size(); ++i)
            put_u32(out, std::bit_cast<uint32_t>(tensor[i]));
    }

    json trailer;
    trailer["config"] = json::parse(ck.config.to_json_text());
    trailer["curriculum"] = {{"length", ck.curriculum_length},
                             {"epochs_at_level", ck.curriculum_epochs},
                             {"accuracy", ck.curriculum_accuracy}};
    trailer["epoch"] = ck.epoch;
    trailer["optimizer"] = ck.optimizer;
    out += trailer.dump();

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open checkpoint: " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    const std::string in = buf.str();

    size_t pos = 0;
    if (in.size() < 4 || in.compare(0, 4, "RGAN") != 0)
        throw DataError("checkpoint: bad magic in " + path);
    pos = 4;

    Checkpoint ck;
    ck.version = take_u32(in, pos, "version");
    if (ck.version != kCheckpointVersion)
        throw DataError("checkpoint: unsupported version " + std::to_string(ck.version));
    const uint32_t count = take_u32(in, pos, "array count");
    for (uint32_t a = 0; a < count; ++a) {
        const uint32_t name_len = take_u32(in, pos, "name length");
        if (pos + name_len > in.size()) throw DataError("checkpoint: truncated name");
        std::string name = in.substr(pos, name_len);
        pos += name_len;
        const uint32_t rank = take_u32(in, pos, "rank");
        if (rank == 0 || rank > 8) throw DataError("checkpoint: bad rank for " + name);
        std::vector<int> dims(rank);
        int64_t size = 1;
        for (uint32_t d = 0; d < rank; ++d) {
            dims[d] = static_cast<int>(take_u32(in, pos, "dimension"));
            if (dims[d] <= 0) throw DataError("checkpoint: bad dimension for " + name);
            size *= dims[d];
        }
        Tensor t(dims);
        for (int64_t i = 0; i < size; ++i)
            t[i] = std::bit_cast<float>(take_u32(in, pos, "array data"));
        ck.add(name, std::move(t));
    }

    json trailer;
    try {
        trailer = json::parse(in.substr(pos));
    } catch (const json::parse_error& e) {
        throw DataError(std::string("checkpoint: bad trailer: ") + e.what());
    }
    if (!trailer.is_object() || !trailer.contains("config") ||
        !trailer.contains("curriculum") || !trailer.contains("epoch") ||
        !trailer.contains("optimizer"))
        throw DataError("checkpoint: incomplete trailer");
    ck.config = TrainConfig::from_json_text(trailer["config"].dump());
    const json& cur = trailer["curriculum"];
    ck.curriculum_length = cur.at("length").get<int>();
    ck.curriculum_epochs = cur.at("epochs_at_level").get<int>();
    ck.curriculum_accuracy = cur.at("accuracy").get<double>();
    ck.epoch = trailer["epoch"].get<int>();
    ck.optimizer = trailer["optimizer"].get<std::map<std::string, double>>();
    return ck;
}

void store_to_checkpoint(const ParameterStore& store, Checkpoint& ck) {
    for (int i = 0; i < store.size(); ++i) {
        const auto& p = store.param(i);
        ck.add(p.name, p.value);
    }
}

void checkpoint_to_store(const Checkpoint& ck, ParameterStore& store) {
    for (int i = 0; i < store.size(); ++i) {
        auto& p = store.param(i);
        const Tensor* t = ck.find(p.name);
        if (t == nullptr) throw DataError("checkpoint: missing array " + p.name);
        if (!t->same_shape(p.value))
            throw DataError("checkpoint: shape mismatch for " + p.name + ": stored " +
                            Tensor::shape_str(t->shape()) + ", expected " +
                            Tensor::shape_str(p.value.shape()));
        p.value = *t;
    }
}

}  // namespace rgan
