// SPDX-License-Identifier: Apache-2.0
#include "nmt/checkpoint.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "nmt/errors.hpp"
#include "nmt/io.hpp"

namespace nmt {

namespace fs = std::filesystem;
using nlohmann::json;

std::string tensor_filename(const std::string& param_name) {
    std::string f;
    for (char c : param_name) {
        if (c == '.')
            f += "__";
        else
            f += c;
    }
    return f;
}

json config_to_json(const ModelConfig& cfg) {
    return json{{"enc_layers", cfg.enc_layers}, {"dec_layers", cfg.dec_layers}, {"model_dim", cfg.model_dim},
                {"ff_dim", cfg.ff_dim},         {"heads", cfg.heads},           {"src_vocab", cfg.src_vocab},
                {"tgt_vocab", cfg.tgt_vocab},   {"dropout", cfg.dropout},       {"tie_tgt_embeddings", cfg.tie_tgt_embeddings}};
}

ModelConfig config_from_json(const json& j) {
    ModelConfig cfg;
    cfg.enc_layers = j.at("enc_layers").get<int64_t>();
    cfg.dec_layers = j.at("dec_layers").get<int64_t>();
    cfg.model_dim = j.at("model_dim").get<int64_t>();
    cfg.ff_dim = j.at("ff_dim").get<int64_t>();
    cfg.heads = j.at("heads").get<int64_t>();
    cfg.src_vocab = j.at("src_vocab").get<int64_t>();
    cfg.tgt_vocab = j.at("tgt_vocab").get<int64_t>();
    cfg.dropout = j.at("dropout").get<float>();
    cfg.tie_tgt_embeddings = j.at("tie_tgt_embeddings").get<bool>();
    return cfg;
}

namespace {

std::string tensor_bytes(const Tensor& t) {
    static_assert(sizeof(float) == 4);
    std::string bytes(t.data.size() * 4, '\0');
    std::memcpy(bytes.data(), t.data.data(), bytes.size());
    return bytes; // host is little-endian; format is defined as LE float32
}

json shape_to_json(const std::vector<int64_t>& shape) { return json(shape); }

} // namespace

void save_checkpoint(const std::string& dir, const ParameterStore& params, const CheckpointMeta& meta) {
    fs::path tmp = fs::path(dir + ".tmp");
    std::error_code ec;
    fs::remove_all(tmp, ec);
    fs::create_directories(tmp);

    json shapes = json::object();
    for (const auto& [name, t] : params) shapes[name] = shape_to_json(t.shape);
    json manifest{{"format_version", meta.format_version},
                  {"kind", meta.kind},
                  {"config", config_to_json(meta.config)},
                  {"step", meta.step},
                  {"seed", meta.seed},
                  {"lm_layers", meta.lm_layers},
                  {"params", shapes},
                  {"extra", meta.extra.is_null() ? json::object() : meta.extra}};
    io::atomic_write_file((tmp / "manifest").string(), manifest.dump(2) + "\n");
    for (const auto& [name, t] : params)
        io::atomic_write_file((tmp / tensor_filename(name)).string(), tensor_bytes(t));

    fs::remove_all(fs::path(dir), ec);
    fs::rename(tmp, fs::path(dir), ec);
    if (ec) throw IoError("cannot move checkpoint into place at " + dir + ": " + ec.message());
}

CheckpointMeta load_checkpoint_meta(const std::string& dir) {
    json manifest;
    try {
        manifest = json::parse(io::read_text_file((fs::path(dir) / "manifest").string()));
    } catch (const json::exception& e) {
        throw DataError("unreadable manifest in " + dir + ": " + e.what());
    }
    CheckpointMeta meta;
    try {
        meta.format_version = manifest.at("format_version").get<int64_t>();
        meta.kind = manifest.at("kind").get<std::string>();
        meta.config = config_from_json(manifest.at("config"));
        meta.step = manifest.at("step").get<int64_t>();
        meta.seed = manifest.at("seed").get<uint64_t>();
        meta.lm_layers = manifest.at("lm_layers").get<int64_t>();
        meta.extra = manifest.at("extra");
    } catch (const json::exception& e) {
        throw DataError("manifest in " + dir + " is missing fields: " + e.what());
    }
    if (meta.format_version != 1)
        throw DataError("unsupported checkpoint format version " + std::to_string(meta.format_version));
    return meta;
}

ParameterStore load_checkpoint_params(const std::string& dir) {
    json manifest;
    try {
        manifest = json::parse(io::read_text_file((fs::path(dir) / "manifest").string()));
    } catch (const json::exception& e) {
        throw DataError("unreadable manifest in " + dir + ": " + e.what());
    }
    ParameterStore store;
    for (const auto& [name, jshape] : manifest.at("params").items()) {
        std::vector<int64_t> shape = jshape.get<std::vector<int64_t>>();
        int64_t n = shape_numel(shape);
        std::ifstream in = io::open_input((fs::path(dir) / tensor_filename(name)).string(), std::ios::binary);
        Tensor t = Tensor::zeros(shape);
        in.read(reinterpret_cast<char*>(t.data.data()), n * 4);
        if (in.gcount() != n * 4)
            throw DataError("tensor file for " + name + " in " + dir + " holds fewer than " + std::to_string(n) +
                            " floats");
        char extra;
        if (in.read(&extra, 1))
            throw DataError("tensor file for " + name + " in " + dir + " is larger than its manifest shape");
        store.emplace(name, std::move(t));
    }
    return store;
}

void average_checkpoints(const std::vector<std::string>& dirs, const std::string& out_dir) {
    if (dirs.empty()) throw ConfigError("nothing to average");
    std::vector<std::string> sorted = dirs;
    std::sort(sorted.begin(), sorted.end());

    CheckpointMeta first_meta = load_checkpoint_meta(sorted[0]);
    ParameterStore first = load_checkpoint_params(sorted[0]);
    StoreOf<double> acc = store_cast<double>(first);

    for (size_t i = 1; i < sorted.size(); ++i) {
        ParameterStore next = load_checkpoint_params(sorted[i]);
        for (const auto& [name, t] : first) {
            auto it = next.find(name);
            if (it == next.end())
                throw ContractError("checkpoint " + sorted[i] + " is missing parameter " + name);
            if (!it->second.same_shape(t))
                throw ContractError("checkpoint " + sorted[i] + " disagrees on shape of " + name);
        }
        for (const auto& [name, t] : next)
            if (!first.count(name))
                throw ContractError("checkpoint " + sorted[i] + " has extra parameter " + name);
        for (auto& [name, a] : acc) {
            const Tensor& t = next.at(name);
            for (size_t k = 0; k < a.data.size(); ++k) a.data[k] += static_cast<double>(t.data[k]);
        }
    }
    double inv = 1.0 / static_cast<double>(sorted.size());
    ParameterStore mean;
    for (auto& [name, a] : acc) {
        Tensor t = Tensor::zeros(a.shape);
        for (size_t k = 0; k < a.data.size(); ++k) t.data[k] = static_cast<float>(a.data[k] * inv);
        mean.emplace(name, std::move(t));
    }

    CheckpointMeta meta = first_meta;
    meta.kind = "average";
    meta.extra = nlohmann::json{{"constituents", sorted}};
    save_checkpoint(out_dir, mean, meta);
}

} // namespace nmt
