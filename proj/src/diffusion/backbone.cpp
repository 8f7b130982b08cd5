// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "lego/diffusion/backbone.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "lego/core/error.hpp"
#include "lego/core/hash.hpp"

namespace lego::diffusion {
namespace {

constexpr char kMagic[8] = {'L', 'E', 'G', 'O', 'C', 'K', 'P', 'T'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
}

void put_tensor(std::vector<std::uint8_t>& out, const Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(m.data()[i])));
    }
}

}  // namespace

std::string Backbone::frozen_hash() const {
    Fnv64 h;
    encoder.visit([&](const std::string& n, const Eigen::MatrixXd& m) {
        h.update(n);
        h.update(m);
    });
    denoiser.visit([&](const std::string& n, const Eigen::MatrixXd& m) {
        h.update(n);
        h.update(m);
    });
    h.update(table.frozen_hash());
    return h.hex();
}

std::vector<std::uint8_t> serialize_checkpoint(const Backbone& b) {
    nlohmann::json tensors = nlohmann::json::array();
    b.visit([&](const std::string& name, const Eigen::MatrixXd& m) {
        tensors.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
    });
    const nlohmann::json header = {
        {"format_version", kCheckpointVersion},
        {"dims", {{"denoiser", b.denoiser.dims.to_json()},
                  {"embedding_dim", b.table.dim()},
                  {"max_len", b.encoder.max_len()}}},
        {"schedule", b.schedule.to_json()},
        {"vocabulary", b.vocab.to_json()},
        {"info", b.info},
        {"tensors", tensors},
    };
    const std::string text = header.dump();
    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    put_u32(out, static_cast<std::uint32_t>(text.size()));
    out.insert(out.end(), text.begin(), text.end());
    b.visit([&](const std::string&, const Eigen::MatrixXd& m) { put_tensor(out, m); });
    return out;
}

Backbone deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
        throw UserError("not a lego-lab checkpoint");
    }
    const std::uint32_t hlen = get_u32(bytes.data() + 8);
    if (bytes.size() < 12 + static_cast<std::size_t>(hlen)) throw UserError("checkpoint header truncated");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + hlen);
    } catch (const nlohmann::json::exception& e) {
        throw UserError(std::string("checkpoint header: ") + e.what());
    }
    Backbone b;
    try {
        const int version = header.at("format_version").get<int>();
        if (version != kCheckpointVersion) {
            throw UserError("unsupported checkpoint format version " + std::to_string(version));
        }
        const auto& dims = header.at("dims");
        b.schedule = NoiseSchedule::from_json(header.at("schedule"));
        b.vocab = core::Vocabulary::from_json(header.at("vocabulary"));
        b.info = header.at("info");
        const int dim = dims.at("embedding_dim").get<int>();
        const int max_len = dims.at("max_len").get<int>();
        Rng scratch(0);
        b.denoiser = DenoiserParams(DenoiserDims::from_json(dims.at("denoiser")), scratch);
        b.encoder = textenc::TextEncoderParams(dim, max_len, scratch);
        b.table = core::EmbeddingTable(b.vocab, dim);

        const auto& list = header.at("tensors");
        std::size_t idx = 0;
        std::size_t offset = 12 + hlen;
        b.visit([&](const std::string& name, Eigen::MatrixXd& m) {
            if (idx >= list.size()) throw UserError("checkpoint lists too few tensors");
            const auto& t = list[idx++];
            if (t.at("name").get<std::string>() != name || t.at("rows").get<Eigen::Index>() != m.rows() ||
                t.at("cols").get<Eigen::Index>() != m.cols()) {
                throw UserError("checkpoint tensor mismatch at " + name);
            }
            const std::size_t need = static_cast<std::size_t>(m.size()) * 4;
            if (bytes.size() < offset + need) throw UserError("checkpoint truncated in " + name);
            for (Eigen::Index i = 0; i < m.size(); ++i) {
                m.data()[i] = std::bit_cast<float>(get_u32(bytes.data() + offset + static_cast<std::size_t>(i) * 4));
            }
            offset += need;
        });
        if (idx != list.size()) throw UserError("checkpoint lists unexpected tensors");
        b.encoder.frozen = true;
        if (offset != bytes.size()) throw UserError("trailing bytes after checkpoint tensors");
    } catch (const nlohmann::json::exception& e) {
        throw UserError(std::string("checkpoint header: ") + e.what());
    }
    return b;
}

void save_checkpoint(const Backbone& b, const std::filesystem::path& path) {
    const auto bytes = serialize_checkpoint(b);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

Backbone load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_checkpoint(bytes);
}

void round_to_float32(Backbone& b) {
    b.visit([](const std::string&, Eigen::MatrixXd& m) {
        m = m.cast<float>().cast<double>();
    });
}

}  // namespace lego::diffusion
