// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "lego/core/hash.hpp"

#include <cstdio>

namespace lego {

void Fnv64::update(const void* data, std::size_t size) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
        state_ ^= bytes[i];
        state_ *= 0x100000001b3ULL;
    }
}

void Fnv64::update(const Eigen::MatrixXd& m) {
    const std::int64_t dims[2] = {m.rows(), m.cols()};
    update(dims, sizeof(dims));
    update(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
}

std::string Fnv64::hex() const {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(state_));
    return buf;
}

std::string hash_hex(std::string_view s) {
    Fnv64 h;
    h.update(s);
    return h.hex();
}

}  // namespace lego
