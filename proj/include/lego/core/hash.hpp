// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include <Eigen/Core>

namespace lego {

/// Incremental FNV-1a (64-bit). Used for parameter fingerprints and config hashes.
class Fnv64 {
public:
    void update(const void* data, std::size_t size);
    void update(std::string_view s) { update(s.data(), s.size()); }
    void update(std::span<const double> v) { update(v.data(), v.size_bytes()); }
    void update(const Eigen::MatrixXd& m);

    std::uint64_t digest() const { return state_; }
    std::string hex() const;

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string hash_hex(std::string_view s);

}  // namespace lego
