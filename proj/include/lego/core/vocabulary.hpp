// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace lego::core {

/// Half-open id range [begin, end).
struct IdRange {
    int begin = 0;
    int end = 0;

    int size() const { return end - begin; }
    bool contains(int id) const { return id >= begin && id < end; }
    bool operator==(const IdRange&) const = default;
};

/// Closed whitespace-tokenized vocabulary. Ordinary words occupy ids
/// [0, ordinary_count()); pseudo-tokens are appended after them.
class Vocabulary {
public:
    Vocabulary() = default;

    /// Throws UserError naming the first duplicate word.
    static Vocabulary build(std::vector<std::string> words, int pseudo_count);

    int size() const { return static_cast<int>(words_.size()) + pseudo_band_.size(); }
    int ordinary_count() const { return static_cast<int>(words_.size()); }
    IdRange pseudo_band() const { return pseudo_band_; }
    bool is_pseudo(int id) const { return pseudo_band_.contains(id); }
    bool valid(int id) const { return id >= 0 && id < size(); }

    std::optional<int> find(std::string_view word) const;
    /// Like find() but throws UserError for unknown words.
    int id(std::string_view word) const;
    /// Ordinary words map back to themselves; pseudo ids render as `<pseudo:k>`.
    std::string word(int id) const;
    const std::vector<std::string>& words() const { return words_; }

    /// Whitespace split followed by lookup; throws on any unknown word.
    std::vector<int> tokenize(std::string_view text) const;
    std::string detokenize(const std::vector<int>& ids) const;

    nlohmann::json to_json() const;
    static Vocabulary from_json(const nlohmann::json& j);

private:
    std::vector<std::string> words_;
    std::unordered_map<std::string, int> index_;
    IdRange pseudo_band_;
};

std::vector<std::string> split_words(std::string_view text);

/// Word list used by the shipped lab: function words, shapes, colors, concept
/// adjectives and their synonyms, numbers, and distractor words that never
/// appear in pretraining captions.
std::vector<std::string> default_word_list();

}  // namespace lego::core
