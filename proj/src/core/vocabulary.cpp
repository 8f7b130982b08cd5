// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "lego/core/vocabulary.hpp"

#include "lego/core/error.hpp"

#include <cctype>

namespace lego::core {

std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t j = i;
        while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
        if (j > i) out.emplace_back(text.substr(i, j - i));
        i = j;
    }
    return out;
}

Vocabulary Vocabulary::build(std::vector<std::string> words, int pseudo_count) {
    if (pseudo_count < 1) {
        throw UserError("pseudo_count must be >= 1, got " + std::to_string(pseudo_count));
    }
    Vocabulary v;
    v.index_.reserve(words.size());
    for (std::size_t i = 0; i < words.size(); ++i) {
        const auto& w = words[i];
        if (w.empty() || split_words(w).size() != 1 || split_words(w)[0] != w) {
            throw UserError("vocabulary word must be a single non-empty token: '" + w + "'");
        }
        if (!v.index_.emplace(w, static_cast<int>(i)).second) {
            throw UserError("duplicate vocabulary word: '" + w + "'");
        }
    }
    v.words_ = std::move(words);
    const int n = static_cast<int>(v.words_.size());
    v.pseudo_band_ = {n, n + pseudo_count};
    return v;
}

std::optional<int> Vocabulary::find(std::string_view word) const {
    auto it = index_.find(std::string(word));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

int Vocabulary::id(std::string_view word) const {
    auto found = find(word);
    if (!found) throw UserError("unknown word: '" + std::string(word) + "'");
    return *found;
}

std::string Vocabulary::word(int id) const {
    if (!valid(id)) throw UserError("token id out of range: " + std::to_string(id));
    if (is_pseudo(id)) return "<pseudo:" + std::to_string(id - pseudo_band_.begin) + ">";
    return words_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::tokenize(std::string_view text) const {
    std::vector<int> ids;
    for (const auto& w : split_words(text)) ids.push_back(id(w));
    return ids;
}

std::string Vocabulary::detokenize(const std::vector<int>& ids) const {
    std::string out;
    for (int id : ids) {
        if (!out.empty()) out += ' ';
        out += word(id);
    }
    return out;
}

nlohmann::json Vocabulary::to_json() const {
    return {{"words", words_}, {"pseudo_band", {pseudo_band_.begin, pseudo_band_.end}}};
}

Vocabulary Vocabulary::from_json(const nlohmann::json& j) {
    try {
        auto words = j.at("words").get<std::vector<std::string>>();
        const auto band = j.at("pseudo_band").get<std::vector<int>>();
        if (band.size() != 2 || band[0] != static_cast<int>(words.size()) || band[1] <= band[0]) {
            throw UserError("vocab.json: pseudo_band must be [word_count, word_count + k) with k >= 1");
        }
        return build(std::move(words), band[1] - band[0]);
    } catch (const nlohmann::json::exception& e) {
        throw UserError(std::string("vocab.json: ") + e.what());
    }
}

std::vector<std::string> default_word_list() {
    // Order is part of the checkpoint format; append only.
    return {
        "<pad>",
        // function words
        "a", "an", "the", "photo", "of", "picture", "rendering", "image", "drawing", "that", "is",
        "in", "on", "with", "and", "shape", "object", "toy", "one", "two", "three", "four", "five",
        "six", "1", "2", "3", "4", "5", "6",
        // subjects
        "circle", "square", "triangle", "red", "green", "blue", "purple",
        // captioned appearance words
        "plain", "solid", "striped", "stripy", "banded", "inverted", "negative", "reversed",
        // vocabulary-only concept words (never captioned by default)
        "squashed", "melted", "burnt", "dripping", "frozen", "icy", "ice", "block", "cold",
        "flat", "warm", "dry", "tall", "whole", "smooth", "closed", "open", "eyes", "rope",
        "walking", "crumpled", "crushed", "smiley", "emoji", "face", "raised", "arms",
        // distractors
        "cat", "dog", "lion", "zebra", "bear", "bird", "horse", "monkey", "fish", "frog", "car",
        "truck", "boat", "plane", "train", "bicycle", "house", "tree", "flower", "leaf", "rock",
        "cloud", "sun", "moon", "star", "river", "mountain", "ocean", "desert", "forest", "city",
        "street", "bridge", "tower", "castle", "garden", "kitchen", "table", "chair", "lamp",
        "clock", "book", "pencil", "cup", "bottle", "plate", "spoon", "fork", "knife", "bowl",
        "apple", "banana", "orange", "grape", "lemon", "cherry", "bread", "cheese", "cake",
        "cookie", "hat", "shoe", "shirt", "dress", "coat", "glove", "ring", "watch", "phone",
        "camera", "guitar", "piano", "drum", "violin", "ball", "kite", "robot", "doll", "puzzle",
        "cube", "sphere", "cone", "cylinder", "pyramid", "line", "dot", "curve", "edge", "corner",
        "happy", "sad", "angry", "calm", "quick", "slow", "loud", "quiet", "bright", "dark",
        "soft", "hard", "heavy", "light", "old", "new", "young", "rich", "poor", "clean", "dirty",
        "empty", "full", "hot", "wet", "sweet", "sour", "bitter", "salty", "early", "late",
        "near", "far", "left", "right", "up", "down", "inside", "outside", "under", "over",
        "through", "across", "around", "between", "behind", "beside", "above", "below", "run",
        "jump", "swim", "fly", "sing", "dance", "read", "write", "paint", "build",
    };
}

}  // namespace lego::core
