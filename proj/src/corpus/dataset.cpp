// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "lego/corpus/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "lego/core/config.hpp"
#include "lego/core/error.hpp"
#include "lego/core/image.hpp"

namespace lego::corpus {

nlohmann::json MixEntry::to_json() const {
    return {{"transform", transform}, {"weight", weight}, {"words", words}, {"style", style},
            {"word_probability", word_probability}};
}

MixEntry MixEntry::from_json(const nlohmann::json& j) {
    core::reject_unknown_keys(j, {"transform", "weight", "words", "style", "word_probability"}, "corpus.mix");
    MixEntry e;
    try {
        e.transform = j.value("transform", e.transform);
        e.weight = j.value("weight", e.weight);
        e.words = j.value("words", e.words);
        e.style = j.value("style", e.style);
        e.word_probability = j.value("word_probability", e.word_probability);
    } catch (const nlohmann::json::exception& ex) {
        throw UserError(std::string("corpus.mix: ") + ex.what());
    }
    return e;
}

std::vector<MixEntry> CorpusConfig::default_mix() {
    std::vector<MixEntry> mix{
        {"none", 0.30, {"plain", "solid"}, "adjective", 0.5},
        {"none", 0.10, {"one", "1"}, "count", 1.0},
        {"striped", 0.20, {"striped", "stripy", "banded"}, "adjective", 1.0},
        {"inverted", 0.15, {"inverted", "negative", "reversed"}, "adjective", 1.0},
    };
    const std::vector<std::vector<std::string>> numbers{{"two", "2"}, {"three", "3"}, {"four", "4"}, {"five", "5"}};
    for (int k = 2; k <= 5; ++k) {
        mix.push_back({"copies-" + std::to_string(k), 0.0625, numbers[static_cast<std::size_t>(k - 2)], "count", 1.0});
    }
    return mix;
}

void CorpusConfig::validate(const TransformRegistry& registry) const {
    if (count < 1) throw UserError("corpus: count must be >= 1");
    if (shapes.empty() || colors.empty()) throw UserError("corpus: shapes and colors must be nonempty");
    for (const auto& s : shapes) shape_from_string(s);
    for (const auto& c : colors) palette_color(c);
    if (!(size_min >= 0.2 && size_min <= size_max && size_max <= 0.6)) {
        throw UserError("corpus: sizes must satisfy 0.2 <= size_min <= size_max <= 0.6");
    }
    if (jitter < 0.0) throw UserError("corpus: jitter must be >= 0");
    if (mix.empty()) throw UserError("corpus: mix must be nonempty");
    double total = 0.0;
    for (const auto& e : mix) {
        if (e.transform != "none" && !registry.contains(e.transform)) {
            throw UserError("corpus: unknown transform '" + e.transform + "'");
        }
        if (!(e.weight >= 0.0)) throw UserError("corpus: mix weights must be >= 0");
        if (e.style != "adjective" && e.style != "count") {
            throw UserError("corpus: style must be adjective or count, got '" + e.style + "'");
        }
        if (!(e.word_probability >= 0.0 && e.word_probability <= 1.0)) {
            throw UserError("corpus: word_probability must lie in [0, 1]");
        }
        if (e.word_probability > 0.0 && e.words.empty()) throw UserError("corpus: mix entry needs words");
        total += e.weight;
    }
    if (!(total > 0.0)) throw UserError("corpus: mix weights sum to zero");
    for (const auto& h : held_out) {
        if (!registry.contains(h)) throw UserError("corpus: unknown held-out transform '" + h + "'");
    }
}

nlohmann::json CorpusConfig::to_json() const {
    nlohmann::json m = nlohmann::json::array();
    for (const auto& e : mix) m.push_back(e.to_json());
    return {{"count", count},           {"seed", seed},         {"shapes", shapes},
            {"colors", colors},         {"size_min", size_min}, {"size_max", size_max},
            {"jitter", jitter},         {"mix", m},             {"held_out", held_out},
            {"concept_visually_held_out", concept_visually_held_out}};
}

CorpusConfig CorpusConfig::from_json(const nlohmann::json& j) {
    core::reject_unknown_keys(j, {"count", "seed", "shapes", "colors", "size_min", "size_max", "jitter", "mix",
                                  "held_out", "concept_visually_held_out"},
                              "corpus");
    CorpusConfig c;
    try {
        c.count = j.value("count", c.count);
        c.seed = j.value("seed", c.seed);
        c.shapes = j.value("shapes", c.shapes);
        c.colors = j.value("colors", c.colors);
        c.size_min = j.value("size_min", c.size_min);
        c.size_max = j.value("size_max", c.size_max);
        c.jitter = j.value("jitter", c.jitter);
        if (j.contains("mix")) {
            c.mix.clear();
            for (const auto& e : j.at("mix")) c.mix.push_back(MixEntry::from_json(e));
        }
        c.held_out = j.value("held_out", c.held_out);
        c.concept_visually_held_out = j.value("concept_visually_held_out", c.concept_visually_held_out);
    } catch (const nlohmann::json::exception& e) {
        throw UserError(std::string("corpus: ") + e.what());
    }
    return c;
}

nlohmann::json CorpusRecord::to_json() const {
    return {{"path", path}, {"caption", caption}, {"subject", subject.to_json()}, {"transform", transform},
            {"seed", seed}};
}

std::string fill_template(const std::string& text, const std::string& subject,
                          const std::vector<std::string>& concept_words) {
    std::string out;
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] != '{') {
            out += text[i++];
            continue;
        }
        const std::size_t close = text.find('}', i);
        if (close == std::string::npos) throw UserError("unterminated placeholder in '" + text + "'");
        const std::string name = text.substr(i + 1, close - i - 1);
        if (name == "subj") {
            out += subject;
        } else if (name.rfind("cpt_", 0) == 0) {
            const std::size_t k = std::stoul(name.substr(4));
            if (k < 1 || k > concept_words.size()) throw UserError("no word for {" + name + "}");
            out += concept_words[k - 1];
        } else {
            throw UserError("unknown placeholder {" + name + "}");
        }
        i = close + 1;
    }
    // Leading template space when a prefix is empty.
    const auto first = out.find_first_not_of(' ');
    return first == std::string::npos ? std::string() : out.substr(first);
}

namespace {

template <class T> const T& pick(const std::vector<T>& v, Rng& rng) {
    return v[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(v.size()) - 1))];
}

bool is_held_out(const CorpusConfig& c, const std::string& name) {
    return std::find(c.held_out.begin(), c.held_out.end(), name) != c.held_out.end();
}

}  // namespace

CorpusManifest build_pretraining_corpus(const CorpusConfig& config, const core::Vocabulary& vocab,
                                        const TransformRegistry& registry) {
    config.validate(registry);
    std::vector<const MixEntry*> entries;
    std::vector<double> cumulative;
    double total = 0.0;
    for (const auto& e : config.mix) {
        if (config.concept_visually_held_out && e.transform != "none" && is_held_out(config, e.transform)) continue;
        total += e.weight;
        entries.push_back(&e);
        cumulative.push_back(total);
    }
    if (entries.empty() || !(total > 0.0)) throw UserError("corpus: every mix entry is held out");
    std::vector<Shape> shapes;
    for (const auto& s : config.shapes) shapes.push_back(shape_from_string(s));
    std::vector<const ConceptTransform*> held;
    for (const auto& h : config.held_out) held.push_back(&registry.get(h));

    const core::TemplateLibrary adjective = core::TemplateLibrary::adjective(1);
    const core::TemplateLibrary numeric = core::TemplateLibrary::numeric();
    const std::uint64_t root = derive_seed(config.seed, "corpus");
    CorpusManifest out;
    out.reserve(static_cast<std::size_t>(config.count));
    std::uint64_t attempt = 0;
    while (static_cast<int>(out.size()) < config.count) {
        const std::uint64_t seed = derive_seed(root, attempt++);
        if (attempt > static_cast<std::uint64_t>(config.count) * 20) {
            throw UserError("corpus: held-out filter rejects nearly every image");
        }
        Rng rng(seed);
        const double u = rng.uniform() * total;
        const std::size_t k = static_cast<std::size_t>(
            std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
        const MixEntry& entry = *entries[std::min(k, entries.size() - 1)];
        SubjectParams subject = sample_subject(rng, shapes, config.colors);
        subject.size = rng.uniform(config.size_min, config.size_max);
        subject.jitter = config.jitter;

        Scene scene = render_scene(subject, derive_seed(seed, "render"));
        if (entry.transform != "none") {
            scene = apply_concept(scene, registry.get(entry.transform), derive_seed(seed, "transform"));
        }
        const bool concealed = entry.transform != "none" && is_held_out(config, entry.transform);
        if (config.concept_visually_held_out) {
            bool shows_held_out = false;
            for (const auto* t : held) shows_held_out = shows_held_out || t->detect(scene.image);
            if (shows_held_out) continue;
        }

        const bool with_word = !concealed && !entry.words.empty() && rng.bernoulli(entry.word_probability);
        std::string caption;
        if (with_word) {
            const auto& lib = entry.style == "count" ? numeric : adjective;
            caption = fill_template(pick(lib.with_concept, rng).text(), subject.phrase(), {pick(entry.words, rng)});
        } else {
            caption = fill_template(pick(adjective.subject_only, rng).text(), subject.phrase(), {});
        }

        CorpusRecord rec;
        char name[32];
        std::snprintf(name, sizeof(name), "images/%05zu.png", out.size());
        rec.path = name;
        rec.caption = std::move(caption);
        rec.subject = subject;
        rec.transform = entry.transform;
        rec.seed = seed;
        rec.image = std::move(scene.image);
        out.push_back(std::move(rec));
    }
    validate_captions(out, vocab);
    return out;
}

void validate_captions(const CorpusManifest& manifest, const core::Vocabulary& vocab) {
    for (const auto& r : manifest) {
        for (const auto& w : core::split_words(r.caption)) {
            const auto id = vocab.find(w);
            if (!id) throw UserError("caption word '" + w + "' is not in the vocabulary: '" + r.caption + "'");
            if (vocab.is_pseudo(*id)) throw UserError("caption uses a pseudo-token: '" + r.caption + "'");
        }
    }
}

void write_corpus(const CorpusManifest& manifest, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir / "images", ec);
    if (ec) throw IoError("cannot create " + (dir / "images").string() + ": " + ec.message());
    std::ofstream out(dir / "manifest.jsonl");
    if (!out) throw IoError("cannot write " + (dir / "manifest.jsonl").string());
    for (const auto& r : manifest) {
        core::write_png(r.image, dir / r.path);
        out << r.to_json().dump() << '\n';
    }
    if (!out) throw IoError("write failed for " + (dir / "manifest.jsonl").string());
}

CorpusManifest read_corpus(const std::filesystem::path& dir) {
    const auto path = dir / "manifest.jsonl";
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    CorpusManifest out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        CorpusRecord r;
        try {
            const auto j = nlohmann::json::parse(line);
            core::reject_unknown_keys(j, {"path", "caption", "subject", "transform", "seed"}, "manifest");
            r.path = j.at("path").get<std::string>();
            r.caption = j.at("caption").get<std::string>();
            r.subject = SubjectParams::from_json(j.at("subject"));
            r.transform = j.at("transform").get<std::string>();
            r.seed = j.at("seed").get<std::uint64_t>();
        } catch (const nlohmann::json::exception& e) {
            throw UserError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (!std::filesystem::exists(dir / r.path)) throw IoError("missing image " + (dir / r.path).string());
        r.image = core::read_png(dir / r.path);
        out.push_back(std::move(r));
    }
    if (out.empty()) throw UserError("corpus manifest " + path.string() + " is empty");
    return out;
}

core::ExemplarSet make_exemplars(const SubjectParams& subject, const ConceptTransform& transform, int m_with,
                                 int m_without, std::uint64_t seed, int concept_tokens) {
    if (m_with < 1 || m_without < 1) throw UserError("exemplar sets need at least one image per side");
    subject.validate();
    core::ExemplarSet set;
    set.subject_name = subject.phrase();
    set.templates = transform.cardinality ? core::TemplateLibrary::numeric()
                                          : core::TemplateLibrary::adjective(concept_tokens);
    const int with_pool = static_cast<int>(set.templates.with_concept.size());
    const int without_pool = static_cast<int>(set.templates.subject_only.size());
    for (int i = 0; i < m_with; ++i) {
        const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(i));
        const Scene base = render_scene(subject, s);
        set.with_concept.push_back({apply_concept(base, transform, derive_seed(s, "transform")).image, i % with_pool});
    }
    for (int i = 0; i < m_without; ++i) {
        const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(1000 + i));
        set.without_concept.push_back({render_subject(subject, s), i % without_pool});
    }
    set.validate();
    return set;
}

}  // namespace lego::corpus
