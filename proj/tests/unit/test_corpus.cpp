// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <fstream>

#include "lego/core/error.hpp"
#include "lego/core/vocabulary.hpp"
#include "lego/corpus/analysis.hpp"
#include "lego/corpus/dataset.hpp"
#include "lego/corpus/scene.hpp"
#include "lego/corpus/transforms.hpp"
#include "support.hpp"

using namespace lego;
using namespace lego::corpus;

namespace {

const std::vector<Shape> kShapes{Shape::Circle, Shape::Square, Shape::Triangle};
const std::vector<std::string> kColors{"red", "green", "blue", "purple"};

SubjectParams red_circle() {
    SubjectParams p;
    p.shape = Shape::Circle;
    p.color = "red";
    return p;
}

}  // namespace

TEST_CASE("render_subject is deterministic and byte-stable") {
    SubjectParams p = red_circle();
    p.jitter = 0.0;
    const auto a = core::encode_png(render_subject(p, 42));
    const auto b = core::encode_png(render_subject(p, 42));
    CHECK(a == b);
    p.jitter = 3.0;
    CHECK(render_subject(p, 1) != render_subject(p, 2));
}

TEST_CASE("subject params bounds") {
    SubjectParams p = red_circle();
    p.size = 0.7;
    CHECK_THROWS_AS(p.validate(), UserError);
    p.size = 0.45;
    p.color = "mauve";
    CHECK_THROWS_AS(p.validate(), UserError);
}

TEST_CASE("subject classifier agrees with the renderer") {
    Rng rng(11);
    for (int i = 0; i < 100; ++i) {
        const auto p = sample_subject(rng, kShapes, kColors);
        const auto img = render_subject(p, derive_seed(11, static_cast<std::uint64_t>(i)));
        const auto guess = classify_subject(img);
        REQUIRE(guess.has_value());
        CHECK(guess->shape == p.shape);
        CHECK(guess->color == p.color);
        CHECK(count_subjects(img) == 1);
    }
}

TEST_CASE("shape classifier tolerates ragged edges") {
    Rng rng(12);
    for (int i = 0; i < 60; ++i) {
        const auto p = sample_subject(rng, kShapes, kColors);
        auto img = render_subject(p, derive_seed(12, static_cast<std::uint64_t>(i)));
        const Mask fg = foreground(img);
        auto on = [&](int y, int x) {
            return y >= 0 && x >= 0 && y < fg.height && x < fg.width && fg.on[static_cast<std::size_t>(y * fg.width + x)];
        };
        for (int y = 0; y < fg.height; ++y) {
            for (int x = 0; x < fg.width; ++x) {
                const bool edge = on(y, x) && (!on(y - 1, x) || !on(y + 1, x) || !on(y, x - 1) || !on(y, x + 1));
                if (edge && rng.uniform(0.0, 1.0) < 0.3) img.set_rgb(y, x, kBackground);
            }
        }
        const auto shape = classify_shape(img);
        REQUIRE(shape.has_value());
        CHECK(*shape == p.shape);
    }
}

TEST_CASE("striped keeps the subject identity") {
    const auto& reg = TransformRegistry::defaults();
    const auto scene = render_scene(red_circle(), 3);
    const auto out = apply_concept(scene, reg.get("striped"), 4);
    CHECK(detect_striped(out.image));
    CHECK_FALSE(detect_striped(scene.image));
    const auto guess = classify_subject(out.image);
    REQUIRE(guess.has_value());
    CHECK(guess->shape == Shape::Circle);
    CHECK(guess->color == "red");
}

TEST_CASE("copies-3 yields three components") {
    const auto& reg = TransformRegistry::defaults();
    const auto& t = reg.get("copies-3");
    REQUIRE(t.cardinality.has_value());
    CHECK(*t.cardinality == 3);
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto out = apply_concept(render_scene(red_circle(), s), t, s + 100);
        CHECK(count_subjects(out.image) == 3);
    }
}

TEST_CASE("squashed flattens the body") {
    const auto& t = TransformRegistry::defaults().get("squashed");
    SubjectParams sq = red_circle();
    sq.shape = Shape::Square;
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto out = apply_concept(render_scene(sq, s), t, s);
        CHECK(body_aspect(out.image) <= 0.5);
        CHECK(detect_squashed(out.image));
    }
}

TEST_CASE("detector soundness and entanglement bounds on seeded subjects") {
    const auto& reg = TransformRegistry::defaults();
    Rng rng(21);
    for (int i = 0; i < 60; ++i) {
        const auto p = sample_subject(rng, kShapes, kColors);
        const auto scene = render_scene(p, derive_seed(21, static_cast<std::uint64_t>(i)));
        for (const auto& t : reg.all()) {
            CAPTURE(t.name);
            const auto out = apply_concept(scene, t, derive_seed(22, static_cast<std::uint64_t>(i)));
            CHECK(t.detect(out.image));
            CHECK_FALSE(t.detect(scene.image));
            const auto e = measure_entanglement(scene, out);
            CHECK(e.subject_changed >= 0.10);
            if (!t.scene_level) CHECK(e.far_background_changed <= 0.05);
        }
    }
}

TEST_CASE("registry rejects a detector that misses its own output") {
    TransformRegistry reg;
    ConceptTransform bad = make_striped();
    bad.name = "broken";
    bad.detect = [](const Image&) { return false; };
    CHECK_THROWS_AS(reg.add(bad), UserError);
    ConceptTransform background_only = make_striped();
    background_only.name = "background";
    background_only.apply = [](const Scene& s, Rng&) {
        Scene out = s;
        for (int x = 0; x < out.image.width(); ++x) out.image.set_rgb(0, x, {1.0, 1.0, 0.0});
        return out;
    };
    background_only.detect = [](const Image& img) { return img.rgb(0, 0)[2] < 0.1; };
    CHECK_THROWS_AS(reg.add(background_only), UserError);
}

TEST_CASE("make_exemplars sizes and templates") {
    const auto& reg = TransformRegistry::defaults();
    const auto set = make_exemplars(red_circle(), reg.get("striped"), 2, 2, 5);
    CHECK(set.with_concept.size() == 2);
    CHECK(set.without_concept.size() == 2);
    CHECK_NOTHROW(set.validate());
    for (const auto& e : set.with_concept) CHECK(detect_striped(e.image));
    for (const auto& e : set.without_concept) CHECK_FALSE(detect_striped(e.image));

    const auto sweep = make_exemplars(red_circle(), reg.get("striped"), 8, 2, 5);
    CHECK(sweep.with_concept.size() == 8);
    CHECK(sweep.without_concept.size() == 2);
    CHECK(sweep.with_concept[0].image == set.with_concept[0].image);

    CHECK_THROWS_AS(make_exemplars(red_circle(), reg.get("striped"), 0, 2, 5), UserError);
    CHECK_THROWS_AS(make_exemplars(red_circle(), reg.get("striped"), 2, 0, 5), UserError);

    const auto numeric = make_exemplars(red_circle(), reg.get("copies-3"), 2, 2, 5);
    CHECK(numeric.templates.with_concept[0].text() == core::TemplateLibrary::numeric().with_concept[0].text());
}

TEST_CASE("pretraining corpus: captions, mix and held-out filter") {
    const auto vocab = core::Vocabulary::build(core::default_word_list(), 8);
    CorpusConfig cfg;
    cfg.count = 400;
    cfg.seed = 3;
    const auto manifest = build_pretraining_corpus(cfg, vocab);
    CHECK(manifest.size() == 400);
    CHECK_NOTHROW(validate_captions(manifest, vocab));
    const auto& reg = TransformRegistry::defaults();
    std::map<std::string, int> by_transform;
    for (const auto& r : manifest) {
        ++by_transform[r.transform];
        for (const auto& held : cfg.held_out) {
            CHECK(r.transform != held);
            CHECK_FALSE(reg.get(held).detect(r.image));
            for (const auto& w : core::split_words(r.caption)) {
                CHECK(w != held);
            }
        }
        const auto words = core::split_words(r.caption);
        const auto mentions = [&](const char* w) { return std::find(words.begin(), words.end(), w) != words.end(); };
        if (r.transform == "striped") CHECK((mentions("striped") || mentions("stripy") || mentions("banded")));
        CHECK(mentions(to_string(r.subject.shape).c_str()));
        CHECK(mentions(r.subject.color.c_str()));
    }
    CHECK(by_transform.count("none"));
    CHECK(by_transform.count("striped"));
    CHECK(by_transform.count("inverted"));
    CHECK(by_transform.count("copies-3"));

    const auto again = build_pretraining_corpus(cfg, vocab);
    for (std::size_t i = 0; i < manifest.size(); ++i) {
        CHECK(again[i].caption == manifest[i].caption);
        CHECK(again[i].image == manifest[i].image);
    }
}

TEST_CASE("visible held-out images carry concept-free captions") {
    const auto vocab = core::Vocabulary::build(core::default_word_list(), 8);
    CorpusConfig cfg;
    cfg.count = 200;
    cfg.concept_visually_held_out = false;
    MixEntry squashed;
    squashed.transform = "squashed";
    squashed.weight = 0.5;
    squashed.words = {"squashed"};
    cfg.mix.push_back(squashed);
    const auto manifest = build_pretraining_corpus(cfg, vocab);
    int seen = 0;
    for (const auto& r : manifest) {
        if (r.transform != "squashed") continue;
        ++seen;
        CHECK(r.caption.find("squashed") == std::string::npos);
    }
    CHECK(seen > 0);
}

TEST_CASE("corpus rejects caption words outside the vocabulary") {
    const auto vocab = core::Vocabulary::build(core::default_word_list(), 8);
    CorpusConfig cfg;
    cfg.count = 20;
    cfg.mix[0].words = {"plaid"};
    CHECK_THROWS_AS(build_pretraining_corpus(cfg, vocab), UserError);
    CorpusConfig unknown;
    unknown.mix[0].transform = "wobbly";
    CHECK_THROWS_AS(build_pretraining_corpus(unknown, vocab), UserError);
}

TEST_CASE("corpus config json rejects unknown keys") {
    CorpusConfig cfg;
    const auto back = CorpusConfig::from_json(cfg.to_json());
    CHECK(back.to_json() == cfg.to_json());
    auto j = cfg.to_json();
    j["colour"] = "red";
    CHECK_THROWS_AS(CorpusConfig::from_json(j), UserError);
}

TEST_CASE("corpus write/read round trip") {
    const auto vocab = core::Vocabulary::build(core::default_word_list(), 8);
    CorpusConfig cfg;
    cfg.count = 12;
    const auto manifest = build_pretraining_corpus(cfg, vocab);
    const auto dir = testing::scratch_dir("corpus");
    write_corpus(manifest, dir);
    const auto back = read_corpus(dir);
    REQUIRE(back.size() == manifest.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].caption == manifest[i].caption);
        CHECK(back[i].path == manifest[i].path);
        CHECK(back[i].seed == manifest[i].seed);
        CHECK(back[i].image == manifest[i].image);
    }
    std::ifstream in(dir / "manifest.jsonl");
    std::string line;
    std::getline(in, line);
    const auto rec = nlohmann::json::parse(line);
    for (const char* key : {"path", "caption", "subject", "transform", "seed"}) CHECK(rec.contains(key));
}

TEST_CASE("fill_template substitutes words") {
    CHECK(fill_template("a photo of a {cpt_1} {subj}", "red circle", {"striped"}) == "a photo of a striped red circle");
    CHECK(fill_template("{cpt_1} {cpt_2} {subj}", "cat", {"a", "b"}) == "a b cat");
}
