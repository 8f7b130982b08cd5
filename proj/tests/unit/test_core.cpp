// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <set>

#include "lego/core/concept.hpp"
#include "lego/core/config.hpp"
#include "lego/core/embedding_table.hpp"
#include "lego/core/error.hpp"
#include "lego/core/hash.hpp"
#include "lego/core/image.hpp"
#include "lego/core/prompt_template.hpp"
#include "lego/core/rng.hpp"
#include "lego/core/vocabulary.hpp"
#include "support.hpp"

using namespace lego;
using namespace lego::core;

namespace {

std::vector<std::string> first_words(int n) {
    auto all = default_word_list();
    all.resize(static_cast<std::size_t>(n));
    return all;
}

}  // namespace

TEST_CASE("fnv-1a reference vectors") {
    CHECK(hash_hex("") == "cbf29ce484222325");
    CHECK(hash_hex("a") == "af63dc4c8601ec8c");
    CHECK(hash_hex("foobar") == "85944171f73967e8");
}

TEST_CASE("derive_seed separates named streams and is stable") {
    std::set<std::uint64_t> seen;
    for (const char* s : {"corpus", "train", "invert", "sample"}) seen.insert(derive_seed(7, s));
    CHECK(seen.size() == 4);
    CHECK(derive_seed(7, "train") == derive_seed(7, "train"));
    CHECK(derive_seed(7, "train") != derive_seed(8, "train"));
    CHECK(derive_seed(7, std::uint64_t{1}) != derive_seed(7, std::uint64_t{2}));
}

TEST_CASE("rng uniform_int covers the closed range") {
    Rng rng(3);
    std::set<int> seen;
    for (int i = 0; i < 2000; ++i) {
        const int v = rng.uniform_int(-2, 2);
        CHECK(v >= -2);
        CHECK(v <= 2);
        seen.insert(v);
    }
    CHECK(seen.size() == 5);
}

TEST_CASE("vocabulary of 200 words plus 8 pseudo slots") {
    const auto words = first_words(200);
    const auto vocab = Vocabulary::build(words, 8);
    CHECK(vocab.size() == 208);
    CHECK(vocab.ordinary_count() == 200);
    CHECK(vocab.pseudo_band() == IdRange{200, 208});
    for (int i = 0; i < 200; ++i) {
        CHECK(vocab.word(i) == words[static_cast<std::size_t>(i)]);
        CHECK(vocab.id(words[static_cast<std::size_t>(i)]) == i);
    }
    CHECK(vocab.word(203) == "<pseudo:3>");
    CHECK(vocab.is_pseudo(207));
    CHECK_FALSE(vocab.is_pseudo(199));
    CHECK_FALSE(vocab.valid(208));
}

TEST_CASE("vocabulary rejects duplicates and unknown words") {
    CHECK_THROWS_AS(Vocabulary::build({"a", "b", "a"}, 2), UserError);
    const auto vocab = Vocabulary::build({"a", "red", "circle"}, 2);
    CHECK(vocab.tokenize("a  red circle") == std::vector<int>{0, 1, 2});
    CHECK_THROWS_AS(vocab.tokenize("a blue circle"), UserError);
    CHECK(vocab.detokenize({0, 1, 2}) == "a red circle");
}

TEST_CASE("vocabulary json round trip") {
    const auto vocab = Vocabulary::build(first_words(30), 3);
    const auto back = Vocabulary::from_json(vocab.to_json());
    CHECK(back.words() == vocab.words());
    CHECK(back.pseudo_band() == vocab.pseudo_band());
}

TEST_CASE("two-concept template keeps placeholder order") {
    const auto vocab = Vocabulary::build(first_words(200), 8);
    const PromptTemplate t("photo of a {subj} that is {cpt_1} in {cpt_2}", TemplateKind::SubjectPlusConcept);
    CHECK(t.concept_arity() == 2);
    const int cpts[2] = {204, 205};
    const auto ids = render_template(t, vocab, 203, cpts);
    const std::vector<int> expected{vocab.id("photo"), vocab.id("of"), vocab.id("a"), 203,
                                    vocab.id("that"),  vocab.id("is"), 204,           vocab.id("in"), 205};
    CHECK(ids == expected);
}

TEST_CASE("template kinds are validated") {
    CHECK_THROWS_AS(PromptTemplate("a photo of a {cpt_1} {subj}", TemplateKind::SubjectOnly), UserError);
    CHECK_THROWS_AS(PromptTemplate("a photo of a {subj}", TemplateKind::SubjectPlusConcept), UserError);
    CHECK_THROWS_AS(PromptTemplate("a {cpt_2} {subj}", TemplateKind::SubjectPlusConcept), UserError);
    CHECK_THROWS_AS(PromptTemplate("a {cpt_1} {subj}", TemplateKind::ConceptOnly), UserError);
    const PromptTemplate t("a photo of a {cpt_1} {subj}", TemplateKind::SubjectPlusConcept);
    const auto ti = t.without_subject();
    CHECK_FALSE(ti.has_subject());
    CHECK(ti.kind() == TemplateKind::ConceptOnly);
    CHECK(ti.concept_arity() == 1);
}

TEST_CASE("render_template fills {subj} with a phrase") {
    const auto vocab = Vocabulary::build(default_word_list(), 4);
    const PromptTemplate t("a photo of a {cpt_1} {subj}", TemplateKind::SubjectPlusConcept);
    const auto phrase = vocab.tokenize("blue square");
    const int cpt[1] = {vocab.pseudo_band().begin};
    const auto ids = render_template(t, vocab, phrase, cpt);
    CHECK(vocab.detokenize(ids) == "a photo of a <pseudo:0> blue square");
    const int bad_cpt[1] = {vocab.id("red")};
    CHECK_THROWS_AS(render_template(t, vocab, phrase, bad_cpt), UserError);
}

TEST_CASE("template libraries have eight variants per kind") {
    for (const auto& lib : {TemplateLibrary::adjective(1), TemplateLibrary::adjective(2), TemplateLibrary::numeric()}) {
        CHECK(lib.subject_only.size() == 8);
        CHECK(lib.with_concept.size() == 8);
        for (const auto& t : lib.subject_only) CHECK(t.kind() == TemplateKind::SubjectOnly);
        for (const auto& t : lib.with_concept) CHECK(t.kind() == TemplateKind::SubjectPlusConcept);
    }
    CHECK(TemplateLibrary::adjective(2).with_concept[0].concept_arity() == 2);
    const auto lib = TemplateLibrary::numeric();
    CHECK(TemplateLibrary::from_json(lib.to_json()).with_concept == lib.with_concept);
}

TEST_CASE("embedding table guards frozen rows") {
    const auto vocab = Vocabulary::build(first_words(20), 4);
    Rng rng(5);
    auto table = EmbeddingTable::random(vocab, 6, rng, 0.5);
    const auto before = table.frozen_hash();
    for (int id = vocab.pseudo_band().begin; id < vocab.pseudo_band().end; ++id) {
        CHECK(table.row(id).isZero());
    }
    table.set_pseudo_row(21, Eigen::VectorXd::Ones(6));
    CHECK(table.frozen_hash() == before);
    CHECK(table.row(21).isApprox(Eigen::VectorXd::Ones(6)));
    CHECK_THROWS_AS(table.set_pseudo_row(3, Eigen::VectorXd::Ones(6)), UserError);
    CHECK_THROWS_AS(table.set_pseudo_row(21, Eigen::VectorXd::Ones(5)), UserError);
    const auto mask = table.trainable_mask();
    CHECK(std::count(mask.begin(), mask.end(), true) == 4);
}

TEST_CASE("concept spec parsing and validation") {
    const auto vocab = Vocabulary::build(default_word_list(), 8);
    const auto spec = ConceptSpec::from_json(nlohmann::json::parse(
        R"({"n": 1, "positives": ["four", "4"], "negatives": ["2", "3", "5", "6", "two", "three", "five", "six"]})"));
    CHECK(spec.n == 1);
    CHECK(spec.positives == std::vector<std::vector<std::string>>{{"four", "4"}});
    CHECK(spec.negatives[0].size() == 8);
    CHECK_NOTHROW(spec.validate(vocab));

    ConceptSpec bad = spec;
    bad.positives = {{"four", "quatre", "vier"}};
    try {
        bad.validate(vocab);
        FAIL("expected UserError");
    } catch (const UserError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("quatre") != std::string::npos);
        CHECK(msg.find("vier") != std::string::npos);
    }
    CHECK_THROWS_AS(ConceptSpec::from_json(nlohmann::json::parse(R"({"n": 1, "positives": [[]]})")), UserError);
    CHECK_THROWS_AS(ConceptSpec::from_json(nlohmann::json::parse(R"({"n": 2, "positives": [["a"]]})")), UserError);
    CHECK_THROWS_AS(ConceptSpec::from_json(nlohmann::json::parse(R"({"n": 1, "positives": [["a"]], "x": 1})")),
                    UserError);
}

TEST_CASE("inversion config json") {
    InversionConfig c;
    c.lambda = 0.25;
    c.steps = 17;
    c.subject_separation = false;
    const auto back = InversionConfig::from_json(c.to_json());
    CHECK(back.to_json() == c.to_json());
    CHECK(back.hash() == c.hash());
    CHECK_THROWS_AS(InversionConfig::from_json({{"lamda", 0.1}}), UserError);
    InversionConfig neg;
    neg.lambda = -1;
    CHECK_THROWS_AS(neg.validate(), UserError);
    InversionConfig zero;
    zero.steps = 0;
    CHECK_NOTHROW(zero.validate());
    InversionConfig batch;
    batch.batch_size = 0;
    CHECK_THROWS_AS(batch.validate(), UserError);
}

TEST_CASE("png round trip is exact on the 8-bit grid") {
    Rng rng(9);
    Image im = testing::noise_image(rng);
    im.quantize();
    const auto dir = testing::scratch_dir("png");
    write_png(im, dir / "x.png");
    CHECK(read_png(dir / "x.png") == im);
    CHECK_THROWS_AS(read_png(dir / "missing.png"), IoError);
}
