// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <fstream>
#include <set>

#include "lego/core/error.hpp"
#include "lego/corpus/analysis.hpp"
#include "lego/corpus/dataset.hpp"
#include "lego/eval/harness.hpp"
#include "lego/eval/metrics.hpp"
#include "lego/inversion/lego.hpp"
#include "support.hpp"

using namespace lego;
using namespace lego::eval;

namespace {

corpus::SubjectParams subject(corpus::Shape shape, const std::string& color) {
    corpus::SubjectParams p;
    p.shape = shape;
    p.color = color;
    return p;
}

std::vector<core::Image> renders(const corpus::SubjectParams& p, int n, std::uint64_t seed) {
    std::vector<core::Image> out;
    for (int i = 0; i < n; ++i) out.push_back(corpus::render_subject(p, derive_seed(seed, static_cast<std::uint64_t>(i))));
    return out;
}

std::vector<core::Image> transformed(const corpus::SubjectParams& p, const std::string& name, int n) {
    const auto& t = corpus::TransformRegistry::defaults().get(name);
    std::vector<core::Image> out;
    for (int i = 0; i < n; ++i) {
        const auto scene = corpus::render_scene(p, derive_seed(40, static_cast<std::uint64_t>(i)));
        out.push_back(corpus::apply_concept(scene, t, derive_seed(41, static_cast<std::uint64_t>(i))).image);
    }
    return out;
}

Scenario striped_scenario() {
    Scenario s;
    s.subject = subject(corpus::Shape::Circle, "red");
    s.target = subject(corpus::Shape::Square, "blue");
    s.transform = "striped";
    s.spec.n = 1;
    s.spec.positives = {{"striped", "stripy", "banded"}};
    s.spec.negatives = {{"plain", "solid"}};
    return s;
}

EvalConfig quick_eval() {
    EvalConfig c;
    c.inversion.steps = 2;
    c.inversion.neighbor_k = 3;
    c.sampling.steps = 3;
    c.n_samples = 2;
    c.seed = 12;
    return c;
}

}  // namespace

TEST_CASE("concept accuracy on constructive positives and negatives") {
    const auto& reg = corpus::TransformRegistry::defaults();
    for (const char* name : {"striped", "inverted", "copies-3", "squashed", "frozen"}) {
        CAPTURE(name);
        const auto pos = transformed(subject(corpus::Shape::Triangle, "green"), name, 100);
        CHECK(concept_accuracy(pos, reg.get(name)) == 1.0);
        const auto neg = renders(subject(corpus::Shape::Triangle, "green"), 100, 3);
        CHECK(concept_accuracy(neg, reg.get(name)) == 0.0);
    }
    CHECK(concept_accuracy({}, reg.get("striped")) == 0.0);
}

TEST_CASE("leakage score ground truth") {
    const auto red_circle = subject(corpus::Shape::Circle, "red");
    const auto blue_square = subject(corpus::Shape::Square, "blue");
    CHECK(leakage_signature(red_circle, blue_square) == LeakageSignature::Color);
    CHECK(leakage_signature(red_circle, subject(corpus::Shape::Square, "red")) == LeakageSignature::Shape);
    CHECK_THROWS_AS(leakage_signature(red_circle, red_circle), UserError);
    CHECK(leakage_score(renders(red_circle, 50, 1), red_circle, blue_square) == 1.0);
    CHECK(leakage_score(renders(blue_square, 50, 2), red_circle, blue_square) == 0.0);
    const auto red_square = subject(corpus::Shape::Square, "red");
    CHECK(leakage_score(renders(red_circle, 50, 3), red_circle, red_square) == 1.0);
    CHECK(leakage_score(renders(red_square, 50, 4), red_circle, red_square) == 0.0);
}

TEST_CASE("subject fidelity ground truth") {
    const auto blue_square = subject(corpus::Shape::Square, "blue");
    CHECK(subject_fidelity(renders(blue_square, 50, 5), blue_square) == 1.0);
    CHECK(subject_fidelity(renders(subject(corpus::Shape::Circle, "red"), 50, 6), blue_square) == 0.0);
    CHECK(subject_fidelity(transformed(blue_square, "striped", 30), blue_square) == 1.0);
}

TEST_CASE("cardinality counting") {
    const auto p = subject(corpus::Shape::Circle, "purple");
    for (int k = 2; k <= 5; ++k) {
        const auto imgs = transformed(p, "copies-" + std::to_string(k), 30);
        for (const auto& im : imgs) CHECK(cardinality_count(im) == k);
        CHECK(count_accuracy(imgs, k) == 1.0);
        CHECK(count_accuracy(imgs, k + 1) == 0.0);
        const auto hist = cardinality_histogram(imgs);
        CHECK(hist.size() == 1);
        CHECK(hist.at(k) == 30);
    }
    core::Image blank(32, 32);
    for (int y = 0; y < 32; ++y) {
        for (int x = 0; x < 32; ++x) blank.set_rgb(y, x, corpus::kBackground);
    }
    CHECK(cardinality_count(blank) == 0);
    core::Image speck = blank;
    speck.set_rgb(5, 5, {1.0, 0.0, 0.0});
    speck.set_rgb(5, 6, {1.0, 0.0, 0.0});
    speck.set_rgb(6, 5, {1.0, 0.0, 0.0});
    CHECK(cardinality_count(speck) == 0);
    speck.set_rgb(6, 6, {1.0, 0.0, 0.0});
    CHECK(cardinality_count(speck) == 1);
}

TEST_CASE("ablation cell names") {
    const auto all = AblationCell::all();
    REQUIRE(all.size() == 4);
    CHECK(all[0].name() == "lego");
    CHECK(all[1].name() == "ss-only");
    CHECK(all[2].name() == "reversion-like");
    CHECK(all[3].name() == "ti-like");
    for (const auto& c : all) CHECK(AblationCell::from_name(c.name()) == c);
    CHECK(AblationCell::from_name("ti-like") == AblationCell{false, false});
    CHECK_THROWS_AS(AblationCell::from_name("dreambooth"), UserError);
}

TEST_CASE("eval config validation and json") {
    EvalConfig c;
    CHECK(c.m_with == 2);
    CHECK(c.m_without == 2);
    CHECK(c.n_samples == 100);
    CHECK(EvalConfig::from_json(c.to_json()).hash() == c.hash());
    c.n_samples = 0;
    CHECK_THROWS_AS(c.validate(), UserError);
    auto j = EvalConfig{}.to_json();
    j["sampling"]["eta"] = 1;
    CHECK_THROWS_AS(EvalConfig::from_json(j), UserError);
}

TEST_CASE("sample seeds are stable and distinct") {
    const auto a = sample_seeds(7, 50);
    CHECK(a == sample_seeds(7, 50));
    CHECK(std::set<std::uint64_t>(a.begin(), a.end()).size() == 50);
    const auto b = sample_seeds(7, 60);
    CHECK(std::equal(a.begin(), a.end(), b.begin()));
}

TEST_CASE("single-cell ablation report, determinism and files") {
    const auto b = testing::tiny_backbone(21);
    const auto s = striped_scenario();
    const auto cfg = quick_eval();
    const AblationCell lego_only[1] = {{true, true}};
    const auto rep = run_ablation(b, s, lego_only, cfg);
    REQUIRE(rep.cells.size() == 1);
    const auto& c = rep.cell("lego");
    CHECK_FALSE(c.failed);
    CHECK(c.n_samples == 2);
    CHECK(c.concept_accuracy >= 0.0);
    CHECK(c.concept_accuracy <= 1.0);
    CHECK(c.prompt == "a photo of a <pseudo:1> blue square");
    CHECK(rep.seeds == sample_seeds(12, 2));
    CHECK(rep.to_json()["scenario"].contains("config_hash"));

    const auto again = run_ablation(b, s, lego_only, cfg);
    CHECK(again.to_json().dump() == rep.to_json().dump());
    CHECK(again.to_csv() == rep.to_csv());

    const auto dir = testing::scratch_dir("report");
    rep.write(dir);
    CHECK(std::filesystem::exists(dir / "report.json"));
    CHECK(std::filesystem::exists(dir / "report.csv"));
    std::ifstream in(dir / "report.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header.rfind("cell,subject_separation,context_loss", 0) == 0);

    auto zero = cfg;
    zero.n_samples = 0;
    CHECK_THROWS_AS(run_ablation(b, s, lego_only, zero), UserError);
    CHECK_THROWS_AS(run_ablation(b, s, std::span<const AblationCell>{}, cfg), UserError);
}

TEST_CASE("ti-like cell carries no subject or context contribution") {
    const auto b = testing::tiny_backbone(22);
    const auto s = striped_scenario();
    const AblationCell ti[1] = {{false, false}};
    const auto rep = run_ablation(b, s, ti, quick_eval());
    const auto& c = rep.cell("ti-like");
    REQUIRE_FALSE(c.failed);
    CHECK(c.final_losses["L_inv_subjectonly"].get<double>() == 0.0);
    CHECK(c.final_losses["total"].get<double>() == c.final_losses["L_inv_concept"].get<double>());

    core::InversionConfig inv = quick_eval().inversion;
    inv.subject_separation = false;
    inv.lambda = 0.0;
    const auto ex = corpus::make_exemplars(s.subject, corpus::TransformRegistry::defaults().get("striped"), 2, 2, 1);
    const auto res = inversion::lego_optimize(ex, s.spec, b, inv);
    CHECK_FALSE(res.subject.has_value());
    for (const auto& row : res.log.rows) {
        CHECK(row.inv_subject_only == 0.0);
        CHECK(row.total == row.inv_concept);
    }
    for (int id = b.vocab.pseudo_band().begin; id < b.vocab.pseudo_band().end; ++id) {
        if (id == res.learned.ids[0]) continue;
        CHECK(res.table.row(id) == b.table.row(id));
    }
}

TEST_CASE("exemplar sweep rows and flags") {
    const auto b = testing::tiny_backbone(23);
    const int ms[2] = {1, 2};
    const auto rep = exemplar_sweep(b, striped_scenario(), ms, quick_eval());
    REQUIRE(rep.cells.size() == 2);
    CHECK(rep.cells[0].name == "lego-m1");
    CHECK(rep.cells[0].m_with == 1);
    CHECK_FALSE(rep.cells[0].notes.empty());
    CHECK(rep.cells[1].name == "lego-m2");
    CHECK(rep.cells[1].notes.empty());
    const int bad[1] = {0};
    CHECK_THROWS_AS(exemplar_sweep(b, striped_scenario(), bad, quick_eval()), UserError);
}

TEST_CASE("cardinality experiment has a control row") {
    const auto b = testing::tiny_backbone(24);
    Scenario s;
    s.subject = subject(corpus::Shape::Circle, "red");
    s.target = s.subject;
    s.transform = "copies-3";
    s.spec.n = 1;
    s.spec.positives = {{"three", "3"}};
    s.spec.negatives = {{"one", "two", "four", "five", "1", "2", "4", "5"}};
    const auto rep = cardinality_experiment(b, s, quick_eval());
    REQUIRE(rep.cells.size() == 2);
    CHECK(rep.cells[0].name == "lego");
    CHECK(rep.cells[1].name == "random-token");
    CHECK(rep.cells[0].count_accuracy.has_value());
    CHECK(rep.cells[1].count_accuracy.has_value());
    s.transform = "striped";
    CHECK_THROWS_AS(cardinality_experiment(b, s, quick_eval()), UserError);
}
