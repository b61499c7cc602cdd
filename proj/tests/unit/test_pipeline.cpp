#include "doctest.h"
#include "pde/common.hpp"
#include "pde/pipeline.hpp"

using namespace pde;

namespace {

struct PipelineFixture {
    Taxonomy tax = load_taxonomy(std::string(PDE_DATA_DIR) + "/taxonomy.json");
    Annotators annotators{load_rules(std::string(PDE_DATA_DIR) + "/rules.json"),
                          load_gazetteers(std::string(PDE_DATA_DIR) + "/gazetteers")};
    Vocab vocab;
    EncoderConfig enc;
    OverrideTable overrides;

    PipelineFixture() {
        MentionRecord rec;
        rec.tokens = {"contact", "john.doe@enron.com", "in", "Montgomery", "today"};
        rec.start = 1;
        rec.end = 2;
        rec.labels = tax.encode({"/contact/email"});
        std::vector<MentionRecord> seed_records{rec};
        auto_annotate(seed_records, annotators.rules, annotators.gazetteers);
        vocab = build_vocab(seed_records, nullptr);

        enc.kind = EncoderKind::Avg;
        enc.word_dim = 6;
        enc.feat_dim = 3;
        enc.window = 4;
        enc.use_typ = true;

        overrides.map["EMAIL_ADDRESS"] = "/contact/email";
        overrides.validate(tax);
    }

    Model make_model(std::uint64_t seed) { return Model(tax, vocab, enc, nullptr, seed); }
};

}  // namespace

TEST_CASE("override table validation") {
    PipelineFixture fx;
    OverrideTable bad;
    bad.map["EMAIL_ADDRESS"] = "/not/a/label";
    CHECK_THROWS_WITH_AS(bad.validate(fx.tax), doctest::Contains("/not/a/label"),
                         ValidationError);
}

TEST_CASE("discover_mentions") {
    PipelineFixture fx;
    SUBCASE("gazetteer hit becomes a mention span") {
        auto spans = discover_mentions({"Montgomery"}, fx.annotators);
        REQUIRE(spans.size() == 1);
        CHECK(spans[0] == std::pair<int, int>{0, 1});
    }
    SUBCASE("no annotator hits, no mentions") {
        CHECK(discover_mentions({"plain", "words"}, fx.annotators).empty());
    }
    SUBCASE("overlapping hits are resolved") {
        auto spans = discover_mentions({"New", "York", "University"}, fx.annotators);
        REQUIRE(spans.size() == 1);
        CHECK(spans[0] == std::pair<int, int>{0, 3});
    }
}

TEST_CASE("override short-circuits the model") {
    PipelineFixture fx;
    std::vector<std::string> tokens = {"contact", "john.doe@enron.com", "today"};

    auto m1 = fx.make_model(111);
    auto m2 = fx.make_model(999);  // different random weights
    auto out1 = run_pipeline(tokens, std::nullopt, m1, fx.annotators, fx.overrides, fx.tax,
                             fx.vocab);
    auto out2 = run_pipeline(tokens, std::nullopt, m2, fx.annotators, fx.overrides, fx.tax,
                             fx.vocab);

    REQUIRE(out1.size() == 1);
    REQUIRE(out2.size() == 1);
    CHECK(out1[0].provenance == Provenance::Override);
    CHECK(out1[0].labels == out2[0].labels);
    CHECK(out1[0].start == out2[0].start);
    CHECK(out1[0].scores.empty());
    CHECK(fx.tax.decode(out1[0].labels) ==
          std::vector<std::string>{"/contact", "/contact/email"});
}

TEST_CASE("unlisted annotator types fall through to the model") {
    PipelineFixture fx;
    auto model = fx.make_model(42);
    auto out = run_pipeline({"in", "Montgomery", "today"}, std::nullopt, model, fx.annotators,
                            fx.overrides, fx.tax, fx.vocab);
    REQUIRE(out.size() == 1);
    CHECK(out[0].provenance == Provenance::Model);
    CHECK(out[0].scores.size() == static_cast<std::size_t>(fx.tax.size()));
    CHECK(!out[0].labels.empty());
    // emitted labels are ancestor-closed
    CHECK(fx.tax.close_ancestors(out[0].labels) == out[0].labels);
}

TEST_CASE("a sentence with no mentions produces no output") {
    PipelineFixture fx;
    auto model = fx.make_model(42);
    auto out = run_pipeline({"nothing", "recognizable", "here"}, std::nullopt, model,
                            fx.annotators, fx.overrides, fx.tax, fx.vocab);
    CHECK(out.empty());
}

TEST_CASE("externally supplied mentions are honored") {
    PipelineFixture fx;
    auto model = fx.make_model(42);
    std::vector<std::pair<int, int>> mentions{{0, 1}};
    auto out = run_pipeline({"somebody", "wrote", "this"}, mentions, model, fx.annotators,
                            fx.overrides, fx.tax, fx.vocab);
    REQUIRE(out.size() == 1);
    CHECK(out[0].provenance == Provenance::Model);
    CHECK(out[0].start == 0);
    CHECK(out[0].end == 1);

    SUBCASE("out-of-range mention is an error") {
        std::vector<std::pair<int, int>> bad{{0, 9}};
        CHECK_THROWS_AS(run_pipeline({"a", "b"}, bad, model, fx.annotators, fx.overrides,
                                     fx.tax, fx.vocab),
                        ValidationError);
    }
}

TEST_CASE("pipeline output is deterministic") {
    PipelineFixture fx;
    auto model = fx.make_model(7);
    std::vector<std::string> tokens = {"contact", "john.doe@enron.com", "in", "Montgomery"};
    auto a = run_pipeline(tokens, std::nullopt, model, fx.annotators, fx.overrides, fx.tax,
                          fx.vocab);
    auto b = run_pipeline(tokens, std::nullopt, model, fx.annotators, fx.overrides, fx.tax,
                          fx.vocab);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].labels == b[i].labels);
        CHECK(a[i].scores == b[i].scores);
        CHECK(a[i].provenance == b[i].provenance);
    }
    // every emitted label set is closed and non-empty
    for (const auto& po : a) {
        CHECK(!po.labels.empty());
        CHECK(fx.tax.close_ancestors(po.labels) == po.labels);
    }
}
