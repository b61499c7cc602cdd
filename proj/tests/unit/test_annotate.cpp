#include <algorithm>
#include <random>
#include <set>

#include "doctest.h"
#include "pde/annotate.hpp"
#include "pde/common.hpp"

using namespace pde;

namespace {

std::vector<RegexRule> default_rules() {
    return load_rules(std::string(PDE_DATA_DIR) + "/rules.json");
}

std::vector<Gazetteer> default_gazetteers() {
    return load_gazetteers(std::string(PDE_DATA_DIR) + "/gazetteers");
}

SpanAnnotation span(int s, int e, std::string type, int prio = 0,
                    AnnSource src = AnnSource::Rule) {
    return {s, e, std::move(type), src, prio};
}

}  // namespace

TEST_CASE("regex annotation finds canonical hits") {
    auto rules = default_rules();
    SUBCASE("email token") {
        auto anns = annotate_regex({"contact", "john.doe@enron.com", "today"}, rules);
        REQUIRE(anns.size() >= 1);
        CHECK(anns[0].start == 1);
        CHECK(anns[0].end == 2);
        CHECK(anns[0].type_name == "EMAIL_ADDRESS");
    }
    SUBCASE("zip token") {
        std::vector<RegexRule> zip_only;
        for (auto& r : rules) {
            if (r.name == "ZIP_CODE") zip_only.push_back(r);
        }
        auto anns = annotate_regex({"zip", "35801"}, zip_only);
        REQUIRE(anns.size() == 1);
        CHECK(anns[0] == span(1, 2, "ZIP_CODE", zip_only[0].priority));
    }
    SUBCASE("no matches yields empty list") {
        CHECK(annotate_regex({"plain", "words", "only"}, rules).empty());
    }
    SUBCASE("multi-token date run") {
        auto anns = annotate_regex({"on", "January", "5", ",", "1999", "he"}, rules);
        bool found = false;
        for (const auto& a : anns) {
            if (a.type_name == "DATE" && a.start == 1 && a.end == 5) found = true;
        }
        CHECK(found);
    }
}

TEST_CASE("rule loading validates patterns and priorities") {
    CHECK_THROWS_AS(load_rules(std::string(PDE_DATA_DIR) + "/nonexistent.json"),
                    ValidationError);
}

TEST_CASE("gazetteer annotation") {
    auto city = make_gazetteer("CITY", {"montgomery", "new york"});
    auto org = make_gazetteer("ORGANIZATION", {"new york university"});
    SUBCASE("single-token city, case-insensitive") {
        auto anns = annotate_gazetteer({"Montgomery", ","}, {city});
        REQUIRE(anns.size() == 1);
        CHECK(anns[0].start == 0);
        CHECK(anns[0].end == 1);
        CHECK(anns[0].type_name == "CITY");
    }
    SUBCASE("longest match wins at a shared start") {
        auto anns = annotate_gazetteer({"New", "York", "University"}, {org, city});
        REQUIRE(anns.size() == 1);
        CHECK(anns[0].start == 0);
        CHECK(anns[0].end == 3);
        CHECK(anns[0].type_name == "ORGANIZATION");
    }
    SUBCASE("empty gazetteer list") {
        CHECK(annotate_gazetteer({"New", "York"}, {}).empty());
    }
    SUBCASE("whitespace-only entry rejected") {
        CHECK_THROWS_AS(make_gazetteer("X", {"   "}), ValidationError);
    }
}

TEST_CASE("gazetteer matcher agrees with a brute-force oracle") {
    // Oracle: enumerate every substring, check membership, keep longest per start.
    std::vector<std::string> dict_words = {"aa", "bb", "cc"};
    std::vector<Gazetteer> gaz = {
        make_gazetteer("T1", {"aa", "aa bb", "bb cc aa"}),
        make_gazetteer("T2", {"bb", "aa bb cc"}),
    };
    auto rng = make_rng(7, 1);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<std::string> tokens;
        int n = 1 + static_cast<int>(rng() % 6);
        for (int i = 0; i < n; ++i) tokens.push_back(dict_words[rng() % dict_words.size()]);

        std::vector<SpanAnnotation> oracle;
        for (int s = 0; s < n; ++s) {
            std::vector<SpanAnnotation> here;
            for (int e = s + 1; e <= n; ++e) {
                std::string joined = join_tokens(tokens, s, e);
                for (const auto& g : gaz) {
                    if (g.entries.count(casefold(joined))) {
                        here.push_back(span(s, e, g.type_name, 0, AnnSource::Gazetteer));
                    }
                }
            }
            int longest = 0;
            for (const auto& a : here) longest = std::max(longest, a.end - a.start);
            for (const auto& a : here) {
                if (a.end - a.start == longest) oracle.push_back(a);
            }
        }
        auto sort_key = [](std::vector<SpanAnnotation> v) {
            std::sort(v.begin(), v.end(),
                      [](const SpanAnnotation& a, const SpanAnnotation& b) {
                          return std::tie(a.start, a.end, a.type_name) <
                                 std::tie(b.start, b.end, b.type_name);
                      });
            return v;
        };
        CHECK(sort_key(annotate_gazetteer(tokens, gaz)) == sort_key(oracle));
    }
}

TEST_CASE("resolve_overlaps examples") {
    SUBCASE("longer span wins") {
        auto out = resolve_overlaps({span(0, 3, "ORG", 1), span(0, 2, "CITY", 2)});
        REQUIRE(out.size() == 1);
        CHECK(out[0].type_name == "ORG");
    }
    SUBCASE("priority breaks equal spans") {
        auto out = resolve_overlaps({span(0, 1, "A", 2), span(0, 1, "B", 1)});
        REQUIRE(out.size() == 1);
        CHECK(out[0].type_name == "A");
    }
    SUBCASE("non-overlapping inputs kept, ordered by start") {
        auto out = resolve_overlaps({span(3, 4, "B", 0), span(0, 2, "A", 0)});
        REQUIRE(out.size() == 2);
        CHECK(out[0].type_name == "A");
        CHECK(out[1].type_name == "B");
    }
}

TEST_CASE("resolve_overlaps output never overlaps, for random span soups") {
    auto rng = make_rng(13, 2);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<SpanAnnotation> anns;
        int n = static_cast<int>(rng() % 12);
        for (int i = 0; i < n; ++i) {
            int s = static_cast<int>(rng() % 10);
            int len = 1 + static_cast<int>(rng() % 4);
            anns.push_back(span(s, s + len, "T" + std::to_string(rng() % 3),
                                static_cast<int>(rng() % 5)));
        }
        auto out = resolve_overlaps(anns);
        for (std::size_t i = 0; i < out.size(); ++i) {
            for (std::size_t j = i + 1; j < out.size(); ++j) {
                bool overlap = out[i].start < out[j].end && out[j].start < out[i].end;
                CHECK(!overlap);
            }
        }
        // determinism under input permutation
        auto shuffled = anns;
        shuffle_vec(shuffled, rng);
        CHECK(resolve_overlaps(shuffled) == out);
        // tagging resolved spans never assigns two types to one token
        if (!out.empty()) {
            CHECK_NOTHROW(spans_to_token_tags(out, 16));
        }
    }
}

TEST_CASE("spans_to_token_tags") {
    CHECK(spans_to_token_tags({span(1, 2, "EMAIL")}, 3) ==
          std::vector<std::string>{"O", "EMAIL", "O"});
    CHECK(spans_to_token_tags({}, 2) == std::vector<std::string>{"O", "O"});
    CHECK(spans_to_token_tags({span(0, 3, "ORG")}, 3) ==
          std::vector<std::string>{"ORG", "ORG", "ORG"});
    CHECK_THROWS_AS(spans_to_token_tags({span(1, 4, "X")}, 3), ValidationError);
}

TEST_CASE("pos_lite fixed behaviors") {
    CHECK(pos_lite({"born"}) == std::vector<std::string>{"VERB"});
    CHECK(pos_lite({"35801"}) == std::vector<std::string>{"NUM"});
    CHECK(pos_lite({","}) == std::vector<std::string>{"PUNCT"});
    CHECK(pos_lite({"Montgomery"}) == std::vector<std::string>{"PROPN"});
    CHECK(pos_lite({"the"}) == std::vector<std::string>{"OTHER"});
    CHECK(pos_lite({"attended"}) == std::vector<std::string>{"VERB"});
    CHECK(pos_lite({"famous"}) == std::vector<std::string>{"ADJ"});
    CHECK(pos_lite({"music"}) == std::vector<std::string>{"NOUN"});
    // stable across calls
    std::vector<std::string> sent = {"Roby", "was", "born", "in", "Montgomery", ","
                                     , "Alabama", "in", "1999", "."};
    CHECK(pos_lite(sent) == pos_lite(sent));
}

TEST_CASE("default rules and gazetteers load cleanly") {
    CHECK(default_rules().size() >= 6);
    auto gaz = default_gazetteers();
    CHECK(gaz.size() == 4);
    bool montgomery = false;
    for (const auto& g : gaz) {
        if (g.type_name == "CITY" && g.entries.count("montgomery")) montgomery = true;
    }
    CHECK(montgomery);
}
