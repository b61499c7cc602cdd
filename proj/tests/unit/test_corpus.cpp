#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "doctest.h"
#include "pde/common.hpp"
#include "pde/corpus.hpp"
#include "pde/synth.hpp"

using namespace pde;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
    auto path = std::filesystem::temp_directory_path() / ("pde_test_" + name);
    std::ofstream out(path);
    out << content;
    return path.string();
}

Taxonomy small_tax() {
    return Taxonomy::from_labels({"/location", "/location/city", "/person"});
}

}  // namespace

TEST_CASE("load_jsonl parses valid records") {
    auto tax = small_tax();
    auto path = write_temp(
        "ok.jsonl",
        R"({"tokens":["Roby","was","born","in","Montgomery"],"start":4,"end":5,"labels":["/location/city"]})"
        "\n");
    auto recs = load_jsonl(path, tax);
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].tokens.size() == 5);
    CHECK(recs[0].start == 4);
    CHECK(recs[0].end == 5);
    // gold arrives ancestor-closed
    CHECK(tax.decode(recs[0].labels) == std::vector<std::string>{"/location", "/location/city"});
}

TEST_CASE("load_jsonl rejects bad records with line context") {
    auto tax = small_tax();
    SUBCASE("empty mention span") {
        auto path = write_temp("span.jsonl",
                               R"({"tokens":["a"],"start":0,"end":0,"labels":["/person"]})"
                               "\n");
        CHECK_THROWS_WITH_AS(load_jsonl(path, tax), doctest::Contains("empty mention span"),
                             ValidationError);
    }
    SUBCASE("channel length mismatch, line number attached") {
        auto path = write_temp("chan.jsonl",
                               R"({"tokens":["a"],"start":0,"end":1,"labels":["/person"]})"
                               "\n"
                               R"({"tokens":["a","b","c","d","e"],"start":0,"end":1,)"
                               R"("labels":["/person"],"ner":["O","O","O","O"]})"
                               "\n");
        CHECK_THROWS_WITH_AS(load_jsonl(path, tax),
                             doctest::Contains("line 2: ner channel length mismatch"),
                             ValidationError);
    }
    SUBCASE("unknown label") {
        auto path = write_temp("lbl.jsonl",
                               R"({"tokens":["a"],"start":0,"end":1,"labels":["/nope"]})"
                               "\n");
        CHECK_THROWS_WITH_AS(load_jsonl(path, tax), doctest::Contains("/nope"), ValidationError);
    }
    SUBCASE("span out of range") {
        auto path = write_temp("oob.jsonl",
                               R"({"tokens":["a"],"start":0,"end":2,"labels":["/person"]})"
                               "\n");
        CHECK_THROWS_WITH_AS(load_jsonl(path, tax), doctest::Contains("line 1"),
                             ValidationError);
    }
}

TEST_CASE("auto_annotate fills channels") {
    auto tax = small_tax();
    auto rules = load_rules(std::string(PDE_DATA_DIR) + "/rules.json");
    auto gaz = load_gazetteers(std::string(PDE_DATA_DIR) + "/gazetteers");

    MentionRecord rec;
    rec.tokens = {"Roby", "was", "born", "in", "Montgomery"};
    rec.start = 4;
    rec.end = 5;
    rec.labels = tax.encode({"/location/city"});
    std::vector<MentionRecord> recs{rec};

    auto_annotate(recs, rules, gaz);
    REQUIRE(recs[0].typ.has_value());
    // Roby is in the PERSON dictionary; Montgomery in CITY.
    CHECK(*recs[0].typ == std::vector<std::string>{"PERSON", "O", "O", "O", "CITY"});
    CHECK((*recs[0].ner)[4] == "LOCATION");
    CHECK((*recs[0].pos)[2] == "VERB");

    SUBCASE("idempotent under overwrite") {
        auto again = recs;
        auto_annotate(again, rules, gaz, true);
        CHECK(*again[0].typ == *recs[0].typ);
        CHECK(*again[0].ner == *recs[0].ner);
        CHECK(*again[0].pos == *recs[0].pos);
    }
    SUBCASE("existing channels are an error without overwrite") {
        CHECK_THROWS_AS(auto_annotate(recs, rules, gaz, false), ValidationError);
    }
    SUBCASE("all-unknown tokens produce all-O typ") {
        MentionRecord plain;
        plain.tokens = {"qq", "zz"};
        plain.start = 0;
        plain.end = 1;
        plain.labels = tax.encode({"/person"});
        std::vector<MentionRecord> v{plain};
        auto_annotate(v, rules, gaz);
        CHECK(*v[0].typ == std::vector<std::string>{"O", "O"});
    }
    SUBCASE("email token gets tagged at its position") {
        MentionRecord mail;
        mail.tokens = {"write", "john.doe@enron.com", "now"};
        mail.start = 1;
        mail.end = 2;
        mail.labels = tax.encode({"/person"});
        std::vector<MentionRecord> v{mail};
        auto_annotate(v, rules, gaz);
        CHECK((*v[0].typ)[1] == "EMAIL_ADDRESS");
        CHECK((*v[0].typ)[0] == "O");
    }
}

TEST_CASE("windowing arithmetic") {
    Vocab vocab;
    for (const char* w : {"a", "b", "m", "c", "d"}) vocab.add_word(w, false);

    MentionRecord rec;
    rec.labels = LabelSet(1);
    rec.labels.set(0);

    SUBCASE("short sentence forces padding") {
        rec.tokens = {"a", "b", "m", "c", "d"};
        rec.start = 4;
        rec.end = 5;
        auto ex = window(rec, 10, 10, vocab, {});
        REQUIRE(ex.left_words.size() == 10);
        REQUIRE(ex.right_words.size() == 10);
        for (int i = 0; i < 6; ++i) {
            CHECK(ex.left_words[i] == Vocab::kPad);
            CHECK(ex.left_mask[i] == 0);
        }
        for (int i = 6; i < 10; ++i) CHECK(ex.left_mask[i] == 1);
        for (int i = 0; i < 10; ++i) CHECK(ex.right_mask[i] == 0);
    }
    SUBCASE("mention at sentence start has all-PAD left") {
        rec.tokens = {"m", "c"};
        rec.start = 0;
        rec.end = 1;
        auto ex = window(rec, 4, 10, vocab, {});
        for (int i = 0; i < 4; ++i) CHECK(ex.left_mask[i] == 0);
        CHECK(ex.right_mask[0] == 1);
        CHECK(ex.right_mask[1] == 0);
    }
    SUBCASE("exact fit, no padding") {
        rec.tokens = {"a", "b", "m", "c", "d"};
        rec.start = 2;
        rec.end = 3;
        auto ex = window(rec, 2, 10, vocab, {});
        CHECK(ex.left_words == std::vector<int>{vocab.word_id("a"), vocab.word_id("b")});
        CHECK(ex.right_words == std::vector<int>{vocab.word_id("c"), vocab.word_id("d")});
        CHECK(ex.left_mask == std::vector<std::uint8_t>{1, 1});
        CHECK(ex.right_mask == std::vector<std::uint8_t>{1, 1});
    }
    SUBCASE("mention cap truncates the tail") {
        rec.tokens = {"a", "b", "m", "c", "d"};
        rec.start = 0;
        rec.end = 5;
        auto ex = window(rec, 2, 3, vocab, {});
        CHECK(ex.mention_words.size() == 3);
        CHECK(ex.mention_words[0] == vocab.word_id("a"));
        CHECK(ex.mention_words[2] == vocab.word_id("m"));
    }
    SUBCASE("missing required channel is an error") {
        rec.tokens = {"a", "m"};
        rec.start = 1;
        rec.end = 2;
        CHECK_THROWS_AS(window(rec, 2, 10, vocab, {Channel::Typ}), ValidationError);
    }
}

TEST_CASE("windowing is length-preserving and round-trips context") {
    auto rng = make_rng(99, 3);
    std::vector<std::string> words = {"a", "b", "c", "d", "e", "f", "g", "h"};
    for (int trial = 0; trial < 200; ++trial) {
        MentionRecord rec;
        int n = 1 + static_cast<int>(rng() % 12);
        for (int i = 0; i < n; ++i) rec.tokens.push_back(words[rng() % words.size()]);
        rec.start = static_cast<int>(rng() % n);
        rec.end = rec.start + 1 + static_cast<int>(rng() % (n - rec.start));
        rec.labels = LabelSet(1);
        rec.labels.set(0);

        std::vector<MentionRecord> one{rec};
        Vocab vocab = build_vocab(one, nullptr);
        int C = 1 + static_cast<int>(rng() % 6);
        auto ex = window(rec, C, 10, vocab, {});
        REQUIRE(static_cast<int>(ex.left_words.size()) == C);
        REQUIRE(static_cast<int>(ex.right_words.size()) == C);

        // un-window: dropping PAD recovers the adjacent context tokens
        std::vector<std::string> left;
        for (int i = 0; i < C; ++i) {
            if (ex.left_mask[i]) left.push_back(vocab.words[ex.left_words[i]]);
        }
        std::vector<std::string> expect_left(rec.tokens.begin() + std::max(0, rec.start - C),
                                             rec.tokens.begin() + rec.start);
        CHECK(left == expect_left);

        std::vector<std::string> right;
        for (int i = 0; i < C; ++i) {
            if (ex.right_mask[i]) right.push_back(vocab.words[ex.right_words[i]]);
        }
        std::vector<std::string> expect_right(rec.tokens.begin() + rec.end,
                                              rec.tokens.begin() + std::min(n, rec.end + C));
        CHECK(right == expect_right);
    }
}

TEST_CASE("build_vocab marks pretrained words") {
    auto emb_path = write_temp("glove.txt", "the 0.1 0.2 0.3 0.4\nbig 0.5 0.6 0.7 0.8\n");
    auto emb = load_embeddings(emb_path, 4);
    CHECK(emb.vectors.size() == 2);

    MentionRecord rec;
    rec.tokens = {"the", "zzzqx"};
    rec.start = 0;
    rec.end = 1;
    rec.labels = LabelSet(1);
    rec.labels.set(0);
    auto vocab = build_vocab({rec}, &emb);
    CHECK(vocab.pretrained[vocab.word_id("the")]);
    CHECK_FALSE(vocab.pretrained[vocab.word_id("zzzqx")]);
    CHECK(vocab.word_id("never-seen") == Vocab::kUnk);

    SUBCASE("empty corpus is an error") {
        CHECK_THROWS_WITH_AS(build_vocab({}, &emb), doctest::Contains("empty corpus"),
                             ValidationError);
    }
    SUBCASE("embedding dim mismatch is an error") {
        CHECK_THROWS_AS(load_embeddings(emb_path, 3), ValidationError);
    }
    SUBCASE("tag maps collect channel values plus PAD/UNK") {
        MentionRecord tagged = rec;
        tagged.typ = std::vector<std::string>{"O", "CITY"};
        auto v = build_vocab({tagged}, nullptr);
        CHECK(v.tags(Channel::Typ).size() == 4);  // pad, unk, O, CITY
        CHECK(v.tags(Channel::Pos).size() == 2);  // untouched
    }
}

TEST_CASE("vocab save/load round trip") {
    MentionRecord rec;
    rec.tokens = {"alpha", "beta"};
    rec.start = 0;
    rec.end = 1;
    rec.labels = LabelSet(1);
    rec.labels.set(0);
    rec.typ = std::vector<std::string>{"T1", "O"};
    auto vocab = build_vocab({rec}, nullptr);
    auto path = write_temp("vocab.json", "");
    vocab.save(path);
    auto loaded = Vocab::load(path);
    CHECK(loaded.words == vocab.words);
    CHECK(loaded.word_hash() == vocab.word_hash());
    CHECK(loaded.tag_hash(Channel::Typ) == vocab.tag_hash(Channel::Typ));
}

TEST_CASE("synth corpus determinism and quotas") {
    SynthConfig cfg;
    cfg.n_train = 500;
    cfg.n_dev = 100;
    cfg.n_test = 100;

    auto a = synth_corpus(cfg, 7);
    auto b = synth_corpus(cfg, 7);
    REQUIRE(a.train.size() == 500);
    CHECK(a.taxonomy.size() == 10);

    SUBCASE("same seed gives byte-identical corpora") {
        auto ja = std::filesystem::temp_directory_path() / "pde_synth_a.jsonl";
        auto jb = std::filesystem::temp_directory_path() / "pde_synth_b.jsonl";
        save_jsonl(ja.string(), a.train, a.taxonomy);
        save_jsonl(jb.string(), b.train, b.taxonomy);
        CHECK(read_file(ja.string()) == read_file(jb.string()));
    }
    SUBCASE("different seeds differ") {
        auto c = synth_corpus(cfg, 8);
        bool same = true;
        for (std::size_t i = 0; i < a.train.size() && same; ++i) {
            same = a.train[i].tokens == c.train[i].tokens;
        }
        CHECK_FALSE(same);
    }
    SUBCASE("every label has at least 10 instances") {
        std::vector<int> counts(a.taxonomy.size(), 0);
        for (const auto& rec : a.train) {
            for (int idx : rec.labels.indices()) ++counts[idx];
        }
        for (int i = 0; i < a.taxonomy.size(); ++i) {
            CAPTURE(a.taxonomy.label(i));
            CHECK(counts[i] >= 10);
        }
    }
    SUBCASE("mention surfaces are split-disjoint") {
        std::set<std::string> train_surfaces, test_surfaces;
        for (const auto& rec : a.train) {
            for (int i = rec.start; i < rec.end; ++i) train_surfaces.insert(rec.tokens[i]);
        }
        for (const auto& rec : a.test) {
            for (int i = rec.start; i < rec.end; ++i) test_surfaces.insert(rec.tokens[i]);
        }
        for (const auto& s : test_surfaces) CHECK(train_surfaces.count(s) == 0);
    }
}

namespace {

// Empirical mutual information (nats) between the TYP tag at the mention
// head and the gold leaf label.
double typ_label_mi(const std::vector<MentionRecord>& records) {
    std::map<std::string, int> tag_counts;
    std::map<int, int> label_counts;
    std::map<std::pair<std::string, int>, int> joint;
    int n = 0;
    for (const auto& rec : records) {
        std::string tag = (*rec.typ)[rec.start];
        int leaf = rec.labels.indices().back();  // deepest label has the highest index
        ++tag_counts[tag];
        ++label_counts[leaf];
        ++joint[{tag, leaf}];
        ++n;
    }
    double mi = 0.0;
    for (const auto& [key, c] : joint) {
        double pxy = static_cast<double>(c) / n;
        double px = static_cast<double>(tag_counts[key.first]) / n;
        double py = static_cast<double>(label_counts[key.second]) / n;
        mi += pxy * std::log(pxy / (px * py));
    }
    return mi;
}

}  // namespace

TEST_CASE("informative TYP channel carries mutual information with the gold label") {
    SynthConfig cfg;
    cfg.n_train = 500;
    auto informative = synth_corpus(cfg, 7);
    double mi_info = typ_label_mi(informative.train);
    CHECK(mi_info > 0.5);

    cfg.typ_mode = SynthConfig::TypMode::Shuffled;
    auto shuffled = synth_corpus(cfg, 7);
    double mi_shuf = typ_label_mi(shuffled.train);
    CHECK(mi_shuf < 0.15);
    CHECK(mi_shuf < mi_info);
}
