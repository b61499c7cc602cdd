#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "pde/common.hpp"
#include "pde/pipeline.hpp"
#include "pde/synth.hpp"
#include "pde/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pde;

namespace {

struct AppConfig {
    fs::path base;  // config file directory; relative paths resolve against it
    json doc;

    std::string path(const char* key, bool required) const {
        if (!doc.contains(key) || doc.at(key).get<std::string>().empty()) {
            if (required) {
                throw ValidationError(std::string("config: missing required path \"") + key +
                                      "\"");
            }
            return "";
        }
        fs::path p = doc.at(key).get<std::string>();
        return p.is_absolute() ? p.string() : (base / p).string();
    }
};

AppConfig load_config(const std::string& config_path) {
    std::ifstream in(config_path);
    if (!in) throw ValidationError("cannot open config file: " + config_path);
    AppConfig cfg;
    try {
        in >> cfg.doc;
    } catch (const json::exception& e) {
        throw ValidationError("config " + config_path + " is not valid JSON: " + e.what());
    }
    cfg.base = fs::path(config_path).parent_path();
    return cfg;
}

struct ChannelFlags {
    std::vector<std::string> values;

    // Applies --channels overrides on top of the config's encoder section.
    void apply(EncoderConfig& enc) const {
        if (values.empty()) return;
        enc.use_pos = enc.use_ner = enc.use_typ = false;
        for (const auto& v : values) {
            if (v == "none") continue;  // explicit empty set
            if (v == "pos") enc.use_pos = true;
            else if (v == "ner") enc.use_ner = true;
            else if (v == "typ") enc.use_typ = true;
            else throw ValidationError("unknown channel \"" + v + "\"");
        }
    }
};

Annotators load_annotators(const AppConfig& cfg) {
    Annotators ann;
    auto rules_path = cfg.path("rules", false);
    if (!rules_path.empty()) ann.rules = load_rules(rules_path);
    auto gaz_dir = cfg.path("gazetteer_dir", false);
    if (!gaz_dir.empty()) ann.gazetteers = load_gazetteers(gaz_dir);
    return ann;
}

// Records missing tag channels get them from the annotators; records that
// already carry all three are left alone.
void ensure_channels(std::vector<MentionRecord>& records, const Annotators& ann) {
    std::vector<MentionRecord> missing;
    std::vector<std::size_t> where;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (r.pos && r.ner && r.typ) continue;
        if (r.pos || r.ner || r.typ) {
            throw ValidationError("record " + std::to_string(i) +
                                  " is partially annotated; annotate it fully or not at all");
        }
        missing.push_back(r);
        where.push_back(i);
    }
    if (missing.empty()) return;
    auto_annotate(missing, ann.rules, ann.gazetteers);
    for (std::size_t k = 0; k < where.size(); ++k) records[where[k]] = std::move(missing[k]);
}

int cmd_train(const std::string& config_path, const std::string& encoder_flag,
              const ChannelFlags& channels, std::optional<std::uint64_t> seed_flag,
              bool unsafe_lr, std::string out_dir) {
    auto cfg = load_config(config_path);
    auto tax = load_taxonomy(cfg.path("taxonomy", true));
    auto annotators = load_annotators(cfg);

    EncoderConfig enc = EncoderConfig::from_json(cfg.doc.value("encoder", json::object()));
    if (!encoder_flag.empty()) enc.kind = encoder_kind_from_string(encoder_flag);
    channels.apply(enc);

    const json& tj = cfg.doc.value("train", json::object());
    TrainConfig train_cfg = TrainConfig::from_json(tj);
    if (seed_flag) train_cfg.seed = *seed_flag;
    if (unsafe_lr) train_cfg.unsafe_lr = true;
    train_cfg.validate();

    auto resolve = [&](const char* key) -> std::string {
        if (!tj.contains(key)) return "";
        fs::path p = tj.at(key).get<std::string>();
        return p.is_absolute() ? p.string() : (cfg.base / p).string();
    };
    std::string train_path = resolve("train");
    std::string dev_path = resolve("dev");
    std::string test_path = resolve("test");
    if (train_path.empty() || dev_path.empty()) {
        throw ValidationError("config: train.train and train.dev data paths are required");
    }
    auto train_split = load_jsonl(train_path, tax);
    auto dev_split = load_jsonl(dev_path, tax);
    if (!enc.channels().empty()) {
        ensure_channels(train_split, annotators);
        ensure_channels(dev_split, annotators);
    }

    Embeddings emb;
    const Embeddings* emb_ptr = nullptr;
    auto emb_path = cfg.path("embeddings", false);
    if (!emb_path.empty()) {
        emb = load_embeddings(emb_path, enc.word_dim);
        emb_ptr = &emb;
    }

    auto vocab = build_vocab(train_split, emb_ptr);
    Model model(tax, vocab, enc, emb_ptr, train_cfg.seed);
    auto result = train_model(model, train_split, dev_split, tax, vocab, train_cfg);

    if (out_dir.empty()) out_dir = tj.value("checkpoint_dir", "out");
    fs::path out = fs::path(out_dir).is_absolute() ? fs::path(out_dir) : cfg.base / out_dir;
    fs::create_directories(out);
    {
        std::ofstream ck(out / "checkpoint.json", std::ios::binary);
        ck << result.best_checkpoint.dump() << "\n";
        std::ofstream lg(out / "train_log.jsonl", std::ios::binary);
        lg << result.log_jsonl;
    }
    vocab.save((out / "vocab.json").string());

    std::cout << "trained " << result.log.size() << " epochs; best dev gmean "
              << result.best_gmean << " at epoch " << result.best_epoch << "\n";
    std::cout << "checkpoint: " << (out / "checkpoint.json").string() << "\n";

    if (!test_path.empty()) {
        auto test_split = load_jsonl(test_path, tax);
        if (!enc.channels().empty()) ensure_channels(test_split, annotators);
        auto best = Model::from_checkpoint(result.best_checkpoint, tax, vocab);
        auto rep = evaluate(best, test_split, tax, vocab);
        std::cout << EvalReport::table_header() << "\n"
                  << rep.table_row("test/" + encoder_kind_to_string(enc.kind)) << "\n";
    }
    return 0;
}

int cmd_eval(const std::string& config_path, const std::string& checkpoint_path,
             const std::string& data_path, std::string vocab_path,
             const std::string& out_path) {
    auto cfg = load_config(config_path);
    auto tax = load_taxonomy(cfg.path("taxonomy", true));
    if (vocab_path.empty()) {
        vocab_path = (fs::path(checkpoint_path).parent_path() / "vocab.json").string();
    }
    auto vocab = Vocab::load(vocab_path);
    auto model = Model::load_checkpoint_file(checkpoint_path, tax, vocab);

    auto records = load_jsonl(data_path, tax);
    if (!model.config().channels().empty()) {
        ensure_channels(records, load_annotators(cfg));
    }
    auto rep = evaluate(model, records, tax, vocab);
    std::cout << EvalReport::table_header() << "\n"
              << rep.table_row(encoder_kind_to_string(model.config().kind)) << "\n";
    if (!out_path.empty()) {
        std::ofstream out(out_path, std::ios::binary);
        out << rep.to_json().dump(2) << "\n";
    }
    return 0;
}

int cmd_annotate(const std::string& config_path, const std::string& data_path,
                 const std::string& out_path, bool overwrite) {
    auto cfg = load_config(config_path);
    auto tax = load_taxonomy(cfg.path("taxonomy", true));
    auto annotators = load_annotators(cfg);
    auto records = load_jsonl(data_path, tax);
    auto_annotate(records, annotators.rules, annotators.gazetteers, overwrite);
    save_jsonl(out_path, records, tax);
    std::cout << "annotated " << records.size() << " records -> " << out_path << "\n";
    return 0;
}

int cmd_pipeline(const std::string& config_path, const std::string& checkpoint_path,
                 const std::string& data_path, std::string vocab_path,
                 const std::string& out_path) {
    auto cfg = load_config(config_path);
    auto tax = load_taxonomy(cfg.path("taxonomy", true));
    auto annotators = load_annotators(cfg);
    auto overrides = OverrideTable::from_json(cfg.doc.value("overrides", json::object()), tax);
    if (vocab_path.empty()) {
        vocab_path = (fs::path(checkpoint_path).parent_path() / "vocab.json").string();
    }
    auto vocab = Vocab::load(vocab_path);
    auto model = Model::load_checkpoint_file(checkpoint_path, tax, vocab);

    std::ifstream in(data_path);
    if (!in) throw ValidationError("cannot open input: " + data_path);
    std::ostream* out = &std::cout;
    std::ofstream out_file;
    if (!out_path.empty()) {
        out_file.open(out_path, std::ios::binary);
        if (!out_file) throw ValidationError("cannot write output: " + out_path);
        out = &out_file;
    }

    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ValidationError("line " + std::to_string(line_no) + ": invalid JSON: " +
                                  e.what());
        }
        auto tokens = j.at("tokens").get<std::vector<std::string>>();
        std::optional<std::vector<std::pair<int, int>>> mentions;
        if (j.contains("mentions")) {
            mentions.emplace();
            for (const auto& m : j.at("mentions")) {
                mentions->emplace_back(m.at("start").get<int>(), m.at("end").get<int>());
            }
        }
        auto outputs = run_pipeline(tokens, mentions, model, annotators, overrides, tax, vocab);
        for (const auto& po : outputs) {
            json rec{{"span", {{"start", po.start}, {"end", po.end}}},
                     {"labels", tax.decode(po.labels)},
                     {"provenance", provenance_name(po.provenance)},
                     {"scores", po.scores}};
            *out << rec.dump() << "\n";
        }
    }
    return 0;
}

// Toy-sized model mirroring the gradient-check acceptance setup.
int cmd_gradcheck(const std::string& encoder_flag, const ChannelFlags& channels, double tol) {
    auto tax = Taxonomy::from_labels({"/a", "/a/b", "/c"});
    Vocab vocab;
    for (const char* w : {"alpha", "beta", "gamma", "delta", "ment", "tail"}) {
        vocab.add_word(w, false);
    }
    for (Channel c : {Channel::Pos, Channel::Ner, Channel::Typ}) {
        vocab.tags(c).add("O");
        vocab.tags(c).add("X");
    }
    EncoderConfig enc;
    enc.word_dim = 4;
    enc.feat_dim = 2;
    enc.hidden = 3;
    enc.window = 3;
    enc.use_pos = enc.use_ner = enc.use_typ = true;
    channels.apply(enc);

    auto make_record = [&](std::vector<std::string> tokens, int start, int end) {
        MentionRecord rec;
        rec.tokens = std::move(tokens);
        rec.start = start;
        rec.end = end;
        rec.labels = tax.encode({"/a/b"});
        int n = rec.n_tokens();
        rec.pos = std::vector<std::string>(n, "O");
        rec.ner = std::vector<std::string>(n, "O");
        rec.typ = std::vector<std::string>(n, "X");
        return rec;
    };
    auto r1 = make_record({"alpha", "beta", "ment", "gamma"}, 2, 3);
    auto r2 = make_record({"ment", "tail", "delta"}, 0, 2);

    std::vector<EncoderKind> kinds;
    if (encoder_flag.empty()) {
        kinds = {EncoderKind::Avg, EncoderKind::Rnn, EncoderKind::Att};
    } else {
        kinds = {encoder_kind_from_string(encoder_flag)};
    }

    bool all_pass = true;
    for (EncoderKind kind : kinds) {
        enc.kind = kind;
        Model model(tax, vocab, enc, nullptr, 97);
        std::vector<WindowedExample> batch{
            window(r1, enc.window, enc.mention_cap, vocab, enc.channels()),
            window(r2, enc.window, enc.mention_cap, vocab, enc.channels())};
        std::vector<Tensor> leaves;
        for (auto& [name, t] : model.named_params()) leaves.push_back(t);
        auto res = grad_check(
            model.tape(), [&] { return model.batch_loss(batch, false, nullptr); }, leaves,
            1e-5, tol);
        std::cout << encoder_kind_to_string(kind) << ": max relative error "
                  << res.max_rel_err << (res.pass ? " PASS" : " FAIL") << "\n";
        all_pass = all_pass && res.pass;
    }
    return all_pass ? 0 : 1;
}

int cmd_synth(const std::string& out_dir, std::uint64_t seed, int n_train, int n_dev,
              int n_test, int classes, const std::string& typ_mode) {
    SynthConfig cfg;
    cfg.n_train = n_train;
    cfg.n_dev = n_dev;
    cfg.n_test = n_test;
    cfg.n_classes = classes;
    cfg.typ_mode = typ_mode_from_string(typ_mode);
    auto corpus = synth_corpus(cfg, seed);

    fs::create_directories(out_dir);
    {
        json labels = json::array();
        for (const auto& l : corpus.taxonomy.labels()) labels.push_back(l);
        std::ofstream out(fs::path(out_dir) / "taxonomy.json", std::ios::binary);
        out << labels.dump(2) << "\n";
    }
    save_jsonl((fs::path(out_dir) / "train.jsonl").string(), corpus.train, corpus.taxonomy);
    save_jsonl((fs::path(out_dir) / "dev.jsonl").string(), corpus.dev, corpus.taxonomy);
    save_jsonl((fs::path(out_dir) / "test.jsonl").string(), corpus.test, corpus.taxonomy);
    std::cout << "wrote " << corpus.train.size() << "/" << corpus.dev.size() << "/"
              << corpus.test.size() << " records to " << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Personal-data entity classification toolkit"};
    app.require_subcommand(1);

    std::string config_path, encoder_flag, checkpoint_path, data_path, out_path, vocab_path;
    ChannelFlags channels;
    std::optional<std::uint64_t> seed_flag;
    bool unsafe_lr = false, overwrite = false;
    double tol = 1e-4;
    std::uint64_t synth_seed = 7;
    int n_train = 500, n_dev = 100, n_test = 100, classes = 5;
    std::string typ_mode = "informative";

    auto* train = app.add_subcommand("train", "Train a classifier");
    train->add_option("--config", config_path, "Config JSON")->required();
    train->add_option("--encoder", encoder_flag, "avg|rnn|att");
    train->add_option("--channels", channels.values, "pos, ner, typ, or none");
    train->add_option("--seed", seed_flag, "Random seed");
    train->add_flag("--unsafe-lr", unsafe_lr, "Allow learning rates outside [1e-4, 5e-4]");
    train->add_option("--out", out_path, "Output directory");

    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
    eval->add_option("--config", config_path, "Config JSON")->required();
    eval->add_option("--checkpoint", checkpoint_path, "Checkpoint JSON")->required();
    eval->add_option("--data", data_path, "Evaluation JSONL")->required();
    eval->add_option("--vocab", vocab_path, "Vocab JSON (default: next to checkpoint)");
    eval->add_option("--out", out_path, "Report JSON path");

    auto* annotate = app.add_subcommand("annotate", "Fill tag channels on a corpus");
    annotate->add_option("--config", config_path, "Config JSON")->required();
    annotate->add_option("--data", data_path, "Input JSONL")->required();
    annotate->add_option("--out", out_path, "Output JSONL")->required();
    annotate->add_flag("--overwrite", overwrite, "Replace existing channels");

    auto* pipeline = app.add_subcommand("pipeline", "Classify mentions in sentences");
    pipeline->add_option("--config", config_path, "Config JSON")->required();
    pipeline->add_option("--checkpoint", checkpoint_path, "Checkpoint JSON")->required();
    pipeline->add_option("--data", data_path, "Sentences JSONL")->required();
    pipeline->add_option("--vocab", vocab_path, "Vocab JSON (default: next to checkpoint)");
    pipeline->add_option("--out", out_path, "Output JSONL (default: stdout)");

    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient check");
    gradcheck->add_option("--encoder", encoder_flag, "avg|rnn|att (default: all)");
    gradcheck->add_option("--channels", channels.values, "pos, ner, typ, or none");
    gradcheck->add_option("--tol", tol, "Max relative error to pass");

    auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
    synth->add_option("--out", out_path, "Output directory")->required();
    synth->add_option("--seed", synth_seed, "Generator seed");
    synth->add_option("--train", n_train, "Training mentions");
    synth->add_option("--dev", n_dev, "Dev mentions");
    synth->add_option("--test", n_test, "Test mentions");
    synth->add_option("--classes", classes, "Leaf classes");
    synth->add_option("--typ", typ_mode, "informative|shuffled|off");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (train->parsed()) {
            return cmd_train(config_path, encoder_flag, channels, seed_flag, unsafe_lr,
                             out_path);
        }
        if (eval->parsed()) {
            return cmd_eval(config_path, checkpoint_path, data_path, vocab_path, out_path);
        }
        if (annotate->parsed()) {
            return cmd_annotate(config_path, data_path, out_path, overwrite);
        }
        if (pipeline->parsed()) {
            return cmd_pipeline(config_path, checkpoint_path, data_path, vocab_path, out_path);
        }
        if (gradcheck->parsed()) {
            return cmd_gradcheck(encoder_flag, channels, tol);
        }
        if (synth->parsed()) {
            return cmd_synth(out_path, synth_seed, n_train, n_dev, n_test, classes, typ_mode);
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
