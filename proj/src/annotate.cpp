#include "pde/annotate.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "pde/common.hpp"

namespace pde {

std::string casefold(const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string join_tokens(const std::vector<std::string>& tokens, std::size_t start,
                        std::size_t end) {
    std::string out;
    for (std::size_t i = start; i < end; ++i) {
        if (i > start) out += ' ';
        out += tokens[i];
    }
    return out;
}

std::vector<RegexRule> load_rules(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open rules file: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("rules file " + path + " is not valid JSON: " + e.what());
    }
    if (!doc.is_array()) throw ValidationError("rules file must be a JSON array");

    std::vector<RegexRule> rules;
    std::unordered_set<int> priorities;
    for (const auto& el : doc) {
        RegexRule r;
        r.name = el.value("name", "");
        r.pattern = el.value("pattern", "");
        r.priority = el.value("priority", 0);
        if (r.name.empty()) throw ValidationError("rule with empty name in " + path);
        if (!priorities.insert(r.priority).second) {
            throw ValidationError("duplicate rule priority " + std::to_string(r.priority) +
                                  " in " + path);
        }
        try {
            r.compiled = std::regex(r.pattern);
        } catch (const std::regex_error& e) {
            throw ValidationError("rule \"" + r.name + "\": pattern does not compile: " +
                                  e.what());
        }
        rules.push_back(std::move(r));
    }
    return rules;
}

Gazetteer make_gazetteer(const std::string& type_name, const std::vector<std::string>& entries) {
    if (type_name.empty()) throw ValidationError("gazetteer with empty type name");
    Gazetteer g;
    g.type_name = type_name;
    for (const auto& raw : entries) {
        std::string folded = casefold(raw);
        // token count of the entry = spaces + 1 (entries are space-normalized)
        std::istringstream ss(folded);
        std::string tok;
        std::vector<std::string> toks;
        while (ss >> tok) toks.push_back(tok);
        if (toks.empty()) {
            throw ValidationError("gazetteer " + type_name + ": whitespace-only entry");
        }
        std::string norm = join_tokens(toks, 0, toks.size());
        g.max_entry_tokens = std::max(g.max_entry_tokens, static_cast<int>(toks.size()));
        g.entries.insert(norm);
    }
    if (g.entries.empty()) throw ValidationError("gazetteer " + type_name + " has no entries");
    return g;
}

std::vector<Gazetteer> load_gazetteers(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw ValidationError("gazetteer dir not found: " + dir);
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".txt") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    std::vector<Gazetteer> out;
    for (const auto& file : files) {
        std::ifstream in(file);
        if (!in) throw ValidationError("cannot open gazetteer file: " + file.string());
        std::vector<std::string> entries;
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.find_first_not_of(" \t") == std::string::npos) continue;
            entries.push_back(line);
        }
        out.push_back(make_gazetteer(file.stem().string(), entries));
    }
    return out;
}

std::vector<SpanAnnotation> annotate_regex(const std::vector<std::string>& tokens,
                                           const std::vector<RegexRule>& rules) {
    constexpr std::size_t kMaxRun = 5;
    std::vector<SpanAnnotation> out;
    for (std::size_t start = 0; start < tokens.size(); ++start) {
        std::size_t max_end = std::min(tokens.size(), start + kMaxRun);
        for (std::size_t end = start + 1; end <= max_end; ++end) {
            std::string surface = join_tokens(tokens, start, end);
            for (const auto& rule : rules) {
                if (std::regex_match(surface, rule.compiled)) {
                    out.push_back({static_cast<int>(start), static_cast<int>(end), rule.name,
                                   AnnSource::Rule, rule.priority});
                }
            }
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const SpanAnnotation& a, const SpanAnnotation& b) {
        if (a.start != b.start) return a.start < b.start;
        return a.priority > b.priority;
    });
    return out;
}

std::vector<SpanAnnotation> annotate_gazetteer(const std::vector<std::string>& tokens,
                                               const std::vector<Gazetteer>& gazetteers) {
    int max_run = 1;
    for (const auto& g : gazetteers) max_run = std::max(max_run, g.max_entry_tokens);

    std::vector<std::string> folded(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) folded[i] = casefold(tokens[i]);

    std::vector<SpanAnnotation> out;
    for (std::size_t start = 0; start < tokens.size(); ++start) {
        std::vector<SpanAnnotation> here;
        std::size_t max_end = std::min(tokens.size(), start + static_cast<std::size_t>(max_run));
        for (std::size_t end = start + 1; end <= max_end; ++end) {
            std::string surface = join_tokens(folded, start, end);
            for (const auto& g : gazetteers) {
                if (g.entries.count(surface)) {
                    here.push_back({static_cast<int>(start), static_cast<int>(end), g.type_name,
                                    AnnSource::Gazetteer, 0});
                }
            }
        }
        if (here.empty()) continue;
        int longest = 0;
        for (const auto& a : here) longest = std::max(longest, a.end - a.start);
        for (auto& a : here) {
            if (a.end - a.start == longest) out.push_back(std::move(a));
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const SpanAnnotation& a, const SpanAnnotation& b) {
        if (a.start != b.start) return a.start < b.start;
        return a.type_name < b.type_name;
    });
    return out;
}

std::vector<SpanAnnotation> resolve_overlaps(std::vector<SpanAnnotation> anns) {
    for (const auto& a : anns) {
        if (a.start < 0 || a.start >= a.end) {
            throw ValidationError("invalid span [" + std::to_string(a.start) + "," +
                                  std::to_string(a.end) + ")");
        }
    }
    std::sort(anns.begin(), anns.end(), [](const SpanAnnotation& a, const SpanAnnotation& b) {
        int la = a.end - a.start, lb = b.end - b.start;
        if (la != lb) return la > lb;
        if (a.priority != b.priority) return a.priority > b.priority;
        if (a.start != b.start) return a.start < b.start;
        return a.type_name < b.type_name;
    });
    std::vector<SpanAnnotation> kept;
    for (const auto& a : anns) {
        bool clashes = false;
        for (const auto& k : kept) {
            if (a.start < k.end && k.start < a.end) {
                clashes = true;
                break;
            }
        }
        if (!clashes) kept.push_back(a);
    }
    std::sort(kept.begin(), kept.end(),
              [](const SpanAnnotation& a, const SpanAnnotation& b) { return a.start < b.start; });
    return kept;
}

std::vector<std::string> spans_to_token_tags(const std::vector<SpanAnnotation>& anns,
                                             std::size_t n_tokens) {
    std::vector<std::string> tags(n_tokens, "O");
    for (const auto& a : anns) {
        if (a.start < 0 || a.end > static_cast<int>(n_tokens) || a.start >= a.end) {
            throw ValidationError("span [" + std::to_string(a.start) + "," +
                                  std::to_string(a.end) + ") out of range for " +
                                  std::to_string(n_tokens) + " tokens");
        }
        for (int i = a.start; i < a.end; ++i) tags[i] = a.type_name;
    }
    return tags;
}

namespace {

const std::unordered_set<std::string>& closed_other() {
    static const std::unordered_set<std::string> words = {
        "the", "a",    "an",  "of",   "in",    "on",   "at",   "by",   "for",  "with", "to",
        "from", "and",  "or",  "but",  "as",    "that", "this", "these", "those", "it",  "its",
        "he",  "she",  "they", "them", "his",   "her",  "their", "we",  "you",  "i",    "not",
        "no",  "so",   "if",   "then", "there", "here", "where", "when", "who",  "which", "while",
        "into", "over", "under", "about", "after", "before", "between", "during", "through"};
    return words;
}

const std::unordered_set<std::string>& closed_verbs() {
    static const std::unordered_set<std::string> words = {
        "is",   "are",  "was",  "were", "be",   "been", "being", "am",   "has",  "have",
        "had",  "do",   "does", "did",  "born", "went", "gone",  "go",   "goes", "said",
        "say",  "says", "made", "make", "makes", "get", "gets",  "got",  "became", "become",
        "becomes", "ran", "run", "runs", "held", "hold", "holds", "won", "win",  "wins",
        "took", "take", "takes", "serve", "serves", "served", "wrote", "write", "writes"};
    return words;
}

bool all_digits_ish(const std::string& s) {
    bool saw_digit = false;
    for (unsigned char c : s) {
        if (std::isdigit(c)) {
            saw_digit = true;
        } else if (c != '.' && c != ',' && c != '-' && c != '%') {
            return false;
        }
    }
    return saw_digit;
}

bool all_punct(const std::string& s) {
    if (s.empty()) return false;
    for (unsigned char c : s) {
        if (!std::ispunct(c)) return false;
    }
    return true;
}

bool ends_with(const std::string& s, const char* suffix) {
    std::string_view sv(suffix);
    return s.size() >= sv.size() && s.compare(s.size() - sv.size(), sv.size(), sv) == 0;
}

}  // namespace

std::vector<std::string> pos_lite(const std::vector<std::string>& tokens) {
    std::vector<std::string> tags;
    tags.reserve(tokens.size());
    for (const auto& tok : tokens) {
        if (tok.empty()) {
            tags.push_back("OTHER");
            continue;
        }
        if (all_digits_ish(tok)) {
            tags.push_back("NUM");
            continue;
        }
        if (all_punct(tok)) {
            tags.push_back("PUNCT");
            continue;
        }
        std::string low = casefold(tok);
        if (closed_other().count(low)) {
            tags.push_back("OTHER");
            continue;
        }
        if (closed_verbs().count(low)) {
            tags.push_back("VERB");
            continue;
        }
        if (std::isupper(static_cast<unsigned char>(tok[0]))) {
            tags.push_back("PROPN");
            continue;
        }
        if (low.size() > 3 && (ends_with(low, "ed") || ends_with(low, "ing"))) {
            tags.push_back("VERB");
        } else if (low.size() > 3 &&
                   (ends_with(low, "ous") || ends_with(low, "ful") || ends_with(low, "ive") ||
                    ends_with(low, "ble") || ends_with(low, "ical") || ends_with(low, "ish"))) {
            tags.push_back("ADJ");
        } else {
            tags.push_back("NOUN");
        }
    }
    return tags;
}

std::string coarse_ner_tag(const std::string& type_name) {
    static const std::map<std::string, std::string> table = {
        {"CITY", "LOCATION"},
        {"STATE_OR_PROVINCE", "LOCATION"},
        {"COUNTRY", "LOCATION"},
        {"PERSON", "PERSON"},
        {"ORGANIZATION", "ORGANIZATION"},
        {"ZIP_CODE", "NUMBER"},
        {"NUMBER", "NUMBER"},
        {"DATE", "DATE"},
        {"EMAIL_ADDRESS", "CONTACT"},
        {"PHONE", "CONTACT"},
        {"URL", "CONTACT"},
    };
    auto it = table.find(type_name);
    return it == table.end() ? type_name : it->second;
}

}  // namespace pde
