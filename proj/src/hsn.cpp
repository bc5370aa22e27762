#include "newscred/hsn.hpp"

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "newscred/errors.hpp"
#include "newscred/rng.hpp"

namespace newscred {

namespace {

const std::array<std::string, kNumClasses> kLabelNames = {
    "true", "mostly-true", "half-true", "mostly-false", "false", "pants-on-fire"};

using nlohmann::json;

void for_each_jsonl(const std::string& path,
                    const std::function<void(long, const json&)>& fn) {
    std::ifstream in(path);
    if (!in) throw LoadError(path + ": cannot open");
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw LoadError(path, line_no, std::string("invalid JSON: ") + e.what());
        }
        fn(line_no, j);
    }
}

std::string req_string(const json& j, const char* key, const std::string& path, long line) {
    if (!j.contains(key) || !j[key].is_string())
        throw LoadError(path, line, std::string("missing or non-string field \"") + key + "\"");
    return j[key].get<std::string>();
}

std::optional<CredLabel> opt_label(const json& j, const std::string& path, long line) {
    if (!j.contains("label") || j["label"].is_null()) return std::nullopt;
    if (!j["label"].is_string()) throw LoadError(path, line, "non-string \"label\"");
    auto l = label_from_name(j["label"].get<std::string>());
    if (!l)
        throw LoadError(path, line,
                        "unknown label \"" + j["label"].get<std::string>() + "\"");
    return l;
}

}  // namespace

int label_score(CredLabel l) { return kNumClasses - static_cast<int>(l); }

CredLabel label_from_score(double score) {
    double r = std::floor(score + 0.5);  // half rounds up
    if (r < 1.0) r = 1.0;
    if (r > 6.0) r = 6.0;
    return static_cast<CredLabel>(kNumClasses - static_cast<int>(r));
}

const std::string& label_name(CredLabel l) { return kLabelNames[static_cast<std::size_t>(l)]; }

std::optional<CredLabel> label_from_name(const std::string& name) {
    for (std::size_t i = 0; i < kLabelNames.size(); ++i)
        if (kLabelNames[i] == name) return static_cast<CredLabel>(i);
    return std::nullopt;
}

std::size_t Hsn::subject_link_count() const {
    std::size_t n = 0;
    for (const auto& [_, subs] : subject_links) n += subs.size();
    return n;
}

void Hsn::finalize() {
    creator_articles.clear();
    subject_articles.clear();
    for (const auto& [cid, _] : creators) creator_articles[cid];
    for (const auto& [sid, _] : subjects) subject_articles[sid];

    for (const auto& [aid, _] : articles) {
        auto it = authorship.find(aid);
        if (it == authorship.end())
            throw LoadError("article \"" + aid + "\" has no creator");
        auto cit = creator_articles.find(it->second);
        if (cit == creator_articles.end())
            throw LoadError("article \"" + aid + "\" authored by unknown creator \"" +
                            it->second + "\"");
        cit->second.push_back(aid);
    }
    for (const auto& [aid, _] : authorship) {
        if (!articles.count(aid))
            throw LoadError("authorship edge references unknown article \"" + aid + "\"");
    }
    for (const auto& [aid, subs] : subject_links) {
        if (!articles.count(aid))
            throw LoadError("subject edge references unknown article \"" + aid + "\"");
        for (const auto& sid : subs) {
            auto sit = subject_articles.find(sid);
            if (sit == subject_articles.end())
                throw LoadError("article \"" + aid + "\" tagged with unknown subject \"" + sid +
                                "\"");
            sit->second.push_back(aid);
        }
    }
    for (const auto& [cid, arts] : creator_articles)
        if (arts.empty()) throw LoadError("creator \"" + cid + "\" authors no articles");
    for (const auto& [sid, arts] : subject_articles)
        if (arts.empty()) throw LoadError("subject \"" + sid + "\" tags no articles");
    // map iteration already yields sorted article ids per creator/subject
}

Hsn load_hsn(const std::string& articles_path, const std::string& creators_path,
             const std::string& subjects_path, const std::string& edges_path) {
    Hsn hsn;
    std::map<std::string, long> article_line, creator_line, subject_line;

    for_each_jsonl(articles_path, [&](long line, const json& j) {
        Article a;
        a.id = req_string(j, "id", articles_path, line);
        a.text = req_string(j, "text", articles_path, line);
        if (!j.contains("label"))
            throw LoadError(articles_path, line, "missing or non-string field \"label\"");
        auto l = opt_label(j, articles_path, line);
        if (!l) throw LoadError(articles_path, line, "article is missing a label");
        a.label = *l;
        if (hsn.articles.count(a.id))
            throw LoadError(articles_path, line, "duplicate article id \"" + a.id + "\"");
        article_line[a.id] = line;
        hsn.articles.emplace(a.id, std::move(a));
    });

    for_each_jsonl(creators_path, [&](long line, const json& j) {
        Creator c;
        c.id = req_string(j, "id", creators_path, line);
        c.profile = req_string(j, "profile", creators_path, line);
        c.label = opt_label(j, creators_path, line);
        if (hsn.creators.count(c.id))
            throw LoadError(creators_path, line, "duplicate creator id \"" + c.id + "\"");
        creator_line[c.id] = line;
        hsn.creators.emplace(c.id, std::move(c));
    });

    for_each_jsonl(subjects_path, [&](long line, const json& j) {
        Subject s;
        s.id = req_string(j, "id", subjects_path, line);
        s.description = req_string(j, "description", subjects_path, line);
        s.label = opt_label(j, subjects_path, line);
        if (hsn.subjects.count(s.id))
            throw LoadError(subjects_path, line, "duplicate subject id \"" + s.id + "\"");
        subject_line[s.id] = line;
        hsn.subjects.emplace(s.id, std::move(s));
    });

    for_each_jsonl(edges_path, [&](long line, const json& j) {
        std::string kind = req_string(j, "kind", edges_path, line);
        std::string article = req_string(j, "article", edges_path, line);
        std::string other = req_string(j, "other", edges_path, line);
        if (!hsn.articles.count(article))
            throw LoadError(edges_path, line, "edge references unknown article \"" + article + "\"");
        if (kind == "authorship") {
            if (!hsn.creators.count(other))
                throw LoadError(edges_path, line,
                                "edge references unknown creator \"" + other + "\"");
            auto [it, inserted] = hsn.authorship.emplace(article, other);
            if (!inserted && it->second != other)
                throw LoadError(edges_path, line,
                                "article \"" + article + "\" has more than one creator");
        } else if (kind == "subject") {
            if (!hsn.subjects.count(other))
                throw LoadError(edges_path, line,
                                "edge references unknown subject \"" + other + "\"");
            hsn.subject_links[article].insert(other);
        } else {
            throw LoadError(edges_path, line, "unknown edge kind \"" + kind + "\"");
        }
    });

    for (const auto& [aid, _] : hsn.articles)
        if (!hsn.authorship.count(aid))
            throw LoadError(articles_path, article_line[aid],
                            "article \"" + aid + "\" has no creator");
    hsn.finalize();
    for (const auto& [cid, arts] : hsn.creator_articles)
        if (arts.empty())
            throw LoadError(creators_path, creator_line[cid],
                            "creator \"" + cid + "\" authors no articles");
    for (const auto& [sid, arts] : hsn.subject_articles)
        if (arts.empty())
            throw LoadError(subjects_path, subject_line[sid],
                            "subject \"" + sid + "\" tags no articles");
    return hsn;
}

void write_hsn(const Hsn& hsn, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    auto open = [&](const char* name) {
        std::ofstream out(fs::path(dir) / name);
        if (!out) throw UsageError(std::string("cannot write ") + name + " in " + dir);
        return out;
    };
    {
        auto out = open("articles.jsonl");
        for (const auto& [id, a] : hsn.articles) {
            json j{{"id", id}, {"text", a.text}, {"label", label_name(a.label)}};
            out << j.dump() << "\n";
        }
    }
    {
        auto out = open("creators.jsonl");
        for (const auto& [id, c] : hsn.creators) {
            json j{{"id", id}, {"profile", c.profile}};
            if (c.label) j["label"] = label_name(*c.label);
            out << j.dump() << "\n";
        }
    }
    {
        auto out = open("subjects.jsonl");
        for (const auto& [id, s] : hsn.subjects) {
            json j{{"id", id}, {"description", s.description}};
            if (s.label) j["label"] = label_name(*s.label);
            out << j.dump() << "\n";
        }
    }
    {
        auto out = open("edges.jsonl");
        for (const auto& [aid, cid] : hsn.authorship) {
            json j{{"kind", "authorship"}, {"article", aid}, {"other", cid}};
            out << j.dump() << "\n";
        }
        for (const auto& [aid, subs] : hsn.subject_links) {
            for (const auto& sid : subs) {
                json j{{"kind", "subject"}, {"article", aid}, {"other", sid}};
                out << j.dump() << "\n";
            }
        }
    }
}

void derive_entity_labels(Hsn& hsn) {
    auto derive = [&](const std::vector<std::string>& article_ids) {
        double total = 0.0;
        for (const auto& aid : article_ids) total += label_score(hsn.articles.at(aid).label);
        return label_from_score(total / static_cast<double>(article_ids.size()));
    };
    for (auto& [cid, c] : hsn.creators)
        if (!c.label) c.label = derive(hsn.creator_articles.at(cid));
    for (auto& [sid, s] : hsn.subjects)
        if (!s.label) s.label = derive(hsn.subject_articles.at(sid));
}

namespace {

Split::TypeSplit split_type(std::vector<std::string> ids, int k, double theta, Rng rng,
                            const char* what) {
    if (ids.size() < static_cast<std::size_t>(k))
        throw UsageError(std::string(what) + ": " + std::to_string(ids.size()) +
                         " nodes cannot fill " + std::to_string(k) + " folds");
    rng.shuffle(ids);
    Split::TypeSplit ts;
    ts.folds.resize(k);
    const std::size_t base = ids.size() / k, rem = ids.size() % k;
    std::size_t pos = 0;
    for (int f = 0; f < k; ++f) {
        std::size_t take = base + (static_cast<std::size_t>(f) < rem ? 1 : 0);
        ts.folds[f].assign(ids.begin() + pos, ids.begin() + pos + take);
        std::sort(ts.folds[f].begin(), ts.folds[f].end());
        pos += take;
    }
    ts.sampled_train.resize(k);
    for (int f = 0; f < k; ++f) {
        std::vector<std::string> train;
        train.reserve(ids.size());
        for (int g = 0; g < k; ++g)
            if (g != f) train.insert(train.end(), ts.folds[g].begin(), ts.folds[g].end());
        std::sort(train.begin(), train.end());
        Rng sub = rng.child("fold." + std::to_string(f));
        sub.shuffle(train);
        std::size_t take = static_cast<std::size_t>(
            std::llround(theta * static_cast<double>(train.size())));
        train.resize(take);
        std::sort(train.begin(), train.end());
        ts.sampled_train[f] = std::move(train);
    }
    return ts;
}

}  // namespace

Split split_folds(const Hsn& hsn, int k, double theta, std::uint64_t seed) {
    if (k < 2) throw UsageError("split_folds: k must be at least 2");
    if (!(theta > 0.0) || theta > 1.0) throw UsageError("split_folds: theta must be in (0, 1]");
    Split split;
    split.k = k;
    split.theta = theta;
    Rng rng(seed);
    auto ids_of = [](const auto& m) {
        std::vector<std::string> ids;
        ids.reserve(m.size());
        for (const auto& [id, _] : m) ids.push_back(id);
        return ids;
    };
    split.articles =
        split_type(ids_of(hsn.articles), k, theta, rng.child("articles"), "articles");
    split.creators =
        split_type(ids_of(hsn.creators), k, theta, rng.child("creators"), "creators");
    split.subjects =
        split_type(ids_of(hsn.subjects), k, theta, rng.child("subjects"), "subjects");
    return split;
}

}  // namespace newscred
