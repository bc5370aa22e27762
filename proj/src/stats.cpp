#include "newscred/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "newscred/errors.hpp"
#include "newscred/eval.hpp"

namespace newscred {

namespace {

bool is_positive(CredLabel l) { return to_polarity(l) == Polarity::Positive; }

std::vector<WordContrast> ranked_contrast(const std::map<std::string, WordContrast>& counts,
                                          std::size_t k, bool true_leaning) {
    std::vector<WordContrast> out;
    out.reserve(counts.size());
    for (const auto& [tok, wc] : counts) out.push_back(wc);
    std::sort(out.begin(), out.end(), [&](const WordContrast& a, const WordContrast& b) {
        double ca = true_leaning ? a.contrast : -a.contrast;
        double cb = true_leaning ? b.contrast : -b.contrast;
        if (ca != cb) return ca > cb;
        return a.token < b.token;
    });
    if (out.size() > k) out.resize(k);
    return out;
}

}  // namespace

StatsReport stats(const Hsn& input, std::size_t top_k_words, const TokenizerConfig& cfg) {
    Hsn hsn = input;
    derive_entity_labels(hsn);

    StatsReport r;
    r.n_articles = hsn.articles.size();
    r.n_creators = hsn.creators.size();
    r.n_subjects = hsn.subjects.size();
    r.n_subject_links = hsn.subject_link_count();

    for (const auto& [id, a] : hsn.articles) {
        r.label_counts[static_cast<std::size_t>(a.label)]++;
        (is_positive(a.label) ? r.true_articles : r.false_articles)++;
    }

    if (r.true_articles > 0 && r.false_articles > 0) {
        std::map<std::string, WordContrast> counts;
        for (const auto& [id, a] : hsn.articles) {
            bool pos = is_positive(a.label);
            for (const auto& tok : tokenize(a.text, cfg)) {
                auto& wc = counts.try_emplace(tok, WordContrast{tok, 0, 0, 0.0}).first->second;
                (pos ? wc.true_count : wc.false_count)++;
            }
        }
        for (auto& [tok, wc] : counts)
            wc.contrast = std::log((static_cast<double>(wc.true_count) + 1.0) /
                                   (static_cast<double>(wc.false_count) + 1.0));
        r.true_leaning = ranked_contrast(counts, top_k_words, true);
        r.false_leaning = ranked_contrast(counts, top_k_words, false);
    }

    for (const auto& [id, c] : hsn.creators) {
        CreatorRatio cr;
        cr.id = id;
        cr.label = *c.label;
        auto it = hsn.creator_articles.find(id);
        if (it != hsn.creator_articles.end()) {
            for (const auto& aid : it->second) {
                cr.articles++;
                (is_positive(hsn.articles.at(aid).label) ? cr.true_articles
                                                         : cr.false_articles)++;
            }
        }
        r.creator_ratios.push_back(std::move(cr));
    }
    std::sort(r.creator_ratios.begin(), r.creator_ratios.end(),
              [](const CreatorRatio& a, const CreatorRatio& b) {
                  if (a.articles != b.articles) return a.articles > b.articles;
                  return a.id < b.id;
              });

    std::map<std::size_t, std::size_t> histogram;
    for (const auto& cr : r.creator_ratios) histogram[cr.articles]++;
    for (const auto& [size, count] : histogram) r.creator_histogram.push_back({size, count});
    std::vector<std::pair<double, double>> pts;  // (ln size, ln count), size > 0 only
    for (const auto& b : r.creator_histogram)
        if (b.articles_per_creator > 0)
            pts.emplace_back(std::log(static_cast<double>(b.articles_per_creator)),
                             std::log(static_cast<double>(b.creators)));
    if (pts.size() >= 2) {
        double mx = 0, my = 0;
        for (const auto& [x, y] : pts) mx += x, my += y;
        mx /= static_cast<double>(pts.size());
        my /= static_cast<double>(pts.size());
        double num = 0, den = 0;
        for (const auto& [x, y] : pts) {
            num += (x - mx) * (y - my);
            den += (x - mx) * (x - mx);
        }
        if (den > 0) r.power_law_slope = num / den;
    }

    std::vector<SubjectRow> subjects;
    for (const auto& [id, s] : hsn.subjects) {
        SubjectRow row;
        row.id = id;
        row.label = *s.label;
        auto it = hsn.subject_articles.find(id);
        if (it != hsn.subject_articles.end()) {
            for (const auto& aid : it->second) {
                row.articles++;
                (is_positive(hsn.articles.at(aid).label) ? row.true_articles
                                                         : row.false_articles)++;
            }
        }
        subjects.push_back(std::move(row));
    }
    std::sort(subjects.begin(), subjects.end(), [](const SubjectRow& a, const SubjectRow& b) {
        if (a.articles != b.articles) return a.articles > b.articles;
        return a.id < b.id;
    });
    if (subjects.size() > 20) subjects.resize(20);
    r.top_subjects = std::move(subjects);
    return r;
}

void write_stats_csv(const StatsReport& r, const std::string& dir) {
    auto open = [&](const std::string& name) {
        std::ofstream out(dir + "/" + name);
        if (!out) throw UsageError("cannot write " + dir + "/" + name);
        return out;
    };

    {
        auto out = open("summary.csv");
        out << "metric,value\n";
        out << "articles," << r.n_articles << "\n";
        out << "creators," << r.n_creators << "\n";
        out << "subjects," << r.n_subjects << "\n";
        out << "article_subject_links," << r.n_subject_links << "\n";
        out << "articles_true," << r.true_articles << "\n";
        out << "articles_false," << r.false_articles << "\n";
        for (std::size_t i = 0; i < kNumClasses; ++i)
            out << "label_" << label_name(static_cast<CredLabel>(i)) << ","
                << r.label_counts[i] << "\n";
        if (r.power_law_slope) {
            char buf[48];
            std::snprintf(buf, sizeof(buf), "%.6f", *r.power_law_slope);
            out << "power_law_slope," << buf << "\n";
        }
    }
    {
        auto out = open("word_contrast.csv");
        out << "direction,token,true_count,false_count,contrast\n";
        char buf[48];
        auto rows = [&](const char* dir_name, const std::vector<WordContrast>& words) {
            for (const auto& wc : words) {
                std::snprintf(buf, sizeof(buf), "%.6f", wc.contrast);
                out << dir_name << "," << wc.token << "," << wc.true_count << ","
                    << wc.false_count << "," << buf << "\n";
            }
        };
        rows("true", r.true_leaning);
        rows("false", r.false_leaning);
    }
    {
        auto out = open("creator_ratio.csv");
        out << "creator,articles,true,false,ratio,label\n";
        for (const auto& cr : r.creator_ratios)
            out << cr.id << "," << cr.articles << "," << cr.true_articles << ","
                << cr.false_articles << "," << cr.true_articles << ":" << cr.false_articles
                << "," << label_name(cr.label) << "\n";
    }
    {
        auto out = open("power_law.csv");
        out << "articles_per_creator,creators\n";
        for (const auto& b : r.creator_histogram)
            out << b.articles_per_creator << "," << b.creators << "\n";
    }
    {
        auto out = open("subject_top.csv");
        out << "subject,articles,true,false,label\n";
        for (const auto& row : r.top_subjects)
            out << row.id << "," << row.articles << "," << row.true_articles << ","
                << row.false_articles << "," << label_name(row.label) << "\n";
    }
}

}  // namespace newscred
