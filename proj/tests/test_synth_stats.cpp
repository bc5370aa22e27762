#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "newscred/errors.hpp"
#include "newscred/stats.hpp"
#include "newscred/synth.hpp"
#include "util.hpp"

using namespace newscred;

namespace {

// Positive markers are tokens w000..w029, negative markers w030..w059 (vocab
// 300). Rate of positive markers among all tokens of the given polarity's
// articles.
double positive_marker_rate(const Hsn& hsn, bool positive) {
    std::size_t markers = 0, total = 0;
    for (const auto& [id, a] : hsn.articles) {
        bool pos = label_score(a.label) >= 4;
        if (pos != positive) continue;
        std::size_t start = 0;
        while (start <= a.text.size()) {
            auto end = a.text.find(' ', start);
            if (end == std::string::npos) end = a.text.size();
            std::string tok = a.text.substr(start, end - start);
            if (!tok.empty()) {
                ++total;
                if (tok.size() == 4 && tok[0] == 'w' && tok.substr(1) < "030" &&
                    tok.substr(1) >= "000")
                    ++markers;
            }
            start = end + 1;
        }
    }
    REQUIRE(total > 0);
    return static_cast<double>(markers) / static_cast<double>(total);
}

Hsn gun_fixture() {
    Hsn hsn;
    auto add = [&](const std::string& id, const std::string& text, CredLabel label,
                   const std::string& creator) {
        hsn.articles[id] = {id, text, label};
        hsn.authorship[id] = creator;
        hsn.subject_links[id] = {"s1"};
    };
    add("a1", "solar budget plan clean audit", CredLabel::True, "c1");
    add("a2", "springfield library wing dedication", CredLabel::True, "c1");
    add("a3", "gun gun hoax rumor", CredLabel::False, "c2");
    add("a4", "gun panic chain letter", CredLabel::False, "c2");
    hsn.creators["c1"] = {"c1", "city desk", std::nullopt};
    hsn.creators["c2"] = {"c2", "chain mail digest", std::nullopt};
    hsn.subjects["s1"] = {"s1", "public safety", std::nullopt};
    hsn.finalize();
    return hsn;
}

}  // namespace

TEST_CASE("generate_synthetic rejects infeasible parameters") {
    SynthSpec spec;
    SUBCASE("no creators") {
        spec.n_creators = 0;
        CHECK_THROWS_AS(generate_synthetic(spec), UsageError);
    }
    SUBCASE("more creators than articles") {
        spec.n_articles = 10;
        spec.n_creators = 11;
        CHECK_THROWS_AS(generate_synthetic(spec), UsageError);
    }
    SUBCASE("more subjects than articles") {
        spec.n_articles = 10;
        spec.n_creators = 2;
        spec.n_subjects = 11;
        CHECK_THROWS_AS(generate_synthetic(spec), UsageError);
    }
    SUBCASE("strength out of range") {
        spec.signal_strength = 1.2;
        CHECK_THROWS_AS(generate_synthetic(spec), UsageError);
    }
    SUBCASE("vocabulary smaller than the marker sets") {
        spec.vocab_size = 50;
        CHECK_THROWS_AS(generate_synthetic(spec), UsageError);
    }
}

TEST_CASE("generate_synthetic is deterministic to the byte") {
    SynthSpec spec;
    spec.n_articles = 120;
    spec.n_creators = 20;
    spec.n_subjects = 8;
    TempDir a, b;
    write_hsn(generate_synthetic(spec).hsn, a.path.string());
    write_hsn(generate_synthetic(spec).hsn, b.path.string());
    for (const char* name :
         {"articles.jsonl", "creators.jsonl", "subjects.jsonl", "edges.jsonl"}) {
        std::string left = read_file(a.file(name));
        CHECK(!left.empty());
        CHECK(left == read_file(b.file(name)));
    }
}

TEST_CASE("generate_synthetic default scale has the documented shape") {
    SynthSpec spec;  // 600/100/20, strength 0.8, seed 7
    SynthResult res = generate_synthetic(spec);
    const Hsn& hsn = res.hsn;
    CHECK(hsn.articles.size() == 600);
    CHECK(hsn.creators.size() == 100);
    CHECK(hsn.subjects.size() == 20);
    CHECK(res.creator_reliability.size() == 100);
    for (double r : res.creator_reliability) {
        CHECK(r > 0.0);
        CHECK(r < 1.0);
    }
    CHECK(res.expected_positive_rate > 0.2);
    CHECK(res.expected_positive_rate < 0.8);

    SUBCASE("creator sizes are heavily skewed") {
        std::vector<std::size_t> sizes;
        for (const auto& [id, arts] : hsn.creator_articles) sizes.push_back(arts.size());
        std::sort(sizes.begin(), sizes.end());
        std::size_t median = sizes[sizes.size() / 2];
        CHECK(sizes.back() >= 10 * median);
    }
    SUBCASE("subject sets have 1..5 members, mean near 3.5") {
        double sum = 0.0;
        for (const auto& [id, subs] : hsn.subject_links) {
            CHECK(subs.size() >= 1);
            CHECK(subs.size() <= 5);
            sum += static_cast<double>(subs.size());
        }
        double mean = sum / static_cast<double>(hsn.subject_links.size());
        CHECK(mean > 3.2);
        CHECK(mean < 3.8);
    }
}

TEST_CASE("signal strength controls the class-conditional word divergence") {
    SynthSpec strong;
    strong.signal_strength = 0.9;
    Hsn hsn_strong = generate_synthetic(strong).hsn;
    double ratio_strong =
        positive_marker_rate(hsn_strong, true) / positive_marker_rate(hsn_strong, false);
    CHECK(ratio_strong > 2.0);

    SynthSpec flat;
    flat.signal_strength = 0.0;
    Hsn hsn_flat = generate_synthetic(flat).hsn;
    double ratio_flat =
        positive_marker_rate(hsn_flat, true) / positive_marker_rate(hsn_flat, false);
    CHECK(ratio_flat > 0.8);
    CHECK(ratio_flat < 1.25);
}

TEST_CASE("article label marginal tracks the reliability mixture") {
    SynthSpec spec;
    spec.n_articles = 5000;
    spec.n_creators = 100;
    spec.n_subjects = 20;
    SynthResult res = generate_synthetic(spec);
    std::size_t positive = 0;
    for (const auto& [id, a] : res.hsn.articles)
        if (label_score(a.label) >= 4) ++positive;
    double frac = static_cast<double>(positive) / 5000.0;
    CHECK(std::fabs(frac - res.expected_positive_rate) < 0.1);
}

TEST_CASE("stats ranks extreme contrast tokens first") {
    StatsReport r = stats(gun_fixture());
    CHECK(r.n_articles == 4);
    CHECK(r.n_creators == 2);
    CHECK(r.n_subjects == 1);
    CHECK(r.n_subject_links == 4);
    CHECK(r.true_articles == 2);
    CHECK(r.false_articles == 2);

    REQUIRE(!r.false_leaning.empty());
    CHECK(r.false_leaning.front().token == "gun");
    CHECK(r.false_leaning.front().false_count == 3);
    CHECK(r.false_leaning.front().true_count == 0);
    CHECK(r.false_leaning.front().contrast == doctest::Approx(std::log(0.25)));
    // every true-leaning token appears once in the true group only
    REQUIRE(!r.true_leaning.empty());
    CHECK(r.true_leaning.front().contrast == doctest::Approx(std::log(2.0)));

    // both creators publish two articles; tie broken by id
    REQUIRE(r.creator_ratios.size() == 2);
    CHECK(r.creator_ratios[0].id == "c1");
    CHECK(r.creator_ratios[0].true_articles == 2);
    CHECK(r.creator_ratios[0].false_articles == 0);
    CHECK(r.creator_ratios[0].label == CredLabel::True);
    CHECK(r.creator_ratios[1].label == CredLabel::False);

    // one histogram bucket (both creators have two articles) -> no slope
    REQUIRE(r.creator_histogram.size() == 1);
    CHECK(r.creator_histogram[0].articles_per_creator == 2);
    CHECK(r.creator_histogram[0].creators == 2);
    CHECK(!r.power_law_slope.has_value());

    REQUIRE(r.top_subjects.size() == 1);
    CHECK(r.top_subjects[0].id == "s1");
    CHECK(r.top_subjects[0].articles == 4);
    CHECK(r.top_subjects[0].true_articles == 2);
    CHECK(r.top_subjects[0].false_articles == 2);
    CHECK(r.top_subjects[0].label == CredLabel::HalfTrue);  // mean (6+6+2+2)/4 = 4
}

TEST_CASE("stats with one article class leaves the contrast sections empty") {
    Hsn hsn;
    hsn.articles["a1"] = {"a1", "solar budget plan", CredLabel::True};
    hsn.articles["a2"] = {"a2", "library wing opens", CredLabel::MostlyTrue};
    hsn.authorship["a1"] = hsn.authorship["a2"] = "c1";
    hsn.subject_links["a1"] = hsn.subject_links["a2"] = {"s1"};
    hsn.creators["c1"] = {"c1", "city desk", std::nullopt};
    hsn.subjects["s1"] = {"s1", "local news", std::nullopt};
    hsn.finalize();
    StatsReport r = stats(hsn);
    CHECK(r.false_articles == 0);
    CHECK(r.true_leaning.empty());
    CHECK(r.false_leaning.empty());

    TempDir dir;
    write_stats_csv(r, dir.path.string());
    CHECK(read_file(dir.file("word_contrast.csv")) ==
          "direction,token,true_count,false_count,contrast\n");
}

TEST_CASE("stats on the synthetic network fits a falling power law") {
    StatsReport r = stats(generate_synthetic(SynthSpec{}).hsn);
    CHECK(r.creator_histogram.size() >= 2);
    REQUIRE(r.power_law_slope.has_value());
    CHECK(*r.power_law_slope < 0.0);
    CHECK(r.top_subjects.size() == 20);
    // top subjects come out sorted by article count
    for (std::size_t i = 1; i < r.top_subjects.size(); ++i)
        CHECK(r.top_subjects[i - 1].articles >= r.top_subjects[i].articles);
    // positive markers should dominate the true-leaning ranking at strength .8
    REQUIRE(r.true_leaning.size() >= 5);
    std::size_t positive_markers = 0;
    for (std::size_t i = 0; i < 5; ++i)
        if (r.true_leaning[i].token < "w030") ++positive_markers;
    CHECK(positive_markers >= 3);
}

TEST_CASE("write_stats_csv emits the five report files") {
    TempDir dir;
    write_stats_csv(stats(gun_fixture()), dir.path.string());
    std::string summary = read_file(dir.file("summary.csv"));
    CHECK(contains(summary, "metric,value\n"));
    CHECK(contains(summary, "articles,4\n"));
    CHECK(contains(summary, "creators,2\n"));
    CHECK(contains(summary, "subjects,1\n"));
    CHECK(contains(summary, "article_subject_links,4\n"));
    CHECK(contains(summary, "label_true,2\n"));
    CHECK(contains(read_file(dir.file("word_contrast.csv")), "false,gun,0,3,"));
    CHECK(contains(read_file(dir.file("creator_ratio.csv")), "c1,2,2,0,2:0,true\n"));
    CHECK(contains(read_file(dir.file("power_law.csv")), "2,2\n"));
    CHECK(contains(read_file(dir.file("subject_top.csv")), "s1,4,2,2,half-true\n"));
}
