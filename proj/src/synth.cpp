#include "newscred/synth.hpp"

#include <cmath>
#include <cstdio>

#include "newscred/errors.hpp"
#include "newscred/rng.hpp"

namespace newscred {

namespace {

std::string padded(const char* prefix, std::size_t i, std::size_t count) {
    int width = 1;
    for (std::size_t c = count; c >= 10; c /= 10) ++width;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%0*zu", prefix, width, i);
    return buf;
}

// Class-conditional token weights. Markers for the matching polarity are
// boosted, markers for the opposite polarity suppressed; neutral tokens keep
// weight 1. At strength 0 both classes collapse to the same distribution.
std::vector<double> token_weights(const SynthSpec& spec, bool positive, double strength) {
    std::vector<double> w(spec.vocab_size, 1.0);
    const double boost = 1.0 + 1.1 * strength;
    const double cut = std::max(0.05, 1.0 - 0.55 * strength);
    for (std::size_t i = 0; i < spec.n_markers; ++i) {
        w[i] = positive ? boost : cut;                    // positive-leaning markers
        w[spec.n_markers + i] = positive ? cut : boost;   // negative-leaning markers
    }
    return w;
}

std::string draw_text(Rng& rng, const std::vector<double>& weights, std::size_t len,
                      const std::vector<std::string>& tokens) {
    std::string out;
    for (std::size_t i = 0; i < len; ++i) {
        if (i) out += ' ';
        out += tokens[rng.weighted(weights)];
    }
    return out;
}

}  // namespace

SynthResult generate_synthetic(const SynthSpec& spec) {
    if (spec.n_creators == 0 || spec.n_subjects == 0)
        throw UsageError("generate_synthetic: need at least one creator and one subject");
    if (spec.n_articles < spec.n_creators)
        throw UsageError("generate_synthetic: " + std::to_string(spec.n_articles) +
                         " articles cannot cover " + std::to_string(spec.n_creators) +
                         " creators");
    if (spec.n_articles < spec.n_subjects)
        throw UsageError("generate_synthetic: " + std::to_string(spec.n_articles) +
                         " articles cannot cover " + std::to_string(spec.n_subjects) +
                         " subjects");
    if (spec.signal_strength < 0.0 || spec.signal_strength > 1.0)
        throw UsageError("generate_synthetic: signal strength must be in [0, 1]");
    if (spec.vocab_size < 2 * spec.n_markers + 10)
        throw UsageError("generate_synthetic: vocabulary too small for the marker sets");

    Rng root(spec.seed);
    std::vector<std::string> tokens(spec.vocab_size);
    for (std::size_t i = 0; i < spec.vocab_size; ++i) tokens[i] = padded("w", i, spec.vocab_size);

    // Latent creator reliability: a reliable and an unreliable population.
    Rng rel_rng = root.child("reliability");
    std::vector<double> reliability(spec.n_creators);
    for (auto& r : reliability) {
        r = rel_rng.uniform() < 0.5 ? rel_rng.uniform(0.85, 0.98) : rel_rng.uniform(0.02, 0.15);
    }

    // Power-law creator sizes: every creator gets one article, the rest are
    // assigned with probability proportional to rank^-zipf_exponent.
    Rng assign_rng = root.child("assignment");
    std::vector<std::size_t> article_creator(spec.n_articles);
    std::vector<double> zipf(spec.n_creators);
    for (std::size_t i = 0; i < spec.n_creators; ++i)
        zipf[i] = std::pow(static_cast<double>(i + 1), -spec.zipf_exponent);
    for (std::size_t a = 0; a < spec.n_articles; ++a)
        article_creator[a] = a < spec.n_creators ? a : assign_rng.weighted(zipf);

    // Labels: polarity from the creator's reliability, grade within polarity.
    Rng label_rng = root.child("labels");
    const std::vector<double> pos_grade = {0.45, 0.35, 0.20};  // true, mostly-true, half-true
    const std::vector<double> neg_grade = {0.20, 0.35, 0.45};  // mostly-false, false, pants-on-fire
    std::vector<CredLabel> article_label(spec.n_articles);
    std::vector<bool> article_positive(spec.n_articles);
    double expected = 0.0;
    for (std::size_t a = 0; a < spec.n_articles; ++a) {
        double r = reliability[article_creator[a]];
        expected += r;
        bool positive = label_rng.uniform() < r;
        article_positive[a] = positive;
        std::size_t grade = label_rng.weighted(positive ? pos_grade : neg_grade);
        article_label[a] =
            positive ? static_cast<CredLabel>(grade)
                     : static_cast<CredLabel>(static_cast<std::size_t>(CredLabel::MostlyFalse) +
                                              grade);
    }
    expected /= static_cast<double>(spec.n_articles);

    // Subject sets: 1..5 subjects per article, mean 3.5, with a mild rank
    // bias so subject sizes are uneven. Article a < n_subjects always tags
    // subject a so every subject is covered.
    Rng subj_rng = root.child("subjects");
    const std::vector<double> size_weights = {0.05, 0.10, 0.25, 0.50, 0.10};
    std::vector<double> subj_bias(spec.n_subjects);
    for (std::size_t i = 0; i < spec.n_subjects; ++i)
        subj_bias[i] = std::pow(static_cast<double>(i + 1), -0.8);
    std::vector<std::set<std::size_t>> article_subjects(spec.n_articles);
    for (std::size_t a = 0; a < spec.n_articles; ++a) {
        std::size_t want = 1 + subj_rng.weighted(size_weights);
        auto& subs = article_subjects[a];
        if (a < spec.n_subjects) subs.insert(a);
        std::vector<double> bias = subj_bias;
        while (subs.size() < want && subs.size() < spec.n_subjects) {
            std::size_t pick = subj_rng.weighted(bias);
            bias[pick] = 0.0;
            subs.insert(pick);
        }
    }

    // Texts. Articles speak with their polarity's distribution; profiles use
    // a weaker tilt from the creator's polarity; descriptions are neutral.
    Rng text_rng = root.child("text");
    auto pos_words = token_weights(spec, true, spec.signal_strength);
    auto neg_words = token_weights(spec, false, spec.signal_strength);
    auto pos_profile = token_weights(spec, true, 0.5 * spec.signal_strength);
    auto neg_profile = token_weights(spec, false, 0.5 * spec.signal_strength);
    std::vector<double> neutral(spec.vocab_size, 1.0);

    SynthResult result;
    Hsn& hsn = result.hsn;
    std::vector<std::string> creator_ids(spec.n_creators), subject_ids(spec.n_subjects);
    for (std::size_t c = 0; c < spec.n_creators; ++c) {
        Creator cr;
        cr.id = creator_ids[c] = padded("c", c, spec.n_creators);
        std::size_t len = 6 + text_rng.below(7);
        cr.profile = draw_text(text_rng, reliability[c] >= 0.5 ? pos_profile : neg_profile, len,
                               tokens);
        hsn.creators.emplace(cr.id, std::move(cr));
    }
    for (std::size_t s = 0; s < spec.n_subjects; ++s) {
        Subject su;
        su.id = subject_ids[s] = padded("s", s, spec.n_subjects);
        su.description = draw_text(text_rng, neutral, 6 + text_rng.below(7), tokens);
        hsn.subjects.emplace(su.id, std::move(su));
    }
    for (std::size_t a = 0; a < spec.n_articles; ++a) {
        Article art;
        art.id = padded("a", a, spec.n_articles);
        art.label = article_label[a];
        std::size_t len = 8 + text_rng.below(13);
        art.text =
            draw_text(text_rng, article_positive[a] ? pos_words : neg_words, len, tokens);
        hsn.authorship[art.id] = creator_ids[article_creator[a]];
        for (std::size_t s : article_subjects[a]) hsn.subject_links[art.id].insert(subject_ids[s]);
        hsn.articles.emplace(art.id, std::move(art));
    }
    hsn.finalize();

    result.creator_reliability = std::move(reliability);
    result.expected_positive_rate = expected;
    return result;
}

}  // namespace newscred
