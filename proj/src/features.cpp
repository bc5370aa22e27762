#include "newscred/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "newscred/errors.hpp"
#include "newscred/eval.hpp"

namespace newscred {

namespace {

const std::set<std::string>& builtin_stopwords() {
    static const std::set<std::string> words = {
        "a",     "about", "after", "again", "all",   "an",    "and",  "any",   "are",  "as",
        "at",    "be",    "been",  "before", "being", "but",   "by",   "can",   "did",  "do",
        "does",  "down",  "during", "each",  "few",   "for",   "from", "had",   "has",  "have",
        "having", "he",   "her",   "here",  "hers",  "him",   "his",  "how",   "i",    "if",
        "in",    "into",  "is",    "it",    "its",   "just",  "me",   "more",  "most", "my",
        "no",    "nor",   "not",   "now",   "of",    "off",   "on",   "once",  "only", "or",
        "other", "our",   "out",   "over",  "own",   "same",  "she",  "should", "so",  "some",
        "such",  "than",  "that",  "the",   "their", "them",  "then", "there", "these", "they",
        "this",  "those", "through", "to",  "too",   "under", "until", "up",   "very", "was",
        "we",    "were",  "what",  "when",  "where", "which", "while", "who",  "whom", "why",
        "will",  "with",  "you",   "your"};
    return words;
}

const std::string kUnkToken = "<unk>";

struct Contrast {
    long positive = 0;
    long negative = 0;
};

// token -> per-polarity occurrence counts over a set of (text, polarity).
std::map<std::string, Contrast> count_by_polarity(
    const std::vector<std::pair<const std::string*, bool>>& texts, const TokenizerConfig& cfg) {
    std::map<std::string, Contrast> counts;
    for (const auto& [text, positive] : texts) {
        for (const auto& tok : tokenize(*text, cfg)) {
            auto& c = counts[tok];
            (positive ? c.positive : c.negative) += 1;
        }
    }
    return counts;
}

std::vector<std::string> top_contrast_words(const std::map<std::string, Contrast>& counts,
                                            std::size_t d, const char* what) {
    if (counts.size() < d)
        throw UsageError(std::string(what) + ": need " + std::to_string(d) +
                         " distinct tokens, only " + std::to_string(counts.size()) +
                         " available");
    std::vector<std::pair<double, std::string>> ranked;
    ranked.reserve(counts.size());
    for (const auto& [tok, c] : counts) {
        double contrast = std::log((static_cast<double>(c.positive) + 1.0) /
                                   (static_cast<double>(c.negative) + 1.0));
        ranked.emplace_back(std::fabs(contrast), tok);
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<std::string> out;
    out.reserve(d);
    for (std::size_t i = 0; i < d; ++i) out.push_back(ranked[i].second);
    return out;
}

}  // namespace

const std::set<std::string>& TokenizerConfig::effective_stopwords() const {
    return stopwords.empty() ? builtin_stopwords() : stopwords;
}

std::vector<std::string> tokenize(const std::string& text, const TokenizerConfig& cfg) {
    std::string norm;
    norm.reserve(text.size());
    for (unsigned char c : text) {
        if (cfg.strip_non_alnum && !std::isalnum(c)) {
            norm += ' ';
        } else {
            norm += cfg.lowercase ? static_cast<char>(std::tolower(c)) : static_cast<char>(c);
        }
    }
    std::vector<std::string> out;
    std::size_t i = 0;
    const auto& stop = cfg.effective_stopwords();
    while (i < norm.size()) {
        while (i < norm.size() && norm[i] == ' ') ++i;
        std::size_t j = i;
        while (j < norm.size() && norm[j] != ' ') ++j;
        if (j > i) {
            std::string tok = norm.substr(i, j - i);
            if (!cfg.drop_stopwords || !stop.count(tok)) out.push_back(std::move(tok));
        }
        i = j;
    }
    return out;
}

std::size_t Vocab::embedding_index(const std::string& token) const {
    auto it = index.find(token);
    return (it == index.end() ? unk_pos : it->second) + 1;
}

Vocab build_vocab(const Hsn& hsn, const TrainIds& train, std::size_t d,
                  const TokenizerConfig& cfg) {
    std::vector<std::pair<const std::string*, bool>> article_texts, creator_texts, subject_texts;
    for (const auto& id : train.articles) {
        const Article& a = hsn.articles.at(id);
        article_texts.emplace_back(&a.text, to_polarity(a.label) == Polarity::Positive);
    }
    for (const auto& id : train.creators) {
        const Creator& c = hsn.creators.at(id);
        if (!c.label) throw UsageError("build_vocab: creator \"" + id + "\" has no label");
        creator_texts.emplace_back(&c.profile, to_polarity(*c.label) == Polarity::Positive);
    }
    for (const auto& id : train.subjects) {
        const Subject& s = hsn.subjects.at(id);
        if (!s.label) throw UsageError("build_vocab: subject \"" + id + "\" has no label");
        subject_texts.emplace_back(&s.description, to_polarity(*s.label) == Polarity::Positive);
    }

    auto article_counts = count_by_polarity(article_texts, cfg);
    auto creator_counts = count_by_polarity(creator_texts, cfg);
    auto subject_counts = count_by_polarity(subject_texts, cfg);

    Vocab vocab;
    std::set<std::string> all;
    for (const auto& [tok, _] : article_counts) all.insert(tok);
    for (const auto& [tok, _] : creator_counts) all.insert(tok);
    for (const auto& [tok, _] : subject_counts) all.insert(tok);
    vocab.tokens.assign(all.begin(), all.end());
    vocab.tokens.push_back(kUnkToken);
    for (std::size_t i = 0; i < vocab.tokens.size(); ++i) vocab.index[vocab.tokens[i]] = i;
    vocab.unk_pos = vocab.index.at(kUnkToken);

    vocab.article_words = top_contrast_words(article_counts, d, "article word set");
    vocab.creator_words = top_contrast_words(creator_counts, d, "creator word set");
    vocab.subject_words = top_contrast_words(subject_counts, d, "subject word set");
    return vocab;
}

void save_vocab(const Vocab& vocab, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw UsageError("cannot write vocab file " + path);
    auto section = [&](const char* header, const std::vector<std::string>& words) {
        out << header << "\n";
        for (const auto& w : words) out << w << "\n";
    };
    section("[tokens]", vocab.tokens);
    section("[articles]", vocab.article_words);
    section("[creators]", vocab.creator_words);
    section("[subjects]", vocab.subject_words);
}

Vocab load_vocab(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw LoadError(path + ": cannot open");
    Vocab vocab;
    std::vector<std::string>* target = nullptr;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line == "[tokens]")
            target = &vocab.tokens;
        else if (line == "[articles]")
            target = &vocab.article_words;
        else if (line == "[creators]")
            target = &vocab.creator_words;
        else if (line == "[subjects]")
            target = &vocab.subject_words;
        else if (line[0] == '[')
            throw LoadError(path, line_no, "unknown section " + line);
        else if (!target)
            throw LoadError(path, line_no, "token before any section header");
        else
            target->push_back(line);
    }
    if (vocab.tokens.empty()) throw LoadError(path + ": no [tokens] section");
    for (std::size_t i = 0; i < vocab.tokens.size(); ++i) vocab.index[vocab.tokens[i]] = i;
    auto it = vocab.index.find(kUnkToken);
    if (it == vocab.index.end()) throw LoadError(path + ": vocab lacks the <unk> sentinel");
    vocab.unk_pos = it->second;
    return vocab;
}

EncodedText encode_text(const std::string& text, const Vocab& vocab, std::size_t q,
                        const TokenizerConfig& cfg) {
    if (q == 0) throw UsageError("encode_text: q must be positive");
    EncodedText enc;
    enc.indices.assign(q, 0);
    auto toks = tokenize(text, cfg);
    enc.true_length = std::min(q, toks.size());
    for (std::size_t i = 0; i < enc.true_length; ++i)
        enc.indices[i] = vocab.embedding_index(toks[i]);
    return enc;
}

Tensor explicit_features(const std::string& text, const std::vector<std::string>& wordset,
                         const TokenizerConfig& cfg) {
    std::map<std::string, std::size_t> slot;
    for (std::size_t i = 0; i < wordset.size(); ++i) slot[wordset[i]] = i;
    std::vector<double> counts(wordset.size(), 0.0);
    for (const auto& tok : tokenize(text, cfg)) {
        auto it = slot.find(tok);
        if (it != slot.end()) counts[it->second] += 1.0;
    }
    return Tensor::vec(std::move(counts));
}

GruParams GruParams::tracked(Tape& tape) const {
    return {tape.track(w_update), tape.track(w_reset), tape.track(w_cand),
            tape.track(b_update), tape.track(b_reset), tape.track(b_cand)};
}

HfluParams HfluParams::tracked(Tape& tape) const {
    return {tape.track(embedding), gru.tracked(tape), tape.track(w_fuse), tape.track(b_fuse)};
}

namespace {

Tensor xavier(Shape shape, Rng& rng) {
    double fan_in = static_cast<double>(shape.size() == 2 ? shape[1] : shape[0]);
    double fan_out = static_cast<double>(shape[0]);
    double s = std::sqrt(6.0 / (fan_in + fan_out));
    return Tensor::uniform(std::move(shape), -s, s, rng);
}

}  // namespace

HfluParams init_hflu(std::size_t vocab_tokens, std::size_t e_dim, std::size_t hidden_dim,
                     std::size_t latent_dim, Rng& rng) {
    HfluParams p;
    p.embedding = xavier({vocab_tokens + 1, e_dim}, rng);
    {
        // padding row stays exactly zero
        std::vector<double> v = p.embedding.values();
        for (std::size_t j = 0; j < e_dim; ++j) v[j] = 0.0;
        p.embedding = Tensor({vocab_tokens + 1, e_dim}, std::move(v));
    }
    const Shape g{hidden_dim, e_dim + hidden_dim};
    p.gru.w_update = xavier(g, rng);
    p.gru.w_reset = xavier(g, rng);
    p.gru.w_cand = xavier(g, rng);
    p.gru.b_update = Tensor::zeros({hidden_dim});
    p.gru.b_reset = Tensor::zeros({hidden_dim});
    p.gru.b_cand = Tensor::zeros({hidden_dim});
    p.w_fuse = xavier({latent_dim, hidden_dim}, rng);
    p.b_fuse = Tensor::zeros({latent_dim});
    return p;
}

Tensor gru_step(Tape* tape, const GruParams& p, const Tensor& x, const Tensor& h_prev) {
    auto xh = concat(tape, {x, h_prev});
    auto update = sigmoid(tape, affine(tape, p.w_update, xh, p.b_update));
    auto reset = sigmoid(tape, affine(tape, p.w_reset, xh, p.b_reset));
    auto cand = tanh_op(
        tape, affine(tape, p.w_cand, concat(tape, {x, hadamard(tape, reset, h_prev)}), p.b_cand));
    return add(tape, hadamard(tape, one_minus(tape, update), h_prev),
               hadamard(tape, update, cand));
}

Tensor latent_features(Tape* tape, const EncodedText& enc, const HfluParams& p) {
    const std::size_t hidden = p.gru.b_update.numel();
    Tensor h = Tensor::zeros({hidden});
    std::vector<Tensor> steps;
    steps.reserve(enc.true_length);
    for (std::size_t t = 0; t < enc.true_length; ++t) {
        auto x = row(tape, p.embedding, enc.indices[t]);
        h = gru_step(tape, p.gru, x, h);
        steps.push_back(h);
    }
    Tensor hsum = steps.empty() ? Tensor::zeros({hidden}) : sum_of(tape, steps);
    return sigmoid(tape, affine(tape, p.w_fuse, hsum, p.b_fuse));
}

HfluFeature hflu(Tape* tape, const std::string& text, const std::vector<std::string>& wordset,
                 const Vocab& vocab, const HfluParams& p, std::size_t q,
                 const TokenizerConfig& cfg) {
    HfluFeature f;
    f.explicit_part = explicit_features(text, wordset, cfg);
    f.latent = latent_features(tape, encode_text(text, vocab, q, cfg), p);
    f.combined = concat(tape, {f.explicit_part, f.latent});
    return f;
}

}  // namespace newscred
