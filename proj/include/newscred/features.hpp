#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "newscred/hsn.hpp"
#include "newscred/tensor.hpp"

namespace newscred {

struct TokenizerConfig {
    bool lowercase = true;
    bool strip_non_alnum = true;  // non-alphanumeric bytes become separators
    bool drop_stopwords = true;
    std::set<std::string> stopwords;  // empty = built-in list

    const std::set<std::string>& effective_stopwords() const;
};

std::vector<std::string> tokenize(const std::string& text, const TokenizerConfig& cfg = {});

// Token universe plus the three discriminative word sets. `tokens` always
// contains the "<unk>" sentinel (unreachable from tokenize output), which
// absorbs out-of-vocabulary words at encoding time. Embedding row index for
// a token is its position in `tokens` + 1; row 0 is padding.
struct Vocab {
    std::vector<std::string> tokens;             // W
    std::map<std::string, std::size_t> index;    // token -> position in tokens
    std::size_t unk_pos = 0;
    std::vector<std::string> article_words;      // W_n, |.| = d
    std::vector<std::string> creator_words;      // W_u
    std::vector<std::string> subject_words;      // W_s

    std::size_t embedding_rows() const { return tokens.size() + 1; }
    std::size_t embedding_index(const std::string& token) const;
};

struct TrainIds {
    std::vector<std::string> articles, creators, subjects;
};

// Builds W from the training texts of all three categories and ranks each
// category's word set by |log((c_pos + 1) / (c_neg + 1))| over that
// category's training texts, ties broken lexicographically. Test-fold texts
// and labels are never consulted.
Vocab build_vocab(const Hsn& hsn, const TrainIds& train, std::size_t d,
                  const TokenizerConfig& cfg = {});

void save_vocab(const Vocab& vocab, const std::string& path);
Vocab load_vocab(const std::string& path);

// Fixed-length index encoding: first true_length slots are embedding indices
// of the leading tokens, the rest are 0 (padding).
struct EncodedText {
    std::vector<std::size_t> indices;
    std::size_t true_length = 0;
};

EncodedText encode_text(const std::string& text, const Vocab& vocab, std::size_t q,
                        const TokenizerConfig& cfg = {});

// Word-set occurrence counts over the full normalized token stream.
Tensor explicit_features(const std::string& text, const std::vector<std::string>& wordset,
                         const TokenizerConfig& cfg = {});

struct GruParams {
    Tensor w_update, w_reset, w_cand;  // hidden x (e_dim + hidden)
    Tensor b_update, b_reset, b_cand;
    GruParams tracked(Tape& tape) const;
};

struct HfluParams {
    Tensor embedding;  // (|W|+1) x e_dim, row 0 fixed at zero
    GruParams gru;
    Tensor w_fuse, b_fuse;  // latent x hidden, latent
    HfluParams tracked(Tape& tape) const;
};

HfluParams init_hflu(std::size_t vocab_tokens, std::size_t e_dim, std::size_t hidden_dim,
                     std::size_t latent_dim, Rng& rng);

Tensor gru_step(Tape* tape, const GruParams& p, const Tensor& x, const Tensor& h_prev);

// GRU over the non-padding steps, hidden states summed, affine + sigmoid
// fusion. An empty text yields sigmoid(b_fuse).
Tensor latent_features(Tape* tape, const EncodedText& enc, const HfluParams& p);

struct HfluFeature {
    Tensor explicit_part;  // untracked counts
    Tensor latent;
    Tensor combined;       // concat(explicit_part, latent)
};

HfluFeature hflu(Tape* tape, const std::string& text, const std::vector<std::string>& wordset,
                 const Vocab& vocab, const HfluParams& p, std::size_t q,
                 const TokenizerConfig& cfg = {});

}  // namespace newscred
