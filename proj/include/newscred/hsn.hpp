#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace newscred {

// Six-way credibility rating. Enum order is the class-index order used by
// every classifier head; score() maps to the 1..6 scale used when averaging.
enum class CredLabel { True = 0, MostlyTrue, HalfTrue, MostlyFalse, False, PantsOnFire };

inline constexpr int kNumClasses = 6;

int label_score(CredLabel l);                       // True=6 .. PantsOnFire=1
CredLabel label_from_score(double score);           // rounds half-up, clamps to [1,6]
const std::string& label_name(CredLabel l);         // "true", "mostly-true", ...
std::optional<CredLabel> label_from_name(const std::string& name);

struct Article {
    std::string id;
    std::string text;
    CredLabel label = CredLabel::True;
};

struct Creator {
    std::string id;
    std::string profile;
    std::optional<CredLabel> label;
};

struct Subject {
    std::string id;
    std::string description;
    std::optional<CredLabel> label;
};

// Heterogeneous article/creator/subject network. Maps are keyed by id so all
// iteration is deterministic. Invariants (enforced by validate/load_hsn):
// every article has exactly one creator, every edge endpoint resolves, every
// creator authors at least one article, every subject tags at least one.
struct Hsn {
    std::map<std::string, Article> articles;
    std::map<std::string, Creator> creators;
    std::map<std::string, Subject> subjects;
    std::map<std::string, std::string> authorship;           // article -> creator
    std::map<std::string, std::set<std::string>> subject_links;  // article -> subjects

    // Reverse indexes, rebuilt by finalize().
    std::map<std::string, std::vector<std::string>> creator_articles;
    std::map<std::string, std::vector<std::string>> subject_articles;

    std::size_t subject_link_count() const;
    // Rebuilds reverse indexes and checks the structural invariants.
    void finalize();
};

// Reads the four JSONL files. Errors carry the offending file and line.
Hsn load_hsn(const std::string& articles_path, const std::string& creators_path,
             const std::string& subjects_path, const std::string& edges_path);

// Writes an Hsn back out as the four JSONL files (fixed names) inside dir.
void write_hsn(const Hsn& hsn, const std::string& dir);

// Fills in missing creator/subject labels from the mean 1..6 score of their
// articles, rounded half-up. Labels already present are left untouched.
void derive_entity_labels(Hsn& hsn);

// k-fold split with a train-side subsampling ratio, per node category.
// folds[f] partitions the ids; sampled_train[f] holds round(theta * |train|)
// ids drawn from everything outside fold f.
struct Split {
    struct TypeSplit {
        std::vector<std::vector<std::string>> folds;
        std::vector<std::vector<std::string>> sampled_train;
    };
    int k = 0;
    double theta = 1.0;
    TypeSplit articles, creators, subjects;
};

Split split_folds(const Hsn& hsn, int k, double theta, std::uint64_t seed);

}  // namespace newscred
