#ifndef INCV_CORPUS_HPP
#define INCV_CORPUS_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace incv::corpus {

/// Multi-label annotation state of one tweet.
struct LabelSet {
    bool impolite = false;
    bool intolerant = false;

    bool uncivil() const { return impolite || intolerant; }

    /// Joint state in {0..3}: bit 0 = impolite, bit 1 = intolerant.
    /// Used as the stratification key.
    int joint_class() const { return (impolite ? 1 : 0) | (intolerant ? 2 : 0); }

    bool operator==(const LabelSet&) const = default;
};

struct TweetRecord {
    std::string tweet_id;
    std::string author_id;
    std::optional<std::string> text;
    std::vector<double> encoding;  // content encoding, dimension d_t
    double political_score = 0.0;  // in [0,1]
    std::optional<LabelSet> labels;
};

struct UserRecord {
    std::string user_id;
    std::vector<std::string> followed_accounts;  // sorted, unique; joined from edges
    std::optional<std::string> location_raw;
    long long followers_count = 0;
    long long friends_count = 0;
    double tweets_per_day = 0.0;
};

struct FollowEdge {
    std::string user_id;
    std::string account_id;
};

/// One crowd worker judgment.
enum class Vote { Impolite, Intolerant, Both, Neither };

Vote vote_from_string(const std::string& s);
const char* vote_to_string(Vote v);

/// Expansion of a categorical vote into the two binary dimensions.
LabelSet vote_expand(Vote v);

struct AnnotationRecord {
    std::string tweet_id;
    std::string worker_id;
    Vote vote = Vote::Neither;
};

struct CorpusManifest {
    int d_t = 0;
    std::string tweets_path;
    std::string users_path;        // empty = no file, empty table
    std::string annotations_path;  // empty = no file, empty table
    std::string edges_path;        // empty = no file, empty table
    std::int64_t rng_seed = 0;

    static CorpusManifest load(const std::string& path);
    void save(const std::string& path) const;
};

struct CorpusTables {
    int d_t = 0;
    std::vector<TweetRecord> tweets;  // file order
    std::vector<UserRecord> users;
    std::vector<AnnotationRecord> annotations;
    std::vector<FollowEdge> edges;
    std::unordered_map<std::string, std::size_t> tweet_index;
    std::unordered_map<std::string, std::size_t> user_index;

    void rebuild_indexes();
};

/// Loads all referenced record files. Tweet encodings are checked against
/// d_t; followed_accounts on each user is filled from the edge table.
CorpusTables load_corpus(const CorpusManifest& manifest);

std::vector<TweetRecord> load_tweets(const std::string& path, int d_t);
std::vector<UserRecord> load_users(const std::string& path);
std::vector<AnnotationRecord> load_annotations(const std::string& path);
std::vector<FollowEdge> load_edges(const std::string& path);

void save_tweets(const std::string& path, std::span<const TweetRecord> tweets);
void save_users(const std::string& path, std::span<const UserRecord> users);
void save_annotations(const std::string& path, std::span<const AnnotationRecord> annotations);
void save_edges(const std::string& path, std::span<const FollowEdge> edges);

/// Keeps tweets with political_score >= threshold, in input order.
std::vector<TweetRecord> filter_political(std::span<const TweetRecord> tweets,
                                          double threshold);

struct SplitResult {
    std::vector<TweetRecord> train;
    std::vector<TweetRecord> val;
    std::vector<TweetRecord> test;
};

/// Stratified split on the joint (impolite, intolerant) class. All tweets
/// must be labeled. With author_disjoint, whole authors are assigned to one
/// subset and stratification applies at author granularity; an assignment
/// that cannot reach the class proportions raises DataError.
SplitResult stratified_split(std::span<const TweetRecord> tweets,
                             std::array<double, 3> fractions,
                             bool author_disjoint, std::uint64_t seed);

}  // namespace incv::corpus

#endif
