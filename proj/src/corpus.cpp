#include "incv/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "incv/common.hpp"
#include "json.hpp"

namespace incv::corpus {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

Vote vote_from_string(const std::string& s) {
    if (s == "impolite") return Vote::Impolite;
    if (s == "intolerant") return Vote::Intolerant;
    if (s == "both") return Vote::Both;
    if (s == "neither") return Vote::Neither;
    throw DataError("unknown vote value: '" + s + "'");
}

const char* vote_to_string(Vote v) {
    switch (v) {
        case Vote::Impolite: return "impolite";
        case Vote::Intolerant: return "intolerant";
        case Vote::Both: return "both";
        case Vote::Neither: return "neither";
    }
    return "neither";
}

LabelSet vote_expand(Vote v) {
    switch (v) {
        case Vote::Impolite: return {true, false};
        case Vote::Intolerant: return {false, true};
        case Vote::Both: return {true, true};
        case Vote::Neither: return {false, false};
    }
    return {false, false};
}

namespace {

/// Applies fn to each nonempty line; wraps parse failures with file:line.
template <typename Fn>
void for_each_jsonl(const std::string& path, Fn&& fn) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        ojson j;
        try {
            j = ojson::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path + ":" + std::to_string(lineno) +
                            ": malformed JSON line (" + e.what() + ")");
        }
        try {
            fn(j);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
        } catch (const DataError& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

std::ofstream open_out(const std::string& path) {
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    return out;
}

}  // namespace

CorpusManifest CorpusManifest::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest " + path);
    ojson j;
    try {
        j = ojson::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("manifest " + path + ": " + e.what());
    }
    CorpusManifest m;
    m.d_t = j.at("d_t").get<int>();
    if (m.d_t <= 0) throw DataError("manifest d_t must be positive");
    const fs::path base = fs::path(path).parent_path();
    auto resolve = [&](const char* key) -> std::string {
        if (!j.contains(key) || j[key].is_null()) return {};
        const auto rel = j[key].get<std::string>();
        if (rel.empty()) return {};
        return (base / rel).string();
    };
    m.tweets_path = resolve("tweets");
    m.users_path = resolve("users");
    m.annotations_path = resolve("annotations");
    m.edges_path = resolve("edges");
    m.rng_seed = j.value("rng_seed", std::int64_t{0});
    if (m.tweets_path.empty()) throw DataError("manifest missing tweets path");
    return m;
}

void CorpusManifest::save(const std::string& path) const {
    ojson j;
    j["d_t"] = d_t;
    auto rel = [&](const std::string& p) {
        return p.empty() ? std::string{} : fs::path(p).filename().string();
    };
    j["tweets"] = rel(tweets_path);
    j["users"] = rel(users_path);
    j["annotations"] = rel(annotations_path);
    j["edges"] = rel(edges_path);
    j["rng_seed"] = rng_seed;
    auto out = open_out(path);
    out << j.dump(2) << "\n";
}

std::vector<TweetRecord> load_tweets(const std::string& path, int d_t) {
    std::vector<TweetRecord> tweets;
    std::set<std::string> seen;
    for_each_jsonl(path, [&](const ojson& j) {
        TweetRecord t;
        t.tweet_id = j.at("tweet_id").get<std::string>();
        if (!seen.insert(t.tweet_id).second)
            throw DataError("duplicate tweet_id '" + t.tweet_id + "'");
        t.author_id = j.at("author_id").get<std::string>();
        if (j.contains("text") && !j["text"].is_null())
            t.text = j["text"].get<std::string>();
        t.encoding = j.at("encoding").get<std::vector<double>>();
        if (static_cast<int>(t.encoding.size()) != d_t)
            throw DataError("tweet '" + t.tweet_id + "': encoding dimension " +
                            std::to_string(t.encoding.size()) + " != d_t " +
                            std::to_string(d_t));
        t.political_score = j.at("political_score").get<double>();
        if (!(t.political_score >= 0.0 && t.political_score <= 1.0))
            throw DataError("tweet '" + t.tweet_id + "': political_score out of [0,1]");
        if (j.contains("labels") && !j["labels"].is_null()) {
            LabelSet ls;
            ls.impolite = j["labels"].at("impolite").get<bool>();
            ls.intolerant = j["labels"].at("intolerant").get<bool>();
            t.labels = ls;
        }
        tweets.push_back(std::move(t));
    });
    return tweets;
}

std::vector<UserRecord> load_users(const std::string& path) {
    std::vector<UserRecord> users;
    std::set<std::string> seen;
    for_each_jsonl(path, [&](const ojson& j) {
        UserRecord u;
        u.user_id = j.at("user_id").get<std::string>();
        if (!seen.insert(u.user_id).second)
            throw DataError("duplicate user_id '" + u.user_id + "'");
        if (j.contains("location_raw") && !j["location_raw"].is_null())
            u.location_raw = j["location_raw"].get<std::string>();
        u.followers_count = j.value("followers_count", std::int64_t{0});
        u.friends_count = j.value("friends_count", std::int64_t{0});
        u.tweets_per_day = j.value("tweets_per_day", 0.0);
        if (u.followers_count < 0 || u.friends_count < 0 || u.tweets_per_day < 0)
            throw DataError("user '" + u.user_id + "': negative count");
        users.push_back(std::move(u));
    });
    return users;
}

std::vector<AnnotationRecord> load_annotations(const std::string& path) {
    std::vector<AnnotationRecord> annotations;
    for_each_jsonl(path, [&](const ojson& j) {
        AnnotationRecord a;
        a.tweet_id = j.at("tweet_id").get<std::string>();
        a.worker_id = j.at("worker_id").get<std::string>();
        a.vote = vote_from_string(j.at("vote").get<std::string>());
        annotations.push_back(std::move(a));
    });
    return annotations;
}

std::vector<FollowEdge> load_edges(const std::string& path) {
    std::vector<FollowEdge> edges;
    std::set<std::pair<std::string, std::string>> seen;
    for_each_jsonl(path, [&](const ojson& j) {
        FollowEdge e;
        e.user_id = j.at("user_id").get<std::string>();
        e.account_id = j.at("account_id").get<std::string>();
        if (seen.emplace(e.user_id, e.account_id).second)
            edges.push_back(std::move(e));
    });
    return edges;
}

void save_tweets(const std::string& path, std::span<const TweetRecord> tweets) {
    auto out = open_out(path);
    for (const auto& t : tweets) {
        ojson j;
        j["tweet_id"] = t.tweet_id;
        j["author_id"] = t.author_id;
        if (t.text) j["text"] = *t.text;
        j["encoding"] = t.encoding;
        j["political_score"] = t.political_score;
        if (t.labels) {
            j["labels"] = ojson{{"impolite", t.labels->impolite},
                                {"intolerant", t.labels->intolerant}};
        }
        out << j.dump() << "\n";
    }
}

void save_users(const std::string& path, std::span<const UserRecord> users) {
    auto out = open_out(path);
    for (const auto& u : users) {
        ojson j;
        j["user_id"] = u.user_id;
        if (u.location_raw) j["location_raw"] = *u.location_raw;
        j["followers_count"] = u.followers_count;
        j["friends_count"] = u.friends_count;
        j["tweets_per_day"] = u.tweets_per_day;
        out << j.dump() << "\n";
    }
}

void save_annotations(const std::string& path,
                      std::span<const AnnotationRecord> annotations) {
    auto out = open_out(path);
    for (const auto& a : annotations) {
        ojson j;
        j["tweet_id"] = a.tweet_id;
        j["worker_id"] = a.worker_id;
        j["vote"] = vote_to_string(a.vote);
        out << j.dump() << "\n";
    }
}

void save_edges(const std::string& path, std::span<const FollowEdge> edges) {
    auto out = open_out(path);
    for (const auto& e : edges) {
        ojson j;
        j["user_id"] = e.user_id;
        j["account_id"] = e.account_id;
        out << j.dump() << "\n";
    }
}

void CorpusTables::rebuild_indexes() {
    tweet_index.clear();
    user_index.clear();
    for (std::size_t i = 0; i < tweets.size(); ++i) tweet_index[tweets[i].tweet_id] = i;
    for (std::size_t i = 0; i < users.size(); ++i) user_index[users[i].user_id] = i;
}

CorpusTables load_corpus(const CorpusManifest& manifest) {
    CorpusTables tables;
    tables.d_t = manifest.d_t;
    tables.tweets = load_tweets(manifest.tweets_path, manifest.d_t);
    if (!manifest.users_path.empty()) tables.users = load_users(manifest.users_path);
    if (!manifest.annotations_path.empty())
        tables.annotations = load_annotations(manifest.annotations_path);
    if (!manifest.edges_path.empty()) tables.edges = load_edges(manifest.edges_path);
    tables.rebuild_indexes();

    // Join the follow graph into user records; edge users without a profile
    // row stay edge-only.
    std::map<std::string, std::set<std::string>> follows;
    for (const auto& e : tables.edges) follows[e.user_id].insert(e.account_id);
    for (auto& u : tables.users) {
        auto it = follows.find(u.user_id);
        if (it == follows.end()) continue;
        u.followed_accounts.assign(it->second.begin(), it->second.end());
    }
    return tables;
}

std::vector<TweetRecord> filter_political(std::span<const TweetRecord> tweets,
                                          double threshold) {
    if (!(threshold >= 0.0 && threshold <= 1.0))
        throw ConfigError("political threshold must be in [0,1]");
    std::vector<TweetRecord> kept;
    for (const auto& t : tweets)
        if (t.political_score >= threshold) kept.push_back(t);
    return kept;
}

namespace {

/// Largest-remainder allocation of n items across the three subsets.
std::array<std::size_t, 3> allocate(std::size_t n, const std::array<double, 3>& fractions) {
    std::array<std::size_t, 3> alloc{};
    std::array<double, 3> remainder{};
    std::size_t assigned = 0;
    for (int s = 0; s < 3; ++s) {
        const double exact = fractions[s] * static_cast<double>(n);
        alloc[s] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        remainder[s] = exact - static_cast<double>(alloc[s]);
        assigned += alloc[s];
    }
    while (assigned < n) {
        int best = 0;
        for (int s = 1; s < 3; ++s)
            if (remainder[s] > remainder[best] + 1e-12) best = s;
        ++alloc[best];
        remainder[best] -= 1.0;
        ++assigned;
    }
    return alloc;
}

void check_fractions(const std::array<double, 3>& fractions) {
    double sum = 0;
    for (double f : fractions) {
        if (f <= 0) throw ConfigError("split fractions must be positive");
        sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
}

SplitResult split_by_record(std::span<const TweetRecord> tweets,
                            const std::array<double, 3>& fractions, std::uint64_t seed) {
    std::array<std::vector<std::size_t>, 4> by_class;
    for (std::size_t i = 0; i < tweets.size(); ++i)
        by_class[tweets[i].labels->joint_class()].push_back(i);

    std::array<std::vector<std::size_t>, 3> subsets;
    for (int c = 0; c < 4; ++c) {
        auto& idx = by_class[c];
        if (idx.empty()) continue;
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(c)));
        rng.shuffle(idx);
        const auto alloc = allocate(idx.size(), fractions);
        std::size_t pos = 0;
        for (int s = 0; s < 3; ++s)
            for (std::size_t k = 0; k < alloc[s]; ++k) subsets[s].push_back(idx[pos++]);
    }

    SplitResult result;
    std::array<std::vector<TweetRecord>*, 3> out{&result.train, &result.val, &result.test};
    for (int s = 0; s < 3; ++s) {
        std::sort(subsets[s].begin(), subsets[s].end());
        for (auto i : subsets[s]) out[s]->push_back(tweets[i]);
    }
    return result;
}

SplitResult split_by_author(std::span<const TweetRecord> tweets,
                            const std::array<double, 3>& fractions, std::uint64_t seed) {
    struct AuthorBlock {
        std::string author;
        std::array<std::size_t, 4> counts{};
        std::vector<std::size_t> tweet_idx;
        std::size_t total = 0;
    };
    std::map<std::string, AuthorBlock> by_author;
    std::array<double, 4> class_total{};
    for (std::size_t i = 0; i < tweets.size(); ++i) {
        auto& blk = by_author[tweets[i].author_id];
        blk.author = tweets[i].author_id;
        const int c = tweets[i].labels->joint_class();
        ++blk.counts[c];
        ++class_total[c];
        blk.tweet_idx.push_back(i);
        ++blk.total;
    }

    const double max_frac = *std::max_element(fractions.begin(), fractions.end());
    for (const auto& [id, blk] : by_author)
        for (int c = 0; c < 4; ++c)
            if (static_cast<double>(blk.counts[c]) > 1.05 * max_frac * class_total[c] + 1e-9)
                throw DataError("author-disjoint split infeasible: author '" + id +
                                "' owns " + std::to_string(blk.counts[c]) + " of " +
                                std::to_string(static_cast<long long>(class_total[c])) +
                                " records in class " + std::to_string(c));

    std::vector<AuthorBlock> blocks;
    blocks.reserve(by_author.size());
    for (auto& [id, blk] : by_author) blocks.push_back(std::move(blk));
    Rng rng(mix_seed(seed, 0xA17u));
    rng.shuffle(blocks);
    std::stable_sort(blocks.begin(), blocks.end(),
                     [](const AuthorBlock& a, const AuthorBlock& b) { return a.total > b.total; });

    // Greedy: place each author where the squared proportional overshoot,
    // relative to the subset fraction, grows least.
    std::array<std::array<double, 4>, 3> assigned{};
    std::array<std::vector<std::size_t>, 3> subsets;
    for (const auto& blk : blocks) {
        int best = -1;
        double best_cost = 0;
        for (int s = 0; s < 3; ++s) {
            double cost = 0;
            for (int c = 0; c < 4; ++c) {
                if (class_total[c] == 0) continue;
                const double share =
                    (assigned[s][c] + static_cast<double>(blk.counts[c])) / class_total[c];
                const double dev = share - fractions[s];
                cost += dev * dev / fractions[s];
            }
            if (best < 0 || cost < best_cost - 1e-15) {
                best = s;
                best_cost = cost;
            }
        }
        for (int c = 0; c < 4; ++c) assigned[best][c] += static_cast<double>(blk.counts[c]);
        for (auto i : blk.tweet_idx) subsets[best].push_back(i);
    }

    for (int c = 0; c < 4; ++c) {
        if (class_total[c] == 0) continue;
        for (int s = 0; s < 3; ++s) {
            const double target = fractions[s] * class_total[c];
            const double tol = std::max(1.0, 0.05 * target);
            if (std::abs(assigned[s][c] - target) > tol + 1e-9)
                throw DataError("author-disjoint split infeasible: class " +
                                std::to_string(c) + " subset " + std::to_string(s) +
                                " got " + std::to_string(assigned[s][c]) +
                                " records, target " + std::to_string(target));
        }
    }

    SplitResult result;
    std::array<std::vector<TweetRecord>*, 3> out{&result.train, &result.val, &result.test};
    for (int s = 0; s < 3; ++s) {
        std::sort(subsets[s].begin(), subsets[s].end());
        for (auto i : subsets[s]) out[s]->push_back(tweets[i]);
    }
    return result;
}

}  // namespace

SplitResult stratified_split(std::span<const TweetRecord> tweets,
                             std::array<double, 3> fractions, bool author_disjoint,
                             std::uint64_t seed) {
    check_fractions(fractions);
    for (const auto& t : tweets)
        if (!t.labels)
            throw DataError("stratified_split requires labels; tweet '" + t.tweet_id +
                            "' is unlabeled");
    if (tweets.empty()) return {};
    return author_disjoint ? split_by_author(tweets, fractions, seed)
                           : split_by_record(tweets, fractions, seed);
}

}  // namespace incv::corpus
