#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "userprof/corpus.hpp"
#include "userprof/evaluation.hpp"
#include "userprof/random.hpp"

namespace userprof::synth {

/// Words shared by every on-topic text.
const std::vector<std::string>& domain_vocabulary();
/// Words disjoint from the domain vocabulary.
const std::vector<std::string>& off_topic_vocabulary();

/// On-topic text: the full domain vocabulary plus `extra` words.
std::string domain_text(const std::vector<std::string>& extra);
/// Off-topic text of 8 to 14 words.
std::string off_topic_text(Rng& rng);

/// Knowledge-base style paragraph text (domain vocabulary, 1 to 3 repetitions per word).
std::string chunk_text(Rng& rng);

/// `n` texts of which roughly `domain_share` are on-topic.
std::vector<std::string> tweet_texts(std::size_t n, double domain_share, std::uint64_t seed);

struct FixtureSummary {
  std::filesystem::path config;
  std::size_t users = 0;
  std::size_t tweets = 0;
  std::size_t statements = 0;
};

/// Small fixture with planted stances: 25 users in one retweet community
/// (5 statement users, 20 profile users), 15 statements and a scripted
/// mock gateway whose answers follow the planted gold.
FixtureSummary write_e2e_fixture(const std::filesystem::path& dir);

/// Fixture sized for the default sampling configuration: two large and eight
/// small retweet communities, enough users for a 50/100 split, 15 curated
/// statements and catch-all mock responses.
FixtureSummary write_default_shape_fixture(const std::filesystem::path& dir);

}  // namespace userprof::synth
