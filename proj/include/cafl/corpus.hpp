#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cafl/rng.hpp"

namespace cafl {

// Character-level corpus. A "character" is a byte; the vocabulary is the
// sorted set of distinct bytes, so ids are reproducible from file bytes alone.
struct Corpus {
    std::vector<int> text_ids;
    std::vector<unsigned char> vocab;  // sorted, no duplicates
    int vocab_size = 0;
};

struct SplitCorpus {
    Corpus corpus;
    std::vector<int> train_ids;  // leading contiguous block
    std::vector<int> val_ids;    // trailing ceil(val_fraction * len) ids
};

struct ClientShard {
    int client_id = 0;
    std::vector<int> ids;  // contiguous slice of the train split
};

struct Batch {
    int batch_size = 0;
    int context_window = 0;
    std::vector<int> contexts;  // batch_size x context_window, row-major
    std::vector<int> targets;   // batch_size
};

SplitCorpus corpus_from_text(const std::string& text, double val_fraction);
SplitCorpus load_corpus(const std::string& path, double val_fraction);

// Repeating pseudo-random text for offline runs: a seeded pattern of `period`
// bytes (containing every alphabet symbol when period allows) tiled to
// `length` bytes. `noise` is the fraction of positions replaced by a uniform
// symbol; it puts a floor under the achievable prediction loss.
std::string synthetic_text(uint64_t seed, int alphabet_size, int period, size_t length,
                           double noise = 0.0);

// Contiguous, equal-size shards; the last shard absorbs the remainder.
std::vector<ClientShard> partition(const std::vector<int>& train_ids, int n_clients,
                                   int context_window);

// b start offsets drawn uniformly with replacement from [0, len - w - 1].
Batch sample_batch(const ClientShard& shard, int batch_size, int context_window, Rng& rng);

}  // namespace cafl
