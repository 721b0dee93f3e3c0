#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "cafl/corpus.hpp"
#include "test_util.hpp"

using namespace cafl;

TEST_CASE("corpus: sorted vocab and contiguous split") {
    const SplitCorpus sc = corpus_from_text("abab", 0.25);
    CHECK(sc.corpus.vocab == std::vector<unsigned char>{'a', 'b'});
    CHECK(sc.corpus.vocab_size == 2);
    CHECK(sc.train_ids == std::vector<int>{0, 1, 0});
    CHECK(sc.val_ids == std::vector<int>{1});
}

TEST_CASE("corpus: single-symbol text") {
    const SplitCorpus sc = corpus_from_text("zzz", 0.3);
    CHECK(sc.corpus.vocab_size == 1);
    CHECK(sc.corpus.vocab == std::vector<unsigned char>{'z'});
    CHECK(sc.train_ids.size() == 2);
    CHECK(sc.val_ids.size() == 1);
}

TEST_CASE("corpus: vocab_size equals an independent distinct-byte count") {
    // Oracle: one-pass distinct count over the file bytes.
    const std::string text = synthetic_text(7, 64, 96, 20000) + "spice: \xc3\xa9\n";
    testutil::TempFile f(".txt");
    testutil::write_file(f.str(), text);

    std::set<unsigned char> distinct(text.begin(), text.end());
    const SplitCorpus sc = load_corpus(f.str(), 0.1);
    CHECK(sc.corpus.vocab_size == int(distinct.size()));
    CHECK(sc.train_ids.size() + sc.val_ids.size() == text.size());
}

TEST_CASE("corpus: splits are a pure function of bytes and fraction") {
    const std::string text = synthetic_text(3, 16, 31, 5000);
    const SplitCorpus a = corpus_from_text(text, 0.2);
    const SplitCorpus b = corpus_from_text(text, 0.2);
    CHECK(a.corpus.vocab == b.corpus.vocab);
    CHECK(a.train_ids == b.train_ids);
    CHECK(a.val_ids == b.val_ids);
}

TEST_CASE("corpus: load errors") {
    CHECK_THROWS(load_corpus("/nonexistent/really_not_here.txt", 0.1));

    testutil::TempFile empty(".txt");
    testutil::write_file(empty.str(), "");
    CHECK_THROWS(load_corpus(empty.str(), 0.1));

    CHECK_THROWS(corpus_from_text("ab", 0.9));   // empty train
    CHECK_THROWS(corpus_from_text("ab", 0.0));   // fraction out of range
    CHECK_THROWS(corpus_from_text("ab", 1.0));
}

TEST_CASE("partition: contiguous shards with remainder to the last") {
    const std::vector<int> ten(10, 0);
    auto shards = partition(ten, 2, 3);
    REQUIRE(shards.size() == 2);
    CHECK(shards[0].ids.size() == 5);
    CHECK(shards[1].ids.size() == 5);

    const std::vector<int> eleven(11, 0);
    shards = partition(eleven, 2, 3);
    CHECK(shards[0].ids.size() == 5);
    CHECK(shards[1].ids.size() == 6);

    CHECK_THROWS(partition(ten, 3, 3));  // shard length 3 < context + 1
}

TEST_CASE("partition: disjoint and jointly exhaustive") {
    std::vector<int> train(257);
    for (size_t i = 0; i < train.size(); ++i) train[i] = int(i % 7);
    for (int n : {1, 3, 5, 16}) {
        auto shards = partition(train, n, 4);
        std::vector<int> concat;
        for (int c = 0; c < n; ++c) {
            CHECK(shards[size_t(c)].client_id == c);
            CHECK(shards[size_t(c)].ids.size() >= 5);
            concat.insert(concat.end(), shards[size_t(c)].ids.begin(),
                          shards[size_t(c)].ids.end());
        }
        CHECK(concat == train);
    }
}

TEST_CASE("sample_batch: single valid offset") {
    ClientShard shard{0, {0, 1, 0, 1}};
    Rng rng(99);
    const Batch b = sample_batch(shard, 1, 3, rng);
    CHECK(b.contexts == std::vector<int>{0, 1, 0});
    CHECK(b.targets == std::vector<int>{1});
}

TEST_CASE("sample_batch: deterministic for a fixed seed") {
    ClientShard shard{0, {}};
    for (int i = 0; i < 50; ++i) shard.ids.push_back(i % 9);
    Rng r1(1234);
    Rng r2(1234);
    const Batch a = sample_batch(shard, 8, 5, r1);
    const Batch b = sample_batch(shard, 8, 5, r2);
    CHECK(a.contexts == b.contexts);
    CHECK(a.targets == b.targets);
}

TEST_CASE("sample_batch: offsets are uniform over the valid range") {
    // Shard ids equal their position, so contexts[0] recovers the offset.
    ClientShard shard{0, {}};
    for (int i = 0; i < 100; ++i) shard.ids.push_back(i);
    const int w = 8;
    const int n_offsets = 100 - w;  // 92
    const int draws = 10000;

    Rng rng(2024);
    const Batch b = sample_batch(shard, draws, w, rng);
    std::vector<int> counts(size_t(n_offsets), 0);
    for (int i = 0; i < draws; ++i) {
        const int offset = b.contexts[size_t(i) * size_t(w)];
        REQUIRE(offset >= 0);
        REQUIRE(offset < n_offsets);
        CHECK(b.targets[size_t(i)] == offset + w);  // never touches beyond the shard
        counts[size_t(offset)]++;
    }
    const double p = 1.0 / double(n_offsets);
    const double expected = draws * p;
    const double se = std::sqrt(draws * p * (1.0 - p));
    for (int c : counts) {
        CHECK(std::abs(double(c) - expected) <= 5.0 * se);
    }
}

TEST_CASE("sample_batch: shard shorter than window fails") {
    ClientShard shard{0, {1, 2, 3}};
    Rng rng(1);
    CHECK_THROWS(sample_batch(shard, 1, 3, rng));
}

TEST_CASE("synthetic corpus: deterministic, tiled, full alphabet") {
    const std::string a = synthetic_text(5, 32, 48, 10000);
    const std::string b = synthetic_text(5, 32, 48, 10000);
    CHECK(a == b);
    CHECK(a.size() == 10000);
    for (size_t i = 48; i < a.size(); ++i) {
        CHECK(a[i] == a[i - 48]);  // period 48
    }
    std::set<char> distinct(a.begin(), a.end());
    CHECK(distinct.size() == 32);

    CHECK(synthetic_text(5, 32, 48, 10000) != synthetic_text(6, 32, 48, 10000));
}

TEST_CASE("synthetic corpus: noise perturbs roughly the requested fraction") {
    const std::string clean = synthetic_text(5, 32, 48, 20000, 0.0);
    const std::string noisy = synthetic_text(5, 32, 48, 20000, 0.1);
    CHECK(noisy == synthetic_text(5, 32, 48, 20000, 0.1));

    size_t changed = 0;
    for (size_t i = 0; i < clean.size(); ++i) {
        changed += (clean[i] != noisy[i]);
    }
    // replacement draws may repeat the original symbol, so slightly below 10%
    const double frac = double(changed) / double(clean.size());
    CHECK(frac > 0.06);
    CHECK(frac < 0.13);

    CHECK_THROWS(synthetic_text(5, 32, 48, 100, -0.1));
    CHECK_THROWS(synthetic_text(5, 32, 48, 100, 1.0));
}
