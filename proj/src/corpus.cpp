#include "cafl/corpus.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace cafl {

SplitCorpus corpus_from_text(const std::string& text, double val_fraction) {
    if (text.empty()) {
        throw std::runtime_error("corpus: text is empty");
    }
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
        throw std::runtime_error("corpus: val_fraction must be in (0, 1)");
    }

    std::array<bool, 256> seen{};
    for (unsigned char c : text) {
        seen[c] = true;
    }

    SplitCorpus out;
    std::array<int, 256> id_of;
    id_of.fill(-1);
    for (int c = 0; c < 256; ++c) {
        if (seen[c]) {
            id_of[c] = int(out.corpus.vocab.size());
            out.corpus.vocab.push_back(static_cast<unsigned char>(c));
        }
    }
    out.corpus.vocab_size = int(out.corpus.vocab.size());

    out.corpus.text_ids.reserve(text.size());
    for (unsigned char c : text) {
        out.corpus.text_ids.push_back(id_of[c]);
    }

    const size_t len = out.corpus.text_ids.size();
    const size_t val_count = size_t(std::ceil(val_fraction * double(len)));
    if (val_count == 0 || val_count >= len) {
        throw std::runtime_error("corpus: val_fraction yields an empty train or val split");
    }
    out.train_ids.assign(out.corpus.text_ids.begin(),
                         out.corpus.text_ids.end() - ptrdiff_t(val_count));
    out.val_ids.assign(out.corpus.text_ids.end() - ptrdiff_t(val_count),
                       out.corpus.text_ids.end());
    return out;
}

SplitCorpus load_corpus(const std::string& path, double val_fraction) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("corpus: cannot open file: " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return corpus_from_text(ss.str(), val_fraction);
}

std::string synthetic_text(uint64_t seed, int alphabet_size, int period, size_t length,
                           double noise) {
    if (alphabet_size < 2 || alphabet_size > 256) {
        throw std::runtime_error("synthetic corpus: alphabet_size must be in [2, 256]");
    }
    if (period < 1) {
        throw std::runtime_error("synthetic corpus: period must be >= 1");
    }
    if (!(noise >= 0.0 && noise < 1.0)) {
        throw std::runtime_error("synthetic corpus: noise must be in [0, 1)");
    }

    // Byte values start at '!' so small alphabets stay printable.
    std::vector<unsigned char> alphabet(static_cast<size_t>(alphabet_size));
    for (int i = 0; i < alphabet_size; ++i) {
        alphabet[size_t(i)] = static_cast<unsigned char>((33 + i) % 256);
    }

    Rng rng(sub_seed(seed, "synthetic"));

    // The pattern opens with a shuffled copy of the alphabet so every symbol
    // occurs (when period >= alphabet_size); the tail is uniform draws.
    std::vector<unsigned char> pattern;
    pattern.reserve(size_t(period));
    std::vector<unsigned char> shuffled = alphabet;
    for (size_t i = 0; i + 1 < shuffled.size(); ++i) {
        size_t j = i + rng.next_index(shuffled.size() - i);
        std::swap(shuffled[i], shuffled[j]);
    }
    for (int i = 0; i < period && i < alphabet_size; ++i) {
        pattern.push_back(shuffled[size_t(i)]);
    }
    while (int(pattern.size()) < period) {
        pattern.push_back(alphabet[rng.next_index(alphabet.size())]);
    }

    std::string text(length, '\0');
    for (size_t i = 0; i < length; ++i) {
        unsigned char c = pattern[i % pattern.size()];
        if (noise > 0.0 && rng.next_double() < noise) {
            c = alphabet[rng.next_index(alphabet.size())];
        }
        text[i] = char(c);
    }
    return text;
}

std::vector<ClientShard> partition(const std::vector<int>& train_ids, int n_clients,
                                   int context_window) {
    if (n_clients < 1) {
        throw std::runtime_error("partition: n_clients must be >= 1");
    }
    const size_t len = train_ids.size();
    const size_t base = len / size_t(n_clients);
    if (base < size_t(context_window) + 1) {
        std::ostringstream msg;
        msg << "partition: too few tokens per client (shard length " << base << " < "
            << context_window + 1 << ")";
        throw std::runtime_error(msg.str());
    }

    std::vector<ClientShard> shards(static_cast<size_t>(n_clients));
    size_t pos = 0;
    for (int c = 0; c < n_clients; ++c) {
        const size_t take = (c == n_clients - 1) ? len - pos : base;
        shards[size_t(c)].client_id = c;
        shards[size_t(c)].ids.assign(train_ids.begin() + ptrdiff_t(pos),
                                     train_ids.begin() + ptrdiff_t(pos + take));
        pos += take;
    }
    return shards;
}

Batch sample_batch(const ClientShard& shard, int batch_size, int context_window, Rng& rng) {
    const size_t len = shard.ids.size();
    const int w = context_window;
    if (len < size_t(w) + 1) {
        throw std::runtime_error("sample_batch: shard shorter than context_window + 1");
    }
    const size_t n_offsets = len - size_t(w);  // valid starts: [0, len - w - 1]

    Batch batch;
    batch.batch_size = batch_size;
    batch.context_window = w;
    batch.contexts.resize(size_t(batch_size) * size_t(w));
    batch.targets.resize(size_t(batch_size));
    for (int i = 0; i < batch_size; ++i) {
        const size_t o = rng.next_index(n_offsets);
        for (int j = 0; j < w; ++j) {
            batch.contexts[size_t(i) * size_t(w) + size_t(j)] = shard.ids[o + size_t(j)];
        }
        batch.targets[size_t(i)] = shard.ids[o + size_t(w)];
    }
    return batch;
}

}  // namespace cafl
