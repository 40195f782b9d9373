#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mf {

// A letter is a signed generator index: +f for x_f, -f for x_f^{-1} (f >= 1).
using Letter = int;
using Word = std::vector<Letter>;
using TimeVector = std::vector<double>;

inline int generator(Letter a) { return a < 0 ? -a : a; }
inline int sign(Letter a) { return a < 0 ? -1 : 1; }

Word parse_word(std::string_view text);
std::string format_word(const Word& w);

Word inverse(const Word& w);
int max_generator(const Word& w);
// Free reduction, for display only; the engine never reduces.
Word reduce(const Word& w);

struct WordStats {
    std::vector<int> n_plus, n_minus, n_bar, n;  // indexed by generator - 1
    double amperean = 0.0;
    std::size_t length = 0;
};

WordStats word_stats(const Word& w, const TimeVector& t);

// <a, b>_t = sum_f a_f b_f t_f over the first t.size() generators.
double inner(const std::vector<int>& a, const std::vector<int>& b, const TimeVector& t);
std::vector<int> signed_counts(const Word& w, int q);
std::vector<int> unsigned_counts(const Word& w, int q);

// Tuple of words with a set partition; block[i] is the block label of word i.
// Labels are kept normalized: 0,1,2,... in order of first appearance.
struct PartitionedWord {
    std::vector<Word> words;
    std::vector<int> block;

    std::size_t size() const { return words.size(); }
    int num_blocks() const;
    std::size_t total_length() const;
    Letter letter_at(int pos) const;
    // (word index, offset) of a flat position in w(S).
    std::pair<int, int> locate(int pos) const;

    bool operator==(const PartitionedWord& o) const = default;
};

// All words in one block each (the partition 0_m).
PartitionedWord singletons(std::vector<Word> words);
// All words in a single block.
PartitionedWord one_block(std::vector<Word> words);
void normalize_blocks(PartitionedWord& pw);

using Pair = std::pair<int, int>;

struct PairLists {
    std::vector<Pair> plus, minus;        // N_2^+(f), N_2^-(f)
    std::vector<Pair> plus0, minus0;      // N^{0,+}, N^{0,-}
    std::vector<Pair> plus2, minus2;      // N^{2,+}, N^{2,-}
};

// Pairs (i, j), i < j, of flat positions whose letters use generator f.
PairLists classify_pairs(const PartitionedWord& pw, int f);

// variant = +1 for T^+ (equal letters), -1 for T^- (inverse letters).
PartitionedWord apply_cut_join(const PartitionedWord& pw, int i, int j, int variant);

// Orbit normal form: minimal rotation per word, words sorted within blocks,
// blocks sorted, labels by first appearance.
PartitionedWord canonicalize(const PartitionedWord& pw);
Word min_rotation(const Word& w);
bool word_less(const Word& a, const Word& b);

// Text form "{ w1 ; w2 | {1,2}{3} }".
std::string format_partial(const PartitionedWord& pw);
PartitionedWord parse_partial(std::string_view text);

}  // namespace mf
