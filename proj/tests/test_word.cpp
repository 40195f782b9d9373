#include <algorithm>
#include <map>
#include <random>

#include "doctest.h"
#include "mf/errors.hpp"
#include "mf/word.hpp"

using namespace mf;

namespace {

PartitionedWord pw_of(std::vector<std::string> ws, std::vector<int> blocks) {
    PartitionedWord pw;
    for (auto& s : ws) pw.words.push_back(parse_word(s));
    pw.block = std::move(blocks);
    normalize_blocks(pw);
    return pw;
}

std::map<Letter, int> letter_multiset(const PartitionedWord& pw) {
    std::map<Letter, int> m;
    for (const auto& w : pw.words)
        for (Letter a : w) m[a]++;
    return m;
}

PartitionedWord random_pw(std::mt19937_64& rng, int max_len, int q) {
    std::uniform_int_distribution<int> nw(1, 4), len(0, max_len), gen(1, q), coin(0, 1);
    PartitionedWord pw;
    int m = nw(rng);
    for (int k = 0; k < m; ++k) {
        Word w;
        int l = len(rng);
        for (int i = 0; i < l; ++i) w.push_back(gen(rng) * (coin(rng) ? 1 : -1));
        pw.words.push_back(w);
        pw.block.push_back(std::uniform_int_distribution<int>(0, k)(rng));
    }
    normalize_blocks(pw);
    return pw;
}

}  // namespace

TEST_CASE("parse and format words") {
    CHECK(parse_word("x1 x2' x1") == Word{1, -2, 1});
    CHECK(parse_word("e").empty());
    CHECK(format_word(parse_word("x3'")) == "x3'");
    CHECK(parse_word("x1x2'") == Word{1, -2});
    CHECK(parse_word("x2′") == Word{-2});
    CHECK(format_word(Word{}) == "e");
    CHECK_THROWS_AS(parse_word("y1"), ValidationError);
    CHECK_THROWS_AS(parse_word("x"), ValidationError);
    CHECK_THROWS_AS(parse_word("x0"), ValidationError);
    CHECK_THROWS_AS(parse_word("e x1"), ValidationError);
    CHECK_THROWS_AS(parse_word(""), ValidationError);
    try {
        parse_word("x1 z");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("position 3") != std::string::npos);
    }
    std::mt19937_64 rng(7);
    for (int it = 0; it < 200; ++it) {
        Word w = random_pw(rng, 6, 3).words[0];
        CHECK(parse_word(format_word(w)) == w);
    }
}

TEST_CASE("word statistics") {
    auto s = word_stats(parse_word("x1 x1"), {0.7});
    CHECK(s.n_bar[0] == 2);
    CHECK(s.n[0] == 2);
    CHECK(s.amperean == doctest::Approx(2.8));
    auto s2 = word_stats(parse_word("x1 x1'"), {0.7});
    CHECK(s2.n[0] == 0);
    CHECK(s2.n_bar[0] == 2);
    CHECK(s2.amperean == doctest::Approx(2.8));
    CHECK(inner(signed_counts(parse_word("x1"), 1), signed_counts(parse_word("x1'"), 1), {2.0}) == -2.0);
    CHECK_THROWS_AS(word_stats(parse_word("x2"), {1.0}), ValidationError);
}

TEST_CASE("classify pairs") {
    auto a = classify_pairs(pw_of({"x1 x1"}, {0}), 1);
    CHECK(a.plus == std::vector<Pair>{{0, 1}});
    CHECK(a.plus0 == std::vector<Pair>{{0, 1}});
    auto b = classify_pairs(pw_of({"x1", "x1"}, {0, 1}), 1);
    CHECK(b.plus0 == std::vector<Pair>{{0, 1}});
    CHECK(b.plus2.empty());
    auto c = classify_pairs(pw_of({"x1", "x1"}, {0, 0}), 1);
    CHECK(c.plus2 == std::vector<Pair>{{0, 1}});
    CHECK(c.plus0.empty());
    auto d = classify_pairs(pw_of({"x1 x1'"}, {0}), 1);
    CHECK(d.minus0 == std::vector<Pair>{{0, 1}});
    CHECK(classify_pairs(pw_of({"x1 x1"}, {0}), 2).plus.empty());
}

TEST_CASE("cut and join examples") {
    CHECK(apply_cut_join(pw_of({"x1 x1"}, {0}), 0, 1, +1) == pw_of({"x1", "x1"}, {0, 0}));
    CHECK(apply_cut_join(pw_of({"x1 x1'"}, {0}), 0, 1, -1) == pw_of({"e", "x1 x1'"}, {0, 0}));
    CHECK(apply_cut_join(pw_of({"x1", "x1"}, {0, 1}), 0, 1, +1) == pw_of({"x1 x1"}, {0}));
    CHECK_THROWS_AS(apply_cut_join(pw_of({"x1 x1"}, {0}), 0, 1, -1), ValidationError);
    CHECK_THROWS_AS(apply_cut_join(pw_of({"x1 x2"}, {0}), 0, 1, +1), ValidationError);
    // lambda a mu a nu with lambda = x2, mu = x3, nu = x4.
    auto r = apply_cut_join(pw_of({"x2 x1 x3 x1 x4"}, {0}), 1, 3, +1);
    CHECK(r == pw_of({"x2 x1 x4", "x1 x3"}, {0, 0}));
    auto r2 = apply_cut_join(pw_of({"x2 x1 x3 x1' x4"}, {0}), 1, 3, -1);
    CHECK(r2 == pw_of({"x2 x4", "x1 x3 x1'"}, {0, 0}));
    auto j = apply_cut_join(pw_of({"x2 x1 x3", "x4 x1 x5"}, {0, 1}), 1, 4, +1);
    CHECK(j == pw_of({"x2 x1 x5 x4 x1 x3"}, {0}));
    auto j2 = apply_cut_join(pw_of({"x2 x1 x3", "x4 x1' x5"}, {0, 1}), 1, 4, -1);
    CHECK(j2 == pw_of({"x2 x5 x4 x1' x1 x3"}, {0}));
}

TEST_CASE("canonicalize") {
    CHECK(canonicalize(pw_of({"x2", "x1"}, {0, 1})) == pw_of({"x1", "x2"}, {0, 1}));
    CHECK(canonicalize(pw_of({"x1 x2"}, {0})) == canonicalize(pw_of({"x2 x1"}, {0})));
    CHECK(canonicalize(pw_of({"x1", "x1"}, {0, 0})) == pw_of({"x1", "x1"}, {0, 0}));
    CHECK(canonicalize(pw_of({"x2", "x1", "x2"}, {0, 1, 0})) == pw_of({"x1", "x2", "x2"}, {0, 1, 1}));
}

TEST_CASE("partial word text form") {
    auto p = pw_of({"x1 x2", "e", "x1'"}, {0, 1, 0});
    std::string s = format_partial(p);
    CHECK(s == "{ x1 x2 ; e ; x1' | {1,3}{2} }");
    CHECK(parse_partial(s) == p);
    CHECK(parse_partial("{x1;x1|{1}{2}}") == pw_of({"x1", "x1"}, {0, 1}));
    CHECK_THROWS_AS(parse_partial("{ x1 ; x1 | {1} }"), ValidationError);
    CHECK_THROWS_AS(parse_partial("{ x1 | {1}{1} }"), ValidationError);
}

TEST_CASE("property: moves preserve letters and match the classification deltas") {
    std::mt19937_64 rng(11);
    for (int it = 0; it < 400; ++it) {
        PartitionedWord pw = random_pw(rng, 5, 2);
        auto before = letter_multiset(pw);
        for (int f = 1; f <= 2; ++f) {
            auto pl = classify_pairs(pw, f);
            CHECK(pl.plus0.size() + pl.plus2.size() == pl.plus.size());
            CHECK(pl.minus0.size() + pl.minus2.size() == pl.minus.size());
            auto check = [&](const std::vector<Pair>& pairs, int variant, bool order2) {
                for (auto [i, j] : pairs) {
                    auto out = apply_cut_join(pw, i, j, variant);
                    CHECK(letter_multiset(out) == before);
                    int ds = int(out.size()) - int(pw.size());
                    int db = out.num_blocks() - pw.num_blocks();
                    bool same_word = pw.locate(i).first == pw.locate(j).first;
                    if (same_word) {
                        CHECK(ds == 1);
                        CHECK(db == 0);
                    } else {
                        CHECK(ds == -1);
                        CHECK((db == 0 || db == -1));
                    }
                    CHECK(order2 == (ds == -1 && db == 0));
                }
            };
            check(pl.plus0, +1, false);
            check(pl.plus2, +1, true);
            check(pl.minus0, -1, false);
            check(pl.minus2, -1, true);
        }
    }
}

TEST_CASE("property: canonicalize is an orbit invariant") {
    std::mt19937_64 rng(12);
    for (int it = 0; it < 400; ++it) {
        PartitionedWord pw = random_pw(rng, 5, 3);
        auto c = canonicalize(pw);
        CHECK(canonicalize(c) == c);
        CHECK(letter_multiset(c) == letter_multiset(pw));
        PartitionedWord perm = pw;
        std::vector<int> idx(pw.size());
        for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = int(k);
        std::shuffle(idx.begin(), idx.end(), rng);
        for (std::size_t k = 0; k < idx.size(); ++k) {
            Word w = pw.words[idx[k]];
            if (!w.empty()) std::rotate(w.begin(), w.begin() + rng() % w.size(), w.end());
            perm.words[k] = w;
            perm.block[k] = pw.block[idx[k]];
        }
        normalize_blocks(perm);
        CHECK(canonicalize(perm) == c);
    }
}

TEST_CASE("property: a join followed by the matching split restores the orbit") {
    std::mt19937_64 rng(13);
    int tested = 0;
    for (int it = 0; it < 600; ++it) {
        PartitionedWord pw = random_pw(rng, 3, 2);
        if (pw.total_length() > 6) continue;
        auto pl = classify_pairs(pw, 1);
        for (auto [i, j] : pl.plus) {
            auto [p, a] = pw.locate(i);
            auto [q, b] = pw.locate(j);
            if (p == q) continue;
            auto joined = apply_cut_join(pw, i, j, +1);
            // Joined word is lambda a chi nu a mu, sitting at index p.
            int off = 0;
            for (int k = 0; k < p; ++k) off += int(pw.words[k].size());
            int i2 = off + a;
            int j2 = i2 + 1 + int(pw.words[q].size()) - 1;
            auto split = apply_cut_join(joined, i2, j2, +1);
            PartitionedWord expect = pw;
            if (pw.block[p] != pw.block[q]) {
                for (auto& l : expect.block)
                    if (l == pw.block[q]) l = pw.block[p];
                normalize_blocks(expect);
            }
            CHECK(canonicalize(split) == canonicalize(expect));
            ++tested;
        }
    }
    CHECK(tested > 50);
}

TEST_CASE("reduce is display only") {
    CHECK(reduce(parse_word("x1 x2 x2' x1'")).empty());
    CHECK(reduce(parse_word("x1 x2 x1'")) == Word{1, 2, -1});
    CHECK(inverse(parse_word("x1 x2'")) == parse_word("x2 x1'"));
}
