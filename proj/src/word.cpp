#include "mf/word.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>

#include "mf/errors.hpp"

namespace mf {

namespace {

int letter_key(Letter a) { return 2 * generator(a) + (a < 0 ? 1 : 0); }

[[noreturn]] void parse_fail(std::string_view text, std::size_t pos, const std::string& why) {
    std::ostringstream os;
    os << "malformed word at position " << pos << ": " << why << " in \"" << text << "\"";
    throw ValidationError(os.str());
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

}  // namespace

Word parse_word(std::string_view text) {
    Word w;
    std::size_t i = 0;
    bool saw_e = false;
    bool saw_letter = false;
    while (i < text.size()) {
        if (is_space(text[i])) { ++i; continue; }
        if (text[i] == 'e') {
            if (saw_e || saw_letter) parse_fail(text, i, "'e' must be the only token");
            saw_e = true;
            ++i;
            continue;
        }
        if (text[i] != 'x') parse_fail(text, i, "expected 'x'");
        if (saw_e) parse_fail(text, i, "'e' must be the only token");
        std::size_t start = i++;
        long long f = 0;
        std::size_t digits = 0;
        while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
            f = f * 10 + (text[i] - '0');
            if (f > 1000000) parse_fail(text, start, "generator index too large");
            ++i;
            ++digits;
        }
        if (digits == 0) parse_fail(text, start, "missing generator index");
        if (f < 1) parse_fail(text, start, "generator index must be >= 1");
        int s = 1;
        if (i < text.size() && text[i] == '\'') {
            s = -1;
            ++i;
        } else if (text.substr(i, 3) == "′") {
            s = -1;
            i += 3;
        }
        w.push_back(s * static_cast<int>(f));
        saw_letter = true;
    }
    if (!saw_e && !saw_letter) parse_fail(text, 0, "empty input (use 'e' for the empty word)");
    return w;
}

std::string format_word(const Word& w) {
    if (w.empty()) return "e";
    std::string out;
    for (std::size_t k = 0; k < w.size(); ++k) {
        if (k) out += ' ';
        out += 'x';
        out += std::to_string(generator(w[k]));
        if (w[k] < 0) out += '\'';
    }
    return out;
}

Word inverse(const Word& w) {
    Word r(w.rbegin(), w.rend());
    for (auto& a : r) a = -a;
    return r;
}

int max_generator(const Word& w) {
    int q = 0;
    for (Letter a : w) q = std::max(q, generator(a));
    return q;
}

Word reduce(const Word& w) {
    Word r;
    for (Letter a : w) {
        if (!r.empty() && r.back() == -a) r.pop_back();
        else r.push_back(a);
    }
    return r;
}

std::vector<int> signed_counts(const Word& w, int q) {
    std::vector<int> n(q, 0);
    for (Letter a : w) {
        if (generator(a) > q) throw ValidationError("generator index exceeds q");
        n[generator(a) - 1] += sign(a);
    }
    return n;
}

std::vector<int> unsigned_counts(const Word& w, int q) {
    std::vector<int> n(q, 0);
    for (Letter a : w) {
        if (generator(a) > q) throw ValidationError("generator index exceeds q");
        n[generator(a) - 1] += 1;
    }
    return n;
}

double inner(const std::vector<int>& a, const std::vector<int>& b, const TimeVector& t) {
    double s = 0.0;
    std::size_t q = std::min({a.size(), b.size(), t.size()});
    for (std::size_t f = 0; f < q; ++f) s += double(a[f]) * double(b[f]) * t[f];
    return s;
}

WordStats word_stats(const Word& w, const TimeVector& t) {
    int q = static_cast<int>(t.size());
    if (max_generator(w) > q) throw ValidationError("generator index exceeds the time vector dimension");
    WordStats st;
    st.n_plus.assign(q, 0);
    st.n_minus.assign(q, 0);
    for (Letter a : w) (a > 0 ? st.n_plus : st.n_minus)[generator(a) - 1]++;
    st.n_bar.resize(q);
    st.n.resize(q);
    for (int f = 0; f < q; ++f) {
        st.n_bar[f] = st.n_plus[f] + st.n_minus[f];
        st.n[f] = st.n_plus[f] - st.n_minus[f];
    }
    st.amperean = inner(st.n_bar, st.n_bar, t);
    st.length = w.size();
    return st;
}

int PartitionedWord::num_blocks() const {
    int k = 0;
    for (int b : block) k = std::max(k, b + 1);
    return k;
}

std::size_t PartitionedWord::total_length() const {
    std::size_t n = 0;
    for (const auto& w : words) n += w.size();
    return n;
}

std::pair<int, int> PartitionedWord::locate(int pos) const {
    int p = pos;
    for (std::size_t k = 0; k < words.size(); ++k) {
        if (p < static_cast<int>(words[k].size())) return {static_cast<int>(k), p};
        p -= static_cast<int>(words[k].size());
    }
    throw ValidationError("position out of range");
}

Letter PartitionedWord::letter_at(int pos) const {
    auto [k, a] = locate(pos);
    return words[k][a];
}

void normalize_blocks(PartitionedWord& pw) {
    std::map<int, int> relabel;
    for (auto& b : pw.block) {
        auto it = relabel.find(b);
        if (it == relabel.end()) it = relabel.emplace(b, static_cast<int>(relabel.size())).first;
        b = it->second;
    }
}

PartitionedWord singletons(std::vector<Word> words) {
    PartitionedWord pw;
    pw.block.resize(words.size());
    for (std::size_t k = 0; k < words.size(); ++k) pw.block[k] = static_cast<int>(k);
    pw.words = std::move(words);
    return pw;
}

PartitionedWord one_block(std::vector<Word> words) {
    PartitionedWord pw;
    pw.block.assign(words.size(), 0);
    pw.words = std::move(words);
    return pw;
}

PairLists classify_pairs(const PartitionedWord& pw, int f) {
    PairLists out;
    std::vector<std::pair<int, int>> where;  // (flat pos, word index)
    std::vector<Letter> letters;
    int pos = 0;
    for (std::size_t k = 0; k < pw.words.size(); ++k) {
        for (Letter a : pw.words[k]) {
            if (generator(a) == f) {
                where.emplace_back(pos, static_cast<int>(k));
                letters.push_back(a);
            }
            ++pos;
        }
    }
    for (std::size_t u = 0; u < where.size(); ++u) {
        for (std::size_t v = u + 1; v < where.size(); ++v) {
            Pair p{where[u].first, where[v].first};
            bool plus = letters[u] == letters[v];
            int wu = where[u].second, wv = where[v].second;
            bool order2 = wu != wv && pw.block[wu] == pw.block[wv];
            (plus ? out.plus : out.minus).push_back(p);
            if (plus) (order2 ? out.plus2 : out.plus0).push_back(p);
            else (order2 ? out.minus2 : out.minus0).push_back(p);
        }
    }
    return out;
}

PartitionedWord apply_cut_join(const PartitionedWord& pw, int i, int j, int variant) {
    if (i > j) std::swap(i, j);
    if (i == j) throw ValidationError("cut/join needs two distinct positions");
    auto [p, a] = pw.locate(i);
    auto [q, b] = pw.locate(j);
    Letter xi = pw.words[p][a], xj = pw.words[q][b];
    if (generator(xi) != generator(xj)) throw ValidationError("cut/join pair uses different generators");
    if ((variant > 0) != (xi == xj)) throw ValidationError("cut/join variant does not match the pair's letters");

    PartitionedWord out;
    if (p == q) {
        const Word& w = pw.words[p];
        Word lam(w.begin(), w.begin() + a);
        Word mu(w.begin() + a + 1, w.begin() + b);
        Word nu(w.begin() + b + 1, w.end());
        Word first, second;
        if (variant > 0) {
            first = lam;
            first.push_back(xi);
            first.insert(first.end(), nu.begin(), nu.end());
            second.push_back(xj);
            second.insert(second.end(), mu.begin(), mu.end());
        } else {
            first = lam;
            first.insert(first.end(), nu.begin(), nu.end());
            second.push_back(xi);
            second.insert(second.end(), mu.begin(), mu.end());
            second.push_back(xj);
        }
        out.words = pw.words;
        out.block = pw.block;
        out.words[p] = std::move(first);
        out.words.insert(out.words.begin() + p + 1, std::move(second));
        out.block.insert(out.block.begin() + p + 1, pw.block[p]);
    } else {
        const Word& wp = pw.words[p];
        const Word& wq = pw.words[q];
        Word lam(wp.begin(), wp.begin() + a);
        Word mu(wp.begin() + a + 1, wp.end());
        Word nu(wq.begin(), wq.begin() + b);
        Word chi(wq.begin() + b + 1, wq.end());
        Word joined = lam;
        if (variant > 0) {
            joined.push_back(xi);
            joined.insert(joined.end(), chi.begin(), chi.end());
            joined.insert(joined.end(), nu.begin(), nu.end());
            joined.push_back(xj);
        } else {
            joined.insert(joined.end(), chi.begin(), chi.end());
            joined.insert(joined.end(), nu.begin(), nu.end());
            joined.push_back(xj);
            joined.push_back(xi);
        }
        joined.insert(joined.end(), mu.begin(), mu.end());
        out.words = pw.words;
        out.block = pw.block;
        int bp = pw.block[p], bq = pw.block[q];
        for (auto& lbl : out.block)
            if (lbl == bq) lbl = bp;
        out.words[p] = std::move(joined);
        out.words.erase(out.words.begin() + q);
        out.block.erase(out.block.begin() + q);
    }
    normalize_blocks(out);
    return out;
}

bool word_less(const Word& a, const Word& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(),
                                        [](Letter x, Letter y) { return letter_key(x) < letter_key(y); });
}

Word min_rotation(const Word& w) {
    Word best = w;
    Word r = w;
    for (std::size_t s = 1; s < w.size(); ++s) {
        std::rotate(r.begin(), r.begin() + 1, r.end());
        if (word_less(r, best)) best = r;
    }
    return best;
}

PartitionedWord canonicalize(const PartitionedWord& pw) {
    int nb = pw.num_blocks();
    std::vector<std::vector<Word>> blocks(nb);
    for (std::size_t k = 0; k < pw.words.size(); ++k) blocks[pw.block[k]].push_back(min_rotation(pw.words[k]));
    for (auto& b : blocks) std::sort(b.begin(), b.end(), word_less);
    std::sort(blocks.begin(), blocks.end(), [](const std::vector<Word>& x, const std::vector<Word>& y) {
        return std::lexicographical_compare(x.begin(), x.end(), y.begin(), y.end(), word_less);
    });
    PartitionedWord out;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        for (auto& w : blocks[b]) {
            out.words.push_back(std::move(w));
            out.block.push_back(static_cast<int>(b));
        }
    }
    return out;
}

std::string format_partial(const PartitionedWord& pw) {
    std::string out = "{ ";
    for (std::size_t k = 0; k < pw.words.size(); ++k) {
        if (k) out += " ; ";
        out += format_word(pw.words[k]);
    }
    out += " | ";
    for (int b = 0; b < pw.num_blocks(); ++b) {
        out += '{';
        bool first = true;
        for (std::size_t k = 0; k < pw.block.size(); ++k) {
            if (pw.block[k] != b) continue;
            if (!first) out += ',';
            out += std::to_string(k + 1);
            first = false;
        }
        out += '}';
    }
    out += " }";
    return out;
}

PartitionedWord parse_partial(std::string_view text) {
    auto fail = [&](const std::string& why) -> PartitionedWord {
        throw ValidationError("malformed partial word \"" + std::string(text) + "\": " + why);
    };
    auto open = text.find('{');
    auto bar = text.find('|');
    auto close = text.rfind('}');
    if (open == std::string_view::npos || bar == std::string_view::npos || close == std::string_view::npos ||
        !(open < bar && bar < close))
        return fail("expected '{ w1 ; w2 | {..}{..} }'");
    PartitionedWord pw;
    std::string_view body = text.substr(open + 1, bar - open - 1);
    std::size_t start = 0;
    while (true) {
        auto semi = body.find(';', start);
        pw.words.push_back(parse_word(body.substr(start, semi == std::string_view::npos ? semi : semi - start)));
        if (semi == std::string_view::npos) break;
        start = semi + 1;
    }
    std::size_t m = pw.words.size();
    pw.block.assign(m, -1);
    std::string_view parts = text.substr(bar + 1, close - bar - 1);
    int label = 0;
    std::size_t i = 0;
    while (i < parts.size()) {
        if (is_space(parts[i])) { ++i; continue; }
        if (parts[i] != '{') return fail("expected '{' in partition");
        auto end = parts.find('}', i);
        if (end == std::string_view::npos) return fail("unterminated block");
        std::string inside(parts.substr(i + 1, end - i - 1));
        std::replace(inside.begin(), inside.end(), ',', ' ');
        std::istringstream is(inside);
        long long idx;
        bool any = false;
        while (is >> idx) {
            if (idx < 1 || idx > static_cast<long long>(m)) return fail("block index out of range");
            if (pw.block[idx - 1] != -1) return fail("index in two blocks");
            pw.block[idx - 1] = label;
            any = true;
        }
        if (!is.eof()) return fail("bad block entry");
        if (!any) return fail("empty block");
        ++label;
        i = end + 1;
    }
    for (int b : pw.block)
        if (b < 0) return fail("partition does not cover all words");
    normalize_blocks(pw);
    return pw;
}

}  // namespace mf
