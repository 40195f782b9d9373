#include "mf/io.hpp"

#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "mf/errors.hpp"

namespace mf {

namespace {

std::vector<std::vector<int>> parse_partition(const json& doc, std::size_t loops) {
    std::vector<std::vector<int>> blocks;
    if (!doc.contains("partition")) return blocks;
    std::vector<int> seen(loops, 0);
    for (const auto& b : doc.at("partition")) {
        std::vector<int> block;
        for (const auto& x : b) {
            int i = x.get<int>();
            if (i < 1 || static_cast<std::size_t>(i) > loops) throw ValidationError("partition index out of range");
            if (seen[i - 1]++) throw ValidationError("loop listed twice in partition");
            block.push_back(i - 1);
        }
        if (block.empty()) throw ValidationError("empty partition block");
        blocks.push_back(block);
    }
    for (int s : seen)
        if (!s) throw ValidationError("partition does not cover every loop");
    return blocks;
}

}  // namespace

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

SkeinInput parse_skein(const json& doc, IngestMode mode) {
    SkeinInput out;
    try {
        if (doc.contains("lattice_loops")) {
            for (const auto& l : doc.at("lattice_loops")) {
                LatticeLoop ll;
                const auto& b = l.at("base");
                if (b.size() != 2) throw ValidationError("base must be [x, y]");
                ll.base = {b[0].get<long long>(), b[1].get<long long>()};
                ll.moves = l.at("moves").get<std::string>();
                out.lattice_loops.push_back(ll);
            }
            if (out.lattice_loops.empty()) throw ValidationError("no loops");
            out.skein = ingest_lattice(out.lattice_loops, mode);
        } else if (doc.contains("map")) {
            const auto& m = doc.at("map");
            CombinatorialMap cm;
            for (const auto& d : m.at("darts")) cm.darts.emplace_back(d.at(0).get<int>(), d.at(1).get<int>());
            cm.rotation = m.at("rotation").get<std::vector<std::vector<int>>>();
            for (const auto& a : m.at("areas")) cm.areas.emplace_back(a.at(0).get<int>(), a.at(1).get<double>());
            cm.unbounded = m.at("unbounded").get<int>();
            if (m.contains("lengths")) cm.lengths = m.at("lengths").get<std::vector<double>>();
            out.skein.g = build_map(cm);
            out.from_map = true;
            for (const auto& l : doc.at("loops")) {
                LoopInGraph lg;
                lg.darts = l.get<std::vector<int>>();
                if (lg.darts.empty()) throw ValidationError("empty loop");
                for (int d : lg.darts)
                    if (d < 0 || d >= out.skein.g.num_darts()) throw ValidationError("dart out of range");
                lg.base = out.skein.g.tail[lg.darts[0]];
                validate_loop(out.skein.g, lg);
                out.skein.loops.push_back(lg);
            }
            if (out.skein.loops.empty()) throw ValidationError("no loops");
        } else {
            throw ValidationError("skein file needs \"lattice_loops\" or \"map\"");
        }
        out.partition = parse_partition(doc, out.skein.loops.size());
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed skein file: ") + e.what());
    }
    return out;
}

SkeinInput read_skein(const std::string& path, IngestMode mode) { return parse_skein(read_json(path), mode); }

Potential parse_potential(const json& doc) {
    if (!doc.is_object()) throw ValidationError("potential must be a JSON object");
    Potential V;
    try {
        for (const auto& [key, val] : doc.items()) {
            Word w = parse_word(key);
            Complex c;
            if (val.is_number()) c = val.get<double>();
            else if (val.is_array() && val.size() == 2) c = {val[0].get<double>(), val[1].get<double>()};
            else throw ValidationError("potential value for " + key + " must be a number or [re, im]");
            V.add(w, c);
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed potential file: ") + e.what());
    }
    return V;
}

Potential read_potential(const std::string& path) { return parse_potential(read_json(path)); }

double parse_N(const std::string& text) {
    if (text == "inf" || text == "infinity") return INFINITY;
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &pos);
    } catch (const std::exception&) {
        throw ValidationError("N must be a positive number or inf, got " + text);
    }
    if (pos != text.size() || !(v > 0) || !std::isfinite(v))
        throw ValidationError("N must be a positive number or inf, got " + text);
    return v;
}

std::string format_N(double N) {
    if (std::isinf(N)) return "inf";
    std::ostringstream s;
    s << N;
    return s.str();
}

TimeVector parse_times(const std::string& text) {
    TimeVector t;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t pos = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &pos);
        } catch (const std::exception&) {
            throw ValidationError("bad time value '" + item + "'");
        }
        if (pos != item.size() || !(v >= 0) || !std::isfinite(v)) throw ValidationError("times must be finite and >= 0");
        t.push_back(v);
    }
    if (t.empty()) throw ValidationError("no times given");
    return t;
}

json complex_json(std::complex<double> z) { return json::array({z.real(), z.imag()}); }

namespace {

std::string csv_cell(const json& v) {
    std::string text = v.is_string() ? v.get<std::string>() : v.dump();
    if (text.find_first_of(",\"\n") == std::string::npos) return text;
    std::string q = "\"";
    for (char c : text) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
}

void csv_row(const json& row, bool header, std::ostream& os) {
    bool first = true;
    for (const auto& [k, v] : row.items()) {
        os << (first ? "" : ",") << (header ? k : csv_cell(v));
        first = false;
    }
    os << '\n';
}

}  // namespace

void emit(const json& doc, Format f, std::ostream& os) {
    if (f == Format::json) {
        os << doc.dump(2) << '\n';
        return;
    }
    if (doc.contains("metadata")) os << "# " << doc.at("metadata").dump() << '\n';
    json rows = doc.contains("rows") ? doc.at("rows") : json::array();
    if (rows.empty()) {
        // Scalar fields of the document as a single row.
        json row = json::object();
        for (const auto& [k, v] : doc.items())
            if (k != "metadata" && v.is_primitive()) row[k] = v;
        rows.push_back(row);
    }
    csv_row(rows.at(0), true, os);
    for (const auto& r : rows) csv_row(r, false, os);
}

}  // namespace mf
