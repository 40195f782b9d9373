#pragma once

#include <iosfwd>
#include <json.hpp>
#include <string>
#include <vector>

#include "mf/free_energy.hpp"
#include "mf/planar.hpp"

namespace mf {

using json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "1.0.0";

// Skein file:
//   {"lattice_loops": [{"base": [x, y], "moves": "ENWS"}, ...], "partition": [[1, 2], [3]]}
//   {"map": {"darts": [[tail, head], ...], "rotation": [[d, ...], ...],
//            "areas": [[dart, area], ...], "unbounded": dart, "lengths": [...]},
//    "loops": [[d, ...], ...], "partition": [...]}
// Partition blocks are 1-based loop indices; omitted means one block per loop.
struct SkeinInput {
    LatticeSkein skein;
    std::vector<LatticeLoop> lattice_loops;  // empty for map input
    std::vector<std::vector<int>> partition; // 0-based
    bool from_map = false;
};
SkeinInput parse_skein(const json& doc, IngestMode mode = IngestMode::strict);
SkeinInput read_skein(const std::string& path, IngestMode mode = IngestMode::strict);

// Potential file: {"x1": [re, im], "x1'": 0.5, ...}
Potential parse_potential(const json& doc);
Potential read_potential(const std::string& path);

json read_json(const std::string& path);

// N as given on the command line: a positive integer/real or "inf".
double parse_N(const std::string& text);
std::string format_N(double N);
TimeVector parse_times(const std::string& text);  // comma-separated

json complex_json(std::complex<double> z);

// Canonical JSON (two-space indent) or CSV projection of doc["rows"], with the
// metadata block as a leading comment line.
enum class Format { json, csv };
void emit(const json& doc, Format f, std::ostream& os);

}  // namespace mf
