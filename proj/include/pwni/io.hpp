#pragma once

#include "pwni/circuit_oracle.hpp"
#include "pwni/timestepper.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace pwni {

/// Everything one configuration file describes.
struct RunConfig {
    std::string name;
    ModelSetup setup;
    OutputConfig outputs;
    std::filesystem::path output_dir = "out";
    OracleOptions oracle;
    double oracle_dt = 0.0;  ///< s, 0 means the solver step
    std::vector<std::string> warnings;  ///< unknown keys in lenient mode
};

enum class ParseMode { strict, lenient };

/// Parses JSON text (comments allowed) into a validated RunConfig. Unknown keys
/// throw SpecError in strict mode and are collected as warnings otherwise.
RunConfig parse_config(const std::string& text, ParseMode mode = ParseMode::strict);
RunConfig load_config(const std::filesystem::path& path, ParseMode mode = ParseMode::strict);

/// Fixed-format CSV: header of column names, then one line per row.
void write_csv(std::ostream& out, const std::vector<std::string>& columns,
               const std::vector<std::vector<double>>& rows);
void write_csv(const std::filesystem::path& path, const TimeSeriesRecord& record);

inline constexpr std::uint32_t kSnapshotVersion = 1;
inline constexpr std::uint32_t kSnapshotKindJ = 1;
/// Abort dump: frame 0 holds the solver unknowns, frame 1 the Jc in use.
inline constexpr std::uint32_t kSnapshotKindState = 2;

struct SnapshotFile {
    std::uint64_t mesh_hash = 0;
    std::vector<JSnapshot> frames;
    std::uint32_t kind = kSnapshotKindJ;
};

SnapshotFile state_dump(const SimState& state, std::uint64_t mesh_hash);

/// Stream of frames, each `PWNISNAP`, version, kind, mesh hash, time, count,
/// then `count` little-endian doubles.
void write_snapshots(std::ostream& out, const SnapshotFile& file);
SnapshotFile read_snapshots(std::istream& in);
void write_snapshots(const std::filesystem::path& path, const SnapshotFile& file);
SnapshotFile read_snapshots(const std::filesystem::path& path);

}  // namespace pwni
