#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cldflood/cldnet.hpp"
#include "cldflood/forcing.hpp"
#include "cldflood/metrics.hpp"
#include "cldflood/nn.hpp"
#include "cldflood/swe.hpp"
#include "cldflood/terrain.hpp"
#include "cldflood/training.hpp"

namespace cldflood::io {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// FLD1 snapshot stacks

/// Contents of an FLD1 file. `values` is time-major, then variable-major,
/// then row-major with j = 0 the southern row; masked cells hold NaN.
struct FieldFile {
    std::uint32_t nx = 0;
    std::uint32_t ny = 0;
    std::uint32_t n_snapshots = 0;
    std::uint32_t n_vars = 0;
    std::vector<std::uint8_t> mask;  // empty when the file has no mask
    std::vector<double> values;

    [[nodiscard]] std::size_t cells() const noexcept { return static_cast<std::size_t>(nx) * ny; }
    void validate() const;
};

std::vector<std::uint8_t> encode_fld1(const FieldFile& file);
FieldFile decode_fld1(const std::vector<std::uint8_t>& bytes);
void write_fld1(const fs::path& path, const FieldFile& file);
FieldFile read_fld1(const fs::path& path);

/// (h, hu, hv) per snapshot; cells outside the terrain mask become NaN and
/// the mask is stored when any cell is inactive.
FieldFile trajectory_to_fld1(const swe::Trajectory& traj, const std::vector<std::uint8_t>& mask);
/// Inverse of trajectory_to_fld1; NaN cells read back as dry.
swe::Trajectory trajectory_from_fld1(const FieldFile& file, const terrain::RasterGrid& grid, double dt_out);

// ---------------------------------------------------------------------------
// ESRI ASCII grids

struct AsciiGrid {
    terrain::RasterGrid grid;
    std::vector<double> values;       // row-major, j = 0 south
    std::vector<std::uint8_t> mask;   // 0 where the file holds NODATA
};

/// Writes xllcorner/yllcorner, north row first.
std::string format_ascii_grid(const terrain::RasterGrid& grid, const std::vector<double>& values,
                              const std::vector<std::uint8_t>& mask, double nodata = -9999.0);
AsciiGrid parse_ascii_grid(std::string_view text);
void write_ascii_grid(const fs::path& path, const terrain::RasterGrid& grid, const std::vector<double>& values,
                      const std::vector<std::uint8_t>& mask, double nodata = -9999.0);
AsciiGrid read_ascii_grid(const fs::path& path);

/// Bed elevation and Manning rasters on the same grid.
terrain::TerrainField read_terrain(const fs::path& bed_path, const fs::path& manning_path);
void write_terrain(const fs::path& bed_path, const fs::path& manning_path, const terrain::TerrainField& terrain);

// ---------------------------------------------------------------------------
// Key-value configuration text

struct ConfigEntry {
    std::string key;
    std::string value;
    int line = 0;
};

/// `section.key = value` lines; `#` starts a comment. Throws ConfigError on
/// malformed lines and duplicate keys.
std::vector<ConfigEntry> parse_key_values(std::string_view text);

// ---------------------------------------------------------------------------
// CSV

/// Comma-separated rows after a header line; blank lines and `#` lines are
/// skipped. Throws IoError when a row's width differs from the header.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    [[nodiscard]] int column(std::string_view name) const;  // -1 when absent
};

CsvTable parse_csv(std::string_view text);
CsvTable read_csv(const fs::path& path);
double parse_double(std::string_view text, std::string_view what);
long long parse_int(std::string_view text, std::string_view what);
/// Shortest text that reads back to the same double.
std::string format_double(double v);

/// Columns t_start (s), rate (m/s); intervals must be contiguous and equal.
std::string format_hyetograph(const forcing::Hyetograph& h);
forcing::Hyetograph parse_hyetograph(const CsvTable& table);

struct QueryPoint {
    std::string name;
    double x = 0.0;
    double y = 0.0;
};
/// Columns x, y and an optional name.
std::vector<QueryPoint> parse_points(const CsvTable& table);

/// Columns time, value, datum (datum constant over the file).
metrics::GaugeSeries parse_gauge(const CsvTable& table, std::string name, double x, double y);

/// Columns name, i, j; one row per cell, grouped by name in file order.
struct CrossSection {
    std::string name;
    std::vector<std::size_t> cells;
};
std::vector<CrossSection> parse_cross_sections(const CsvTable& table, const terrain::RasterGrid& grid);

std::string format_loss_curve(const std::vector<training::EpochRecord>& curve);

/// Long format t, x, y, h, hu, hv.
std::string format_prediction(const FieldStack& pred, const std::vector<double>& x, const std::vector<double>& y,
                              double dt_out);

// ---------------------------------------------------------------------------
// Model checkpoints (CKP1)

struct Checkpoint {
    cldnet::Model model;
    std::optional<nn::AdamState> optimizer;
    std::uint64_t train_seed = 0;
    int epochs_done = 0;
    int best_epoch = 0;
    double dt_out = 0.0;
    terrain::RasterGrid grid;
    training::WetUnionMask wet_union;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckp);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);
void write_checkpoint(const fs::path& path, const Checkpoint& ckp);
Checkpoint read_checkpoint(const fs::path& path);

// ---------------------------------------------------------------------------
// Whole files

std::vector<std::uint8_t> read_bytes(const fs::path& path);
std::string read_text(const fs::path& path);
/// Writes through a temporary sibling and renames over the target.
void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes);
void write_text(const fs::path& path, std::string_view text);

}  // namespace cldflood::io
