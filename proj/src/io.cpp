#include "cldflood/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "cldflood/error.hpp"

namespace cldflood::io {

namespace {

class ByteWriter {
public:
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void magic(const char* m) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(m[i]));
    }
    void str(std::string_view s) {
        u32(static_cast<std::uint32_t>(s.size()));
        out_.insert(out_.end(), s.begin(), s.end());
    }
    void doubles(const std::vector<double>& v) {
        u64(v.size());
        for (double x : v) f64(x);
    }
    std::vector<std::uint8_t>& bytes() { return out_; }

private:
    std::vector<std::uint8_t> out_;
};

class ByteReader {
public:
    ByteReader(const std::vector<std::uint8_t>& bytes, std::string what) : b_(bytes), what_(std::move(what)) {}

    std::uint8_t u8() {
        need(1);
        return b_[pos_++];
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_++]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b_[pos_++]) << (8 * i);
        return v;
    }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }
    void magic(const char* m) {
        need(4);
        if (std::memcmp(b_.data() + pos_, m, 4) != 0) throw IoError(what_ + ": bad magic, expected " + std::string(m, 4));
        pos_ += 4;
    }
    std::string str() {
        const std::uint32_t n = u32();
        need(n);
        std::string s(b_.begin() + static_cast<std::ptrdiff_t>(pos_), b_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
        pos_ += n;
        return s;
    }
    std::vector<double> doubles() {
        const std::uint64_t n = u64();
        need_items(n, 8);
        std::vector<double> v(n);
        for (double& x : v) x = f64();
        return v;
    }
    void need_items(std::uint64_t n, std::size_t size) {
        if (n > (b_.size() - pos_) / size) throw IoError(what_ + ": truncated");
    }
    void need(std::size_t n) {
        if (b_.size() - pos_ < n) throw IoError(what_ + ": truncated");
    }
    void finish() {
        if (pos_ != b_.size()) throw IoError(what_ + ": trailing bytes");
    }

private:
    const std::vector<std::uint8_t>& b_;
    std::size_t pos_ = 0;
    std::string what_;
};

std::string_view trim(std::string_view s) {
    const auto ws = " \t\r\n";
    const auto a = s.find_first_not_of(ws);
    if (a == std::string_view::npos) return {};
    const auto b = s.find_last_not_of(ws);
    return s.substr(a, b - a + 1);
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto end = text.find('\n', start);
        if (end == std::string_view::npos) {
            if (start < text.size()) lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, end - start));
        start = end + 1;
    }
    return lines;
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// FLD1

void FieldFile::validate() const {
    if (nx == 0 || ny == 0) throw IoError("FLD1: empty grid");
    if (n_vars == 0) throw IoError("FLD1: no variables");
    if (!mask.empty() && mask.size() != cells()) throw IoError("FLD1: mask size mismatch");
    if (values.size() != cells() * n_snapshots * n_vars) throw IoError("FLD1: value count mismatch");
}

std::vector<std::uint8_t> encode_fld1(const FieldFile& file) {
    file.validate();
    ByteWriter w;
    w.magic("FLD1");
    w.u32(1);
    w.u32(file.nx);
    w.u32(file.ny);
    w.u32(file.n_snapshots);
    w.u32(file.n_vars);
    w.u8(0);
    w.u8(file.mask.empty() ? 0 : 1);
    if (!file.mask.empty()) {
        std::vector<std::uint8_t> bits((file.cells() + 7) / 8, 0);
        for (std::size_t c = 0; c < file.cells(); ++c)
            if (file.mask[c]) bits[c / 8] |= static_cast<std::uint8_t>(1u << (c % 8));
        for (auto b : bits) w.u8(b);
    }
    w.bytes().reserve(w.bytes().size() + file.values.size() * 8);
    for (std::size_t i = 0; i < file.values.size(); ++i) {
        const bool masked = !file.mask.empty() && !file.mask[i % file.cells()];
        w.f64(masked ? std::numeric_limits<double>::quiet_NaN() : file.values[i]);
    }
    return std::move(w.bytes());
}

FieldFile decode_fld1(const std::vector<std::uint8_t>& bytes) {
    ByteReader r(bytes, "FLD1");
    r.magic("FLD1");
    const auto version = r.u32();
    if (version != 1) throw IoError("FLD1: unsupported version " + std::to_string(version));
    FieldFile f;
    f.nx = r.u32();
    f.ny = r.u32();
    f.n_snapshots = r.u32();
    f.n_vars = r.u32();
    const auto dtype = r.u8();
    if (dtype != 0) throw IoError("FLD1: unsupported dtype code " + std::to_string(dtype));
    const auto has_mask = r.u8();
    if (has_mask > 1) throw IoError("FLD1: bad mask flag");
    if (f.nx == 0 || f.ny == 0 || f.n_vars == 0) throw IoError("FLD1: empty grid");
    if (has_mask) {
        f.mask.resize(f.cells());
        r.need((f.cells() + 7) / 8);
        std::vector<std::uint8_t> bits((f.cells() + 7) / 8);
        for (auto& b : bits) b = r.u8();
        for (std::size_t c = 0; c < f.cells(); ++c) f.mask[c] = (bits[c / 8] >> (c % 8)) & 1u;
    }
    const std::uint64_t count = static_cast<std::uint64_t>(f.cells()) * f.n_snapshots * f.n_vars;
    r.need_items(count, 8);
    f.values.resize(count);
    for (double& v : f.values) v = r.f64();
    r.finish();
    return f;
}

void write_fld1(const fs::path& path, const FieldFile& file) { write_bytes(path, encode_fld1(file)); }

FieldFile read_fld1(const fs::path& path) {
    try {
        return decode_fld1(read_bytes(path));
    } catch (const IoError& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

FieldFile trajectory_to_fld1(const swe::Trajectory& traj, const std::vector<std::uint8_t>& mask) {
    FieldFile f;
    f.nx = static_cast<std::uint32_t>(traj.grid.nx);
    f.ny = static_cast<std::uint32_t>(traj.grid.ny);
    f.n_snapshots = static_cast<std::uint32_t>(traj.size());
    f.n_vars = 3;
    const std::size_t n = f.cells();
    if (mask.size() != n) throw ContractError("trajectory_to_fld1: mask size mismatch");
    if (std::any_of(mask.begin(), mask.end(), [](std::uint8_t m) { return m == 0; })) f.mask = mask;
    f.values.resize(n * 3 * traj.size());
    for (std::size_t k = 0; k < traj.size(); ++k) {
        const auto& s = traj.snapshots[k];
        double* dst = f.values.data() + k * 3 * n;
        std::copy(s.h.begin(), s.h.end(), dst);
        std::copy(s.hu.begin(), s.hu.end(), dst + n);
        std::copy(s.hv.begin(), s.hv.end(), dst + 2 * n);
    }
    return f;
}

swe::Trajectory trajectory_from_fld1(const FieldFile& file, const terrain::RasterGrid& grid, double dt_out) {
    file.validate();
    if (file.n_vars != 3) throw IoError("FLD1 trajectory must have 3 variables (h, hu, hv)");
    if (static_cast<int>(file.nx) != grid.nx || static_cast<int>(file.ny) != grid.ny)
        throw IoError("FLD1 trajectory does not match the terrain grid");
    swe::Trajectory traj;
    traj.grid = grid;
    traj.dt_out = dt_out;
    const std::size_t n = file.cells();
    for (std::size_t k = 0; k < file.n_snapshots; ++k) {
        swe::FlowState s = swe::FlowState::dry(grid);
        s.time = static_cast<double>(k) * dt_out;
        const double* src = file.values.data() + k * 3 * n;
        for (std::size_t c = 0; c < n; ++c) {
            const auto val = [&](std::size_t v) { return std::isnan(src[v * n + c]) ? 0.0 : src[v * n + c]; };
            s.h[c] = val(0);
            s.hu[c] = val(1);
            s.hv[c] = val(2);
        }
        traj.snapshots.push_back(std::move(s));
    }
    return traj;
}

// ---------------------------------------------------------------------------
// ESRI ASCII

std::string format_ascii_grid(const terrain::RasterGrid& grid, const std::vector<double>& values,
                              const std::vector<std::uint8_t>& mask, double nodata) {
    if (values.size() != grid.cell_count() || (!mask.empty() && mask.size() != grid.cell_count()))
        throw ContractError("format_ascii_grid: size mismatch");
    std::string out;
    out += "ncols " + std::to_string(grid.nx) + "\n";
    out += "nrows " + std::to_string(grid.ny) + "\n";
    out += "xllcorner " + format_double(grid.min_x()) + "\n";
    out += "yllcorner " + format_double(grid.min_y()) + "\n";
    out += "cellsize " + format_double(grid.dx) + "\n";
    out += "NODATA_value " + format_double(nodata) + "\n";
    for (int j = grid.ny - 1; j >= 0; --j) {
        for (int i = 0; i < grid.nx; ++i) {
            const std::size_t c = grid.index(i, j);
            if (i) out += ' ';
            out += format_double(!mask.empty() && !mask[c] ? nodata : values[c]);
        }
        out += '\n';
    }
    return out;
}

AsciiGrid parse_ascii_grid(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::map<std::string, std::string> header;
    std::string key;
    // Header keys are words; the first numeric token starts the data.
    while (in >> std::ws && in.peek() != EOF && std::isalpha(in.peek())) {
        std::string value;
        in >> key >> value;
        header[lower(key)] = value;
    }
    const auto get = [&](const std::string& k) -> std::optional<std::string> {
        auto it = header.find(k);
        if (it == header.end()) return std::nullopt;
        return it->second;
    };
    const auto need = [&](const std::string& k) {
        auto v = get(k);
        if (!v) throw IoError("ASCII grid: missing header '" + k + "'");
        return *v;
    };
    AsciiGrid g;
    g.grid.nx = static_cast<int>(parse_int(need("ncols"), "ncols"));
    g.grid.ny = static_cast<int>(parse_int(need("nrows"), "nrows"));
    g.grid.dx = parse_double(need("cellsize"), "cellsize");
    if (g.grid.nx <= 0 || g.grid.ny <= 0 || !(g.grid.dx > 0.0)) throw IoError("ASCII grid: bad dimensions");
    if (auto xc = get("xllcorner")) {
        g.grid.origin_x = parse_double(*xc, "xllcorner") + 0.5 * g.grid.dx;
    } else {
        g.grid.origin_x = parse_double(need("xllcenter"), "xllcenter");
    }
    if (auto yc = get("yllcorner")) {
        g.grid.origin_y = parse_double(*yc, "yllcorner") + 0.5 * g.grid.dx;
    } else {
        g.grid.origin_y = parse_double(need("yllcenter"), "yllcenter");
    }
    std::optional<double> nodata;
    if (auto nd = get("nodata_value")) nodata = parse_double(*nd, "NODATA_value");

    const std::size_t n = g.grid.cell_count();
    g.values.assign(n, 0.0);
    g.mask.assign(n, 1);
    std::string token;
    for (int j = g.grid.ny - 1; j >= 0; --j) {
        for (int i = 0; i < g.grid.nx; ++i) {
            if (!(in >> token)) throw IoError("ASCII grid: fewer values than ncols*nrows");
            const double v = parse_double(token, "ASCII grid value");
            const std::size_t c = g.grid.index(i, j);
            if (nodata && v == *nodata) {
                g.mask[c] = 0;
            } else {
                g.values[c] = v;
            }
        }
    }
    if (in >> token) throw IoError("ASCII grid: more values than ncols*nrows");
    return g;
}

void write_ascii_grid(const fs::path& path, const terrain::RasterGrid& grid, const std::vector<double>& values,
                      const std::vector<std::uint8_t>& mask, double nodata) {
    write_text(path, format_ascii_grid(grid, values, mask, nodata));
}

AsciiGrid read_ascii_grid(const fs::path& path) {
    try {
        return parse_ascii_grid(read_text(path));
    } catch (const IoError& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

terrain::TerrainField read_terrain(const fs::path& bed_path, const fs::path& manning_path) {
    AsciiGrid bed = read_ascii_grid(bed_path);
    AsciiGrid man = read_ascii_grid(manning_path);
    if (!(bed.grid == man.grid)) throw IoError("bed and Manning rasters have different grids");
    terrain::TerrainField t;
    t.grid = bed.grid;
    t.bed = std::move(bed.values);
    t.manning = std::move(man.values);
    t.mask = bed.mask;
    for (std::size_t c = 0; c < t.mask.size(); ++c) t.mask[c] = bed.mask[c] && man.mask[c];
    for (std::size_t c = 0; c < t.mask.size(); ++c)
        if (!t.mask[c]) t.manning[c] = 0.0;
    t.validate();
    return t;
}

void write_terrain(const fs::path& bed_path, const fs::path& manning_path, const terrain::TerrainField& terrain) {
    write_ascii_grid(bed_path, terrain.grid, terrain.bed, terrain.mask);
    write_ascii_grid(manning_path, terrain.grid, terrain.manning, terrain.mask);
}

// ---------------------------------------------------------------------------
// Config text

std::vector<ConfigEntry> parse_key_values(std::string_view text) {
    std::vector<ConfigEntry> out;
    std::map<std::string, int> seen;
    int line_no = 0;
    for (std::string_view raw : split_lines(text)) {
        ++line_no;
        std::string_view line = raw;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected 'section.key = value'");
        std::string key(trim(line.substr(0, eq)));
        std::string value(trim(line.substr(eq + 1)));
        if (key.empty() || key.find('.') == std::string::npos || key.front() == '.' || key.back() == '.')
            throw ConfigError("line " + std::to_string(line_no) + ": key '" + key + "' is not of the form section.key");
        if (value.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty value for '" + key + "'");
        if (auto it = seen.find(key); it != seen.end())
            throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "' (first on line " +
                              std::to_string(it->second) + ")");
        seen[key] = line_no;
        out.push_back({std::move(key), std::move(value), line_no});
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV

int CsvTable::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    return -1;
}

CsvTable parse_csv(std::string_view text) {
    CsvTable t;
    int line_no = 0;
    for (std::string_view raw : split_lines(text)) {
        ++line_no;
        const std::string_view line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        std::vector<std::string> cells;
        std::size_t start = 0;
        while (true) {
            const auto comma = line.find(',', start);
            cells.emplace_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (t.header.empty()) {
            t.header = std::move(cells);
        } else {
            if (cells.size() != t.header.size())
                throw IoError("CSV line " + std::to_string(line_no) + ": expected " + std::to_string(t.header.size()) +
                              " fields, got " + std::to_string(cells.size()));
            t.rows.push_back(std::move(cells));
        }
    }
    if (t.header.empty()) throw IoError("CSV: missing header");
    return t;
}

CsvTable read_csv(const fs::path& path) {
    try {
        return parse_csv(read_text(path));
    } catch (const IoError& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

double parse_double(std::string_view text, std::string_view what) {
    text = trim(text);
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
        throw IoError(std::string(what) + ": not a number: '" + std::string(text) + "'");
    return v;
}

long long parse_int(std::string_view text, std::string_view what) {
    text = trim(text);
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
        throw IoError(std::string(what) + ": not an integer: '" + std::string(text) + "'");
    return v;
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

namespace {

int require_column(const CsvTable& t, std::string_view name) {
    const int c = t.column(name);
    if (c < 0) throw IoError("CSV: missing column '" + std::string(name) + "'");
    return c;
}

}  // namespace

std::string format_hyetograph(const forcing::Hyetograph& h) {
    std::string out = "t_start,t_end,rate\n";
    for (std::size_t i = 0; i < h.rates.size(); ++i) {
        out += format_double(static_cast<double>(i) * h.dt_force) + "," +
               format_double(static_cast<double>(i + 1) * h.dt_force) + "," + format_double(h.rates[i]) + "\n";
    }
    return out;
}

forcing::Hyetograph parse_hyetograph(const CsvTable& table) {
    const int c0 = require_column(table, "t_start");
    const int c1 = require_column(table, "t_end");
    const int cr = require_column(table, "rate");
    if (table.rows.empty()) throw IoError("hyetograph: no rows");
    forcing::Hyetograph h;
    h.dt_force = parse_double(table.rows[0][c1], "t_end") - parse_double(table.rows[0][c0], "t_start");
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        const double t0 = parse_double(row[c0], "t_start");
        const double t1 = parse_double(row[c1], "t_end");
        const double expect = static_cast<double>(i) * h.dt_force;
        if (std::abs(t0 - expect) > 1e-9 * std::max(1.0, expect) ||
            std::abs((t1 - t0) - h.dt_force) > 1e-9 * std::max(1.0, h.dt_force))
            throw IoError("hyetograph: intervals must start at 0 and be contiguous with equal length");
        h.rates.push_back(parse_double(row[cr], "rate"));
    }
    h.validate();
    return h;
}

std::vector<QueryPoint> parse_points(const CsvTable& table) {
    const int cx = require_column(table, "x");
    const int cy = require_column(table, "y");
    const int cn = table.column("name");
    std::vector<QueryPoint> out;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        out.push_back({cn >= 0 ? row[cn] : "p" + std::to_string(i), parse_double(row[cx], "x"),
                       parse_double(row[cy], "y")});
    }
    return out;
}

metrics::GaugeSeries parse_gauge(const CsvTable& table, std::string name, double x, double y) {
    const int ct = require_column(table, "time");
    const int cv = require_column(table, "value");
    const int cd = table.column("datum");
    metrics::GaugeSeries g;
    g.name = std::move(name);
    g.x = x;
    g.y = y;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        g.times.push_back(parse_double(row[ct], "time"));
        g.values.push_back(parse_double(row[cv], "value"));
        if (cd >= 0) {
            const double d = parse_double(row[cd], "datum");
            if (i > 0 && d != g.datum) throw IoError("gauge " + g.name + ": datum changes within the file");
            g.datum = d;
        }
    }
    g.validate();
    return g;
}

std::vector<CrossSection> parse_cross_sections(const CsvTable& table, const terrain::RasterGrid& grid) {
    const int cn = require_column(table, "name");
    const int ci = require_column(table, "i");
    const int cj = require_column(table, "j");
    std::vector<CrossSection> out;
    for (const auto& row : table.rows) {
        const long long i = parse_int(row[ci], "i");
        const long long j = parse_int(row[cj], "j");
        if (i < 0 || j < 0 || i >= grid.nx || j >= grid.ny)
            throw DomainError("cross-section " + row[cn] + ": cell (" + row[ci] + ", " + row[cj] + ") outside the grid");
        auto it = std::find_if(out.begin(), out.end(), [&](const CrossSection& c) { return c.name == row[cn]; });
        if (it == out.end()) {
            out.push_back({row[cn], {}});
            it = out.end() - 1;
        }
        it->cells.push_back(grid.index(static_cast<int>(i), static_cast<int>(j)));
    }
    return out;
}

std::string format_loss_curve(const std::vector<training::EpochRecord>& curve) {
    std::string out = "epoch,train_loss,val_loss\n";
    for (const auto& r : curve)
        out += std::to_string(r.epoch) + "," + format_double(r.train_loss) + "," + format_double(r.val_loss) + "\n";
    return out;
}

std::string format_prediction(const FieldStack& pred, const std::vector<double>& x, const std::vector<double>& y,
                              double dt_out) {
    if (x.size() != pred.points || y.size() != pred.points) throw ContractError("format_prediction: size mismatch");
    std::string out = "t,x,y,h,hu,hv\n";
    for (std::size_t k = 0; k < pred.steps; ++k) {
        const std::string t = format_double(static_cast<double>(k) * dt_out);
        for (std::size_t p = 0; p < pred.points; ++p) {
            out += t + "," + format_double(x[p]) + "," + format_double(y[p]) + "," + format_double(pred.at(k, 0, p)) +
                   "," + format_double(pred.at(k, 1, p)) + "," + format_double(pred.at(k, 2, p)) + "\n";
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// CKP1

namespace {

void put_mlp(ByteWriter& w, const nn::Mlp& net) {
    w.u32(static_cast<std::uint32_t>(net.widths().size()));
    for (int width : net.widths()) w.i32(width);
    w.u64(net.param_count());
    for (double p : net.params()) w.f64(p);
}

nn::Mlp get_mlp(ByteReader& r) {
    const std::uint32_t n = r.u32();
    r.need_items(n, 4);
    std::vector<int> widths(n);
    for (int& width : widths) {
        width = r.i32();
        if (width <= 0) throw IoError("CKP1: bad layer width");
    }
    if (widths.size() < 2) throw IoError("CKP1: network needs at least two layers");
    nn::Mlp net(widths);
    const std::uint64_t count = r.u64();
    if (count != net.param_count()) throw IoError("CKP1: parameter count does not match layer widths");
    auto params = net.mutable_params();
    for (double& p : params) p = r.f64();
    return net;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckp) {
    const cldnet::Model& m = ckp.model;
    const cldnet::ModelConfig& c = m.config();
    ByteWriter w;
    w.magic("CKP1");
    w.u32(1);
    w.str(m.kind());
    w.i32(c.latent_dim);
    w.i32(c.fourier_m);
    w.f64(c.fourier_scale);
    w.i32(c.dyn_depth);
    w.i32(c.dyn_width);
    w.i32(c.rec_depth);
    w.i32(c.rec_width);
    w.u8(c.conditioned ? 1 : 0);
    w.f64(c.latent_dt);
    w.i32(c.forcing_dim);
    w.u64(c.seed);
    w.f64(m.box().x0);
    w.f64(m.box().y0);
    w.f64(m.box().x1);
    w.f64(m.box().y1);
    w.u8(m.forcing_stats().per_component() ? 1 : 0);
    w.doubles(m.forcing_stats().mean());
    w.doubles(m.forcing_stats().std());
    w.doubles(m.embedding().frequencies());
    w.f64(m.embedding().scale());
    put_mlp(w, m.dyn());
    put_mlp(w, m.rec());

    w.u8(ckp.optimizer ? 1 : 0);
    if (ckp.optimizer) {
        const nn::AdamState& a = *ckp.optimizer;
        w.f64(a.config.beta1);
        w.f64(a.config.beta2);
        w.f64(a.config.eps);
        w.f64(a.config.base_lr);
        w.f64(a.config.final_lr);
        w.f64(a.config.clip_norm);
        w.u64(a.config.total_steps);
        w.u64(a.step);
        w.doubles(a.m);
        w.doubles(a.v);
    }
    w.u64(ckp.train_seed);
    w.i32(ckp.epochs_done);
    w.i32(ckp.best_epoch);
    w.f64(ckp.dt_out);
    w.i32(ckp.grid.nx);
    w.i32(ckp.grid.ny);
    w.f64(ckp.grid.dx);
    w.f64(ckp.grid.origin_x);
    w.f64(ckp.grid.origin_y);
    w.f64(ckp.wet_union.threshold);
    w.u64(ckp.wet_union.source_hash);
    w.u64(ckp.wet_union.cells.size());
    for (std::size_t cell : ckp.wet_union.cells) w.u64(cell);
    return std::move(w.bytes());
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
    ByteReader r(bytes, "CKP1");
    r.magic("CKP1");
    const auto version = r.u32();
    if (version != 1) throw IoError("CKP1: unsupported version " + std::to_string(version));
    const std::string kind = r.str();
    cldnet::ModelConfig c;
    c.latent_dim = r.i32();
    c.fourier_m = r.i32();
    c.fourier_scale = r.f64();
    c.dyn_depth = r.i32();
    c.dyn_width = r.i32();
    c.rec_depth = r.i32();
    c.rec_width = r.i32();
    c.conditioned = r.u8() != 0;
    c.latent_dt = r.f64();
    c.forcing_dim = r.i32();
    c.seed = r.u64();
    if (kind != (c.conditioned ? "cldnet" : "ldnet")) throw IoError("CKP1: model kind tag '" + kind + "' disagrees with its configuration");
    cldnet::CoordinateBox box;
    box.x0 = r.f64();
    box.y0 = r.f64();
    box.x1 = r.f64();
    box.y1 = r.f64();
    const bool per_component = r.u8() != 0;
    auto mean = r.doubles();
    auto sd = r.doubles();
    auto freq = r.doubles();
    const double scale = r.f64();
    nn::Mlp dyn = get_mlp(r);
    nn::Mlp rec = get_mlp(r);

    Checkpoint ckp;
    try {
        ckp.model = cldnet::Model(c, box, forcing::ForcingStats(std::move(mean), std::move(sd), per_component),
                                  std::move(dyn), std::move(rec), nn::FourierEmbedding(std::move(freq), scale));
    } catch (const std::exception& e) {
        throw IoError(std::string("CKP1: inconsistent model: ") + e.what());
    }
    if (r.u8()) {
        nn::AdamState a;
        a.config.beta1 = r.f64();
        a.config.beta2 = r.f64();
        a.config.eps = r.f64();
        a.config.base_lr = r.f64();
        a.config.final_lr = r.f64();
        a.config.clip_norm = r.f64();
        a.config.total_steps = r.u64();
        a.step = r.u64();
        a.m = r.doubles();
        a.v = r.doubles();
        const std::size_t n = ckp.model.dyn().param_count() + ckp.model.rec().param_count();
        if (a.m.size() != n || a.v.size() != n) throw IoError("CKP1: optimizer moments do not match the model");
        ckp.optimizer = std::move(a);
    }
    ckp.train_seed = r.u64();
    ckp.epochs_done = r.i32();
    ckp.best_epoch = r.i32();
    ckp.dt_out = r.f64();
    ckp.grid.nx = r.i32();
    ckp.grid.ny = r.i32();
    ckp.grid.dx = r.f64();
    ckp.grid.origin_x = r.f64();
    ckp.grid.origin_y = r.f64();
    ckp.wet_union.threshold = r.f64();
    ckp.wet_union.source_hash = r.u64();
    const std::uint64_t n_cells = r.u64();
    r.need_items(n_cells, 8);
    if (ckp.grid.nx <= 0 || ckp.grid.ny <= 0) throw IoError("CKP1: bad grid");
    ckp.wet_union.mask.assign(ckp.grid.cell_count(), 0);
    for (std::uint64_t i = 0; i < n_cells; ++i) {
        const std::uint64_t cell = r.u64();
        if (cell >= ckp.grid.cell_count()) throw IoError("CKP1: wet-union cell outside the grid");
        ckp.wet_union.cells.push_back(cell);
        ckp.wet_union.mask[cell] = 1;
    }
    r.finish();
    return ckp;
}

void write_checkpoint(const fs::path& path, const Checkpoint& ckp) { write_bytes(path, encode_checkpoint(ckp)); }

Checkpoint read_checkpoint(const fs::path& path) {
    try {
        return decode_checkpoint(read_bytes(path));
    } catch (const IoError& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Files

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> out((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failed: " + path.string());
    return out;
}

std::string read_text(const fs::path& path) {
    const auto bytes = read_bytes(path);
    return std::string(bytes.begin(), bytes.end());
}

void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

void write_text(const fs::path& path, std::string_view text) {
    write_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

}  // namespace cldflood::io
