#include "hsi/hypercube.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace hsi {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'H', 'S', 'I', 'C', 'U', 'B', 'E', '1'};
constexpr std::uint64_t kMaxHeaderBytes = 64ull << 20;

void check_wavelengths(const std::vector<double>& wavelengths, std::size_t bands) {
    if (wavelengths.size() != bands) {
        throw ShapeError("cube: " + std::to_string(wavelengths.size()) + " wavelengths for " +
                         std::to_string(bands) + " bands");
    }
    for (std::size_t i = 0; i < wavelengths.size(); ++i) {
        if (!std::isfinite(wavelengths[i])) throw FormatError("cube: non-finite wavelength");
        if (i > 0 && !(wavelengths[i] > wavelengths[i - 1])) {
            throw FormatError("cube: wavelengths must be strictly increasing (band " +
                              std::to_string(i + 1) + ")");
        }
    }
}

json header_json(const HyperCube& cube) {
    json meta = {{"cultivar", cube.meta().cultivar},
                 {"acquisition_id", cube.meta().acquisition_id},
                 {"calibrated", cube.meta().calibrated}};
    if (!cube.meta().attributes.empty()) meta["attributes"] = cube.meta().attributes;
    return json{{"format", "hsi-cube"},
                {"version", 1},
                {"rows", cube.rows()},
                {"cols", cube.cols()},
                {"bands", cube.bands()},
                {"dtype", "float32"},
                {"byte_order", "little"},
                {"interleave", "bsq"},
                {"wavelengths", cube.wavelengths()},
                {"meta", meta}};
}

struct ParsedHeader {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t bands = 0;
    std::vector<double> wavelengths;
    CubeMeta meta;
};

ParsedHeader parse_header(const std::string& text) {
    json h;
    try {
        h = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("cube header: invalid JSON: ") + e.what());
    }
    try {
        if (!h.is_object() || h.value("format", std::string{}) != "hsi-cube") {
            throw FormatError("cube header: missing format tag \"hsi-cube\"");
        }
        if (h.contains("dtype") && h["dtype"] != "float32") {
            throw FormatError("cube header: unsupported dtype");
        }
        if (h.contains("interleave") && h["interleave"] != "bsq") {
            throw FormatError("cube header: unsupported interleave");
        }
        ParsedHeader p;
        auto dim = [&](const char* key) {
            const auto& v = h.at(key);
            if (!v.is_number_integer() || v.get<std::int64_t>() < 1) {
                throw FormatError(std::string("cube header: '") + key + "' must be a positive integer");
            }
            return v.get<std::size_t>();
        };
        p.rows = dim("rows");
        p.cols = dim("cols");
        p.bands = dim("bands");
        p.wavelengths = h.at("wavelengths").get<std::vector<double>>();
        if (h.contains("meta")) {
            const auto& m = h["meta"];
            p.meta.cultivar = m.value("cultivar", std::string{});
            p.meta.acquisition_id = m.value("acquisition_id", std::string{});
            p.meta.calibrated = m.value("calibrated", false);
            if (m.contains("attributes")) {
                p.meta.attributes = m["attributes"].get<std::map<std::string, std::string>>();
            }
        }
        return p;
    } catch (const json::exception& e) {
        throw FormatError(std::string("cube header: ") + e.what());
    }
}

std::uint64_t to_le(std::uint64_t v) {
    if constexpr (std::endian::native == std::endian::big) return __builtin_bswap64(v);
    return v;
}

std::uint32_t to_le(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::big) return __builtin_bswap32(v);
    return v;
}

void save_native(const HyperCube& cube, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    const std::string header = header_json(cube).dump();
    const std::uint64_t len = to_le(static_cast<std::uint64_t>(header.size()));
    out.write(kMagic, sizeof(kMagic));
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(cube.data().data()),
                  static_cast<std::streamsize>(cube.data().size() * sizeof(float)));
    } else {
        for (float v : cube.data()) {
            std::uint32_t bits = to_le(std::bit_cast<std::uint32_t>(v));
            out.write(reinterpret_cast<const char*>(&bits), sizeof(bits));
        }
    }
    if (!out) throw Error("write failed for '" + path.string() + "'");
}

HyperCube load_native(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw FormatError("'" + path.string() + "': not a native cube file (bad magic)");
    }
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    len = to_le(len);
    if (!in || len == 0 || len > kMaxHeaderBytes) throw FormatError("cube header: bad header length");
    std::string header(len, '\0');
    in.read(header.data(), static_cast<std::streamsize>(len));
    if (!in) throw FormatError("cube header: truncated");
    ParsedHeader h = parse_header(header);

    const std::size_t count = h.rows * h.cols * h.bands;
    std::vector<float> data(count);
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(count * sizeof(float)));
    const auto got = static_cast<std::size_t>(in.gcount());
    if (got != count * sizeof(float)) {
        throw FormatError("cube payload: header declares " + std::to_string(count) + " values (" +
                          std::to_string(h.bands) + " bands), payload holds " +
                          std::to_string(got / sizeof(float)));
    }
    in.peek();
    if (!in.eof()) throw FormatError("cube payload: trailing bytes after declared payload");
    if constexpr (std::endian::native == std::endian::big) {
        for (float& v : data) v = std::bit_cast<float>(to_le(std::bit_cast<std::uint32_t>(v)));
    }
    return HyperCube(h.rows, h.cols, h.bands, std::move(data), std::move(h.wavelengths), std::move(h.meta));
}

std::string format_float(float v) {
    std::ostringstream os;
    os << std::setprecision(std::numeric_limits<float>::max_digits10) << v;
    return os.str();
}

std::vector<std::string> split_commas(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_number(const std::string& text, const std::string& where) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        throw FormatError(where + ": not a number: '" + text + "'");
    }
    while (used < text.size() && (text[used] == ' ' || text[used] == '\r')) ++used;
    if (used != text.size()) throw FormatError(where + ": not a number: '" + text + "'");
    return v;
}

void save_csv(const HyperCube& cube, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    json header = header_json(cube);
    header.erase("wavelengths");
    header.erase("byte_order");
    header["interleave"] = "bip";
    header["dtype"] = "float32";
    out << "# " << header.dump() << '\n';
    for (std::size_t r = 0; r < cube.rows(); ++r) {
        for (std::size_t c = 0; c < cube.cols(); ++c) {
            for (std::size_t b = 0; b < cube.bands(); ++b) {
                if (b) out << ',';
                out << format_float(cube.at(r, c, b));
            }
            out << '\n';
        }
    }
    std::ofstream side(wavelength_sidecar_path(path), std::ios::trunc);
    if (!side) throw Error("cannot write wavelength sidecar for '" + path.string() + "'");
    side << "band,wavelength_nm\n" << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (std::size_t b = 0; b < cube.bands(); ++b) side << (b + 1) << ',' << cube.wavelengths()[b] << '\n';
    if (!out || !side) throw Error("write failed for '" + path.string() + "'");
}

HyperCube load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line) || line.rfind("# ", 0) != 0) {
        throw FormatError("flat_csv: first line must be '# ' followed by the JSON header");
    }
    json h;
    try {
        h = json::parse(line.substr(2));
    } catch (const json::exception& e) {
        throw FormatError(std::string("flat_csv header: invalid JSON: ") + e.what());
    }
    if (h.is_object() && h.contains("interleave")) {
        if (h["interleave"] != "bip") throw FormatError("flat_csv header: unsupported interleave");
        h.erase("interleave");
    }
    h["wavelengths"] = json::array();
    ParsedHeader p = parse_header(h.dump());

    std::vector<float> data(p.rows * p.cols * p.bands);
    std::size_t pixel = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        if (pixel >= p.rows * p.cols) {
            throw FormatError("flat_csv: more pixel rows than rows*cols = " + std::to_string(p.rows * p.cols));
        }
        const auto fields = split_commas(line);
        if (fields.size() != p.bands) {
            throw FormatError("flat_csv: pixel " + std::to_string(pixel) + " has " +
                              std::to_string(fields.size()) + " band values, header declares " +
                              std::to_string(p.bands));
        }
        const std::size_t r = pixel / p.cols;
        const std::size_t c = pixel % p.cols;
        for (std::size_t b = 0; b < p.bands; ++b) {
            const double v = parse_number(fields[b], "flat_csv pixel " + std::to_string(pixel));
            data[(b * p.rows + r) * p.cols + c] = static_cast<float>(v);
        }
        ++pixel;
    }
    if (pixel != p.rows * p.cols) {
        throw FormatError("flat_csv: header declares " + std::to_string(p.rows * p.cols) +
                          " pixels, file holds " + std::to_string(pixel));
    }

    std::ifstream side(wavelength_sidecar_path(path));
    if (!side) throw FormatError("flat_csv: missing wavelength sidecar '" +
                                 wavelength_sidecar_path(path).string() + "'");
    std::getline(side, line);  // column header
    std::vector<double> wavelengths;
    while (std::getline(side, line)) {
        if (line.empty() || line == "\r") continue;
        const auto fields = split_commas(line);
        if (fields.size() != 2) throw FormatError("wavelength sidecar: expected 'band,wavelength_nm'");
        const double band = parse_number(fields[0], "wavelength sidecar");
        if (band != static_cast<double>(wavelengths.size() + 1)) {
            throw FormatError("wavelength sidecar: bands must be listed 1..N in order");
        }
        wavelengths.push_back(parse_number(fields[1], "wavelength sidecar"));
    }
    return HyperCube(p.rows, p.cols, p.bands, std::move(data), std::move(wavelengths), std::move(p.meta));
}

}  // namespace

HyperCube::HyperCube(std::size_t rows, std::size_t cols, std::size_t bands, std::vector<double> wavelengths,
                     CubeMeta meta)
    : rows_(rows),
      cols_(cols),
      bands_(bands),
      data_(rows * cols * bands, 0.0f),
      wavelengths_(std::move(wavelengths)),
      meta_(std::move(meta)) {
    validate();
}

HyperCube::HyperCube(std::size_t rows, std::size_t cols, std::size_t bands, std::vector<float> data,
                     std::vector<double> wavelengths, CubeMeta meta)
    : rows_(rows),
      cols_(cols),
      bands_(bands),
      data_(std::move(data)),
      wavelengths_(std::move(wavelengths)),
      meta_(std::move(meta)) {
    validate();
}

void HyperCube::validate() const {
    if (rows_ < 1 || cols_ < 1 || bands_ < 1) throw ShapeError("cube: rows, cols and bands must all be >= 1");
    if (data_.size() != rows_ * cols_ * bands_) {
        throw ShapeError("cube: data holds " + std::to_string(data_.size()) + " values, expected " +
                         std::to_string(rows_ * cols_ * bands_));
    }
    check_wavelengths(wavelengths_, bands_);
    for (std::size_t i = 0; i < data_.size(); ++i) {
        if (!std::isfinite(data_[i])) {
            const std::size_t band = i / (rows_ * cols_);
            const std::size_t rem = i % (rows_ * cols_);
            throw FormatError("cube: non-finite value at (row " + std::to_string(rem / cols_) + ", col " +
                              std::to_string(rem % cols_) + ", band " + std::to_string(band) + ")");
        }
    }
}

Image HyperCube::band_image(std::size_t band) const {
    if (band >= bands_) throw std::out_of_range("band offset out of range");
    const auto plane = band_plane(band);
    return Image(rows_, cols_, std::vector<double>(plane.begin(), plane.end()));
}

HyperCube load_cube(const std::filesystem::path& path, CubeFormat format) {
    return format == CubeFormat::native ? load_native(path) : load_csv(path);
}

void save_cube(const HyperCube& cube, const std::filesystem::path& path, CubeFormat format) {
    if (format == CubeFormat::native) {
        save_native(cube, path);
    } else {
        save_csv(cube, path);
    }
}

std::filesystem::path wavelength_sidecar_path(const std::filesystem::path& csv_path) {
    auto p = csv_path;
    p += ".wavelengths.csv";
    return p;
}

HyperCube calibrate(const HyperCube& raw, const CalibrationFrames& frames) {
    const auto check_frame = [&](const HyperCube& f, const char* name) {
        if (f.cols() != raw.cols() || f.bands() != raw.bands() || (f.rows() != raw.rows() && f.rows() != 1)) {
            throw ShapeError(std::string("calibrate: ") + name + " frame shape does not match the raw cube");
        }
    };
    check_frame(frames.dark, "dark");
    check_frame(frames.white, "white");
    if (frames.dark.rows() != frames.white.rows()) {
        throw ShapeError("calibrate: dark and white frames differ in shape");
    }
    const bool line_frames = frames.dark.rows() == 1 && raw.rows() != 1;

    CubeMeta meta = raw.meta();
    meta.calibrated = true;
    HyperCube out(raw.rows(), raw.cols(), raw.bands(), raw.wavelengths(), std::move(meta));
    for (std::size_t b = 0; b < raw.bands(); ++b) {
        for (std::size_t r = 0; r < raw.rows(); ++r) {
            const std::size_t fr = line_frames ? 0 : r;
            for (std::size_t c = 0; c < raw.cols(); ++c) {
                const double dark = frames.dark.at(fr, c, b);
                const double white = frames.white.at(fr, c, b);
                const double span = white - dark;
                if (span == 0.0) throw CalibrationError(r, c, b);
                const double value = (static_cast<double>(raw.at(r, c, b)) - dark) / span;
                out.set(r, c, b, static_cast<float>(value));
            }
        }
    }
    out.validate();
    return out;
}

std::vector<double> default_wavelength_table(std::size_t band_count, double first, double last) {
    if (band_count == 0) throw std::invalid_argument("wavelength table needs at least one band");
    std::vector<double> table(band_count);
    if (band_count == 1) {
        table[0] = first;
        return table;
    }
    const double step = (last - first) / static_cast<double>(band_count - 1);
    for (std::size_t i = 0; i < band_count; ++i) table[i] = first + static_cast<double>(i) * step;
    table.back() = last;
    return table;
}

double wavelength_of(std::size_t band_number, std::span<const double> table) {
    if (band_number < 1 || band_number > table.size()) {
        throw std::out_of_range("band " + std::to_string(band_number) + " outside 1.." +
                                std::to_string(table.size()));
    }
    return table[band_number - 1];
}

std::vector<std::size_t> grayscale_histogram(const Image& image, std::size_t bins, double lo, double hi) {
    if (image.empty()) throw ShapeError("histogram: empty image");
    if (bins < 1) throw std::invalid_argument("histogram: bins must be >= 1");
    if (!(lo < hi)) throw std::invalid_argument("histogram: range must satisfy lo < hi");
    std::vector<std::size_t> counts(bins, 0);
    const double scale = static_cast<double>(bins) / (hi - lo);
    for (double v : image.pixels) {
        if (!(v >= lo && v <= hi)) continue;
        auto bin = static_cast<std::size_t>((v - lo) * scale);
        if (bin >= bins) bin = bins - 1;
        ++counts[bin];
    }
    return counts;
}

}  // namespace hsi
