#include "hsi/bands.hpp"

#include <algorithm>
#include <sstream>

#include "hsi/error.hpp"

namespace hsi {

std::string BandInterval::label() const { return std::to_string(start) + "-" + std::to_string(end); }

namespace {

std::size_t parse_band(const std::string& text, const std::string& whole) {
    if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos) {
        throw ConfigError("bad band interval '" + whole + "'");
    }
    return std::stoul(text);
}

}  // namespace

BandInterval parse_interval(const std::string& text) {
    const auto dash = text.find('-');
    BandInterval iv;
    if (dash == std::string::npos) {
        iv.start = iv.end = parse_band(text, text);
    } else {
        iv.start = parse_band(text.substr(0, dash), text);
        iv.end = parse_band(text.substr(dash + 1), text);
    }
    if (iv.start < 1 || iv.start > iv.end) throw ConfigError("bad band interval '" + text + "'");
    return iv;
}

std::vector<BandInterval> parse_interval_list(const std::string& text) {
    std::vector<BandInterval> out;
    std::istringstream is(text);
    std::string part;
    while (std::getline(is, part, ',')) {
        if (!part.empty()) out.push_back(parse_interval(part));
    }
    if (out.empty()) throw ConfigError("empty band interval list");
    return out;
}

std::vector<std::size_t> bands_of(const std::vector<BandInterval>& intervals) {
    std::vector<std::size_t> bands;
    for (const auto& iv : intervals)
        for (std::size_t b = iv.start; b <= iv.end; ++b) bands.push_back(b);
    std::sort(bands.begin(), bands.end());
    bands.erase(std::unique(bands.begin(), bands.end()), bands.end());
    return bands;
}

std::vector<BandInterval> partition_bands(std::size_t band_count, std::size_t n_intervals) {
    if (n_intervals < 1 || n_intervals > band_count) {
        throw ConfigError("cannot split " + std::to_string(band_count) + " bands into " +
                          std::to_string(n_intervals) + " intervals");
    }
    std::size_t width = band_count / n_intervals;
    if (width >= 10) width -= width % 10;
    std::vector<BandInterval> out;
    out.reserve(n_intervals);
    for (std::size_t k = 0; k < n_intervals; ++k) {
        const std::size_t start = k * width + 1;
        const std::size_t end = (k + 1 == n_intervals) ? band_count : (k + 1) * width;
        out.push_back({start, end});
    }
    return out;
}

void check_interval(const BandInterval& interval, std::size_t band_count) {
    if (interval.start < 1 || interval.start > interval.end || interval.end > band_count) {
        throw ConfigError("band interval " + interval.label() + " outside 1-" + std::to_string(band_count));
    }
}

}  // namespace hsi
