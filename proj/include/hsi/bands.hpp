#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace hsi {

/// Contiguous, inclusive range of 1-based band numbers.
struct BandInterval {
    std::size_t start = 1;
    std::size_t end = 1;

    std::size_t size() const noexcept { return end - start + 1; }
    bool contains(std::size_t band) const noexcept { return band >= start && band <= end; }
    /// "start-end"
    std::string label() const;

    friend auto operator<=>(const BandInterval&, const BandInterval&) = default;
};

/// Parses "51-200" or a single band "7"; throws ConfigError.
BandInterval parse_interval(const std::string& text);

/// Parses a comma-separated union such as "51-100,151-200".
std::vector<BandInterval> parse_interval_list(const std::string& text);

/// Sorted, de-duplicated band numbers covered by the intervals.
std::vector<std::size_t> bands_of(const std::vector<BandInterval>& intervals);

/// Contiguous cover of 1..band_count: the first n-1 intervals hold w bands
/// each, the last one takes the remainder. w is floor(band_count / n),
/// rounded down to a multiple of ten once it reaches ten, so 256 bands in
/// five groups come out as 50/50/50/50/56.
/// Throws ConfigError unless 1 <= n_intervals <= band_count.
std::vector<BandInterval> partition_bands(std::size_t band_count, std::size_t n_intervals);

/// Throws ConfigError unless 1 <= start <= end <= band_count.
void check_interval(const BandInterval& interval, std::size_t band_count);

}  // namespace hsi
