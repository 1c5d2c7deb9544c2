#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "citymorph/raster.hpp"

namespace citymorph {

enum class WaterStyle { Coast, River, None };

// One city: aligned input stack + binary built-up label + provenance.
struct CitySample {
    std::string id;
    int year = 0;
    Stack inputs; // channels from {ntl, dem, water}
    Grid label;   // binary built-up map
    double meters_per_pixel = 0.0;
    std::optional<double> population; // for the physical-geography-only mode

    double signal_fraction() const;
};

struct ManifestEntry {
    std::string id;
    int year = 0;
    std::string path; // sample stem, relative to the manifest directory
    std::string split; // "train" or "test"
    double signal_fraction = 0.0;
};

struct Manifest {
    uint64_t seed = 0;
    double filter_threshold = 0.01;
    std::vector<ManifestEntry> entries;
    std::string base_dir; // directory of the manifest file, set on load

    std::vector<const ManifestEntry*> split_entries(const std::string& split) const;
    std::string to_json() const;
    static Manifest from_json(const std::string& text);
};

void save_manifest(const Manifest& m, const std::string& path);
Manifest load_manifest(const std::string& path);

struct PipelineConfig {
    double filter_threshold = 0.01;
    int test_count = 20;
    uint64_t seed = 0;
};

// Square window of side round(window_km*1000/meters_per_pixel) centered at
// (center_x, center_y); regions outside the source are zero-padded.
Grid clip_window(const Grid& source, int64_t center_x, int64_t center_y, double window_km,
                 double meters_per_pixel);

// Coordinates of the maximum-value pixel; ties break to the smallest
// row-major index.
std::pair<uint32_t, uint32_t> select_center(const Grid& population);

// Retains samples whose bright-pixel fraction is >= threshold, in order.
std::vector<CitySample> filter_low_signal(std::vector<CitySample> samples,
                                          double threshold = 0.01);

// Concatenates per-year sample lists, suffixing ids with "_<year>". The same
// city in two years stays two samples.
std::vector<CitySample> merge_years(const std::map<int, std::vector<CitySample>>& per_year);

// Deterministic in seed; exactly test_count test entries, disjoint from train.
Manifest split_manifest(const std::vector<CitySample>& samples, int test_count, uint64_t seed);

// Desk-scale synthetic city. Deterministic in seed; the label never overlaps
// water; settlement areas follow a discrete power law with exponent -2.
CitySample synth_city(uint64_t seed, uint32_t size, WaterStyle water_style);

// Writes the per-channel URG1 files for one sample into dir using the
// <id>_<year>_<channel>.urg convention. Returns the sample stem.
std::string save_sample(const CitySample& sample, const std::string& dir);

// Loads a sample back from its stem. Raw channels are normalized to [0,1].
CitySample load_sample(const std::string& dir, const ManifestEntry& entry);

// Scans input_dir for <id>_<year>_<channel>.urg groups, applies the signal
// filter and the train/test split, and returns the manifest. Cities with
// missing channels are skipped with a warning on stderr.
Manifest build_manifest(const std::string& input_dir, const PipelineConfig& config);

} // namespace citymorph
