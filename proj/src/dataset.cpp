#include "citymorph/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include <json.hpp>

#include "citymorph/errors.hpp"
#include "citymorph/rng.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace citymorph {

double CitySample::signal_fraction() const {
    if (label.size() == 0) return 0.0;
    return static_cast<double>(label.bright_count()) / static_cast<double>(label.size());
}

std::vector<const ManifestEntry*> Manifest::split_entries(const std::string& split) const {
    std::vector<const ManifestEntry*> out;
    for (const auto& e : entries)
        if (split == "all" || e.split == split) out.push_back(&e);
    return out;
}

std::string Manifest::to_json() const {
    json j;
    j["seed"] = seed;
    j["filter_threshold"] = filter_threshold;
    j["entries"] = json::array();
    for (const auto& e : entries) {
        j["entries"].push_back({{"id", e.id},
                                {"year", e.year},
                                {"path", e.path},
                                {"split", e.split},
                                {"signal_fraction", e.signal_fraction}});
    }
    return j.dump(2) + "\n";
}

Manifest Manifest::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed manifest JSON: ") + e.what());
    }
    Manifest m;
    try {
        m.seed = j.at("seed").get<uint64_t>();
        m.filter_threshold = j.at("filter_threshold").get<double>();
        for (const auto& je : j.at("entries")) {
            ManifestEntry e;
            e.id = je.at("id").get<std::string>();
            e.year = je.at("year").get<int>();
            e.path = je.at("path").get<std::string>();
            e.split = je.at("split").get<std::string>();
            e.signal_fraction = je.at("signal_fraction").get<double>();
            m.entries.push_back(std::move(e));
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("manifest missing field: ") + e.what());
    }
    return m;
}

void save_manifest(const Manifest& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write manifest: " + path);
    out << m.to_json();
}

Manifest load_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open manifest: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    Manifest m = Manifest::from_json(text);
    m.base_dir = fs::path(path).parent_path().string();
    return m;
}

Grid clip_window(const Grid& source, int64_t center_x, int64_t center_y, double window_km,
                 double meters_per_pixel) {
    if (!(window_km > 0.0)) throw ArgumentError("clip window must be positive");
    if (!(meters_per_pixel > 0.0)) throw ArgumentError("meters_per_pixel must be positive");
    const int64_t side = std::llround(window_km * 1000.0 / meters_per_pixel);
    if (side < 1) throw ArgumentError("clip window is smaller than one pixel");
    const int64_t x0 = center_x - side / 2;
    const int64_t y0 = center_y - side / 2;
    std::vector<float> out(static_cast<size_t>(side) * side, 0.0f);
    for (int64_t y = 0; y < side; ++y) {
        const int64_t sy = y0 + y;
        if (sy < 0 || sy >= static_cast<int64_t>(source.height)) continue;
        for (int64_t x = 0; x < side; ++x) {
            const int64_t sx = x0 + x;
            if (sx < 0 || sx >= static_cast<int64_t>(source.width)) continue;
            out[static_cast<size_t>(y) * side + x] =
                source.at(static_cast<uint32_t>(sx), static_cast<uint32_t>(sy));
        }
    }
    return Grid(static_cast<uint32_t>(side), static_cast<uint32_t>(side), source.domain,
                std::move(out));
}

std::pair<uint32_t, uint32_t> select_center(const Grid& population) {
    if (population.size() == 0) throw ArgumentError("population grid is empty");
    size_t best = 0;
    for (size_t i = 1; i < population.values.size(); ++i)
        if (population.values[i] > population.values[best]) best = i;
    return {static_cast<uint32_t>(best % population.width),
            static_cast<uint32_t>(best / population.width)};
}

std::vector<CitySample> filter_low_signal(std::vector<CitySample> samples, double threshold) {
    std::vector<CitySample> kept;
    kept.reserve(samples.size());
    for (auto& s : samples) {
        if (s.label.domain != Domain::Binary)
            throw ArgumentError("filter_low_signal requires binary labels");
        if (s.signal_fraction() >= threshold) kept.push_back(std::move(s));
    }
    return kept;
}

std::vector<CitySample> merge_years(const std::map<int, std::vector<CitySample>>& per_year) {
    std::vector<CitySample> out;
    for (const auto& [year, samples] : per_year) {
        for (const auto& s : samples) {
            CitySample copy = s;
            copy.id = s.id + "_" + std::to_string(year);
            out.push_back(std::move(copy));
        }
    }
    return out;
}

namespace {

std::string sample_stem(const CitySample& s) {
    const std::string suffix = "_" + std::to_string(s.year);
    if (s.id.size() > suffix.size() &&
        s.id.compare(s.id.size() - suffix.size(), suffix.size(), suffix) == 0)
        return s.id;
    return s.id + suffix;
}

} // namespace

Manifest split_manifest(const std::vector<CitySample>& samples, int test_count, uint64_t seed) {
    if (test_count < 0) throw ArgumentError("test_count must be non-negative");
    if (static_cast<size_t>(test_count) > samples.size())
        throw ArgumentError("test_count exceeds the number of samples");

    std::vector<size_t> order(samples.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return samples[a].id < samples[b].id; });

    Rng rng(mix_seed(seed, 0x5917ULL));
    std::vector<size_t> shuffled = order;
    rng.shuffle(shuffled.data(), shuffled.size());
    std::set<size_t> test_set(shuffled.begin(), shuffled.begin() + test_count);

    Manifest m;
    m.seed = seed;
    for (size_t idx : order) {
        const CitySample& s = samples[idx];
        ManifestEntry e;
        e.id = s.id;
        e.year = s.year;
        e.path = sample_stem(s);
        e.split = test_set.count(idx) ? "test" : "train";
        e.signal_fraction = s.signal_fraction();
        m.entries.push_back(std::move(e));
    }
    return m;
}

namespace {

Grid make_water(Rng& rng, uint32_t size, WaterStyle style) {
    Grid water = Grid::zeros(size, size, Domain::Binary);
    if (style == WaterStyle::None) return water;

    if (style == WaterStyle::Coast) {
        // Half-plane with a random-walk boundary, entering from a random side.
        const int side = static_cast<int>(rng.uniform_int(4));
        int depth = static_cast<int>(size * (0.18 + 0.15 * rng.uniform()));
        const int lo = std::max(1, static_cast<int>(size) / 10);
        const int hi = std::max(lo + 1, static_cast<int>(size) * 2 / 5);
        for (uint32_t t = 0; t < size; ++t) {
            const double u = rng.uniform();
            if (u < 0.3)
                depth += 1;
            else if (u < 0.6)
                depth -= 1;
            depth = std::clamp(depth, lo, hi);
            for (int d = 0; d < depth; ++d) {
                uint32_t x = 0, y = 0;
                switch (side) {
                case 0: x = t; y = static_cast<uint32_t>(d); break;                  // north
                case 1: x = t; y = size - 1 - static_cast<uint32_t>(d); break;       // south
                case 2: x = static_cast<uint32_t>(d); y = t; break;                  // west
                default: x = size - 1 - static_cast<uint32_t>(d); y = t; break;      // east
                }
                water.at(x, y) = 1.0f;
            }
        }
        return water;
    }

    // River: a 1-3 pixel wide random walk crossing the raster.
    const bool vertical = rng.uniform_int(2) == 0;
    int pos = static_cast<int>(size / 4 + rng.uniform_int(size / 2));
    int width = 1 + static_cast<int>(rng.uniform_int(3));
    for (uint32_t t = 0; t < size; ++t) {
        const double u = rng.uniform();
        if (u < 0.35)
            pos += 1;
        else if (u < 0.7)
            pos -= 1;
        pos = std::clamp(pos, 1, static_cast<int>(size) - 2);
        if (rng.uniform() < 0.15) width = std::clamp(width + (rng.uniform_int(2) ? 1 : -1), 1, 3);
        for (int w = 0; w < width; ++w) {
            const int p = std::clamp(pos + w - width / 2, 0, static_cast<int>(size) - 1);
            if (vertical)
                water.at(static_cast<uint32_t>(p), t) = 1.0f;
            else
                water.at(t, static_cast<uint32_t>(p)) = 1.0f;
        }
    }
    return water;
}

Grid make_dem(Rng& rng, uint32_t size) {
    // Two octaves of bilinear value noise.
    auto octave = [&](uint32_t spacing) {
        const uint32_t n = size / spacing + 2;
        std::vector<double> lattice(static_cast<size_t>(n) * n);
        for (auto& v : lattice) v = rng.gaussian();
        std::vector<double> out(static_cast<size_t>(size) * size);
        for (uint32_t y = 0; y < size; ++y) {
            const double fy = static_cast<double>(y) / spacing;
            const uint32_t iy = static_cast<uint32_t>(fy);
            const double ty = fy - iy;
            for (uint32_t x = 0; x < size; ++x) {
                const double fx = static_cast<double>(x) / spacing;
                const uint32_t ix = static_cast<uint32_t>(fx);
                const double tx = fx - ix;
                const double v00 = lattice[static_cast<size_t>(iy) * n + ix];
                const double v01 = lattice[static_cast<size_t>(iy) * n + ix + 1];
                const double v10 = lattice[static_cast<size_t>(iy + 1) * n + ix];
                const double v11 = lattice[static_cast<size_t>(iy + 1) * n + ix + 1];
                out[static_cast<size_t>(y) * size + x] =
                    (1 - ty) * ((1 - tx) * v00 + tx * v01) + ty * ((1 - tx) * v10 + tx * v11);
            }
        }
        return out;
    };
    const auto coarse = octave(std::max(4u, size / 4));
    const auto fine = octave(std::max(2u, size / 16));
    std::vector<float> values(static_cast<size_t>(size) * size);
    for (size_t i = 0; i < values.size(); ++i)
        values[i] = static_cast<float>(coarse[i] + 0.35 * fine[i]);
    return normalize(Grid(size, size, Domain::Raw, std::move(values)));
}

// Discrete power law P(s) ~ s^-2 on [1, smax], sampled by inverse CDF.
int draw_settlement_area(Rng& rng, int smax) {
    double z = 0.0;
    for (int s = 1; s <= smax; ++s) z += 1.0 / (static_cast<double>(s) * s);
    double u = rng.uniform() * z;
    for (int s = 1; s <= smax; ++s) {
        u -= 1.0 / (static_cast<double>(s) * s);
        if (u <= 0.0) return s;
    }
    return smax;
}

// Grows one compact blob of up to `area` pixels by random frontier expansion,
// never painting water or pixels 8-adjacent to previously placed blobs.
int grow_blob(Rng& rng, Grid& label, const Grid& water, const std::vector<uint8_t>& blocked,
              uint32_t seed_x, uint32_t seed_y, int area, std::vector<size_t>& painted) {
    const uint32_t size = label.width;
    auto eligible = [&](int64_t x, int64_t y) {
        if (x < 0 || y < 0 || x >= size || y >= size) return false;
        const size_t i = static_cast<size_t>(y) * size + x;
        return water.values[i] == 0.0f && label.values[i] == 0.0f && !blocked[i];
    };
    if (!eligible(seed_x, seed_y)) return 0;
    std::vector<std::pair<uint32_t, uint32_t>> frontier{{seed_x, seed_y}};
    int count = 0;
    while (count < area && !frontier.empty()) {
        const size_t pick = rng.uniform_int(frontier.size());
        const auto [x, y] = frontier[pick];
        frontier[pick] = frontier.back();
        frontier.pop_back();
        if (!eligible(x, y)) continue;
        label.at(x, y) = 1.0f;
        painted.push_back(static_cast<size_t>(y) * size + x);
        ++count;
        const int dx[4] = {1, -1, 0, 0};
        const int dy[4] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
            const int64_t nx = static_cast<int64_t>(x) + dx[k];
            const int64_t ny = static_cast<int64_t>(y) + dy[k];
            if (eligible(nx, ny))
                frontier.emplace_back(static_cast<uint32_t>(nx), static_cast<uint32_t>(ny));
        }
    }
    return count;
}

Grid make_label(Rng& rng, uint32_t size, const Grid& water) {
    Grid label = Grid::zeros(size, size, Domain::Binary);
    std::vector<uint8_t> blocked(label.size(), 0);

    // Land pixels bordering water, used to seed coast-hugging settlements.
    std::vector<std::pair<uint32_t, uint32_t>> shoreline;
    for (uint32_t y = 0; y < size; ++y)
        for (uint32_t x = 0; x < size; ++x) {
            if (water.at(x, y) != 0.0f) continue;
            bool near = false;
            for (int dy = -1; dy <= 1 && !near; ++dy)
                for (int dx = -1; dx <= 1 && !near; ++dx) {
                    const int64_t nx = static_cast<int64_t>(x) + dx;
                    const int64_t ny = static_cast<int64_t>(y) + dy;
                    if (nx >= 0 && ny >= 0 && nx < size && ny < size &&
                        water.at(static_cast<uint32_t>(nx), static_cast<uint32_t>(ny)) != 0.0f)
                        near = true;
                }
            if (near) shoreline.emplace_back(x, y);
        }

    const int total = static_cast<int>(size) * static_cast<int>(size);
    const int target = static_cast<int>(std::ceil(total * (0.018 + 0.02 * rng.uniform())));
    const int smax = std::max(4, total / 16);

    std::vector<int> areas;
    int budget = 0;
    while (budget < target && areas.size() < 64) {
        const int a = draw_settlement_area(rng, smax);
        areas.push_back(a);
        budget += a;
    }
    // Large settlements first: they need contiguous room.
    std::sort(areas.begin(), areas.end(), std::greater<int>());

    int painted_total = 0;
    for (size_t i = 0; i < areas.size(); ++i) {
        std::vector<size_t> painted;
        for (int attempt = 0; attempt < 60; ++attempt) {
            uint32_t sx, sy;
            const bool coastal = !shoreline.empty() && rng.uniform() < 0.5;
            if (coastal) {
                const auto& p = shoreline[rng.uniform_int(shoreline.size())];
                sx = p.first;
                sy = p.second;
            } else {
                sx = static_cast<uint32_t>(rng.uniform_int(size));
                sy = static_cast<uint32_t>(rng.uniform_int(size));
            }
            if (grow_blob(rng, label, water, blocked, sx, sy, areas[i], painted) > 0) break;
        }
        painted_total += static_cast<int>(painted.size());
        // Keep the next settlement disconnected from this one.
        for (size_t idx : painted) {
            const int64_t x = static_cast<int64_t>(idx % size);
            const int64_t y = static_cast<int64_t>(idx / size);
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int64_t nx = x + dx, ny = y + dy;
                    if (nx >= 0 && ny >= 0 && nx < size && ny < size)
                        blocked[static_cast<size_t>(ny) * size + nx] = 1;
                }
        }
        if (painted_total >= target) break;
    }
    return label;
}

Grid make_ntl(Rng& rng, const Grid& label) {
    const uint32_t size = label.width;
    // Two passes of a 3x3 binomial blur.
    std::vector<double> cur(label.values.begin(), label.values.end());
    for (int pass = 0; pass < 2; ++pass) {
        std::vector<double> next(cur.size(), 0.0);
        for (int64_t y = 0; y < size; ++y)
            for (int64_t x = 0; x < size; ++x) {
                double acc = 0.0;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int64_t nx = std::clamp<int64_t>(x + dx, 0, size - 1);
                        const int64_t ny = std::clamp<int64_t>(y + dy, 0, size - 1);
                        const double w = (dx == 0 ? 2.0 : 1.0) * (dy == 0 ? 2.0 : 1.0);
                        acc += w * cur[static_cast<size_t>(ny) * size + nx];
                    }
                next[static_cast<size_t>(y) * size + x] = acc / 16.0;
            }
        cur.swap(next);
    }
    std::vector<float> values(cur.size());
    for (size_t i = 0; i < cur.size(); ++i) {
        const double noisy = cur[i] + 0.05 * rng.uniform();
        values[i] = static_cast<float>(std::clamp(noisy, 0.0, 1.0));
    }
    return Grid(size, size, Domain::UnitInterval, std::move(values));
}

} // namespace

CitySample synth_city(uint64_t seed, uint32_t size, WaterStyle water_style) {
    if (size != 8 && size != 16 && size != 32 && size != 64)
        throw ArgumentError("synthetic city size must be one of 8, 16, 32, 64");
    Rng rng(mix_seed(seed, 0xc17f5a3eULL));

    Grid water = make_water(rng, size, water_style);
    Grid dem = make_dem(rng, size);
    Grid label = make_label(rng, size, water);
    Grid ntl = make_ntl(rng, label);

    CitySample s;
    s.id = "synth" + std::to_string(seed);
    s.year = 2014;
    s.inputs.add("ntl", std::move(ntl));
    s.inputs.add("dem", std::move(dem));
    s.inputs.add("water", std::move(water));
    s.label = std::move(label);
    s.meters_per_pixel = 100000.0 / size;
    s.population = static_cast<double>(s.label.bright_count());
    return s;
}

std::string save_sample(const CitySample& sample, const std::string& dir) {
    const std::string stem = sample_stem(sample);
    const fs::path base = fs::path(dir);
    fs::create_directories(base);
    for (const auto& [name, grid] : sample.inputs.channels)
        write_grid(grid, (base / (stem + "_" + name + ".urg")).string());
    write_grid(sample.label, (base / (stem + "_builtup.urg")).string());
    if (sample.population) {
        Grid pop(1, 1, Domain::Raw, {static_cast<float>(*sample.population)});
        write_grid(pop, (base / (stem + "_population.urg")).string());
    }
    return stem;
}

CitySample load_sample(const std::string& dir, const ManifestEntry& entry) {
    const fs::path base = fs::path(dir);
    auto channel_path = [&](const std::string& ch) {
        return (base / (entry.path + "_" + ch + ".urg")).string();
    };
    CitySample s;
    s.id = entry.id;
    s.year = entry.year;
    for (const char* ch : {"ntl", "dem", "water"}) {
        Grid g = read_grid(channel_path(ch));
        if (g.domain == Domain::Raw) g = normalize(g);
        s.inputs.add(ch, std::move(g));
    }
    s.label = read_grid(channel_path("builtup"));
    if (s.label.domain != Domain::Binary)
        throw DataError("built-up label is not binary: " + entry.path);
    if (s.label.width != s.inputs.width() || s.label.height != s.inputs.height())
        throw DataError("label/input dimension mismatch: " + entry.path);
    const std::string pop_path = channel_path("population");
    if (fs::exists(pop_path)) {
        const Grid pop = read_grid(pop_path);
        if (pop.size() >= 1) s.population = pop.values[0];
    }
    s.meters_per_pixel = 100000.0 / s.label.width;
    return s;
}

Manifest build_manifest(const std::string& input_dir, const PipelineConfig& config) {
    if (!fs::is_directory(input_dir)) throw DataError("input directory not found: " + input_dir);

    static const std::set<std::string> kChannels = {"ntl", "dem", "water", "builtup",
                                                    "population"};
    // stem -> set of channels present
    std::map<std::string, std::set<std::string>> groups;
    for (const auto& de : fs::directory_iterator(input_dir)) {
        if (!de.is_regular_file() || de.path().extension() != ".urg") continue;
        const std::string stem = de.path().stem().string();
        const size_t us = stem.rfind('_');
        if (us == std::string::npos) continue;
        const std::string channel = stem.substr(us + 1);
        if (!kChannels.count(channel)) continue;
        groups[stem.substr(0, us)].insert(channel);
    }

    std::map<int, std::vector<CitySample>> per_year;
    for (const auto& [stem, channels] : groups) {
        bool complete = true;
        for (const char* ch : {"ntl", "dem", "water", "builtup"})
            if (!channels.count(ch)) {
                std::cerr << "warning: skipping " << stem << " (missing " << ch << " channel)\n";
                complete = false;
                break;
            }
        if (!complete) continue;

        // Split <city-id>_<year>: the year is the trailing all-digit token.
        const size_t us = stem.rfind('_');
        int year = 0;
        std::string id = stem;
        if (us != std::string::npos && us + 1 < stem.size() &&
            std::all_of(stem.begin() + us + 1, stem.end(), ::isdigit)) {
            year = std::stoi(stem.substr(us + 1));
            id = stem.substr(0, us);
        }
        ManifestEntry probe;
        probe.id = id;
        probe.year = year;
        probe.path = stem;
        try {
            CitySample s = load_sample(input_dir, probe);
            s.id = id;
            per_year[year].push_back(std::move(s));
        } catch (const DataError& e) {
            std::cerr << "warning: skipping " << stem << " (" << e.what() << ")\n";
        }
    }

    std::vector<CitySample> merged = merge_years(per_year);
    std::vector<CitySample> admitted = filter_low_signal(std::move(merged),
                                                         config.filter_threshold);
    if (admitted.empty())
        throw DataError("no admitted samples in " + input_dir + " (signal filter threshold " +
                        std::to_string(config.filter_threshold) + ")");

    int test_count = config.test_count;
    if (static_cast<size_t>(test_count) > admitted.size()) {
        std::cerr << "warning: test count " << test_count << " clamped to "
                  << admitted.size() << " admitted samples\n";
        test_count = static_cast<int>(admitted.size());
    }
    Manifest m = split_manifest(admitted, test_count, config.seed);
    m.filter_threshold = config.filter_threshold;
    m.base_dir = input_dir;
    return m;
}

} // namespace citymorph
