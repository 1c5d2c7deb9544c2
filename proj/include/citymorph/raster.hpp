#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace citymorph {

enum class Domain : uint8_t {
    Binary = 0,       // values in {0, 1}, stored as u8 per pixel
    UnitInterval = 1, // values in [0, 1], stored as f32 per pixel
    Raw = 2,          // unconstrained values, stored as f32 per pixel
};

enum class ResizeMode {
    Nearest,     // preserves binary domains
    AreaAverage, // exact box integration; output is a convex combination of inputs
};

// Single-channel row-major raster. The value payload is float so that file
// round-trips are bit-exact.
struct Grid {
    uint32_t width = 0;
    uint32_t height = 0;
    Domain domain = Domain::Raw;
    std::vector<float> values;
    // Peak signal value for PSNR; 1.0 for binary/unit-interval grids. For raw
    // grids it is derived from the payload so it survives file round-trips.
    float max_value = 1.0f;

    Grid() = default;
    Grid(uint32_t w, uint32_t h, Domain d, std::vector<float> v);
    static Grid zeros(uint32_t w, uint32_t h, Domain d);

    size_t size() const { return static_cast<size_t>(width) * height; }
    float at(uint32_t x, uint32_t y) const { return values[static_cast<size_t>(y) * width + x]; }
    float& at(uint32_t x, uint32_t y) { return values[static_cast<size_t>(y) * width + x]; }

    // Count of nonzero pixels (bright pixels for binary grids).
    int64_t bright_count() const;

    bool operator==(const Grid& other) const;

    // Throws ArgumentError if the domain invariants do not hold.
    void validate() const;
};

// Ordered channel stack; all member grids share dimensions. Channel names are
// drawn from {ntl, dem, water, population, noise}.
struct Stack {
    std::map<std::string, Grid> channels;

    void add(const std::string& name, Grid g);
    const Grid& get(const std::string& name) const;
    bool has(const std::string& name) const { return channels.count(name) != 0; }
    uint32_t width() const;
    uint32_t height() const;
};

// URG1 container: 'U','R','G','1', u32 width, u32 height, u8 domain code,
// then the row-major payload. All integers little-endian.
Grid read_grid(const std::string& path);
void write_grid(const Grid& grid, const std::string& path);

Grid resize(const Grid& grid, uint32_t new_w, uint32_t new_h, ResizeMode mode);

// Per-stack resize honoring domains: binary channels use nearest-neighbor,
// continuous ones area-averaging.
Stack resize_stack(const Stack& stack, uint32_t new_w, uint32_t new_h);

// Affine map (v - min)/(max - min) onto [0, 1]; constant grids map to zeros.
Grid normalize(const Grid& grid);

// pixel = 1 iff value >= threshold; requires a unit-interval grid and a
// threshold strictly inside (0, 1).
Grid binarize(const Grid& grid, double threshold = 0.9);

// Binary P5 image scaled to 0-255, round-half-up.
void export_pgm(const Grid& grid, const std::string& path);

} // namespace citymorph
