#include "citymorph/raster.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>

#include "citymorph/errors.hpp"

namespace citymorph {

namespace {

float derived_max_value(Domain domain, const std::vector<float>& values) {
    if (domain != Domain::Raw) return 1.0f;
    float m = 0.0f;
    for (float v : values)
        if (std::isfinite(v)) m = std::max(m, std::fabs(v));
    return m > 0.0f ? m : 1.0f;
}

} // namespace

Grid::Grid(uint32_t w, uint32_t h, Domain d, std::vector<float> v)
    : width(w), height(h), domain(d), values(std::move(v)) {
    max_value = derived_max_value(domain, values);
    validate();
}

Grid Grid::zeros(uint32_t w, uint32_t h, Domain d) {
    return Grid(w, h, d, std::vector<float>(static_cast<size_t>(w) * h, 0.0f));
}

int64_t Grid::bright_count() const {
    int64_t n = 0;
    for (float v : values)
        if (v != 0.0f) ++n;
    return n;
}

bool Grid::operator==(const Grid& other) const {
    return width == other.width && height == other.height && domain == other.domain &&
           values.size() == other.values.size() &&
           std::memcmp(values.data(), other.values.data(), values.size() * sizeof(float)) == 0;
}

void Grid::validate() const {
    if (values.size() != size())
        throw ArgumentError("grid value count does not match width*height");
    if (!(max_value > 0.0f)) throw ArgumentError("grid max_value must be positive");
    if (domain == Domain::Binary) {
        for (float v : values)
            if (v != 0.0f && v != 1.0f) throw ArgumentError("binary grid holds a non-{0,1} value");
    } else if (domain == Domain::UnitInterval) {
        for (float v : values)
            if (!(v >= 0.0f && v <= 1.0f))
                throw ArgumentError("unit-interval grid holds a value outside [0,1]");
    }
}

void Stack::add(const std::string& name, Grid g) {
    if (!channels.empty() && (g.width != width() || g.height != height()))
        throw ShapeError("stack channel '" + name + "' dimension mismatch");
    if (name == "water" && g.domain != Domain::Binary)
        throw ArgumentError("water channel must be binary");
    channels.emplace(name, std::move(g));
}

const Grid& Stack::get(const std::string& name) const {
    auto it = channels.find(name);
    if (it == channels.end()) throw ArgumentError("stack has no channel '" + name + "'");
    return it->second;
}

uint32_t Stack::width() const { return channels.empty() ? 0 : channels.begin()->second.width; }
uint32_t Stack::height() const { return channels.empty() ? 0 : channels.begin()->second.height; }

namespace {

constexpr char kMagic[4] = {'U', 'R', 'G', '1'};

void put_u32(std::string& out, uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

uint32_t get_u32(const unsigned char* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

} // namespace

Grid read_grid(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open raster file: " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < 13) throw DataError("truncated raster header: " + path);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (std::memcmp(p, kMagic, 4) != 0) throw DataError("bad raster magic: " + path);
    const uint32_t w = get_u32(p + 4);
    const uint32_t h = get_u32(p + 8);
    const uint8_t code = p[12];
    if (code > 2) throw DataError("unknown raster domain code: " + path);
    const Domain domain = static_cast<Domain>(code);
    const size_t count = static_cast<size_t>(w) * h;
    const size_t pixel_bytes = domain == Domain::Binary ? 1 : 4;
    if (bytes.size() != 13 + count * pixel_bytes)
        throw DataError("raster payload length mismatch: " + path);
    std::vector<float> values(count);
    if (domain == Domain::Binary) {
        for (size_t i = 0; i < count; ++i) {
            const uint8_t b = p[13 + i];
            if (b > 1) throw DataError("binary raster holds a non-{0,1} byte: " + path);
            values[i] = static_cast<float>(b);
        }
    } else {
        std::memcpy(values.data(), p + 13, count * 4);
    }
    return Grid(w, h, domain, std::move(values));
}

void write_grid(const Grid& grid, const std::string& path) {
    grid.validate();
    std::string out;
    out.reserve(13 + grid.size() * 4);
    out.append(kMagic, 4);
    put_u32(out, grid.width);
    put_u32(out, grid.height);
    out.push_back(static_cast<char>(grid.domain));
    if (grid.domain == Domain::Binary) {
        for (float v : grid.values) out.push_back(v != 0.0f ? 1 : 0);
    } else {
        const size_t offset = out.size();
        out.resize(offset + grid.values.size() * 4);
        std::memcpy(out.data() + offset, grid.values.data(), grid.values.size() * 4);
    }
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw DataError("cannot open for writing: " + path);
    file.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!file) throw DataError("write failed: " + path);
}

Grid resize(const Grid& grid, uint32_t new_w, uint32_t new_h, ResizeMode mode) {
    if (new_w < 1 || new_h < 1) throw ArgumentError("resize target must be at least 1x1");
    if (grid.width == 0 || grid.height == 0) throw ArgumentError("cannot resize an empty grid");
    if (new_w == grid.width && new_h == grid.height) return grid;

    std::vector<float> out(static_cast<size_t>(new_w) * new_h);
    if (mode == ResizeMode::Nearest) {
        for (uint32_t y = 0; y < new_h; ++y) {
            const uint32_t sy = std::min<uint32_t>(
                grid.height - 1,
                static_cast<uint32_t>((static_cast<double>(y) + 0.5) * grid.height / new_h));
            for (uint32_t x = 0; x < new_w; ++x) {
                const uint32_t sx = std::min<uint32_t>(
                    grid.width - 1,
                    static_cast<uint32_t>((static_cast<double>(x) + 0.5) * grid.width / new_w));
                out[static_cast<size_t>(y) * new_w + x] = grid.at(sx, sy);
            }
        }
        return Grid(new_w, new_h, grid.domain, std::move(out));
    }

    // Exact box integration: output cell (x,y) covers the source rectangle
    // [x*sx,(x+1)*sx) x [y*sy,(y+1)*sy); partially covered source pixels are
    // weighted by overlap area.
    const double sx = static_cast<double>(grid.width) / new_w;
    const double sy = static_cast<double>(grid.height) / new_h;
    for (uint32_t y = 0; y < new_h; ++y) {
        const double y0 = y * sy, y1 = (y + 1) * sy;
        const uint32_t iy0 = static_cast<uint32_t>(y0);
        const uint32_t iy1 = std::min<uint32_t>(grid.height, static_cast<uint32_t>(std::ceil(y1)));
        for (uint32_t x = 0; x < new_w; ++x) {
            const double x0 = x * sx, x1 = (x + 1) * sx;
            const uint32_t ix0 = static_cast<uint32_t>(x0);
            const uint32_t ix1 =
                std::min<uint32_t>(grid.width, static_cast<uint32_t>(std::ceil(x1)));
            double acc = 0.0, weight = 0.0;
            for (uint32_t yy = iy0; yy < iy1; ++yy) {
                const double wy = std::min<double>(y1, yy + 1) - std::max<double>(y0, yy);
                for (uint32_t xx = ix0; xx < ix1; ++xx) {
                    const double wx = std::min<double>(x1, xx + 1) - std::max<double>(x0, xx);
                    acc += wx * wy * grid.at(xx, yy);
                    weight += wx * wy;
                }
            }
            out[static_cast<size_t>(y) * new_w + x] = static_cast<float>(acc / weight);
        }
    }
    const Domain out_domain = grid.domain == Domain::Raw ? Domain::Raw : Domain::UnitInterval;
    return Grid(new_w, new_h, out_domain, std::move(out));
}

Stack resize_stack(const Stack& stack, uint32_t new_w, uint32_t new_h) {
    Stack out;
    for (const auto& [name, g] : stack.channels) {
        const ResizeMode mode =
            g.domain == Domain::Binary ? ResizeMode::Nearest : ResizeMode::AreaAverage;
        out.add(name, resize(g, new_w, new_h, mode));
    }
    return out;
}

Grid normalize(const Grid& grid) {
    float lo = std::numeric_limits<float>::infinity();
    float hi = -std::numeric_limits<float>::infinity();
    for (float v : grid.values) {
        if (!std::isfinite(v)) continue;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (!(lo <= hi)) throw ArgumentError("normalize requires at least one finite value");
    std::vector<float> out(grid.values.size());
    if (lo == hi) {
        std::fill(out.begin(), out.end(), 0.0f);
    } else {
        const float span = hi - lo;
        for (size_t i = 0; i < out.size(); ++i)
            out[i] = std::clamp((grid.values[i] - lo) / span, 0.0f, 1.0f);
    }
    return Grid(grid.width, grid.height, Domain::UnitInterval, std::move(out));
}

Grid binarize(const Grid& grid, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0))
        throw ArgumentError("binarize threshold must lie in (0,1)");
    if (grid.domain != Domain::UnitInterval)
        throw ArgumentError("binarize expects a unit-interval grid");
    std::vector<float> out(grid.values.size());
    for (size_t i = 0; i < out.size(); ++i)
        out[i] = grid.values[i] >= threshold ? 1.0f : 0.0f;
    return Grid(grid.width, grid.height, Domain::Binary, std::move(out));
}

void export_pgm(const Grid& grid, const std::string& path) {
    if (grid.domain == Domain::Raw)
        throw ArgumentError("export_pgm expects a binary or unit-interval grid");
    std::string out = "P5\n" + std::to_string(grid.width) + " " + std::to_string(grid.height) +
                      "\n255\n";
    out.reserve(out.size() + grid.size());
    for (float v : grid.values) {
        const int byte = static_cast<int>(std::floor(v * 255.0f + 0.5f));
        out.push_back(static_cast<char>(std::clamp(byte, 0, 255)));
    }
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw DataError("cannot open for writing: " + path);
    file.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!file) throw DataError("write failed: " + path);
}

} // namespace citymorph
