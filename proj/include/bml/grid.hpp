#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bml/rng.hpp"

namespace bml {

using SiteIndex = std::int64_t;

/// Car heading along one lattice axis. In d=2, axis 0 is East (+1 in
/// coordinate 0) and axis 1 is North (+1 in coordinate 1).
struct Direction {
    std::uint8_t axis = 0;
    friend constexpr bool operator==(Direction, Direction) = default;
};

/// One site of the configuration: empty, or a car with a direction.
struct SiteState {
    std::int8_t code = -1; // -1 empty, otherwise the direction axis

    static constexpr SiteState empty() { return SiteState{-1}; }
    static constexpr SiteState car(int axis) {
        return SiteState{static_cast<std::int8_t>(axis)};
    }

    constexpr bool is_car() const { return code >= 0; }
    constexpr bool is_empty() const { return code < 0; }
    constexpr int axis() const { return code; } // valid only for cars

    friend constexpr bool operator==(SiteState, SiteState) = default;
};

inline constexpr SiteState kEmpty = SiteState::empty();
inline constexpr SiteState kEast = SiteState::car(0);
inline constexpr SiteState kNorth = SiteState::car(1);

/// Product initial law: a site holds a car with probability p. In d=2 the
/// split is (theta*p East, (1-theta)*p North); in d>2 each of the d
/// directions has probability p/d and theta is ignored.
struct InitialLaw {
    double p = 0.5;
    double theta = 0.5;
    int d = 2;

    void validate() const {
        if (!(p >= 0.0 && p <= 1.0))
            throw std::invalid_argument("InitialLaw: p must be in [0,1]");
        if (!(theta > 0.0 && theta < 1.0))
            throw std::invalid_argument("InitialLaw: theta must be in (0,1)");
        if (d < 2)
            throw std::invalid_argument("InitialLaw: dimension must be >= 2");
    }
};

/// Dense d-dimensional torus of site states, row-major (axis 0 slowest).
/// Neighbor indexing wraps: stepping East from the last column of a row
/// re-enters at the first column.
class TorusGrid {
public:
    explicit TorusGrid(std::vector<std::int32_t> dims)
        : dims_(std::move(dims)) {
        if (dims_.size() < 2)
            throw std::invalid_argument("TorusGrid: dimension must be >= 2");
        std::int64_t n = 1;
        for (auto e : dims_) {
            if (e < 1)
                throw std::invalid_argument("TorusGrid: extents must be >= 1");
            n *= e;
        }
        strides_.assign(dims_.size(), 1);
        for (int i = static_cast<int>(dims_.size()) - 2; i >= 0; --i)
            strides_[i] = strides_[i + 1] * dims_[i + 1];
        cells_.assign(static_cast<std::size_t>(n), kEmpty);
    }

    int dim() const { return static_cast<int>(dims_.size()); }
    const std::vector<std::int32_t>& dims() const { return dims_; }
    std::int32_t extent(int axis) const { return dims_[static_cast<std::size_t>(axis)]; }
    SiteIndex size() const { return static_cast<SiteIndex>(cells_.size()); }

    SiteState at(SiteIndex i) const { return cells_[static_cast<std::size_t>(i)]; }
    void set(SiteIndex i, SiteState s) { cells_[static_cast<std::size_t>(i)] = s; }

    /// Flat index of a coordinate vector; coordinates wrap modulo extents
    /// and may be negative.
    SiteIndex index_of(std::span<const std::int64_t> coords) const {
        SiteIndex idx = 0;
        for (std::size_t a = 0; a < dims_.size(); ++a) {
            std::int64_t e = dims_[a];
            std::int64_t c = coords[a] % e;
            if (c < 0) c += e;
            idx += c * strides_[a];
        }
        return idx;
    }

    void coords_of(SiteIndex idx, std::span<std::int64_t> out) const {
        for (std::size_t a = 0; a < dims_.size(); ++a) {
            out[a] = (idx / strides_[a]) % dims_[a];
        }
    }

    std::int64_t coord_of(SiteIndex idx, int axis) const {
        return (idx / strides_[static_cast<std::size_t>(axis)]) % dims_[static_cast<std::size_t>(axis)];
    }

    /// Neighbor one step along an axis (delta +1 or -1), with wrap.
    SiteIndex neighbor(SiteIndex idx, int axis, int delta = 1) const {
        const auto a = static_cast<std::size_t>(axis);
        const std::int64_t s = strides_[a];
        const std::int64_t e = dims_[a];
        const std::int64_t c = (idx / s) % e;
        std::int64_t nc = c + delta;
        if (nc >= e) nc -= e;
        else if (nc < 0) nc += e;
        return idx + (nc - c) * s;
    }

    // 2D conveniences; coordinate (x, y) with x along axis 0 (East).
    SiteIndex index2(std::int64_t x, std::int64_t y) const {
        const std::int64_t m = dims_[0], n = dims_[1];
        std::int64_t cx = x % m; if (cx < 0) cx += m;
        std::int64_t cy = y % n; if (cy < 0) cy += n;
        return cx * n + cy;
    }
    SiteState at2(std::int64_t x, std::int64_t y) const { return at(index2(x, y)); }
    void set2(std::int64_t x, std::int64_t y, SiteState s) { set(index2(x, y), s); }

    friend bool operator==(const TorusGrid& a, const TorusGrid& b) {
        return a.dims_ == b.dims_ && a.cells_ == b.cells_;
    }

private:
    std::vector<std::int32_t> dims_;
    std::vector<std::int64_t> strides_;
    std::vector<SiteState> cells_;
};

/// Independent per-site sample of the initial configuration. The value at
/// each site is a pure function of (seed, site index), so the result does
/// not depend on traversal order.
inline TorusGrid sample_initial(std::vector<std::int32_t> dims, const InitialLaw& law,
                                RngSeed seed) {
    law.validate();
    if (static_cast<int>(dims.size()) != law.d)
        throw std::invalid_argument("sample_initial: dims rank must equal law.d");
    TorusGrid g(std::move(dims));
    CounterRng rng(seed);
    const SiteIndex n = g.size();
    if (law.d == 2) {
        const double pe = law.theta * law.p;
        for (SiteIndex i = 0; i < n; ++i) {
            const double u = static_cast<double>(rng.at(static_cast<std::uint64_t>(i)) >> 11) * 0x1.0p-53;
            if (u < pe) g.set(i, kEast);
            else if (u < law.p) g.set(i, kNorth);
        }
    } else {
        const double share = law.p / law.d;
        for (SiteIndex i = 0; i < n; ++i) {
            const double u = static_cast<double>(rng.at(static_cast<std::uint64_t>(i)) >> 11) * 0x1.0p-53;
            if (u < law.p) {
                int axis = static_cast<int>(u / share);
                if (axis >= law.d) axis = law.d - 1; // guard rounding at the boundary
                g.set(i, SiteState::car(axis));
            }
        }
    }
    return g;
}

/// Car counts per direction plus the number of empty sites.
struct Census {
    std::vector<std::int64_t> per_direction;
    std::int64_t empty_sites = 0;

    std::int64_t cars() const {
        std::int64_t c = 0;
        for (auto v : per_direction) c += v;
        return c;
    }
};

inline Census car_census(const TorusGrid& g) {
    Census c;
    c.per_direction.assign(static_cast<std::size_t>(g.dim()), 0);
    for (SiteIndex i = 0, n = g.size(); i < n; ++i) {
        SiteState s = g.at(i);
        if (s.is_empty()) ++c.empty_sites;
        else ++c.per_direction[static_cast<std::size_t>(s.axis())];
    }
    return c;
}

// Snapshot file format: header "BML d m n ...\n" followed by one byte per
// site in row-major order. d=2 uses '.', 'E', 'N'; d>2 uses '.' and the
// axis digit. Round-trips bit-exactly.
inline void write_snapshot(const TorusGrid& g, std::ostream& os) {
    if (g.dim() > 10)
        throw std::invalid_argument("write_snapshot: at most 10 dimensions");
    os << "BML " << g.dim();
    for (auto e : g.dims()) os << ' ' << e;
    os << '\n';
    std::string buf;
    buf.reserve(static_cast<std::size_t>(g.size()));
    for (SiteIndex i = 0, n = g.size(); i < n; ++i) {
        SiteState s = g.at(i);
        char ch;
        if (s.is_empty()) ch = '.';
        else if (g.dim() == 2) ch = (s.axis() == 0) ? 'E' : 'N';
        else ch = static_cast<char>('0' + s.axis());
        buf.push_back(ch);
    }
    os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

inline TorusGrid read_snapshot(std::istream& is) {
    std::string magic;
    int d = 0;
    if (!(is >> magic) || magic != "BML")
        throw std::invalid_argument("read_snapshot: bad magic");
    if (!(is >> d) || d < 2 || d > 10)
        throw std::invalid_argument("read_snapshot: bad dimension");
    std::vector<std::int32_t> dims(static_cast<std::size_t>(d));
    for (auto& e : dims)
        if (!(is >> e) || e < 1)
            throw std::invalid_argument("read_snapshot: bad extent");
    is.ignore(1); // the newline after the header
    TorusGrid g(dims);
    std::string buf(static_cast<std::size_t>(g.size()), '\0');
    is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (is.gcount() != static_cast<std::streamsize>(buf.size()))
        throw std::invalid_argument("read_snapshot: truncated body");
    for (SiteIndex i = 0, n = g.size(); i < n; ++i) {
        const char ch = buf[static_cast<std::size_t>(i)];
        if (ch == '.') continue;
        if (d == 2) {
            if (ch == 'E') g.set(i, kEast);
            else if (ch == 'N') g.set(i, kNorth);
            else throw std::invalid_argument("read_snapshot: bad cell byte");
        } else {
            if (ch < '0' || ch >= '0' + d)
                throw std::invalid_argument("read_snapshot: bad cell byte");
            g.set(i, SiteState::car(ch - '0'));
        }
    }
    return g;
}

} // namespace bml
